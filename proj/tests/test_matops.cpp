#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "lrmc/errors.hpp"
#include "lrmc/matops.hpp"
#include "lrmc/rng.hpp"
#include "test_support.hpp"

using namespace lrmc;
using namespace lrmc::test;

namespace {

DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  DenseMatrix M(static_cast<Index>(rows.size()),
                static_cast<Index>(rows.begin()->size()));
  Index i = 0;
  for (const auto& row : rows) {
    Index j = 0;
    for (double v : row) M(i, j++) = v;
    ++i;
  }
  return M;
}

}  // namespace

TEST_CASE("index set sorts, deduplicates, and validates") {
  IndexSet s({{1, 0}, {0, 1}, {0, 1}, {0, 0}}, 2, 2);
  REQUIRE(s.size() == 3);
  CHECK(s[0] == Coord{0, 0});
  CHECK(s[1] == Coord{0, 1});
  CHECK(s[2] == Coord{1, 0});
  CHECK(s.contains({0, 1}));
  CHECK_FALSE(s.contains({1, 1}));
  CHECK_THROWS_AS(IndexSet({{2, 0}}, 2, 2), InvalidShapeError);

  // Column order walks the same entries in (col, row) order.
  const auto& corder = s.column_order();
  REQUIRE(corder.size() == 3);
  CHECK(s[corder[0]] == Coord{0, 0});
  CHECK(s[corder[1]] == Coord{1, 0});
  CHECK(s[corder[2]] == Coord{0, 1});
}

TEST_CASE("masked matrix densification and nonzero extraction") {
  RandomStream rng(1, 1);
  MaskedMatrix M = random_masked(6, 5, 0.5, rng);
  DenseMatrix D = M.to_dense();
  const SparseEstimate nz = SparseEstimate::from_masked(M);
  CHECK(nz.support.size() == M.nonzero_count());
  CHECK(max_abs_diff(nz.to_dense(), D) == 0.0);
}

TEST_CASE("soft threshold hand values") {
  const DenseMatrix M = from_rows({{3, -1}, {0.5, -4}});
  const DenseMatrix out = soft_threshold(M, 1.0);
  CHECK(out(0, 0) == 2.0);
  CHECK(out(0, 1) == 0.0);
  CHECK(out(1, 0) == 0.0);
  CHECK(out(1, 1) == -3.0);
}

TEST_CASE("soft threshold identity and annihilation cases") {
  RandomStream rng(2, 1);
  const DenseMatrix M = random_dense(7, 5, rng);
  CHECK(max_abs_diff(soft_threshold(M, 0.0), M) == 0.0);
  CHECK(soft_threshold(M, inf_norm(M)).cwiseAbs().maxCoeff() == 0.0);
  // The kink maps to exactly zero.
  const DenseMatrix K = from_rows({{1.5, -1.5}});
  const DenseMatrix out = soft_threshold(K, 1.5);
  CHECK(out(0, 0) == 0.0);
  CHECK(out(0, 1) == 0.0);
}

TEST_CASE("soft threshold rejects bad thresholds") {
  const DenseMatrix M = from_rows({{1.0}});
  CHECK_THROWS_AS(soft_threshold(M, -1.0), InvalidParameterError);
  CHECK_THROWS_AS(soft_threshold(M, std::nan("")), InvalidParameterError);
}

TEST_CASE("soft threshold is nonexpansive and positively homogeneous") {
  RandomStream rng(3, 1);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n1 = 1 + static_cast<Index>(rng.below(8));
    const Index n2 = 1 + static_cast<Index>(rng.below(8));
    const DenseMatrix A = random_dense(n1, n2, rng);
    const DenseMatrix B = random_dense(n1, n2, rng);
    const double zeta = rng.uniform(0.0, 2.0);
    CHECK(fro_norm(DenseMatrix(soft_threshold(A, zeta) -
                               soft_threshold(B, zeta))) <=
          fro_norm(DenseMatrix(A - B)) * (1.0 + 1e-12) + 1e-15);

    const double c = rng.uniform(0.1, 3.0);
    const DenseMatrix lhs = soft_threshold(DenseMatrix(c * A), c * zeta);
    const DenseMatrix rhs = c * soft_threshold(A, zeta);
    CHECK(max_abs_diff(lhs, rhs) <= 1e-12 * (1.0 + inf_norm(rhs)));
  }
}

TEST_CASE("soft threshold shrinkage identity per entry") {
  RandomStream rng(4, 1);
  const DenseMatrix M = random_dense(9, 9, rng);
  const double zeta = 0.7;
  const DenseMatrix out = soft_threshold(M, zeta);
  for (Index i = 0; i < M.rows(); ++i)
    for (Index j = 0; j < M.cols(); ++j) {
      CHECK(std::abs(out(i, j)) ==
            doctest::Approx(std::max(0.0, std::abs(M(i, j)) - zeta))
                .epsilon(1e-14));
      if (out(i, j) != 0.0)
        CHECK(std::signbit(out(i, j)) == std::signbit(M(i, j)));
    }
}

TEST_CASE("masked soft threshold keeps support and matches dense path") {
  RandomStream rng(5, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const MaskedMatrix M = random_masked(10, 8, 0.4, rng);
    const double zeta = rng.uniform(0.0, 1.5);
    const MaskedMatrix out = soft_threshold(M, zeta);
    CHECK(out.support_ptr() == M.support_ptr());
    CHECK(max_abs_diff(out.to_dense(),
                       soft_threshold_oracle(M.to_dense(), zeta)) == 0.0);
  }
}

TEST_CASE("ceil_count snaps float fuzz") {
  CHECK(ceil_count(1.0 / 3.0, 3) == 1);
  CHECK(ceil_count(0.1, 30) == 3);
  CHECK(ceil_count(0.3, 10) == 3);
  CHECK(ceil_count(0.0, 10) == 0);
  CHECK(ceil_count(1.0, 17) == 17);
  CHECK(ceil_count(0.25, 10) == 3);  // genuine ceil of 2.5
}

TEST_CASE("sparsify hand example keeps the dominant diagonal") {
  const DenseMatrix M = from_rows({{5, 1, 2}, {1, 6, 1}, {2, 1, 7}});
  const DenseMatrix out = sparsify_top_fraction(M, 1.0 / 3.0);
  const DenseMatrix want = from_rows({{5, 0, 0}, {0, 6, 0}, {0, 0, 7}});
  CHECK(max_abs_diff(out, want) == 0.0);
}

TEST_CASE("sparsify degenerate fractions") {
  RandomStream rng(6, 1);
  const DenseMatrix M = random_dense(6, 9, rng);
  CHECK(max_abs_diff(sparsify_top_fraction(M, 1.0), M) == 0.0);
  CHECK(sparsify_top_fraction(M, 0.0).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(sparsify_top_fraction(M, -0.1), InvalidParameterError);
  CHECK_THROWS_AS(sparsify_top_fraction(M, 1.1), InvalidParameterError);
}

TEST_CASE("sparsify matches the rank-counting oracle") {
  RandomStream rng(7, 1);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n1 = 2 + static_cast<Index>(rng.below(12));
    const Index n2 = 2 + static_cast<Index>(rng.below(12));
    const DenseMatrix M = random_dense(n1, n2, rng);
    const double a = rng.uniform(0.0, 1.0);
    CHECK(max_abs_diff(sparsify_top_fraction(M, a), sparsify_oracle(M, a)) ==
          0.0);
  }
}

TEST_CASE("masked sparsify counts off-support zeros toward the cutoff") {
  RandomStream rng(8, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const MaskedMatrix M = random_masked(9, 11, 0.35, rng);
    const double a = rng.uniform(0.0, 1.0);
    const MaskedMatrix out = sparsify_top_fraction(M, a);
    CHECK(max_abs_diff(out.to_dense(), sparsify_oracle(M.to_dense(), a)) ==
          0.0);
  }
}

TEST_CASE("sparsify keeps at most the allowed count per row and column") {
  RandomStream rng(9, 1);
  for (int trial = 0; trial < 30; ++trial) {
    const Index n1 = 3 + static_cast<Index>(rng.below(10));
    const Index n2 = 3 + static_cast<Index>(rng.below(10));
    const DenseMatrix M = random_dense(n1, n2, rng);
    const double a = rng.uniform(0.05, 0.9);
    const DenseMatrix out = sparsify_top_fraction(M, a);
    // Generic Gaussian entries: ties have probability zero, so the caps are
    // exact here.
    for (Index i = 0; i < n1; ++i) {
      Index nnz = 0;
      for (Index j = 0; j < n2; ++j)
        if (out(i, j) != 0.0) {
          ++nnz;
          CHECK(out(i, j) == M(i, j));
        }
      CHECK(nnz <= ceil_count(a, n2));
    }
    for (Index j = 0; j < n2; ++j) {
      Index nnz = 0;
      for (Index i = 0; i < n1; ++i)
        if (out(i, j) != 0.0) ++nnz;
      CHECK(nnz <= ceil_count(a, n1));
    }
  }
}

TEST_CASE("truncated svd recovers exact low-rank inputs") {
  RandomStream rng(10, 1);
  const DenseMatrix u = random_dense(8, 1, rng);
  const DenseMatrix v = random_dense(6, 1, rng);
  const DenseMatrix M = u * v.transpose();
  const SVDTriple t = truncated_svd(M, 1);
  CHECK(t.sigma[0] ==
        doctest::Approx(u.norm() * v.norm()).epsilon(1e-10));
  const DenseMatrix recon = t.U * t.sigma.asDiagonal() * t.V.transpose();
  CHECK(fro_norm(DenseMatrix(recon - M)) <= 1e-10 * fro_norm(M));

  const DenseMatrix I3 = DenseMatrix::Identity(3, 3);
  const SVDTriple ti = truncated_svd(I3, 2);
  CHECK(ti.sigma[0] == doctest::Approx(1.0));
  CHECK(ti.sigma[1] == doctest::Approx(1.0));
}

TEST_CASE("truncated svd matches the full-decomposition oracle") {
  RandomStream rng(11, 1);
  const DenseMatrix M = random_dense(20, 15, rng);
  const SVDTriple t = truncated_svd(M, 5);
  const FullSvd ref = full_svd_oracle(M);
  for (int i = 0; i < 5; ++i)
    CHECK(t.sigma[i] == doctest::Approx(ref.sigma[i]).epsilon(1e-8));
  // Orthonormal factors, nonincreasing spectrum.
  CHECK((t.U.transpose() * t.U - DenseMatrix::Identity(5, 5))
            .cwiseAbs()
            .maxCoeff() <= 1e-8);
  CHECK((t.V.transpose() * t.V - DenseMatrix::Identity(5, 5))
            .cwiseAbs()
            .maxCoeff() <= 1e-8);
  for (int i = 1; i < 5; ++i) CHECK(t.sigma[i] <= t.sigma[i - 1] + 1e-15);
}

TEST_CASE("truncated svd randomized path agrees with the oracle") {
  // Both dimensions above the exact-path cutoff force subspace iteration.
  RandomStream rng(12, 1);
  const DenseMatrix A = random_dense(420, 4, rng);
  const DenseMatrix B = random_dense(410, 4, rng);
  DenseMatrix M = A * B.transpose();
  M += 1e-3 * random_dense(420, 410, rng);
  const SVDTriple t = truncated_svd(M, 4);
  const FullSvd ref = full_svd_oracle(M);
  for (int i = 0; i < 4; ++i)
    CHECK(t.sigma[i] == doctest::Approx(ref.sigma[i]).epsilon(1e-6));
  const DenseMatrix recon = t.U * t.sigma.asDiagonal() * t.V.transpose();
  const Eigen::MatrixXd ref_recon = ref.U.leftCols(4) *
                                    ref.sigma.head(4).asDiagonal() *
                                    ref.V.leftCols(4).transpose();
  CHECK(fro_norm(DenseMatrix(recon - DenseMatrix(ref_recon))) <=
        1e-6 * fro_norm(M));
}

TEST_CASE("truncated svd validates the rank and accepts masked input") {
  RandomStream rng(13, 1);
  const DenseMatrix M = random_dense(6, 4, rng);
  CHECK_THROWS_AS(truncated_svd(M, 5), InvalidRankError);
  CHECK_THROWS_AS(truncated_svd(M, 0), InvalidRankError);

  const MaskedMatrix masked = random_masked(12, 9, 0.6, rng);
  const SVDTriple t = truncated_svd(masked, 3);
  const FullSvd ref = full_svd_oracle(masked.to_dense());
  for (int i = 0; i < 3; ++i)
    CHECK(t.sigma[i] == doctest::Approx(ref.sigma[i]).epsilon(1e-8));
}

TEST_CASE("masked residual equals the dense computation") {
  RandomStream rng(14, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n1 = 3 + static_cast<Index>(rng.below(10));
    const Index n2 = 3 + static_cast<Index>(rng.below(10));
    const Index r = 1 + static_cast<Index>(rng.below(3));
    const DenseMatrix L = random_dense(n1, r, rng);
    const DenseMatrix R = random_dense(n2, r, rng);
    const MaskedMatrix Y = random_masked(n1, n2, 0.5, rng);
    // S supported on a subset of Omega.
    MaskedMatrix Sfull = MaskedMatrix::zeros(Y.support_ptr());
    for (Index e = 0; e < Sfull.values().size(); ++e)
      if (rng.next_double() < 0.3) Sfull.values()[e] = rng.normal();
    const SparseEstimate S = SparseEstimate::from_masked(Sfull);

    const MaskedMatrix W = masked_residual(L, R, S, Y);
    DenseMatrix dense = L * R.transpose() + S.to_dense() - Y.to_dense();
    for (Index i = 0; i < n1; ++i)
      for (Index j = 0; j < n2; ++j)
        if (!Y.support().contains({static_cast<std::uint32_t>(i),
                                   static_cast<std::uint32_t>(j)}))
          dense(i, j) = 0.0;
    CHECK(max_abs_diff(W.to_dense(), dense) <= 1e-12);
  }
}

TEST_CASE("masked residual rejects sparse support outside the observations") {
  RandomStream rng(15, 1);
  const DenseMatrix L = random_dense(4, 2, rng);
  const DenseMatrix R = random_dense(4, 2, rng);
  auto support = std::make_shared<const IndexSet>(
      IndexSet({{0, 0}, {1, 1}, {2, 2}}, 4, 4));
  const MaskedMatrix Y(support, Vector::Ones(3));
  SparseEstimate S;
  S.support = IndexSet({{3, 3}}, 4, 4);
  S.values = Vector::Ones(1);
  CHECK_THROWS_AS(masked_residual(L, R, S, Y), InvalidShapeError);
  const DenseMatrix Lbad = random_dense(5, 2, rng);
  CHECK_THROWS_AS(
      masked_residual(Lbad, R, SparseEstimate::empty(4, 4), Y),
      InvalidShapeError);
}

TEST_CASE("scaled gradient step hand example") {
  // r = 1, full residual W = I2, eta = 1, p = 1:
  //   L' = L - W R (R^T R)^-1 = [1 - 0.5, 2 - 0.5]
  //   R' = R - W^T L (L^T L)^-1 = [1 - 1/5, 1 - 2/5]
  DenseMatrix L(2, 1), R(2, 1);
  L << 1, 2;
  R << 1, 1;
  auto support = std::make_shared<const IndexSet>(IndexSet::all(2, 2));
  Vector w(4);
  w << 1, 0, 0, 1;
  const MaskedMatrix W(support, w);
  const auto [Ln, Rn] = scaled_grad_step(L, R, W, 1.0, 1.0);
  CHECK(Ln(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(Ln(1, 0) == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(Rn(0, 0) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(Rn(1, 0) == doctest::Approx(0.6).epsilon(1e-14));
}

TEST_CASE("scaled gradient step is a no-op on zero residual and linear in eta") {
  RandomStream rng(16, 1);
  const DenseMatrix L = random_dense(7, 2, rng);
  const DenseMatrix R = random_dense(6, 2, rng);
  auto support = random_support(7, 6, 0.6, rng);
  const MaskedMatrix zero = MaskedMatrix::zeros(support);
  const auto [Lz, Rz] = scaled_grad_step(L, R, zero, 0.7, 0.9);
  CHECK(max_abs_diff(Lz, L) == 0.0);
  CHECK(max_abs_diff(Rz, R) == 0.0);

  MaskedMatrix W = MaskedMatrix::zeros(support);
  for (Index e = 0; e < W.values().size(); ++e) W.values()[e] = rng.normal();
  const auto [L1, R1] = scaled_grad_step(L, R, W, 0.3, 1.0);
  const auto [L2, R2] = scaled_grad_step(L, R, W, 0.6, 1.0);
  // Doubling eta doubles the displacement.
  CHECK(max_abs_diff(DenseMatrix(L2 - L), DenseMatrix(2.0 * (L1 - L))) <=
        1e-13 * (1.0 + inf_norm(L)));
  CHECK(max_abs_diff(DenseMatrix(R2 - R), DenseMatrix(2.0 * (R1 - R))) <=
        1e-13 * (1.0 + inf_norm(R)));
}

TEST_CASE("scaled gradient step names the singular side") {
  RandomStream rng(17, 1);
  DenseMatrix L(5, 2);
  const DenseMatrix col = random_dense(5, 1, rng);
  L << col, col;  // rank-1 gram on the left factor
  const DenseMatrix R = random_dense(4, 2, rng);
  auto support = random_support(5, 4, 0.8, rng);
  MaskedMatrix W = MaskedMatrix::zeros(support);
  for (Index e = 0; e < W.values().size(); ++e) W.values()[e] = rng.normal();
  try {
    scaled_grad_step(L, R, W, 0.5, 1.0);
    FAIL("expected SingularFactorError");
  } catch (const SingularFactorError& e) {
    CHECK(e.side() == "L");
  }
}

TEST_CASE("norms on hand inputs") {
  DenseMatrix D = DenseMatrix::Zero(2, 2);
  D(0, 0) = 3.0;
  D(1, 1) = 1.0;
  CHECK(spectral_norm_est(D) == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(fro_norm(D) == doctest::Approx(std::sqrt(10.0)).epsilon(1e-14));
  CHECK(inf_norm(D) == 3.0);

  const DenseMatrix Z = DenseMatrix::Zero(4, 3);
  CHECK(spectral_norm_est(Z) == 0.0);
  CHECK(fro_norm(Z) == 0.0);
  CHECK(inf_norm(Z) == 0.0);
}

TEST_CASE("power iteration matches the full decomposition oracle") {
  RandomStream rng(18, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const DenseMatrix M = random_dense(10, 10, rng);
    const double est = spectral_norm_est(M, 1e-8, 5000);
    const double ref = full_svd_oracle(M).sigma[0];
    CHECK(est == doctest::Approx(ref).epsilon(1e-5));
  }
}

TEST_CASE("sparse spectral norm bound holds for row/column-sparse matrices") {
  // For S with at most alpha*n nonzeros per row and column,
  // ||S||_2 <= alpha * n * ||S||_inf.
  RandomStream rng(19, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 30;
    const Index per_line = 1 + static_cast<Index>(rng.below(5));
    DenseMatrix S = DenseMatrix::Zero(n, n);
    // A banded placement keeps both row and column counts at per_line.
    for (Index i = 0; i < n; ++i)
      for (Index d = 0; d < per_line; ++d)
        S(i, (i + d) % n) = rng.normal();
    const double alpha_n = static_cast<double>(per_line);
    const double bound = alpha_n * inf_norm(S);
    CHECK(spectral_norm_est(S) <= bound * (1.0 + 1e-5) + 1e-12);
  }
}

TEST_CASE("gram-product norms agree with streamed exact differences") {
  RandomStream rng(20, 1);
  const DenseMatrix L1 = random_dense(15, 3, rng);
  const DenseMatrix R1 = random_dense(12, 3, rng);
  const DenseMatrix L2 = random_dense(15, 3, rng);
  const DenseMatrix R2 = random_dense(12, 3, rng);
  const DenseMatrix X1 = L1 * R1.transpose();
  const DenseMatrix X2 = L2 * R2.transpose();
  CHECK(fro_norm_product(L1, R1) ==
        doctest::Approx(fro_norm(X1)).epsilon(1e-12));
  CHECK(fro_diff_product_gram(L1, R1, L2, R2) ==
        doctest::Approx(fro_norm(DenseMatrix(X1 - X2))).epsilon(1e-10));
  CHECK(fro_diff_product_exact(L1, R1, L2, R2) ==
        doctest::Approx(fro_norm(DenseMatrix(X1 - X2))).epsilon(1e-12));
  CHECK(inf_diff_product_exact(L1, R1, L2, R2) ==
        doctest::Approx(inf_norm(DenseMatrix(X1 - X2))).epsilon(1e-12));
}

TEST_CASE("product_on_support matches the dense product") {
  RandomStream rng(21, 1);
  const DenseMatrix L = random_dense(9, 4, rng);
  const DenseMatrix R = random_dense(7, 4, rng);
  auto support = random_support(9, 7, 0.5, rng);
  Vector out;
  product_on_support(L, R, *support, out);
  const DenseMatrix X = L * R.transpose();
  for (std::size_t e = 0; e < support->size(); ++e) {
    const Coord c = (*support)[e];
    CHECK(out[static_cast<Index>(e)] ==
          doctest::Approx(X(c.row, c.col)).epsilon(1e-13));
  }
}

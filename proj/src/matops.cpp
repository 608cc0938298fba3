#include "lrmc/matops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "lrmc/errors.hpp"
#include "lrmc/rng.hpp"

namespace lrmc {

namespace {

constexpr double kGramConditionCap = 1e12;
constexpr Index kExactSvdMaxDim = 400;
constexpr int kSvdOversampling = 8;
constexpr int kSvdPowerIters = 8;
constexpr int kSvdExtraIterCap = 100;

void check_threshold(double zeta) {
  if (!(zeta >= 0.0) || !std::isfinite(zeta))
    throw InvalidParameterError("soft_threshold: zeta must be finite and >= 0");
}

void check_fraction(double alpha_tilde) {
  if (!(alpha_tilde >= 0.0 && alpha_tilde <= 1.0))
    throw InvalidParameterError(
        "sparsify_top_fraction: alpha_tilde must lie in [0, 1]");
}

inline double soft_one(double m, double zeta) {
  const double mag = std::abs(m) - zeta;
  if (mag <= 0.0) return 0.0;
  return m > 0.0 ? mag : -mag;
}

/// t-th largest magnitude of `buf` (t >= 1, t <= buf size), via partial
/// sort. The partial sort is the cost profile the sparsification operator
/// is known for: it grows with the kept fraction.
double kth_largest_magnitude(std::vector<double>& buf, Index t) {
  std::partial_sort(buf.begin(), buf.begin() + t, buf.end(),
                    std::greater<double>());
  return buf[static_cast<std::size_t>(t - 1)];
}

DenseMatrix gaussian_matrix(Index rows, Index cols, RandomStream& rng) {
  DenseMatrix G(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) G(i, j) = rng.normal();
  return G;
}

DenseMatrix thin_q(const DenseMatrix& M) {
  Eigen::HouseholderQR<DenseMatrix> qr(M);
  DenseMatrix Q = qr.householderQ() * DenseMatrix::Identity(M.rows(), M.cols());
  return Q;
}

}  // namespace

double product_entry(const DenseMatrix& A, Index i, const DenseMatrix& B,
                     Index j) {
  const double* a = A.data() + i * A.cols();
  const double* b = B.data() + j * B.cols();
  const Index r = A.cols();
  double acc = 0.0;
  for (Index k = 0; k < r; ++k) acc += a[k] * b[k];
  return acc;
}

void product_on_support(const DenseMatrix& L, const DenseMatrix& R,
                        const IndexSet& support, Vector& out) {
  if (L.cols() != R.cols())
    throw InvalidShapeError("product_on_support: factor rank mismatch");
  if (L.rows() != support.rows() || R.rows() != support.cols())
    throw InvalidShapeError("product_on_support: factor/support shape mismatch");
  const auto& entries = support.entries();
  out.resize(static_cast<Index>(entries.size()));
  for (std::size_t e = 0; e < entries.size(); ++e)
    out[static_cast<Index>(e)] =
        product_entry(L, entries[e].row, R, entries[e].col);
}

DenseMatrix soft_threshold(const DenseMatrix& M, double zeta) {
  check_threshold(zeta);
  DenseMatrix out(M.rows(), M.cols());
  const double* src = M.data();
  double* dst = out.data();
  const Index n = M.size();
  for (Index i = 0; i < n; ++i) dst[i] = soft_one(src[i], zeta);
  return out;
}

MaskedMatrix soft_threshold(const MaskedMatrix& M, double zeta) {
  check_threshold(zeta);
  Vector vals = M.values();
  soft_threshold_values(vals, zeta);
  return MaskedMatrix(M.support_ptr(), std::move(vals));
}

void soft_threshold_values(Vector& values, double zeta) {
  check_threshold(zeta);
  for (Index i = 0; i < values.size(); ++i)
    values[i] = soft_one(values[i], zeta);
}

Index ceil_count(double fraction, Index n) {
  const double x = fraction * static_cast<double>(n);
  const double nearest = std::round(x);
  // Snap to the nearest integer when the product is within float fuzz of
  // it, so ceil does not overshoot (0.1 * 30 = 3.0000000000000004).
  if (std::abs(x - nearest) <=
      8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, x))
    return static_cast<Index>(nearest);
  return static_cast<Index>(std::ceil(x));
}

DenseMatrix sparsify_top_fraction(const DenseMatrix& M, double alpha_tilde) {
  check_fraction(alpha_tilde);
  const Index n1 = M.rows(), n2 = M.cols();
  const Index row_keep = ceil_count(alpha_tilde, n2);
  const Index col_keep = ceil_count(alpha_tilde, n1);
  DenseMatrix out = DenseMatrix::Zero(n1, n2);
  if (row_keep == 0 || col_keep == 0) return out;

  std::vector<double> row_thresh(static_cast<std::size_t>(n1));
  std::vector<double> col_thresh(static_cast<std::size_t>(n2));
  std::vector<double> buf;
  for (Index i = 0; i < n1; ++i) {
    buf.assign(M.data() + i * n2, M.data() + (i + 1) * n2);
    for (double& v : buf) v = std::abs(v);
    row_thresh[static_cast<std::size_t>(i)] =
        kth_largest_magnitude(buf, row_keep);
  }
  for (Index j = 0; j < n2; ++j) {
    buf.resize(static_cast<std::size_t>(n1));
    for (Index i = 0; i < n1; ++i)
      buf[static_cast<std::size_t>(i)] = std::abs(M(i, j));
    col_thresh[static_cast<std::size_t>(j)] =
        kth_largest_magnitude(buf, col_keep);
  }
  for (Index i = 0; i < n1; ++i)
    for (Index j = 0; j < n2; ++j) {
      const double v = M(i, j);
      if (std::abs(v) >= row_thresh[static_cast<std::size_t>(i)] &&
          std::abs(v) >= col_thresh[static_cast<std::size_t>(j)])
        out(i, j) = v;
    }
  return out;
}

MaskedMatrix sparsify_top_fraction(const MaskedMatrix& M, double alpha_tilde) {
  check_fraction(alpha_tilde);
  const Index n1 = M.rows(), n2 = M.cols();
  const Index row_keep = ceil_count(alpha_tilde, n2);
  const Index col_keep = ceil_count(alpha_tilde, n1);
  MaskedMatrix out = MaskedMatrix::zeros(M.support_ptr());
  if (row_keep == 0 || col_keep == 0) return out;

  const auto& entries = M.support().entries();
  const Vector& vals = M.values();

  // Off-support positions count as zeros: when a row holds fewer support
  // entries than the keep count, its cutoff magnitude is 0.
  std::vector<double> row_thresh(static_cast<std::size_t>(n1), 0.0);
  std::vector<double> col_thresh(static_cast<std::size_t>(n2), 0.0);
  std::vector<double> buf;

  std::size_t e = 0;
  while (e < entries.size()) {
    const std::uint32_t i = entries[e].row;
    buf.clear();
    while (e < entries.size() && entries[e].row == i) {
      buf.push_back(std::abs(vals[static_cast<Index>(e)]));
      ++e;
    }
    if (static_cast<Index>(buf.size()) >= row_keep)
      row_thresh[i] = kth_largest_magnitude(buf, row_keep);
  }

  const auto& corder = M.support().column_order();
  std::size_t c = 0;
  while (c < corder.size()) {
    const std::uint32_t j = entries[corder[c]].col;
    buf.clear();
    while (c < corder.size() && entries[corder[c]].col == j) {
      buf.push_back(std::abs(vals[static_cast<Index>(corder[c])]));
      ++c;
    }
    if (static_cast<Index>(buf.size()) >= col_keep)
      col_thresh[j] = kth_largest_magnitude(buf, col_keep);
  }

  for (std::size_t k = 0; k < entries.size(); ++k) {
    const double v = vals[static_cast<Index>(k)];
    if (std::abs(v) >= row_thresh[entries[k].row] &&
        std::abs(v) >= col_thresh[entries[k].col])
      out.values()[static_cast<Index>(k)] = v;
  }
  return out;
}

namespace {

SVDTriple exact_truncated_svd(const DenseMatrix& M, int rank) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU |
                                            Eigen::ComputeThinV);
  SVDTriple out;
  out.U = svd.matrixU().leftCols(rank);
  out.sigma = svd.singularValues().head(rank);
  out.V = svd.matrixV().leftCols(rank);
  return out;
}

/// Matrix-free interface for the randomized path.
struct LinearOp {
  Index rows, cols;
  // Y = A * X  and  Y = A^T * X
  virtual DenseMatrix apply(const DenseMatrix& X) const = 0;
  virtual DenseMatrix apply_t(const DenseMatrix& X) const = 0;
  virtual ~LinearOp() = default;
};

struct DenseOp final : LinearOp {
  const DenseMatrix& M;
  explicit DenseOp(const DenseMatrix& m) : M(m) { rows = m.rows(); cols = m.cols(); }
  DenseMatrix apply(const DenseMatrix& X) const override { return M * X; }
  DenseMatrix apply_t(const DenseMatrix& X) const override {
    return M.transpose() * X;
  }
};

struct MaskedOp final : LinearOp {
  const MaskedMatrix& M;
  explicit MaskedOp(const MaskedMatrix& m) : M(m) { rows = m.rows(); cols = m.cols(); }
  DenseMatrix apply(const DenseMatrix& X) const override {
    DenseMatrix out = DenseMatrix::Zero(rows, X.cols());
    const auto& entries = M.support().entries();
    const Vector& vals = M.values();
    const Index k = X.cols();
    for (std::size_t e = 0; e < entries.size(); ++e) {
      const double v = vals[static_cast<Index>(e)];
      const double* src = X.data() + entries[e].col * k;
      double* dst = out.data() + entries[e].row * k;
      for (Index c = 0; c < k; ++c) dst[c] += v * src[c];
    }
    return out;
  }
  DenseMatrix apply_t(const DenseMatrix& X) const override {
    DenseMatrix out = DenseMatrix::Zero(cols, X.cols());
    const auto& entries = M.support().entries();
    const Vector& vals = M.values();
    const Index k = X.cols();
    for (std::size_t e = 0; e < entries.size(); ++e) {
      const double v = vals[static_cast<Index>(e)];
      const double* src = X.data() + entries[e].row * k;
      double* dst = out.data() + entries[e].col * k;
      for (Index c = 0; c < k; ++c) dst[c] += v * src[c];
    }
    return out;
  }
};

SVDTriple randomized_truncated_svd(const LinearOp& A, int rank,
                                   std::uint64_t seed) {
  const Index sketch = std::min<Index>(A.cols, rank + kSvdOversampling);
  RandomStream rng(seed, /*stream=*/0x51d);
  DenseMatrix Q = thin_q(A.apply(gaussian_matrix(A.cols, sketch, rng)));

  Vector prev_sigma;
  for (int iter = 0; iter < kSvdPowerIters + kSvdExtraIterCap; ++iter) {
    Q = thin_q(A.apply(thin_q(A.apply_t(Q))));
    if (iter >= kSvdPowerIters - 1) {
      // Spectrum stability check on the sketch.
      DenseMatrix B = A.apply_t(Q).transpose();  // sketch x cols
      Eigen::BDCSVD<Eigen::MatrixXd> svd(B, Eigen::ComputeThinU |
                                                Eigen::ComputeThinV);
      Vector sigma = svd.singularValues().head(rank);
      if (prev_sigma.size() == sigma.size()) {
        const double drift = (sigma - prev_sigma).cwiseAbs().maxCoeff();
        if (drift <= 1e-6 * std::max(sigma[0], 1e-300)) {
          SVDTriple out;
          out.U = Q * svd.matrixU().leftCols(rank);
          out.sigma = std::move(sigma);
          out.V = svd.matrixV().leftCols(rank);
          return out;
        }
      }
      prev_sigma = std::move(sigma);
    }
  }
  throw NumericalFailureError(
      "truncated_svd: randomized subspace iteration did not stabilize");
}

SVDTriple truncated_svd_impl(const LinearOp& A, const DenseMatrix* dense,
                             int rank, std::uint64_t seed) {
  if (rank <= 0 || rank > std::min(A.rows, A.cols))
    throw InvalidRankError("truncated_svd: rank must be in [1, min(n1, n2)]");
  if (std::min(A.rows, A.cols) <= kExactSvdMaxDim) {
    if (dense) return exact_truncated_svd(*dense, rank);
    return exact_truncated_svd(
        static_cast<const MaskedOp&>(A).M.to_dense(), rank);
  }
  return randomized_truncated_svd(A, rank, seed);
}

}  // namespace

SVDTriple truncated_svd(const DenseMatrix& M, int rank, std::uint64_t seed) {
  DenseOp op(M);
  return truncated_svd_impl(op, &M, rank, seed);
}

SVDTriple truncated_svd(const MaskedMatrix& M, int rank, std::uint64_t seed) {
  MaskedOp op(M);
  return truncated_svd_impl(op, nullptr, rank, seed);
}

MaskedMatrix masked_residual(const DenseMatrix& L, const DenseMatrix& R,
                             const SparseEstimate& S, const MaskedMatrix& Y) {
  if (L.cols() != R.cols())
    throw InvalidShapeError("masked_residual: factor rank mismatch");
  if (L.rows() != Y.rows() || R.rows() != Y.cols() || S.rows() != Y.rows() ||
      S.cols() != Y.cols())
    throw InvalidShapeError("masked_residual: shape mismatch");

  Vector out;
  product_on_support(L, R, Y.support(), out);
  out -= Y.values();

  // Merge S into the Omega-aligned residual; both entry lists are sorted
  // row-major.
  const auto& omega = Y.support().entries();
  const auto& sent = S.support.entries();
  std::size_t oe = 0;
  for (std::size_t se = 0; se < sent.size(); ++se) {
    while (oe < omega.size() && omega[oe] < sent[se]) ++oe;
    if (oe == omega.size() || !(omega[oe] == sent[se]))
      throw InvalidShapeError(
          "masked_residual: support(S) not contained in support(Y)");
    out[static_cast<Index>(oe)] += S.values[static_cast<Index>(se)];
  }
  return MaskedMatrix(Y.support_ptr(), std::move(out));
}

namespace {

/// Cholesky solve X <- X * G^-1 after a condition estimate on the r x r
/// gram matrix G; `side` names the factor whose gram failed.
void apply_gram_inverse(DenseMatrix& X, const Eigen::MatrixXd& gram,
                        const char* side) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  if (es.info() != Eigen::Success)
    throw SingularFactorError(side, std::string("scaled_grad_step: gram ") +
                                        side + " eigensolve failed");
  const double lmin = es.eigenvalues().minCoeff();
  const double lmax = es.eigenvalues().maxCoeff();
  if (!(lmin > 0.0) || lmax / lmin > kGramConditionCap)
    throw SingularFactorError(
        side, std::string("scaled_grad_step: gram of factor ") + side +
                  " is singular or ill-conditioned");
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  // X G^-1 = (G^-1 X^T)^T, G symmetric.
  X = llt.solve(X.transpose()).transpose();
}

}  // namespace

std::pair<DenseMatrix, DenseMatrix> scaled_grad_step(const DenseMatrix& L,
                                                     const DenseMatrix& R,
                                                     const MaskedMatrix& W,
                                                     double eta, double p) {
  if (!(eta > 0.0) || !std::isfinite(eta))
    throw InvalidParameterError("scaled_grad_step: eta must be finite and > 0");
  if (!(p > 0.0 && p <= 1.0))
    throw InvalidParameterError("scaled_grad_step: p must lie in (0, 1]");
  if (L.cols() != R.cols())
    throw InvalidShapeError("scaled_grad_step: factor rank mismatch");
  if (L.rows() != W.rows() || R.rows() != W.cols())
    throw InvalidShapeError("scaled_grad_step: factor/residual shape mismatch");

  const Eigen::MatrixXd gramL = L.transpose() * L;
  const Eigen::MatrixXd gramR = R.transpose() * R;

  const Index r = L.cols();
  const auto& entries = W.support().entries();
  const Vector& vals = W.values();
  DenseMatrix WR = DenseMatrix::Zero(L.rows(), r);
  DenseMatrix WtL = DenseMatrix::Zero(R.rows(), r);
  for (std::size_t e = 0; e < entries.size(); ++e) {
    const double v = vals[static_cast<Index>(e)];
    const double* rrow = R.data() + entries[e].col * r;
    const double* lrow = L.data() + entries[e].row * r;
    double* wr = WR.data() + entries[e].row * r;
    double* wl = WtL.data() + entries[e].col * r;
    for (Index k = 0; k < r; ++k) {
      wr[k] += v * rrow[k];
      wl[k] += v * lrow[k];
    }
  }

  apply_gram_inverse(WR, gramR, "R");
  apply_gram_inverse(WtL, gramL, "L");

  const double step = eta / p;
  DenseMatrix Lnew = L - step * WR;
  DenseMatrix Rnew = R - step * WtL;
  return {std::move(Lnew), std::move(Rnew)};
}

namespace {

template <typename Op>
double power_iteration(const Op& A, Index cols, double rel_tol, int max_iters,
                       std::uint64_t seed) {
  RandomStream rng(seed, /*stream=*/0x9e3);
  DenseMatrix v = gaussian_matrix(cols, 1, rng);
  double vnorm = v.norm();
  if (vnorm == 0.0) return 0.0;
  v /= vnorm;
  double sigma = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    DenseMatrix u = A.apply(v);
    const double unorm = u.norm();
    if (unorm == 0.0) return 0.0;
    DenseMatrix w = A.apply_t(u / unorm);
    const double next = w.norm();
    if (next == 0.0) return unorm;
    v = w / next;
    if (it > 0 && std::abs(next - sigma) <= rel_tol * next) return next;
    sigma = next;
  }
  return sigma;
}

}  // namespace

double spectral_norm_est(const DenseMatrix& M, double rel_tol, int max_iters,
                         std::uint64_t seed) {
  if (M.size() == 0) return 0.0;
  DenseOp op(M);
  return power_iteration(op, M.cols(), rel_tol, max_iters, seed);
}

double spectral_norm_est(const MaskedMatrix& M, double rel_tol, int max_iters,
                         std::uint64_t seed) {
  MaskedOp op(M);
  return power_iteration(op, M.cols(), rel_tol, max_iters, seed);
}

double fro_norm(const DenseMatrix& M) { return M.norm(); }

double fro_norm(const MaskedMatrix& M) { return M.values().norm(); }

double inf_norm(const DenseMatrix& M) {
  return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff();
}

double inf_norm(const MaskedMatrix& M) {
  return M.values().size() == 0 ? 0.0 : M.values().cwiseAbs().maxCoeff();
}

double fro_norm_product(const DenseMatrix& L, const DenseMatrix& R) {
  const Eigen::MatrixXd g = (L.transpose() * L) * (R.transpose() * R);
  return std::sqrt(std::max(0.0, g.trace()));
}

double fro_diff_product_gram(const DenseMatrix& L1, const DenseMatrix& R1,
                             const DenseMatrix& L2, const DenseMatrix& R2) {
  const Eigen::MatrixXd g11 = (L1.transpose() * L1) * (R1.transpose() * R1);
  const Eigen::MatrixXd g22 = (L2.transpose() * L2) * (R2.transpose() * R2);
  const Eigen::MatrixXd g12 = (L1.transpose() * L2) * (R2.transpose() * R1);
  const double sq = g11.trace() + g22.trace() - 2.0 * g12.trace();
  return std::sqrt(std::max(0.0, sq));
}

double fro_diff_product_exact(const DenseMatrix& L1, const DenseMatrix& R1,
                              const DenseMatrix& L2, const DenseMatrix& R2) {
  const Index n1 = L1.rows(), n2 = R1.rows();
  double acc = 0.0;
  for (Index i = 0; i < n1; ++i)
    for (Index j = 0; j < n2; ++j) {
      const double d = product_entry(L1, i, R1, j) - product_entry(L2, i, R2, j);
      acc += d * d;
    }
  return std::sqrt(acc);
}

double inf_diff_product_exact(const DenseMatrix& L1, const DenseMatrix& R1,
                              const DenseMatrix& L2, const DenseMatrix& R2) {
  const Index n1 = L1.rows(), n2 = R1.rows();
  double best = 0.0;
  for (Index i = 0; i < n1; ++i)
    for (Index j = 0; j < n2; ++j) {
      const double d =
          std::abs(product_entry(L1, i, R1, j) - product_entry(L2, i, R2, j));
      if (d > best) best = d;
    }
  return best;
}

}  // namespace lrmc

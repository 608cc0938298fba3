#pragma once

// Shared helpers for the test suites: seeded random inputs and independent
// brute-force oracles. Everything here must stay independent of the library
// code paths it is used to check.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "lrmc/matops.hpp"
#include "lrmc/problems.hpp"
#include "lrmc/rng.hpp"
#include "lrmc/types.hpp"

namespace lrmc::test {

inline DenseMatrix random_dense(Index n1, Index n2, RandomStream& rng,
                                double scale = 1.0) {
  DenseMatrix M(n1, n2);
  for (Index i = 0; i < n1; ++i)
    for (Index j = 0; j < n2; ++j) M(i, j) = scale * rng.normal();
  return M;
}

inline std::shared_ptr<const IndexSet> random_support(Index n1, Index n2,
                                                      double density,
                                                      RandomStream& rng) {
  std::vector<Coord> coords;
  for (Index i = 0; i < n1; ++i)
    for (Index j = 0; j < n2; ++j)
      if (rng.next_double() < density)
        coords.push_back({static_cast<std::uint32_t>(i),
                          static_cast<std::uint32_t>(j)});
  return std::make_shared<const IndexSet>(
      IndexSet::from_sorted_unique(std::move(coords), n1, n2));
}

inline MaskedMatrix random_masked(Index n1, Index n2, double density,
                                  RandomStream& rng, double scale = 1.0) {
  auto support = random_support(n1, n2, density, rng);
  Vector vals(static_cast<Index>(support->size()));
  for (Index i = 0; i < vals.size(); ++i) vals[i] = scale * rng.normal();
  return MaskedMatrix(support, std::move(vals));
}

inline double max_abs_diff(const DenseMatrix& A, const DenseMatrix& B) {
  return (A - B).cwiseAbs().maxCoeff();
}

/// Brute-force soft threshold, written from the entrywise definition.
inline DenseMatrix soft_threshold_oracle(const DenseMatrix& M, double zeta) {
  DenseMatrix out(M.rows(), M.cols());
  for (Index i = 0; i < M.rows(); ++i)
    for (Index j = 0; j < M.cols(); ++j) {
      const double m = M(i, j);
      const double shrunk = std::abs(m) - zeta;
      out(i, j) = shrunk > 0.0 ? (m < 0.0 ? -shrunk : shrunk) : 0.0;
    }
  return out;
}

/// Brute-force top-fraction sparsifier: entry (i,j) is kept iff fewer than
/// ceil(a n2) entries of row i strictly exceed its magnitude AND fewer than
/// ceil(a n1) entries of column j do. Rank counting rather than selection,
/// so ties are handled by construction.
inline DenseMatrix sparsify_oracle(const DenseMatrix& M, double alpha_tilde) {
  const Index n1 = M.rows(), n2 = M.cols();
  const auto keep_row = static_cast<Index>(
      std::ceil(alpha_tilde * static_cast<double>(n2) - 1e-9));
  const auto keep_col = static_cast<Index>(
      std::ceil(alpha_tilde * static_cast<double>(n1) - 1e-9));
  DenseMatrix out = DenseMatrix::Zero(n1, n2);
  if (keep_row <= 0 || keep_col <= 0) return out;
  for (Index i = 0; i < n1; ++i)
    for (Index j = 0; j < n2; ++j) {
      const double mag = std::abs(M(i, j));
      Index row_rank = 0, col_rank = 0;
      for (Index jj = 0; jj < n2; ++jj)
        if (std::abs(M(i, jj)) > mag) ++row_rank;
      for (Index ii = 0; ii < n1; ++ii)
        if (std::abs(M(ii, j)) > mag) ++col_rank;
      if (row_rank < keep_row && col_rank < keep_col) out(i, j) = M(i, j);
    }
  return out;
}

struct FullSvd {
  Eigen::MatrixXd U;
  Eigen::VectorXd sigma;
  Eigen::MatrixXd V;
};

/// Full decomposition via one-sided Jacobi (a different algorithm than the
/// library's BDC/randomized paths).
inline FullSvd full_svd_oracle(const DenseMatrix& M) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

/// Fully observed matrix assembled the same way the generator assembles Y:
/// per-entry factor dot product plus the sparse value.
inline ObservedMatrix observe_product_plus_sparse(const DenseMatrix& L,
                                                  const DenseMatrix& R,
                                                  const SparseEstimate& S) {
  const Index n1 = L.rows(), n2 = R.rows();
  auto support = std::make_shared<const IndexSet>(IndexSet::all(n1, n2));
  Vector vals(static_cast<Index>(support->size()));
  for (std::size_t e = 0; e < support->size(); ++e) {
    const Coord c = (*support)[e];
    vals[static_cast<Index>(e)] = product_entry(L, c.row, R, c.col);
  }
  const auto& sent = S.support.entries();
  for (std::size_t k = 0; k < sent.size(); ++k) {
    const Index flat = static_cast<Index>(sent[k].row) * n2 + sent[k].col;
    vals[flat] += S.values[static_cast<Index>(k)];
  }
  ObservedMatrix out;
  out.data = MaskedMatrix(support, std::move(vals));
  out.p = 1.0;
  return out;
}

}  // namespace lrmc::test

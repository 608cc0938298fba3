#pragma once

#include <cstdint>
#include <string>

#include "lrmc/types.hpp"

namespace lrmc {

/// Partially observed data Y restricted to the observation set, plus the
/// sampling rate p = |Omega| / (n1 n2).
struct ObservedMatrix {
  MaskedMatrix data;
  double p = 1.0;

  Index rows() const { return data.rows(); }
  Index cols() const { return data.cols(); }
  const IndexSet& support() const { return data.support(); }
};

/// Planted ground truth of a synthetic instance: X* = Lstar Rstar^T plus
/// the sparse outlier matrix Sstar, with its spectrum/incoherence stats.
struct GroundTruth {
  DenseMatrix Lstar;
  DenseMatrix Rstar;
  SparseEstimate Sstar;
  double alpha = 0.0;       ///< planted outlier fraction of |Omega|
  double sigma_r = 0.0;     ///< r-th singular value of X*
  double kappa = 1.0;       ///< sigma_1 / sigma_r
  double mu = 1.0;          ///< incoherence of X*
  /// Realized max per-row/per-column outlier fraction (diagnostic; the
  /// planting recipe fixes the overall fraction, not the per-line one).
  double alpha_rowcol = 0.0;

  Index rank() const { return Lstar.cols(); }
};

struct SyntheticInstance {
  ObservedMatrix observed;
  GroundTruth truth;
  std::uint64_t seed = 0;
};

struct IncoherenceStats {
  double mu;
  double kappa;
  double sigma_r;
};

/// Independent Bernoulli(p) inclusion of each position, row-major draw
/// order under the seeded generator.
IndexSet bernoulli_mask(Index n1, Index n2, double p, std::uint64_t seed);

/// Synthetic instance per the standard recipe: Gaussian factors, Bernoulli
/// mask, floor(alpha * |Omega|) outlier positions sampled uniformly without
/// replacement from Omega, outlier magnitudes uniform on [-m, m] with m the
/// empirical mean of |X*| over all entries.
SyntheticInstance generate_synthetic(Index n1, Index n2, int rank, double p,
                                     double alpha, std::uint64_t seed);

/// Incoherence mu, condition number kappa, and sigma_r of L R^T, computed
/// from the QR-factorized product (no dense n1 x n2 matrix is formed).
IncoherenceStats incoherence(const DenseMatrix& L, const DenseMatrix& R);

/// Reads a dense matrix; binary files are recognized by their magic,
/// anything else is parsed as CSV.
DenseMatrix load_dense(const std::string& path);
void save_dense_csv(const std::string& path, const DenseMatrix& M);
void save_dense_binary(const std::string& path, const DenseMatrix& M);

/// Bernoulli mask composed with projection onto the kept entries. The
/// stored p is the realized |Omega| / (n1 n2).
ObservedMatrix subsample(const DenseMatrix& M, double p, std::uint64_t seed);

/// Fully observed view of a dense matrix (p = 1).
ObservedMatrix observe_all(const DenseMatrix& M);

// Instance files (binary, little-endian):
//   observed: "LRMCOBS1", u32 n1, u32 n2, u64 m, f64 p, m x (u32 i, u32 j, f64 v)
//   factors:  "LRMCTRU1", u32 n1, u32 n2, u32 r, L row-major f64, R row-major f64
//   sparse:   "LRMCSPA1", u32 n1, u32 n2, u64 m, m x (u32 i, u32 j, f64 v)
void save_observed(const std::string& path, const ObservedMatrix& Y);
ObservedMatrix load_observed(const std::string& path);
void save_factors(const std::string& path, const DenseMatrix& L,
                  const DenseMatrix& R);
std::pair<DenseMatrix, DenseMatrix> load_factors(const std::string& path);
void save_sparse(const std::string& path, const SparseEstimate& S);
SparseEstimate load_sparse(const std::string& path);

/// Rebuilds a GroundTruth (with recomputed stats) from factor and optional
/// outlier files.
GroundTruth make_ground_truth(DenseMatrix Lstar, DenseMatrix Rstar,
                              SparseEstimate Sstar);

}  // namespace lrmc

#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "lrmc/problems.hpp"
#include "lrmc/schedules.hpp"
#include "lrmc/types.hpp"

namespace lrmc {

/// Low-rank iterate (L, R) with X = L R^T.
struct FactorPair {
  DenseMatrix L;
  DenseMatrix R;

  Index rank() const { return L.cols(); }
};

/// When to stop iterating. The iteration cap is always enforced on top of
/// any tolerance rule.
struct StopRule {
  enum class Kind { FixedIterations, TruthRelTol, SuccessiveRelTol };

  Kind kind = Kind::FixedIterations;
  double tol = 0.0;
  int max_iters = 500;

  /// Run exactly `iters` iterations (k = 0 returns the initialization).
  static StopRule fixed_iterations(int iters);
  /// Stop once ||X_k - X*||_F / ||X*||_F < tol. Requires ground truth.
  static StopRule truth_rel(double tol, int max_iters = 500);
  /// Stop once ||X_k - X_{k-1}||_F / ||X_{k-1}||_F < tol.
  static StopRule successive_rel(double tol, int max_iters = 500);
};

struct TraceRecord {
  int k = 0;
  std::optional<double> rel_err;       ///< needs ground truth
  std::optional<double> succ_change;   ///< absent at k = 0
  std::size_t supp_size = 0;           ///< nonzeros of S_k
  std::optional<bool> supp_included;   ///< supp(S_k) subseteq supp(S*)
  double zeta = 0.0;                   ///< alpha-tilde for the baseline
  std::optional<double> eta;           ///< absent at k = 0
  double ms = 0.0;                     ///< update work only, excludes metrics
};

/// Per-iteration record of a solve: one row for the initialization plus one
/// per completed iteration.
struct SolveTrace {
  std::vector<TraceRecord> records;

  /// CSV with header `k,rel_err,succ_change,supp_size,supp_included,zeta,
  /// eta,ms`; optional fields render empty.
  void write_csv(std::ostream& out) const;
};

/// One solver iterate: factors, the sparse estimate held over the full
/// observation set, and the iteration counter.
struct SolverState {
  FactorPair factors;
  MaskedMatrix sparse;  ///< values over Omega; mostly zeros
  int k = 0;
};

struct SolveResult {
  FactorPair factors;
  SparseEstimate sparse;
  SolveTrace trace;
  bool converged = false;
  int iterations = 0;
};

/// Called after every iteration with the fresh state and the parameters
/// that produced it. Used by the verification suites.
using IterationObserver =
    std::function<void(const SolverState&, double zeta, double eta)>;

struct SolveOptions {
  IterationObserver observer;
};

/// Thresholded spectral initialization: S_0 = soft_threshold(Pi_Omega(Y),
/// zeta0), then the top-r SVD of p^-1 Pi_Omega(Y - S_0) split symmetrically
/// into L_0 = U Sigma^(1/2), R_0 = V Sigma^(1/2).
SolverState initialize(const ObservedMatrix& Y, int rank, double zeta0);

/// One iteration: S_{k+1} = soft_threshold(Pi_Omega(Y - L_k R_k^T), zeta),
/// then the simultaneous scaled gradient step on both factors with the
/// residual Pi_Omega(L_k R_k^T + S_{k+1} - Y).
void lrmc_step(SolverState& state, const ObservedMatrix& Y, double zeta,
               double eta);

/// Baseline iteration: identical except S_{k+1} keeps the top
/// alpha_tilde-fraction magnitudes per row and column instead of
/// soft-thresholding.
void scaledgd_step(SolverState& state, const ObservedMatrix& Y,
                   double alpha_tilde, double eta);

/// (1 / 2p) ||Pi_Omega(L R^T + S - Y)||_F^2.
double loss(const SolverState& state, const ObservedMatrix& Y);

/// Oracle threshold from the ground truth: ||X*||_inf when `current` is
/// null (zeta_0), else ||X* - L R^T||_inf.
double oracle_zeta(const GroundTruth& truth, const FactorPair* current);

/// Full run: initialize, then iterate under `schedule` until `stop`.
/// Ground-truth metrics (rel_err, support inclusion) are recorded only
/// when `truth` is given; oracle schedules and truth-relative stops
/// require it.
SolveResult solve(const ObservedMatrix& Y, int rank,
                  const ParamSchedule& schedule, const StopRule& stop,
                  const GroundTruth* truth = nullptr,
                  const SolveOptions& options = {});

/// Baseline solver with the sparsification operator; initialization uses
/// S_0 = T_alpha_tilde(Pi_Omega(Y)) before the same spectral step.
SolveResult scaledgd_solve(const ObservedMatrix& Y, int rank,
                           double alpha_tilde, double eta,
                           const StopRule& stop,
                           const GroundTruth* truth = nullptr,
                           const SolveOptions& options = {});

/// True iff every nonzero of S (held over Omega) sits inside
/// `star_support`.
bool support_subset(const MaskedMatrix& S, const IndexSet& star_support);

/// ||S* - S||_inf where S is held over Omega and support(S*) is contained
/// in Omega.
double sparse_truth_inf_diff(const MaskedMatrix& S, const SparseEstimate& Sstar);

}  // namespace lrmc

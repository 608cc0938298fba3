#pragma once

#include <cstdint>
#include <vector>

#include "lrmc/problems.hpp"
#include "lrmc/schedules.hpp"

namespace lrmc {

/// Distribution of training/evaluation instances. Instances are addressed
/// by ordinal under the base seed, so a run is reproducible and parallel
/// evaluation cannot change which instances are drawn.
struct ProblemDistribution {
  enum class Mode { Stream, FixedPool };

  Index n1 = 100;
  Index n2 = 100;
  int rank = 3;
  double p = 1.0;
  double alpha_min = 0.1;
  double alpha_max = 0.1;
  std::uint64_t base_seed = 0;
  Mode mode = Mode::Stream;
  int pool_size = 32;  ///< FixedPool mode cycles through this many

  SyntheticInstance draw(std::uint64_t ordinal) const;
};

struct GridSpec {
  double lo = 0.1;
  double hi = 1.0;
  double step = 0.1;

  std::vector<double> values() const;
};

struct TrainConfig {
  int depth = 10;            ///< K, the feedforward unfolding depth
  int horizon = 0;           ///< Kbar for the tail search; 0 means K + 5
  int steps_per_stage = 200;
  double learning_rate = 0.05;
  double fd_step_rel = 1e-3;
  double fd_step_abs = 1e-8;
  GridSpec grid;
  int eval_pool_size = 20;
  double eta_min = 1e-3;
  double eta_max = 1.5;

  int effective_horizon() const { return horizon > 0 ? horizon : depth + 5; }
  void validate() const;
};

struct StageLossRow {
  int stage;
  int step;
  double loss;  ///< ||L_k R_k^T - X*||_F^2 on that step's instance
};

struct TrainResult {
  ParamSchedule schedule;  ///< learned kind, no recurrent tail
  std::vector<StageLossRow> stage_losses;
};

/// Layer-wise (curriculum) training of the feedforward parameters: stage k
/// optimizes all parameters through layer k against the stage loss
/// E||L_k R_k^T - X*||_F^2, one fresh instance per stochastic step.
/// Thresholds are clamped to >= 0 and step sizes to [eta_min, eta_max]
/// after every update.
TrainResult layerwise_train(const ProblemDistribution& dist,
                            const TrainConfig& cfg);

/// Central finite differences of the stage-k loss over the active scalars,
/// ordered [zeta_0 .. zeta_k, eta_1 .. eta_k]. A non-finite loss at a
/// perturbed point zeroes and flags that coordinate.
struct GradientResult {
  std::vector<double> grad;
  std::vector<bool> flagged;
};
GradientResult param_gradient(const SyntheticInstance& instance,
                              const ParamSchedule& schedule, int stage,
                              double fd_step_rel, double fd_step_abs);

struct GridRow {
  double beta;
  double phi;
  double mean_loss;
};

struct GridSearchResult {
  RnnTail tail;
  std::vector<GridRow> rows;
};

/// Argmin over finite rows; exact ties break toward larger beta, then
/// larger phi. Throws SearchFailureError when every row is non-finite.
RnnTail pick_grid_argmin(const std::vector<GridRow>& rows);

/// The zeta_0 starting value used by layerwise_train: the 90th-percentile
/// magnitude of the first instance's observed entries.
double initial_zeta0(const ProblemDistribution& dist);

/// Central difference (f(x + h) - f(x - h)) / (2 h) with
/// h = max(rel * |x|, abs).
double central_difference(const std::function<double(double)>& f, double x,
                          double rel, double abs_floor);

/// Exhaustive search of the recurrent decays on cfg.grid, scoring the mean
/// layer-Kbar loss over a fixed pool of cfg.eval_pool_size instances. Ties
/// break toward larger beta, then larger phi.
GridSearchResult grid_search_rnn(const ParamSchedule& fnn,
                                 const ProblemDistribution& dist,
                                 const TrainConfig& cfg);

struct EvalSummary {
  double mean_rel_err_at_k = 0.0;
  double mean_iters_to_tol = 0.0;  ///< over converged runs; NaN if none
  double success_rate = 0.0;
  int k_eval = 0;
  double tol = 0.0;
};

/// Runs the schedule on every pool instance with the ground-truth
/// tolerance stop and aggregates. Feedforward-only schedules are capped at
/// their depth. Runs that stop before k_eval report their final error.
EvalSummary evaluate(const ParamSchedule& schedule,
                     const std::vector<SyntheticInstance>& pool, int k_eval,
                     double tol, int max_iters = 500);

/// Deterministic instance pool: ordinals salt .. salt + count - 1.
std::vector<SyntheticInstance> draw_pool(const ProblemDistribution& dist,
                                         int count, std::uint64_t salt);

/// Ordinal offsets reserved for the different pools so training, grid
/// search, and held-out evaluation never share instances.
inline constexpr std::uint64_t kGridPoolSalt = 1u << 20;
inline constexpr std::uint64_t kHeldOutPoolSalt = 1u << 21;

}  // namespace lrmc

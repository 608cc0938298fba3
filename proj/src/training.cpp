#include "lrmc/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lrmc/errors.hpp"
#include "lrmc/matops.hpp"
#include "lrmc/rng.hpp"
#include "lrmc/solver.hpp"

namespace lrmc {

namespace {

constexpr std::uint64_t kAlphaStream = 7;
constexpr double kZetaDecayGuess = 0.65;
constexpr int kMaxConsecutiveRejections = 10;
constexpr double kStageLossEmaDecay = 0.9;

/// Forward pass through `stage` iterative layers, reusing the cached
/// initialization whenever zeta_0 is unchanged (only zeta_0 feeds the
/// spectral step).
class ForwardRunner {
 public:
  explicit ForwardRunner(const SyntheticInstance& inst) : inst_(inst) {}

  double stage_loss(const std::vector<double>& zetas,
                    const std::vector<double>& etas, int stage) {
    if (!cached_ || cached_zeta0_ != zetas[0]) {
      init_ = initialize(inst_.observed,
                         static_cast<int>(inst_.truth.rank()), zetas[0]);
      cached_zeta0_ = zetas[0];
      cached_ = true;
    }
    SolverState state = init_;
    for (int k = 1; k <= stage; ++k)
      lrmc_step(state, inst_.observed,
                zetas[static_cast<std::size_t>(k)],
                etas[static_cast<std::size_t>(k - 1)]);
    const double diff =
        fro_diff_product_exact(state.factors.L, state.factors.R,
                               inst_.truth.Lstar, inst_.truth.Rstar);
    return diff * diff;
  }

 private:
  const SyntheticInstance& inst_;
  SolverState init_;
  double cached_zeta0_ = std::numeric_limits<double>::quiet_NaN();
  bool cached_ = false;
};

GradientResult fd_gradient(ForwardRunner& runner, std::vector<double> zetas,
                           std::vector<double> etas, int stage,
                           double fd_rel, double fd_abs) {
  const std::size_t n_active = 2 * static_cast<std::size_t>(stage) + 1;
  GradientResult out;
  out.grad.assign(n_active, 0.0);
  out.flagged.assign(n_active, false);

  auto probe = [&](std::size_t coord, double delta) {
    double* target =
        coord <= static_cast<std::size_t>(stage)
            ? &zetas[coord]
            : &etas[coord - static_cast<std::size_t>(stage) - 1];
    const double saved = *target;
    *target = saved + delta;
    const double loss = runner.stage_loss(zetas, etas, stage);
    *target = saved;
    return loss;
  };

  for (std::size_t c = 0; c < n_active; ++c) {
    const double theta =
        c <= static_cast<std::size_t>(stage)
            ? zetas[c]
            : etas[c - static_cast<std::size_t>(stage) - 1];
    const double h = std::max(fd_rel * std::abs(theta), fd_abs);
    double fplus, fminus;
    try {
      fplus = probe(c, +h);
      fminus = probe(c, -h);
    } catch (const NumericalFailureError&) {
      out.flagged[c] = true;
      continue;
    }
    if (!std::isfinite(fplus) || !std::isfinite(fminus)) {
      out.flagged[c] = true;
      continue;
    }
    out.grad[c] = (fplus - fminus) / (2.0 * h);
  }
  return out;
}

struct AdamState {
  std::vector<double> m, v;
  int t = 0;
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

  void apply(std::vector<double>& theta, const std::vector<double>& grad,
             double lr) {
    ++t;
    const double bc1 = 1.0 - std::pow(kBeta1, t);
    const double bc2 = 1.0 - std::pow(kBeta2, t);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * grad[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      theta[i] -= lr * mhat / (std::sqrt(vhat) + kEps);
    }
  }
};

std::vector<double> pack_active(const std::vector<double>& zetas,
                                const std::vector<double>& etas, int stage) {
  std::vector<double> theta(zetas.begin(),
                            zetas.begin() + stage + 1);
  theta.insert(theta.end(), etas.begin(), etas.begin() + stage);
  return theta;
}

void unpack_active(const std::vector<double>& theta,
                   std::vector<double>& zetas, std::vector<double>& etas,
                   int stage, double eta_min, double eta_max) {
  for (int i = 0; i <= stage; ++i)
    zetas[static_cast<std::size_t>(i)] =
        std::max(0.0, theta[static_cast<std::size_t>(i)]);
  for (int i = 0; i < stage; ++i)
    etas[static_cast<std::size_t>(i)] =
        std::clamp(theta[static_cast<std::size_t>(stage + 1 + i)], eta_min,
                   eta_max);
}

double percentile90_abs(const Vector& values) {
  if (values.size() == 0) return 0.0;
  std::vector<double> mags(static_cast<std::size_t>(values.size()));
  for (Index i = 0; i < values.size(); ++i)
    mags[static_cast<std::size_t>(i)] = std::abs(values[i]);
  std::sort(mags.begin(), mags.end());
  const std::size_t idx =
      static_cast<std::size_t>(0.9 * static_cast<double>(mags.size() - 1));
  return mags[idx];
}

}  // namespace

SyntheticInstance ProblemDistribution::draw(std::uint64_t ordinal) const {
  const std::uint64_t effective =
      mode == Mode::Stream
          ? ordinal
          : ordinal % static_cast<std::uint64_t>(std::max(1, pool_size));
  const std::uint64_t seed = base_seed + effective;
  double alpha = alpha_min;
  if (alpha_max > alpha_min) {
    RandomStream rng(seed, kAlphaStream);
    alpha = rng.uniform(alpha_min, alpha_max);
  }
  return generate_synthetic(n1, n2, rank, p, alpha, seed);
}

std::vector<double> GridSpec::values() const {
  if (!(step > 0.0) || !(hi >= lo))
    throw InvalidParameterError("GridSpec: need step > 0 and hi >= lo");
  std::vector<double> out;
  const int n = static_cast<int>(std::round((hi - lo) / step)) + 1;
  for (int i = 0; i < n; ++i) {
    // Exact decimals for the canonical 0.1 grid.
    const double v = std::round((lo + i * step) * 1e12) / 1e12;
    out.push_back(v);
  }
  return out;
}

void TrainConfig::validate() const {
  if (depth < 0) throw InvalidParameterError("TrainConfig: depth must be >= 0");
  if (horizon > 0 && horizon <= depth)
    throw InvalidParameterError("TrainConfig: horizon must exceed depth");
  if (steps_per_stage <= 0 || learning_rate <= 0.0 || fd_step_rel <= 0.0 ||
      fd_step_abs <= 0.0 || eval_pool_size <= 0)
    throw InvalidParameterError("TrainConfig: all counts/rates must be > 0");
  if (!(eta_min > 0.0 && eta_max >= eta_min))
    throw InvalidParameterError("TrainConfig: bad eta clamp range");
}

GradientResult param_gradient(const SyntheticInstance& instance,
                              const ParamSchedule& schedule, int stage,
                              double fd_step_rel, double fd_step_abs) {
  if (schedule.kind() != ParamSchedule::Kind::Learned)
    throw ConfigurationError("param_gradient: schedule must be learned kind");
  if (stage < 0 || stage > schedule.depth())
    throw InvalidParameterError("param_gradient: stage out of range");
  ForwardRunner runner(instance);
  return fd_gradient(runner, schedule.zetas(), schedule.etas(), stage,
                     fd_step_rel, fd_step_abs);
}

TrainResult layerwise_train(const ProblemDistribution& dist,
                            const TrainConfig& cfg) {
  cfg.validate();

  // Parameter initialization: zeta_0 from the 90th percentile magnitude of
  // the first training instance, geometric decay guesses below it, and the
  // mid-range provably safe step size.
  const SyntheticInstance first = dist.draw(0);
  std::vector<double> zetas(static_cast<std::size_t>(cfg.depth) + 1);
  zetas[0] = percentile90_abs(first.observed.data.values());
  for (int k = 1; k <= cfg.depth; ++k)
    zetas[static_cast<std::size_t>(k)] =
        zetas[static_cast<std::size_t>(k - 1)] * kZetaDecayGuess;
  std::vector<double> etas(static_cast<std::size_t>(cfg.depth), 0.5);

  TrainResult result;
  std::uint64_t ordinal = 0;

  for (int stage = 0; stage <= cfg.depth; ++stage) {
    AdamState adam(2 * static_cast<std::size_t>(stage) + 1);
    double lr = cfg.learning_rate;
    double ema = std::numeric_limits<double>::quiet_NaN();
    int consecutive_rejections = 0;
    std::vector<double> prev_theta = pack_active(zetas, etas, stage);

    for (int step = 0; step < cfg.steps_per_stage; ++step) {
      const SyntheticInstance inst = dist.draw(ordinal++);
      ForwardRunner runner(inst);

      const double loss_now = runner.stage_loss(zetas, etas, stage);
      if (!std::isfinite(loss_now)) {
        // Reject the most recent update and retry smaller.
        unpack_active(prev_theta, zetas, etas, stage, cfg.eta_min,
                      cfg.eta_max);
        lr *= 0.5;
        if (++consecutive_rejections >= kMaxConsecutiveRejections)
          throw NumericalFailureError(
              "layerwise_train: stage " + std::to_string(stage) +
              " diverged (10 consecutive non-finite losses; last lr " +
              std::to_string(lr) + ")");
        continue;
      }
      consecutive_rejections = 0;
      ema = std::isnan(ema)
                ? loss_now
                : kStageLossEmaDecay * ema + (1.0 - kStageLossEmaDecay) * loss_now;
      result.stage_losses.push_back({stage, step, loss_now});

      const GradientResult g =
          fd_gradient(runner, zetas, etas, stage, cfg.fd_step_rel,
                      cfg.fd_step_abs);
      prev_theta = pack_active(zetas, etas, stage);
      std::vector<double> theta = prev_theta;
      adam.apply(theta, g.grad, lr);
      unpack_active(theta, zetas, etas, stage, cfg.eta_min, cfg.eta_max);
    }
  }

  result.schedule = ParamSchedule::learned(zetas, etas, std::nullopt);
  return result;
}

std::vector<SyntheticInstance> draw_pool(const ProblemDistribution& dist,
                                         int count, std::uint64_t salt) {
  std::vector<SyntheticInstance> pool;
  pool.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    pool.push_back(dist.draw(salt + static_cast<std::uint64_t>(i)));
  return pool;
}

GridSearchResult grid_search_rnn(const ParamSchedule& fnn,
                                 const ProblemDistribution& dist,
                                 const TrainConfig& cfg) {
  cfg.validate();
  if (fnn.kind() != ParamSchedule::Kind::Learned)
    throw ConfigurationError("grid_search_rnn: schedule must be learned kind");
  const int kbar = cfg.effective_horizon();
  if (kbar <= fnn.depth())
    throw InvalidParameterError("grid_search_rnn: horizon must exceed depth");

  const std::vector<SyntheticInstance> pool =
      draw_pool(dist, cfg.eval_pool_size, kGridPoolSalt);

  GridSearchResult result;
  result.tail = {1.0, 1.0};
  double best = std::numeric_limits<double>::infinity();
  bool any_finite = false;

  for (double beta : cfg.grid.values()) {
    for (double phi : cfg.grid.values()) {
      const ParamSchedule candidate =
          ParamSchedule::learned(fnn.zetas(), fnn.etas(), RnnTail{beta, phi});
      double total = 0.0;
      bool finite = true;
      for (const SyntheticInstance& inst : pool) {
        try {
          const SolveResult r =
              solve(inst.observed, static_cast<int>(inst.truth.rank()),
                    candidate, StopRule::fixed_iterations(kbar), &inst.truth);
          const double diff = fro_diff_product_exact(
              r.factors.L, r.factors.R, inst.truth.Lstar, inst.truth.Rstar);
          total += diff * diff;
          if (!std::isfinite(total)) { finite = false; break; }
        } catch (const NumericalFailureError&) {
          finite = false;
          break;
        }
      }
      const double mean =
          finite ? total / static_cast<double>(pool.size())
                 : std::numeric_limits<double>::quiet_NaN();
      result.rows.push_back({beta, phi, mean});
      if (finite) {
        any_finite = true;
        // <= so later (larger) beta/phi win exact ties.
        if (mean <= best) {
          best = mean;
          result.tail = {beta, phi};
        }
      }
    }
  }
  if (!any_finite)
    throw SearchFailureError(
        "grid_search_rnn: every grid point evaluated non-finite");
  return result;
}

EvalSummary evaluate(const ParamSchedule& schedule,
                     const std::vector<SyntheticInstance>& pool, int k_eval,
                     double tol, int max_iters) {
  if (pool.empty())
    throw InvalidParameterError("evaluate: pool must not be empty");
  int effective_max = max_iters;
  if (schedule.kind() == ParamSchedule::Kind::Learned && !schedule.rnn())
    effective_max = std::min(effective_max, schedule.depth());

  double err_sum = 0.0;
  double iter_sum = 0.0;
  int converged = 0;
  for (const SyntheticInstance& inst : pool) {
    const SolveResult r =
        solve(inst.observed, static_cast<int>(inst.truth.rank()), schedule,
              StopRule::truth_rel(tol, effective_max), &inst.truth);
    const std::size_t want = static_cast<std::size_t>(k_eval);
    const TraceRecord& row =
        want < r.trace.records.size() ? r.trace.records[want]
                                      : r.trace.records.back();
    err_sum += row.rel_err.value_or(std::numeric_limits<double>::quiet_NaN());
    if (r.converged) {
      ++converged;
      iter_sum += r.iterations;
    }
  }
  EvalSummary s;
  s.k_eval = k_eval;
  s.tol = tol;
  s.mean_rel_err_at_k = err_sum / static_cast<double>(pool.size());
  s.mean_iters_to_tol =
      converged > 0 ? iter_sum / converged
                    : std::numeric_limits<double>::quiet_NaN();
  s.success_rate =
      static_cast<double>(converged) / static_cast<double>(pool.size());
  return s;
}

}  // namespace lrmc

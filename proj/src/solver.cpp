#include "lrmc/solver.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "lrmc/errors.hpp"
#include "lrmc/matops.hpp"

namespace lrmc {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start)
      .count();
}

/// Dense metrics stream entry by entry; above this entry count the
/// successive-change style gram products take over for the Frobenius
/// metric (documented floor ~1e-8 relative).
constexpr Index kExactMetricEntryCap = 4'000'000;

void append_csv_field(std::string& line, const std::optional<double>& v) {
  char buf[32];
  if (v) {
    std::snprintf(buf, sizeof(buf), "%.10g", *v);
    line += buf;
  }
  line += ',';
}

double relative_truth_error(const FactorPair& x, const GroundTruth& truth,
                            double truth_fro) {
  const Index entries = truth.Lstar.rows() * truth.Rstar.rows();
  const double diff =
      entries <= kExactMetricEntryCap
          ? fro_diff_product_exact(x.L, x.R, truth.Lstar, truth.Rstar)
          : fro_diff_product_gram(x.L, x.R, truth.Lstar, truth.Rstar);
  return diff / truth_fro;
}

struct StepKernel {
  // S-update producing the new sparse values from Pi_Omega(Y - L R^T).
  // `into` arrives holding y - prod and leaves holding S_{k+1}.
  virtual void update_sparse(Vector& into, const MaskedMatrix& pattern) const = 0;
  virtual ~StepKernel() = default;
};

struct SoftKernel final : StepKernel {
  double zeta;
  explicit SoftKernel(double z) : zeta(z) {}
  void update_sparse(Vector& into, const MaskedMatrix&) const override {
    soft_threshold_values(into, zeta);
  }
};

struct TopFractionKernel final : StepKernel {
  double alpha_tilde;
  explicit TopFractionKernel(double a) : alpha_tilde(a) {}
  void update_sparse(Vector& into, const MaskedMatrix& pattern) const override {
    MaskedMatrix tmp(pattern.support_ptr(), std::move(into));
    into = sparsify_top_fraction(tmp, alpha_tilde).values();
  }
};

void generic_step(SolverState& state, const ObservedMatrix& Y,
                  const StepKernel& kernel, double eta) {
  const MaskedMatrix& Ym = Y.data;

  // Pi_Omega(L_k R_k^T), then S_{k+1} from the thresholded residual.
  Vector prod;
  product_on_support(state.factors.L, state.factors.R, Ym.support(), prod);
  Vector s = Ym.values() - prod;
  kernel.update_sparse(s, Ym);

  // Residual Pi_Omega(L_k R_k^T + S_{k+1} - Y) drives both factor updates;
  // the gram solves use the pre-update factors.
  Vector w = prod + s - Ym.values();
  MaskedMatrix residual(Ym.support_ptr(), std::move(w));
  auto [Lnew, Rnew] = scaled_grad_step(state.factors.L, state.factors.R,
                                       residual, eta, Y.p);
  state.factors.L = std::move(Lnew);
  state.factors.R = std::move(Rnew);
  state.sparse.values() = std::move(s);
  ++state.k;
}

struct MethodHooks {
  // Resolve (zeta_or_alpha, eta) for iteration k, then run one step.
  std::function<std::pair<double, double>(int, const SolverState&)> params;
  std::function<void(SolverState&, double, double)> step;
  double init_threshold = 0.0;
  std::function<SolverState(double)> init;
};

SolveResult run_loop(const ObservedMatrix& Y, const StopRule& stop,
                     const GroundTruth* truth, const SolveOptions& options,
                     const MethodHooks& method) {
  if (stop.kind == StopRule::Kind::TruthRelTol && truth == nullptr)
    throw ConfigurationError(
        "solve: ground-truth stopping rule requires ground truth");

  const double truth_fro =
      truth ? fro_norm_product(truth->Lstar, truth->Rstar) : 0.0;

  SolveTrace trace;
  auto record = [&](const SolverState& st, std::optional<double> succ,
                    double zeta, std::optional<double> eta, double ms) {
    TraceRecord row;
    row.k = st.k;
    if (truth) {
      row.rel_err = relative_truth_error(st.factors, *truth, truth_fro);
      row.supp_included = support_subset(st.sparse, truth->Sstar.support);
    }
    row.succ_change = succ;
    row.supp_size = st.sparse.nonzero_count();
    row.zeta = zeta;
    row.eta = eta;
    row.ms = ms;
    trace.records.push_back(row);
    return row;
  };

  auto t0 = Clock::now();
  SolverState state = method.init(method.init_threshold);
  record(state, std::nullopt, method.init_threshold, std::nullopt,
         elapsed_ms(t0));

  bool converged = stop.kind == StopRule::Kind::FixedIterations;
  FactorPair prev = state.factors;
  int k = 0;
  while (k < stop.max_iters) {
    k = state.k + 1;
    double zeta, eta;
    try {
      std::tie(zeta, eta) = method.params(k, state);
    } catch (const ScheduleExhaustedError&) {
      if (stop.kind == StopRule::Kind::FixedIterations) throw;
      // Tolerance rules treat an exhausted feedforward schedule as the
      // run-K-iterations stop.
      break;
    }

    t0 = Clock::now();
    method.step(state, zeta, eta);
    const double ms = elapsed_ms(t0);

    const double prev_fro = fro_norm_product(prev.L, prev.R);
    const double succ =
        fro_diff_product_gram(state.factors.L, state.factors.R, prev.L,
                              prev.R) /
        (prev_fro > 0.0 ? prev_fro : 1.0);
    const TraceRecord row = record(state, succ, zeta, eta, ms);
    if (options.observer) options.observer(state, zeta, eta);

    if (stop.kind == StopRule::Kind::TruthRelTol && row.rel_err &&
        *row.rel_err < stop.tol) {
      converged = true;
      break;
    }
    if (stop.kind == StopRule::Kind::SuccessiveRelTol && succ < stop.tol) {
      converged = true;
      break;
    }
    prev = state.factors;
  }

  SolveResult result;
  result.factors = std::move(state.factors);
  result.sparse = SparseEstimate::from_masked(state.sparse);
  result.trace = std::move(trace);
  result.converged = converged;
  result.iterations = state.k;
  return result;
}

}  // namespace

StopRule StopRule::fixed_iterations(int iters) {
  if (iters < 0)
    throw InvalidParameterError("StopRule: iteration count must be >= 0");
  StopRule s;
  s.kind = Kind::FixedIterations;
  s.max_iters = iters;
  return s;
}

StopRule StopRule::truth_rel(double tol, int max_iters) {
  if (!(tol > 0.0) || max_iters <= 0)
    throw InvalidParameterError("StopRule: tol and max_iters must be > 0");
  StopRule s;
  s.kind = Kind::TruthRelTol;
  s.tol = tol;
  s.max_iters = max_iters;
  return s;
}

StopRule StopRule::successive_rel(double tol, int max_iters) {
  if (!(tol > 0.0) || max_iters <= 0)
    throw InvalidParameterError("StopRule: tol and max_iters must be > 0");
  StopRule s;
  s.kind = Kind::SuccessiveRelTol;
  s.tol = tol;
  s.max_iters = max_iters;
  return s;
}

void SolveTrace::write_csv(std::ostream& out) const {
  out << "k,rel_err,succ_change,supp_size,supp_included,zeta,eta,ms\n";
  char buf[32];
  for (const TraceRecord& r : records) {
    std::string line = std::to_string(r.k) + ',';
    append_csv_field(line, r.rel_err);
    append_csv_field(line, r.succ_change);
    line += std::to_string(r.supp_size) + ',';
    if (r.supp_included) line += *r.supp_included ? '1' : '0';
    line += ',';
    std::snprintf(buf, sizeof(buf), "%.10g", r.zeta);
    line += buf;
    line += ',';
    append_csv_field(line, r.eta);
    std::snprintf(buf, sizeof(buf), "%.3f", r.ms);
    line += buf;
    out << line << '\n';
  }
}

SolverState initialize(const ObservedMatrix& Y, int rank, double zeta0) {
  if (rank <= 0 || rank > std::min(Y.rows(), Y.cols()))
    throw InvalidRankError("initialize: rank out of range");
  MaskedMatrix S0 = soft_threshold(Y.data, zeta0);
  MaskedMatrix M(Y.data.support_ptr(),
                 (Y.data.values() - S0.values()) / Y.p);
  const SVDTriple svd = truncated_svd(M, rank);
  if (!(svd.sigma[rank - 1] > 0.0))
    throw RankCollapseError(
        "initialize: spectral initialization collapsed to rank < r");
  const Vector sqrt_sigma = svd.sigma.cwiseSqrt();
  SolverState state;
  state.factors.L = svd.U * sqrt_sigma.asDiagonal();
  state.factors.R = svd.V * sqrt_sigma.asDiagonal();
  state.sparse = std::move(S0);
  state.k = 0;
  return state;
}

void lrmc_step(SolverState& state, const ObservedMatrix& Y, double zeta,
               double eta) {
  try {
    generic_step(state, Y, SoftKernel(zeta), eta);
  } catch (const SingularFactorError& e) {
    throw SingularFactorError(e.side(),
                              std::string(e.what()) + " at iteration " +
                                  std::to_string(state.k + 1));
  }
}

void scaledgd_step(SolverState& state, const ObservedMatrix& Y,
                   double alpha_tilde, double eta) {
  try {
    generic_step(state, Y, TopFractionKernel(alpha_tilde), eta);
  } catch (const SingularFactorError& e) {
    throw SingularFactorError(e.side(),
                              std::string(e.what()) + " at iteration " +
                                  std::to_string(state.k + 1));
  }
}

double loss(const SolverState& state, const ObservedMatrix& Y) {
  Vector prod;
  product_on_support(state.factors.L, state.factors.R, Y.support(), prod);
  const Vector w = prod + state.sparse.values() - Y.data.values();
  return 0.5 / Y.p * w.squaredNorm();
}

double oracle_zeta(const GroundTruth& truth, const FactorPair* current) {
  if (current == nullptr) {
    double best = 0.0;
    const Index n1 = truth.Lstar.rows(), n2 = truth.Rstar.rows();
    for (Index i = 0; i < n1; ++i)
      for (Index j = 0; j < n2; ++j) {
        const double v =
            std::abs(product_entry(truth.Lstar, i, truth.Rstar, j));
        if (v > best) best = v;
      }
    return best;
  }
  return inf_diff_product_exact(truth.Lstar, truth.Rstar, current->L,
                                current->R);
}

SolveResult solve(const ObservedMatrix& Y, int rank,
                  const ParamSchedule& schedule, const StopRule& stop,
                  const GroundTruth* truth, const SolveOptions& options) {
  if (schedule.kind() == ParamSchedule::Kind::Oracle && truth == nullptr)
    throw ConfigurationError("solve: oracle schedule requires ground truth");

  MethodHooks method;
  method.init_threshold = schedule.kind() == ParamSchedule::Kind::Oracle
                              ? oracle_zeta(*truth, nullptr)
                              : schedule.zeta0();
  method.init = [&](double zeta0) { return initialize(Y, rank, zeta0); };
  method.step = [&](SolverState& st, double zeta, double eta) {
    lrmc_step(st, Y, zeta, eta);
  };
  if (schedule.kind() == ParamSchedule::Kind::Oracle) {
    method.params = [&](int, const SolverState& st) {
      return std::make_pair(oracle_zeta(*truth, &st.factors),
                            schedule.oracle_eta());
    };
  } else {
    method.params = [&](int k, const SolverState&) {
      return schedule.param_at(k);
    };
  }
  return run_loop(Y, stop, truth, options, method);
}

SolveResult scaledgd_solve(const ObservedMatrix& Y, int rank,
                           double alpha_tilde, double eta,
                           const StopRule& stop, const GroundTruth* truth,
                           const SolveOptions& options) {
  if (!(alpha_tilde >= 0.0 && alpha_tilde <= 1.0))
    throw InvalidParameterError(
        "scaledgd_solve: alpha_tilde must lie in [0, 1]");
  if (!(eta > 0.0))
    throw InvalidParameterError("scaledgd_solve: eta must be > 0");

  MethodHooks method;
  method.init_threshold = alpha_tilde;
  method.init = [&](double a) {
    // Same spectral step as LRMC, but the initial sparse estimate keeps the
    // top-fraction entries instead of soft-thresholding.
    if (rank <= 0 || rank > std::min(Y.rows(), Y.cols()))
      throw InvalidRankError("initialize: rank out of range");
    MaskedMatrix S0 = sparsify_top_fraction(Y.data, a);
    MaskedMatrix M(Y.data.support_ptr(),
                   (Y.data.values() - S0.values()) / Y.p);
    const SVDTriple svd = truncated_svd(M, rank);
    if (!(svd.sigma[rank - 1] > 0.0))
      throw RankCollapseError(
          "initialize: spectral initialization collapsed to rank < r");
    const Vector sqrt_sigma = svd.sigma.cwiseSqrt();
    SolverState state;
    state.factors.L = svd.U * sqrt_sigma.asDiagonal();
    state.factors.R = svd.V * sqrt_sigma.asDiagonal();
    state.sparse = std::move(S0);
    state.k = 0;
    return state;
  };
  method.step = [&](SolverState& st, double a, double step_eta) {
    scaledgd_step(st, Y, a, step_eta);
  };
  method.params = [&](int, const SolverState&) {
    return std::make_pair(alpha_tilde, eta);
  };
  return run_loop(Y, stop, truth, options, method);
}

bool support_subset(const MaskedMatrix& S, const IndexSet& star_support) {
  const auto& omega = S.support().entries();
  const auto& star = star_support.entries();
  std::size_t se = 0;
  for (std::size_t e = 0; e < omega.size(); ++e) {
    if (S.values()[static_cast<Index>(e)] == 0.0) continue;
    while (se < star.size() && star[se] < omega[e]) ++se;
    if (se == star.size() || !(star[se] == omega[e])) return false;
  }
  return true;
}

double sparse_truth_inf_diff(const MaskedMatrix& S,
                             const SparseEstimate& Sstar) {
  const auto& omega = S.support().entries();
  const auto& star = Sstar.support.entries();
  double best = 0.0;
  std::size_t se = 0;
  for (std::size_t e = 0; e < omega.size(); ++e) {
    double starval = 0.0;
    while (se < star.size() && star[se] < omega[e]) {
      // A truth entry outside Omega cannot happen (supp(S*) is in Omega),
      // but count it anyway so the metric stays an upper bound.
      best = std::max(best, std::abs(Sstar.values[static_cast<Index>(se)]));
      ++se;
    }
    if (se < star.size() && star[se] == omega[e]) {
      starval = Sstar.values[static_cast<Index>(se)];
      ++se;
    }
    best = std::max(best,
                    std::abs(starval - S.values()[static_cast<Index>(e)]));
  }
  for (; se < star.size(); ++se)
    best = std::max(best, std::abs(Sstar.values[static_cast<Index>(se)]));
  return best;
}

}  // namespace lrmc

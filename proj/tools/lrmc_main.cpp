// lrmc: command-line front end for synthetic-instance generation, solving,
// schedule training, and the benchmark suites.
//
// Exit codes: 0 success, 2 usage, 3 configuration/input, 4 numerical failure.

#include <CLI11.hpp>
#include <atomic>
#include <cstdio>
#include <deque>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "lrmc/errors.hpp"
#include "lrmc/matops.hpp"
#include "lrmc/problems.hpp"
#include "lrmc/schedules.hpp"
#include "lrmc/solver.hpp"
#include "lrmc/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v, const char* spec = "%.10g") {
  char buf[40];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::vector<double> parse_double_list(const std::string& text,
                                      const std::string& flag) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string field = text.substr(pos, comma - pos);
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end == field.c_str() || *end != '\0')
      throw lrmc::InvalidParameterError(flag + ": cannot parse '" + field +
                                        "' as a number");
    out.push_back(v);
    if (comma == text.size()) break;
    pos = comma + 1;
  }
  if (out.empty())
    throw lrmc::InvalidParameterError(flag + ": empty list");
  return out;
}

lrmc::StopRule parse_stop(const std::string& text, int max_iters) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string arg =
      colon == std::string::npos ? "" : text.substr(colon + 1);
  if (kind == "iters")
    return lrmc::StopRule::fixed_iterations(std::atoi(arg.c_str()));
  if (kind == "gt")
    return lrmc::StopRule::truth_rel(std::strtod(arg.c_str(), nullptr),
                                     max_iters);
  if (kind == "succ")
    return lrmc::StopRule::successive_rel(std::strtod(arg.c_str(), nullptr),
                                          max_iters);
  throw lrmc::InvalidParameterError(
      "--stop: expected gt:<tol>, succ:<tol>, or iters:<k>, got '" + text +
      "'");
}

lrmc::ParamSchedule parse_schedule(const std::string& text) {
  if (text == "oracle") return lrmc::ParamSchedule::oracle();
  if (text.rfind("oracle:", 0) == 0)
    return lrmc::ParamSchedule::oracle(
        std::strtod(text.c_str() + 7, nullptr));
  if (text.rfind("fixed:", 0) == 0) {
    const auto vals = parse_double_list(text.substr(6), "--schedule fixed");
    if (vals.size() != 2)
      throw lrmc::InvalidParameterError(
          "--schedule: fixed form is fixed:<zeta>,<eta>");
    return lrmc::ParamSchedule::fixed(vals[0], vals[1]);
  }
  return lrmc::load_schedule(text);
}

std::ofstream open_csv(const fs::path& path) {
  std::ofstream out(path);
  if (!out)
    throw lrmc::ConfigurationError(path.string() + ": cannot open for writing");
  return out;
}

/// Deterministic task runner: results are indexed, so the schedule of
/// worker threads never affects output.
void parallel_tasks(int count, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, count));
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

double mean_step_ms(const lrmc::SolveTrace& trace) {
  double total = 0.0;
  int n = 0;
  for (const auto& r : trace.records)
    if (r.k >= 1) {
      total += r.ms;
      ++n;
    }
  return n > 0 ? total / n : 0.0;
}

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::string out = ".";
  int threads = 1;
  std::string reduction = "deterministic";
};

void ensure_out_dir(const GlobalOptions& g) {
  if (!g.out.empty()) fs::create_directories(g.out);
}

// ---------------------------------------------------------------------------
// generate

struct GenerateArgs {
  int n1 = 300, n2 = 300, rank = 5;
  double p = 1.0, alpha = 0.1;
};

int cmd_generate(const GenerateArgs& a, const GlobalOptions& g) {
  ensure_out_dir(g);
  const lrmc::SyntheticInstance inst = lrmc::generate_synthetic(
      a.n1, a.n2, a.rank, a.p, a.alpha, g.seed);
  const fs::path dir(g.out);
  lrmc::save_observed((dir / "observed.bin").string(), inst.observed);
  lrmc::save_factors((dir / "truth_factors.bin").string(), inst.truth.Lstar,
                     inst.truth.Rstar);
  lrmc::save_sparse((dir / "outliers.bin").string(), inst.truth.Sstar);
  std::cout << "generated " << a.n1 << "x" << a.n2 << " rank-" << a.rank
            << " instance: |Omega|=" << inst.observed.support().size()
            << " outliers=" << inst.truth.Sstar.size()
            << " mu=" << fmt(inst.truth.mu, "%.4g")
            << " kappa=" << fmt(inst.truth.kappa, "%.4g")
            << " max_rowcol_alpha=" << fmt(inst.truth.alpha_rowcol, "%.4g")
            << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// solve

struct SolveArgs {
  std::string input;
  int rank = 5;
  std::string schedule = "fixed:0.0,0.5";
  std::string stop = "succ:1e-2";
  int max_iters = 500;
  std::string truth;
  std::string outliers;
  double subsample_p = 0.0;
  std::uint64_t subsample_seed = 0;
  std::string method = "lrmc";
  double alpha_tilde = 0.1;
  double eta = 0.5;
};

int cmd_solve(const SolveArgs& a, const GlobalOptions& g) {
  ensure_out_dir(g);

  lrmc::ObservedMatrix Y;
  bool loaded = false;
  {
    std::ifstream probe(a.input, std::ios::binary);
    if (!probe)
      throw lrmc::ConfigurationError(a.input + ": cannot open for reading");
    char magic[8] = {};
    probe.read(magic, 8);
    if (probe.gcount() == 8 && std::string(magic, 8) == "LRMCOBS1") {
      Y = lrmc::load_observed(a.input);
      loaded = true;
    }
  }
  if (!loaded) {
    const lrmc::DenseMatrix M = lrmc::load_dense(a.input);
    Y = a.subsample_p > 0.0
            ? lrmc::subsample(M, a.subsample_p, a.subsample_seed)
            : lrmc::observe_all(M);
  }

  std::optional<lrmc::GroundTruth> truth;
  if (!a.truth.empty()) {
    auto [L, R] = lrmc::load_factors(a.truth);
    lrmc::SparseEstimate S =
        a.outliers.empty()
            ? lrmc::SparseEstimate::empty(L.rows(), R.rows())
            : lrmc::load_sparse(a.outliers);
    truth = lrmc::make_ground_truth(std::move(L), std::move(R), std::move(S));
  }

  const lrmc::StopRule stop = parse_stop(a.stop, a.max_iters);
  lrmc::SolveResult result;
  if (a.method == "scaledgd") {
    result = lrmc::scaledgd_solve(Y, a.rank, a.alpha_tilde, a.eta, stop,
                                  truth ? &*truth : nullptr);
  } else if (a.method == "lrmc") {
    const lrmc::ParamSchedule schedule = parse_schedule(a.schedule);
    result = lrmc::solve(Y, a.rank, schedule, stop,
                         truth ? &*truth : nullptr);
  } else {
    throw lrmc::InvalidParameterError("--method must be lrmc or scaledgd");
  }

  const fs::path dir(g.out);
  {
    std::ofstream trace = open_csv(dir / "trace.csv");
    result.trace.write_csv(trace);
  }
  lrmc::save_factors((dir / "factors.bin").string(), result.factors.L,
                     result.factors.R);
  lrmc::save_sparse((dir / "sparse.bin").string(), result.sparse);
  std::cout << "iterations=" << result.iterations
            << " converged=" << (result.converged ? 1 : 0);
  if (!result.trace.records.empty() &&
      result.trace.records.back().rel_err)
    std::cout << " rel_err=" << fmt(*result.trace.records.back().rel_err);
  std::cout << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  int n1 = 100, n2 = 100, rank = 3;
  double p = 1.0, alpha = 0.1;
  int depth = 10;
  int horizon = 0;
  int steps = 200;
  double lr = 0.05;
  int eval_pool = 20;
  bool no_rnn = false;
};

int cmd_train(const TrainArgs& a, const GlobalOptions& g) {
  ensure_out_dir(g);
  lrmc::ProblemDistribution dist;
  dist.n1 = a.n1;
  dist.n2 = a.n2;
  dist.rank = a.rank;
  dist.p = a.p;
  dist.alpha_min = dist.alpha_max = a.alpha;
  dist.base_seed = g.seed;

  lrmc::TrainConfig cfg;
  cfg.depth = a.depth;
  cfg.horizon = a.horizon;
  cfg.steps_per_stage = a.steps;
  cfg.learning_rate = a.lr;
  cfg.eval_pool_size = a.eval_pool;

  const lrmc::TrainResult trained = lrmc::layerwise_train(dist, cfg);
  const fs::path dir(g.out);
  {
    std::ofstream csv = open_csv(dir / "stage_loss.csv");
    csv << "stage,step,loss\n";
    for (const auto& row : trained.stage_losses)
      csv << row.stage << ',' << row.step << ',' << fmt(row.loss) << '\n';
  }

  lrmc::ParamSchedule final_schedule = trained.schedule;
  if (!a.no_rnn) {
    const lrmc::GridSearchResult grid =
        lrmc::grid_search_rnn(trained.schedule, dist, cfg);
    std::ofstream csv = open_csv(dir / "grid.csv");
    csv << "beta,phi,mean_loss\n";
    for (const auto& row : grid.rows)
      csv << fmt(row.beta) << ',' << fmt(row.phi) << ','
          << fmt(row.mean_loss) << '\n';
    final_schedule = lrmc::ParamSchedule::learned(
        trained.schedule.zetas(), trained.schedule.etas(), grid.tail);
    std::cout << "grid argmin: beta=" << fmt(grid.tail.beta)
              << " phi=" << fmt(grid.tail.phi) << '\n';
  }
  lrmc::save_schedule(final_schedule, (dir / "schedule.json").string());
  std::cout << "wrote " << (dir / "schedule.json").string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
  std::string suite;
  int n = 0, rank = 0;  ///< 0 = suite default
  double p = 1.0;
  std::string alphas, ps;
  int seeds = 0, trials = 20, iters = 0, max_iters = 500;
  double eta = 0.5, tol = 1e-6, success_tol = 1e-4;
  int depth = 5, horizon = 8, steps = 100, eval_pool = 20, eval_iters = 40;
};

int bench_conv_alpha(const BenchArgs& a, const GlobalOptions& g) {
  const int n = a.n > 0 ? a.n : 300;
  const int rank = a.rank > 0 ? a.rank : 5;
  const int iters = a.iters > 0 ? a.iters : 60;
  const int seeds = a.seeds > 0 ? a.seeds : 5;
  const std::vector<double> alphas = parse_double_list(
      a.alphas.empty() ? "0.1,0.15,0.2,0.25" : a.alphas, "--alphas");

  struct Task {
    double alpha;
    int seed;
    std::string method;
    std::vector<std::pair<int, double>> rows;
  };
  std::vector<Task> tasks;
  for (double alpha : alphas)
    for (int s = 0; s < seeds; ++s)
      for (const char* m : {"lrmc", "scaledgd"})
        tasks.push_back({alpha, s, m, {}});

  parallel_tasks(static_cast<int>(tasks.size()), g.threads, [&](int i) {
    Task& t = tasks[static_cast<std::size_t>(i)];
    const auto inst = lrmc::generate_synthetic(
        n, n, rank, a.p, t.alpha, g.seed + static_cast<std::uint64_t>(t.seed));
    const auto stop = lrmc::StopRule::fixed_iterations(iters);
    const lrmc::SolveResult r =
        t.method == "lrmc"
            ? lrmc::solve(inst.observed, rank,
                          lrmc::ParamSchedule::oracle(a.eta), stop,
                          &inst.truth)
            : lrmc::scaledgd_solve(inst.observed, rank, t.alpha, a.eta,
                                   stop, &inst.truth);
    for (const auto& row : r.trace.records)
      t.rows.push_back({row.k, row.rel_err.value_or(-1.0)});
  });

  std::ofstream csv = open_csv(fs::path(g.out) / "conv_alpha.csv");
  csv << "alpha,method,seed,k,rel_err\n";
  for (const Task& t : tasks)
    for (const auto& [k, err] : t.rows)
      csv << fmt(t.alpha) << ',' << t.method << ',' << t.seed << ',' << k
          << ',' << fmt(err) << '\n';
  return 0;
}

int bench_iters_vs_p(const BenchArgs& a, const GlobalOptions& g) {
  const int n = a.n > 0 ? a.n : 500;
  const int rank = a.rank > 0 ? a.rank : 5;
  const int seeds = a.seeds > 0 ? a.seeds : 10;
  const double alpha = a.alphas.empty()
                           ? 0.1
                           : parse_double_list(a.alphas, "--alphas").front();
  const std::vector<double> ps = parse_double_list(
      a.ps.empty() ? "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0" : a.ps,
      "--ps");

  struct Row {
    double p;
    int seed, iterations;
    bool converged;
    double ms_per_iter;
  };
  std::vector<Row> rows(ps.size() * static_cast<std::size_t>(seeds));

  parallel_tasks(static_cast<int>(rows.size()), g.threads, [&](int i) {
    const std::size_t pi = static_cast<std::size_t>(i) /
                           static_cast<std::size_t>(seeds);
    const int s = i % seeds;
    const auto inst = lrmc::generate_synthetic(
        n, n, rank, ps[pi], alpha, g.seed + static_cast<std::uint64_t>(s));
    const lrmc::SolveResult r = lrmc::solve(
        inst.observed, rank, lrmc::ParamSchedule::oracle(a.eta),
        lrmc::StopRule::truth_rel(a.tol, a.max_iters), &inst.truth);
    rows[static_cast<std::size_t>(i)] = {ps[pi], s, r.iterations,
                                         r.converged, mean_step_ms(r.trace)};
  });

  std::ofstream csv = open_csv(fs::path(g.out) / "iters_vs_p.csv");
  csv << "p,seed,iterations,converged,ms_per_iter\n";
  for (const Row& r : rows)
    csv << fmt(r.p) << ',' << r.seed << ',' << r.iterations << ','
        << (r.converged ? 1 : 0) << ',' << fmt(r.ms_per_iter, "%.3f")
        << '\n';
  return 0;
}

int bench_recoverability(const BenchArgs& a, const GlobalOptions& g) {
  const int n = a.n > 0 ? a.n : 300;
  const int rank = a.rank > 0 ? a.rank : 5;
  const std::vector<double> alphas = parse_double_list(
      a.alphas.empty() ? "0.3,0.35,0.4,0.45,0.5" : a.alphas, "--alphas");
  const std::vector<double> ps =
      parse_double_list(a.ps.empty() ? "1.0,0.1" : a.ps, "--ps");

  struct Cell {
    double alpha, p;
    std::string method;
    std::atomic<int> successes{0};
  };
  std::deque<Cell> cells;
  for (double alpha : alphas)
    for (double p : ps)
      for (const char* m : {"lrmc", "scaledgd"}) {
        cells.emplace_back();
        cells.back().alpha = alpha;
        cells.back().p = p;
        cells.back().method = m;
      }

  struct Task {
    std::size_t cell;
    int trial;
  };
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < cells.size(); ++c)
    for (int t = 0; t < a.trials; ++t) tasks.push_back({c, t});

  parallel_tasks(static_cast<int>(tasks.size()), g.threads, [&](int i) {
    const Task& t = tasks[static_cast<std::size_t>(i)];
    Cell& cell = cells[t.cell];
    const auto inst = lrmc::generate_synthetic(
        n, n, rank, cell.p, cell.alpha,
        g.seed + static_cast<std::uint64_t>(t.trial));
    const auto stop = lrmc::StopRule::truth_rel(a.success_tol, a.max_iters);
    bool ok = false;
    try {
      const lrmc::SolveResult r =
          cell.method == "lrmc"
              ? lrmc::solve(inst.observed, rank,
                            lrmc::ParamSchedule::oracle(a.eta), stop,
                            &inst.truth)
              : lrmc::scaledgd_solve(inst.observed, rank, cell.alpha,
                                     a.eta, stop, &inst.truth);
      ok = r.converged;
    } catch (const lrmc::NumericalFailureError&) {
      ok = false;  // a failed run counts as a non-recovery, not a crash
    }
    if (ok) cell.successes.fetch_add(1);
  });

  std::ofstream csv = open_csv(fs::path(g.out) / "recoverability.csv");
  csv << "alpha,method,p,successes,trials\n";
  for (const Cell& c : cells)
    csv << fmt(c.alpha) << ',' << c.method << ',' << fmt(c.p) << ','
        << c.successes.load() << ',' << a.trials << '\n';
  return 0;
}

int bench_runtime_alpha(const BenchArgs& a, const GlobalOptions& g) {
  const int n = a.n > 0 ? a.n : 2000;
  const int rank = a.rank > 0 ? a.rank : 5;
  const int iters = a.iters > 0 ? a.iters : 100;
  const std::vector<double> alphas = parse_double_list(
      a.alphas.empty() ? "0.1,0.2,0.3,0.4" : a.alphas, "--alphas");

  struct Row {
    double alpha;
    std::string method;
    double ms_per_iter;
  };
  std::vector<Row> rows;
  // Timing suite: sequential on purpose, so concurrent tasks cannot skew
  // per-iteration wall times.
  for (double alpha : alphas) {
    const auto inst = lrmc::generate_synthetic(n, n, rank, a.p, alpha,
                                               g.seed);
    const auto stop = lrmc::StopRule::fixed_iterations(iters);
    // Parameters are irrelevant for step cost; no ground truth is attached
    // so the trace carries pure update timings.
    const lrmc::SolveResult lr =
        lrmc::solve(inst.observed, rank,
                    lrmc::ParamSchedule::fixed(1.0, a.eta), stop);
    rows.push_back({alpha, "lrmc", mean_step_ms(lr.trace)});
    const lrmc::SolveResult sg = lrmc::scaledgd_solve(
        inst.observed, rank, alpha, a.eta, stop);
    rows.push_back({alpha, "scaledgd", mean_step_ms(sg.trace)});
  }

  std::ofstream csv = open_csv(fs::path(g.out) / "runtime_alpha.csv");
  csv << "alpha,method,p,ms_per_iter\n";
  for (const Row& r : rows)
    csv << fmt(r.alpha) << ',' << r.method << ',' << fmt(a.p) << ','
        << fmt(r.ms_per_iter, "%.3f") << '\n';
  return 0;
}

int bench_unfold_models(const BenchArgs& a, const GlobalOptions& g) {
  const int n = a.n > 0 ? a.n : 100;
  const int rank = a.rank > 0 ? a.rank : 3;
  const double alpha = a.alphas.empty()
                           ? 0.1
                           : parse_double_list(a.alphas, "--alphas").front();

  lrmc::ProblemDistribution dist;
  dist.n1 = dist.n2 = n;
  dist.rank = rank;
  dist.p = a.p;
  dist.alpha_min = dist.alpha_max = alpha;
  dist.base_seed = g.seed;

  lrmc::TrainConfig cfg;
  cfg.depth = a.depth;
  cfg.horizon = a.horizon;
  cfg.steps_per_stage = a.steps;
  cfg.eval_pool_size = a.eval_pool;

  // FNN: layer-wise trained feedforward parameters.
  const lrmc::TrainResult fnn = lrmc::layerwise_train(dist, cfg);
  // FRMNN: the same feedforward stack plus a searched recurrent tail.
  const lrmc::GridSearchResult frm_grid =
      lrmc::grid_search_rnn(fnn.schedule, dist, cfg);
  const lrmc::ParamSchedule frmnn = lrmc::ParamSchedule::learned(
      fnn.schedule.zetas(), fnn.schedule.etas(), frm_grid.tail);
  // RNN: depth-0 training (zeta_0 only), then the recurrent tail alone.
  lrmc::TrainConfig rnn_cfg = cfg;
  rnn_cfg.depth = 0;
  rnn_cfg.horizon = a.horizon;
  const lrmc::TrainResult rnn_base = lrmc::layerwise_train(dist, rnn_cfg);
  const lrmc::GridSearchResult rnn_grid =
      lrmc::grid_search_rnn(rnn_base.schedule, dist, rnn_cfg);
  const lrmc::ParamSchedule rnn = lrmc::ParamSchedule::learned(
      rnn_base.schedule.zetas(), rnn_base.schedule.etas(), rnn_grid.tail);

  const fs::path dir(g.out);
  lrmc::save_schedule(fnn.schedule, (dir / "fnn.json").string());
  lrmc::save_schedule(frmnn, (dir / "frmnn.json").string());
  lrmc::save_schedule(rnn, (dir / "rnn.json").string());

  const auto pool =
      lrmc::draw_pool(dist, a.eval_pool, lrmc::kHeldOutPoolSalt);

  struct Model {
    std::string name;
    const lrmc::ParamSchedule* schedule;
    int iters;
  };
  const Model models[] = {
      {"fnn", &fnn.schedule, std::min(a.eval_iters, cfg.depth)},
      {"rnn", &rnn, a.eval_iters},
      {"frmnn", &frmnn, a.eval_iters},
  };

  std::ofstream csv = open_csv(dir / "unfold_models.csv");
  csv << "model,k,mean_rel_err\n";
  for (const Model& m : models) {
    std::vector<double> sums(static_cast<std::size_t>(m.iters) + 1, 0.0);
    for (const auto& inst : pool) {
      const lrmc::SolveResult r =
          lrmc::solve(inst.observed, rank, *m.schedule,
                      lrmc::StopRule::fixed_iterations(m.iters),
                      &inst.truth);
      for (std::size_t k = 0; k < sums.size(); ++k)
        sums[k] += r.trace.records[k].rel_err.value_or(0.0);
    }
    for (std::size_t k = 0; k < sums.size(); ++k)
      csv << m.name << ',' << k << ','
          << fmt(sums[k] / static_cast<double>(pool.size())) << '\n';
  }
  return 0;
}

int cmd_bench(const BenchArgs& a, const GlobalOptions& g) {
  ensure_out_dir(g);
  if (a.suite == "conv-alpha") return bench_conv_alpha(a, g);
  if (a.suite == "iters-vs-p") return bench_iters_vs_p(a, g);
  if (a.suite == "recoverability") return bench_recoverability(a, g);
  if (a.suite == "runtime-alpha") return bench_runtime_alpha(a, g);
  if (a.suite == "unfold-models") return bench_unfold_models(a, g);
  throw lrmc::InvalidParameterError(
      "bench: unknown suite '" + a.suite +
      "' (expected conv-alpha, iters-vs-p, recoverability, runtime-alpha, "
      "or unfold-models)");
}

// ---------------------------------------------------------------------------

int run_cli(const std::vector<std::string>& args, bool allow_config);

/// Expands --config <file> into an equivalent flag vector and reparses.
int run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw lrmc::ConfigurationError(path + ": cannot open for reading");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw lrmc::FormatError(path + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("command") ||
      !j["command"].is_string())
    throw lrmc::FormatError(path +
                            ": config needs a string 'command' field");
  std::vector<std::string> args;
  args.push_back(j["command"].get<std::string>());
  if (j.contains("suite")) {
    args.push_back(j["suite"].get<std::string>());
  }
  for (const auto& [key, value] : j.items()) {
    if (key == "command" || key == "suite") continue;
    if (key == "config")
      throw lrmc::FormatError(path + ": config files cannot nest");
    args.push_back("--" + key);
    if (value.is_boolean()) {
      if (!value.get<bool>()) args.pop_back();
      continue;
    }
    if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) {
        if (!joined.empty()) joined += ',';
        joined += v.is_string() ? v.get<std::string>()
                                : fmt(v.get<double>(), "%.17g");
      }
      args.push_back(joined);
    } else if (value.is_string()) {
      args.push_back(value.get<std::string>());
    } else if (value.is_number_integer()) {
      args.push_back(std::to_string(value.get<long long>()));
    } else if (value.is_number()) {
      args.push_back(fmt(value.get<double>(), "%.17g"));
    } else {
      throw lrmc::FormatError(path + ": unsupported value for key '" + key +
                              "'");
    }
  }
  return run_cli(args, /*allow_config=*/false);
}

int run_cli(const std::vector<std::string>& args, bool allow_config) {
  CLI::App app{"Learned robust matrix completion: low-rank + sparse "
               "recovery from partial observations"};
  app.require_subcommand(0, 1);

  GlobalOptions g;
  if (const char* env = std::getenv("LRMC_THREADS")) g.threads = std::atoi(env);
  if (g.threads <= 0) g.threads = 1;
  std::string config_path;
  app.add_option("--config", config_path,
                 "JSON config file supplying the command and its flags");
  app.add_option("--seed", g.seed, "base RNG seed")->capture_default_str();
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--threads", g.threads,
                 "worker threads for instance-parallel suites")
      ->capture_default_str();
  app.add_option("--reduction", g.reduction,
                 "floating-point reduction mode")
      ->check(CLI::IsMember({"deterministic", "fast"}))
      ->capture_default_str();

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate",
                                      "write a synthetic instance to disk");
  generate->fallthrough();
  generate->add_option("--n1", gen.n1)->capture_default_str();
  generate->add_option("--n2", gen.n2)->capture_default_str();
  generate->add_option("--rank", gen.rank)->capture_default_str();
  generate->add_option("--p", gen.p, "observation rate")->capture_default_str();
  generate->add_option("--alpha", gen.alpha, "outlier fraction of |Omega|")
      ->capture_default_str();

  SolveArgs sol;
  auto* solve_cmd = app.add_subcommand("solve", "run a solver on an instance");
  solve_cmd->fallthrough();
  solve_cmd->add_option("--input", sol.input,
                        "observed.bin or a dense matrix file")
      ->required();
  solve_cmd->add_option("--rank", sol.rank)->capture_default_str();
  solve_cmd->add_option("--schedule", sol.schedule,
                        "oracle[:eta] | fixed:<zeta>,<eta> | <file.json>")
      ->capture_default_str();
  solve_cmd->add_option("--stop", sol.stop, "gt:<tol> | succ:<tol> | iters:<k>")
      ->capture_default_str();
  solve_cmd->add_option("--max-iters", sol.max_iters)->capture_default_str();
  solve_cmd->add_option("--truth", sol.truth, "truth_factors.bin");
  solve_cmd->add_option("--outliers", sol.outliers, "outliers.bin");
  solve_cmd->add_option("--subsample-p", sol.subsample_p,
                        "subsample a dense input at this rate");
  solve_cmd->add_option("--subsample-seed", sol.subsample_seed);
  solve_cmd->add_option("--method", sol.method, "lrmc | scaledgd")
      ->capture_default_str();
  solve_cmd->add_option("--alpha-tilde", sol.alpha_tilde,
                        "scaledgd keep fraction")
      ->capture_default_str();
  solve_cmd->add_option("--eta", sol.eta, "scaledgd step size")
      ->capture_default_str();

  TrainArgs tr;
  auto* train = app.add_subcommand("train",
                                   "learn a parameter schedule by unfolding");
  train->fallthrough();
  train->add_option("--n1", tr.n1)->capture_default_str();
  train->add_option("--n2", tr.n2)->capture_default_str();
  train->add_option("--rank", tr.rank)->capture_default_str();
  train->add_option("--p", tr.p)->capture_default_str();
  train->add_option("--alpha", tr.alpha)->capture_default_str();
  train->add_option("--depth", tr.depth, "feedforward depth K")
      ->capture_default_str();
  train->add_option("--horizon", tr.horizon,
                    "tail-search horizon Kbar (0 = K+5)")
      ->capture_default_str();
  train->add_option("--steps", tr.steps, "SGD steps per stage")
      ->capture_default_str();
  train->add_option("--lr", tr.lr, "learning rate")->capture_default_str();
  train->add_option("--eval-pool", tr.eval_pool)->capture_default_str();
  train->add_flag("--no-rnn", tr.no_rnn, "skip the recurrent-tail search");

  BenchArgs be;
  auto* bench = app.add_subcommand("bench", "run an experiment suite");
  bench->fallthrough();
  bench->add_option("suite", be.suite,
                    "conv-alpha | iters-vs-p | recoverability | "
                    "runtime-alpha | unfold-models")
      ->required();
  bench->add_option("--n", be.n, "problem dimension (suite default if 0)");
  bench->add_option("--rank", be.rank)->capture_default_str();
  bench->add_option("--p", be.p)->capture_default_str();
  bench->add_option("--alphas", be.alphas, "comma-separated outlier levels");
  bench->add_option("--ps", be.ps, "comma-separated observation rates");
  bench->add_option("--seeds", be.seeds, "instances per cell");
  bench->add_option("--trials", be.trials)->capture_default_str();
  bench->add_option("--iters", be.iters, "fixed iteration count");
  bench->add_option("--max-iters", be.max_iters)->capture_default_str();
  bench->add_option("--eta", be.eta)->capture_default_str();
  bench->add_option("--tol", be.tol)->capture_default_str();
  bench->add_option("--success-tol", be.success_tol)->capture_default_str();
  bench->add_option("--depth", be.depth)->capture_default_str();
  bench->add_option("--horizon", be.horizon)->capture_default_str();
  bench->add_option("--steps", be.steps)->capture_default_str();
  bench->add_option("--eval-pool", be.eval_pool)->capture_default_str();
  bench->add_option("--eval-iters", be.eval_iters)->capture_default_str();

  std::vector<const char*> argv;
  argv.push_back("lrmc");
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (!config_path.empty()) {
    if (!allow_config)
      throw lrmc::FormatError("config files cannot nest");
    if (app.get_subcommands().empty()) return run_config(config_path);
    throw lrmc::InvalidParameterError(
        "--config cannot be combined with a command line subcommand");
  }

  if (generate->parsed()) return cmd_generate(gen, g);
  if (solve_cmd->parsed()) return cmd_solve(sol, g);
  if (train->parsed()) return cmd_train(tr, g);
  if (bench->parsed()) return cmd_bench(be, g);
  std::cerr << app.help();
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return run_cli(args, /*allow_config=*/true);
  } catch (const lrmc::NumericalFailureError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 4;
  } catch (const lrmc::ConfigurationError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 3;
  } catch (const lrmc::FormatError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 3;
  } catch (const lrmc::Error& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
}

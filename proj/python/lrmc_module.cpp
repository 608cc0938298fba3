// Python bindings for the core operations: thresholding kernels, truncated
// SVD, synthetic-problem generation, the solvers, and schedule files.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <optional>

#include "lrmc/errors.hpp"
#include "lrmc/matops.hpp"
#include "lrmc/problems.hpp"
#include "lrmc/schedules.hpp"
#include "lrmc/solver.hpp"
#include "lrmc/training.hpp"

namespace py = pybind11;
using namespace lrmc;

namespace {

using IndexArray =
    Eigen::Matrix<std::uint32_t, Eigen::Dynamic, 2, Eigen::RowMajor>;

IndexArray coords_array(const IndexSet& s) {
  IndexArray out(static_cast<Index>(s.size()), 2);
  for (std::size_t e = 0; e < s.size(); ++e) {
    out(static_cast<Index>(e), 0) = s[e].row;
    out(static_cast<Index>(e), 1) = s[e].col;
  }
  return out;
}

py::dict trace_dict(const SolveTrace& trace) {
  const Index n = static_cast<Index>(trace.records.size());
  Vector ks(n), rel(n), succ(n), supp(n), zeta(n), eta(n), ms(n);
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  for (Index i = 0; i < n; ++i) {
    const TraceRecord& r = trace.records[static_cast<std::size_t>(i)];
    ks[i] = r.k;
    rel[i] = r.rel_err.value_or(nan);
    succ[i] = r.succ_change.value_or(nan);
    supp[i] = static_cast<double>(r.supp_size);
    zeta[i] = r.zeta;
    eta[i] = r.eta.value_or(nan);
    ms[i] = r.ms;
  }
  py::dict d;
  d["k"] = ks;
  d["rel_err"] = rel;
  d["succ_change"] = succ;
  d["supp_size"] = supp;
  d["zeta"] = zeta;
  d["eta"] = eta;
  d["ms"] = ms;
  return d;
}

py::dict result_dict(const SolveResult& r) {
  py::dict d;
  d["L"] = r.factors.L;
  d["R"] = r.factors.R;
  d["converged"] = r.converged;
  d["iterations"] = r.iterations;
  d["sparse_indices"] = coords_array(r.sparse.support);
  d["sparse_values"] = Vector(r.sparse.values);
  d["trace"] = trace_dict(r.trace);
  return d;
}

StopRule make_stop(const std::string& kind, double tol, int max_iters) {
  if (kind == "iters") return StopRule::fixed_iterations(max_iters);
  if (kind == "gt") return StopRule::truth_rel(tol, max_iters);
  if (kind == "succ") return StopRule::successive_rel(tol, max_iters);
  throw InvalidParameterError("stop must be 'iters', 'gt', or 'succ'");
}

}  // namespace

PYBIND11_MODULE(lrmc, m) {
  m.doc() = "Learned robust matrix completion: low-rank + sparse recovery "
            "from partial observations";

  py::register_exception<Error>(m, "LrmcError", PyExc_RuntimeError);

  py::class_<ParamSchedule>(m, "ParamSchedule")
      .def_static("fixed", &ParamSchedule::fixed, py::arg("zeta"),
                  py::arg("eta"))
      .def_static("oracle", &ParamSchedule::oracle, py::arg("eta") = 0.5)
      .def_static(
          "learned",
          [](std::vector<double> zeta, std::vector<double> eta,
             std::optional<std::pair<double, double>> rnn) {
            std::optional<RnnTail> tail;
            if (rnn) tail = RnnTail{rnn->first, rnn->second};
            return ParamSchedule::learned(std::move(zeta), std::move(eta),
                                          tail);
          },
          py::arg("zeta"), py::arg("eta"),
          py::arg("rnn") = std::nullopt)
      .def("param_at", &ParamSchedule::param_at, py::arg("k"))
      .def("zeta0", &ParamSchedule::zeta0)
      .def_property_readonly("depth", &ParamSchedule::depth)
      .def_property_readonly("zetas", &ParamSchedule::zetas)
      .def_property_readonly("etas", &ParamSchedule::etas)
      .def_property_readonly("rnn", [](const ParamSchedule& s) {
        std::optional<std::pair<double, double>> out;
        if (s.rnn()) out = {s.rnn()->beta, s.rnn()->phi};
        return out;
      });

  m.def("save_schedule", &save_schedule, py::arg("schedule"), py::arg("path"));
  m.def("load_schedule", &load_schedule, py::arg("path"));

  m.def("soft_threshold",
        py::overload_cast<const DenseMatrix&, double>(&soft_threshold),
        py::arg("M"), py::arg("zeta"),
        "Entrywise sign(m) * max(0, |m| - zeta).");
  m.def("sparsify_top_fraction",
        py::overload_cast<const DenseMatrix&, double>(&sparsify_top_fraction),
        py::arg("M"), py::arg("alpha_tilde"),
        "Keep entries in the top alpha_tilde magnitude fraction of both "
        "their row and their column.");
  m.def(
      "truncated_svd",
      [](const DenseMatrix& M, int rank) {
        const SVDTriple t = truncated_svd(M, rank);
        return py::make_tuple(t.U, t.sigma, t.V);
      },
      py::arg("M"), py::arg("rank"), "Top-rank singular triple (U, s, V).");
  m.def("spectral_norm_est",
        py::overload_cast<const DenseMatrix&, double, int, std::uint64_t>(
            &spectral_norm_est),
        py::arg("M"), py::arg("rel_tol") = 1e-6, py::arg("max_iters") = 1000,
        py::arg("seed") = 0x5eedu);
  m.def(
      "incoherence",
      [](const DenseMatrix& L, const DenseMatrix& R) {
        const IncoherenceStats st = incoherence(L, R);
        return py::make_tuple(st.mu, st.kappa, st.sigma_r);
      },
      py::arg("L"), py::arg("R"), "(mu, kappa, sigma_r) of L R^T.");

  py::class_<SyntheticInstance>(m, "SyntheticInstance")
      .def_property_readonly(
          "p", [](const SyntheticInstance& s) { return s.observed.p; })
      .def_property_readonly(
          "seed", [](const SyntheticInstance& s) { return s.seed; })
      .def_property_readonly(
          "alpha", [](const SyntheticInstance& s) { return s.truth.alpha; })
      .def_property_readonly(
          "mu", [](const SyntheticInstance& s) { return s.truth.mu; })
      .def_property_readonly(
          "kappa", [](const SyntheticInstance& s) { return s.truth.kappa; })
      .def_property_readonly(
          "sigma_r",
          [](const SyntheticInstance& s) { return s.truth.sigma_r; })
      .def("observed_dense",
           [](const SyntheticInstance& s) { return s.observed.data.to_dense(); })
      .def("omega",
           [](const SyntheticInstance& s) {
             return coords_array(s.observed.support());
           })
      .def("observed_values",
           [](const SyntheticInstance& s) {
             return Vector(s.observed.data.values());
           })
      .def("truth_factors",
           [](const SyntheticInstance& s) {
             return py::make_tuple(s.truth.Lstar, s.truth.Rstar);
           })
      .def("outliers", [](const SyntheticInstance& s) {
        return py::make_tuple(coords_array(s.truth.Sstar.support),
                              Vector(s.truth.Sstar.values));
      });

  m.def("generate_synthetic", &generate_synthetic, py::arg("n1"),
        py::arg("n2"), py::arg("rank"), py::arg("p"), py::arg("alpha"),
        py::arg("seed"),
        "Gaussian-factor instance with a Bernoulli mask and planted "
        "outliers.");

  m.def(
      "solve_instance",
      [](const SyntheticInstance& inst, int rank,
         const ParamSchedule& schedule, const std::string& stop, double tol,
         int max_iters, bool use_truth) {
        const StopRule rule = make_stop(stop, tol, max_iters);
        return result_dict(solve(inst.observed, rank, schedule, rule,
                                 use_truth ? &inst.truth : nullptr));
      },
      py::arg("instance"), py::arg("rank"), py::arg("schedule"),
      py::arg("stop") = "iters", py::arg("tol") = 1e-6,
      py::arg("max_iters") = 100, py::arg("use_truth") = true);

  m.def(
      "solve_dense",
      [](const DenseMatrix& Y, int rank, const ParamSchedule& schedule,
         const std::string& stop, double tol, int max_iters) {
        const StopRule rule = make_stop(stop, tol, max_iters);
        return result_dict(solve(observe_all(Y), rank, schedule, rule));
      },
      py::arg("Y"), py::arg("rank"), py::arg("schedule"),
      py::arg("stop") = "succ", py::arg("tol") = 1e-2,
      py::arg("max_iters") = 500,
      "Solve a fully observed dense matrix (p = 1).");

  m.def(
      "scaledgd_instance",
      [](const SyntheticInstance& inst, int rank, double alpha_tilde,
         double eta, const std::string& stop, double tol, int max_iters,
         bool use_truth) {
        const StopRule rule = make_stop(stop, tol, max_iters);
        return result_dict(scaledgd_solve(inst.observed, rank, alpha_tilde,
                                          eta, rule,
                                          use_truth ? &inst.truth : nullptr));
      },
      py::arg("instance"), py::arg("rank"), py::arg("alpha_tilde"),
      py::arg("eta") = 0.5, py::arg("stop") = "iters", py::arg("tol") = 1e-6,
      py::arg("max_iters") = 100, py::arg("use_truth") = true);
}

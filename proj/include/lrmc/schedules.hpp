#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lrmc {

/// Geometric tail shared by all recurrent layers: for k past the
/// feedforward depth K, eta_k = beta * eta_{k-1} and zeta_k = phi * zeta_{k-1}.
struct RnnTail {
  double beta;
  double phi;
};

/// Per-iteration parameters (zeta_k, eta_k) under one of three regimes:
/// a fixed pair, the ground-truth oracle, or a learned feedforward list
/// with an optional recurrent tail.
class ParamSchedule {
 public:
  enum class Kind { Fixed, Oracle, Learned };

  /// Defaults to fixed (zeta = 0, eta = 0.5).
  ParamSchedule() = default;

  static ParamSchedule fixed(double zeta, double eta);

  /// Oracle thresholds are resolved inside the solver (they need the
  /// ground truth); the step size is the fixed constant given here.
  static ParamSchedule oracle(double eta = 0.5);

  /// zeta holds K+1 entries (zeta_0 .. zeta_K), eta holds K entries
  /// (eta_1 .. eta_K).
  static ParamSchedule learned(std::vector<double> zeta,
                               std::vector<double> eta,
                               std::optional<RnnTail> rnn = std::nullopt);

  Kind kind() const { return kind_; }

  /// Feedforward depth K (learned kind only; 0 otherwise).
  int depth() const { return depth_; }

  const std::optional<RnnTail>& rnn() const { return rnn_; }
  const std::vector<double>& zetas() const { return zeta_; }
  const std::vector<double>& etas() const { return eta_; }

  /// (zeta_k, eta_k) for iteration k >= 1. Learned schedules extend past
  /// K through the recurrent tail when present and otherwise raise
  /// ScheduleExhaustedError (the run-K-iterations stop). Oracle schedules
  /// raise ConfigurationError: their thresholds live in the solver.
  std::pair<double, double> param_at(int k) const;

  /// Initialization threshold zeta_0. Oracle kind raises
  /// ConfigurationError (the solver computes ||X*||_inf itself).
  double zeta0() const;

  /// Step size of the oracle regime.
  double oracle_eta() const;

  friend bool operator==(const ParamSchedule& a, const ParamSchedule& b);

 private:
  void validate() const;

  Kind kind_ = Kind::Fixed;
  int depth_ = 0;
  double fixed_zeta_ = 0.0;
  double fixed_eta_ = 0.5;
  std::vector<double> zeta_;
  std::vector<double> eta_;
  std::optional<RnnTail> rnn_;
};

/// Recurrent-tail step-size anchor for depth-0 learned schedules, which
/// carry no eta_K to extend from. Mid-range of the provably safe step
/// sizes.
inline constexpr double kDepthZeroEtaAnchor = 0.5;

/// JSON round trip. Learned:
///   {"kind":"learned","K":int,"zeta":[...],"eta":[...],
///    "rnn":{"beta":f,"phi":f} | null}
/// Fixed: {"kind":"fixed","zeta":f,"eta":f}
/// Oracle: {"kind":"oracle","eta":f}
void save_schedule(const ParamSchedule& schedule, const std::string& path);
ParamSchedule load_schedule(const std::string& path);

}  // namespace lrmc

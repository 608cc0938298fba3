#include "lrmc/schedules.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "lrmc/errors.hpp"

namespace lrmc {

using nlohmann::json;

ParamSchedule ParamSchedule::fixed(double zeta, double eta) {
  ParamSchedule s;
  s.kind_ = Kind::Fixed;
  s.fixed_zeta_ = zeta;
  s.fixed_eta_ = eta;
  s.validate();
  return s;
}

ParamSchedule ParamSchedule::oracle(double eta) {
  ParamSchedule s;
  s.kind_ = Kind::Oracle;
  s.fixed_eta_ = eta;
  s.validate();
  return s;
}

ParamSchedule ParamSchedule::learned(std::vector<double> zeta,
                                     std::vector<double> eta,
                                     std::optional<RnnTail> rnn) {
  ParamSchedule s;
  s.kind_ = Kind::Learned;
  s.zeta_ = std::move(zeta);
  s.eta_ = std::move(eta);
  s.rnn_ = rnn;
  s.depth_ = static_cast<int>(s.eta_.size());
  s.validate();
  return s;
}

void ParamSchedule::validate() const {
  auto bad = [](const std::string& field, const std::string& why) {
    throw InvalidParameterError("ParamSchedule: " + field + " " + why);
  };
  switch (kind_) {
    case Kind::Fixed:
      if (!(fixed_zeta_ >= 0.0) || !std::isfinite(fixed_zeta_))
        bad("zeta", "must be finite and >= 0");
      if (!(fixed_eta_ > 0.0) || !std::isfinite(fixed_eta_))
        bad("eta", "must be finite and > 0");
      break;
    case Kind::Oracle:
      if (!(fixed_eta_ > 0.0) || !std::isfinite(fixed_eta_))
        bad("eta", "must be finite and > 0");
      break;
    case Kind::Learned:
      if (zeta_.size() != eta_.size() + 1)
        bad("zeta", "must hold K+1 entries when eta holds K");
      for (std::size_t i = 0; i < zeta_.size(); ++i)
        if (!(zeta_[i] >= 0.0) || !std::isfinite(zeta_[i]))
          bad("zeta[" + std::to_string(i) + "]", "must be finite and >= 0");
      for (std::size_t i = 0; i < eta_.size(); ++i)
        if (!(eta_[i] > 0.0) || !std::isfinite(eta_[i]))
          bad("eta[" + std::to_string(i + 1) + "]", "must be finite and > 0");
      if (rnn_) {
        if (!(rnn_->beta > 0.0 && rnn_->beta <= 1.0))
          bad("rnn.beta", "must lie in (0, 1]");
        if (!(rnn_->phi > 0.0 && rnn_->phi <= 1.0))
          bad("rnn.phi", "must lie in (0, 1]");
      }
      break;
  }
}

std::pair<double, double> ParamSchedule::param_at(int k) const {
  if (k < 1)
    throw InvalidParameterError("param_at: iteration index must be >= 1");
  switch (kind_) {
    case Kind::Fixed:
      return {fixed_zeta_, fixed_eta_};
    case Kind::Oracle:
      throw ConfigurationError(
          "param_at: oracle thresholds require ground truth; they are "
          "resolved inside solve()");
    case Kind::Learned:
      break;
  }
  if (k <= depth_)
    return {zeta_[static_cast<std::size_t>(k)],
            eta_[static_cast<std::size_t>(k - 1)]};
  if (!rnn_)
    throw ScheduleExhaustedError(
        "param_at: feedforward schedule of depth " + std::to_string(depth_) +
        " has no parameters for iteration " + std::to_string(k) +
        " (no recurrent tail)");
  double zeta = zeta_.back();
  double eta = depth_ > 0 ? eta_.back() : kDepthZeroEtaAnchor;
  for (int i = depth_; i < k; ++i) {
    zeta *= rnn_->phi;
    eta *= rnn_->beta;
  }
  return {zeta, eta};
}

double ParamSchedule::zeta0() const {
  switch (kind_) {
    case Kind::Fixed:
      return fixed_zeta_;
    case Kind::Learned:
      return zeta_.front();
    case Kind::Oracle:
      break;
  }
  throw ConfigurationError(
      "zeta0: the oracle initialization threshold is ||X*||_inf and is "
      "computed inside solve()");
}

double ParamSchedule::oracle_eta() const {
  if (kind_ != Kind::Oracle)
    throw ConfigurationError("oracle_eta: schedule is not oracle-kind");
  return fixed_eta_;
}

bool operator==(const ParamSchedule& a, const ParamSchedule& b) {
  if (a.kind_ != b.kind_) return false;
  switch (a.kind_) {
    case ParamSchedule::Kind::Fixed:
      return a.fixed_zeta_ == b.fixed_zeta_ && a.fixed_eta_ == b.fixed_eta_;
    case ParamSchedule::Kind::Oracle:
      return a.fixed_eta_ == b.fixed_eta_;
    case ParamSchedule::Kind::Learned:
      return a.zeta_ == b.zeta_ && a.eta_ == b.eta_ &&
             a.rnn_.has_value() == b.rnn_.has_value() &&
             (!a.rnn_ || (a.rnn_->beta == b.rnn_->beta &&
                          a.rnn_->phi == b.rnn_->phi));
  }
  return false;
}

namespace {

double require_number(const json& j, const std::string& field) {
  if (!j.contains(field) || !j[field].is_number())
    throw FormatError("schedule: missing or non-numeric field '" + field +
                      "'");
  return j[field].get<double>();
}

}  // namespace

void save_schedule(const ParamSchedule& schedule, const std::string& path) {
  json j;
  switch (schedule.kind()) {
    case ParamSchedule::Kind::Fixed:
      j["kind"] = "fixed";
      j["zeta"] = schedule.zeta0();
      j["eta"] = schedule.param_at(1).second;
      break;
    case ParamSchedule::Kind::Oracle:
      j["kind"] = "oracle";
      j["eta"] = schedule.oracle_eta();
      break;
    case ParamSchedule::Kind::Learned:
      j["kind"] = "learned";
      j["K"] = schedule.depth();
      j["zeta"] = schedule.zetas();
      j["eta"] = schedule.etas();
      if (schedule.rnn())
        j["rnn"] = {{"beta", schedule.rnn()->beta},
                    {"phi", schedule.rnn()->phi}};
      else
        j["rnn"] = nullptr;
      break;
  }
  std::ofstream out(path);
  if (!out) throw FormatError(path + ": cannot open for writing");
  out << j.dump(2) << '\n';
}

ParamSchedule load_schedule(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open for reading");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
    throw FormatError(path + ": schedule file needs a string 'kind' field");
  const std::string kind = j["kind"].get<std::string>();
  try {
    if (kind == "fixed")
      return ParamSchedule::fixed(require_number(j, "zeta"),
                                  require_number(j, "eta"));
    if (kind == "oracle")
      return ParamSchedule::oracle(j.contains("eta") ? require_number(j, "eta")
                                                     : 0.5);
    if (kind == "learned") {
      if (!j.contains("zeta") || !j["zeta"].is_array())
        throw FormatError(path + ": field 'zeta' must be an array");
      if (!j.contains("eta") || !j["eta"].is_array())
        throw FormatError(path + ": field 'eta' must be an array");
      std::optional<RnnTail> rnn;
      if (j.contains("rnn") && !j["rnn"].is_null()) {
        const json& r = j["rnn"];
        rnn = RnnTail{require_number(r, "beta"), require_number(r, "phi")};
      }
      const auto zeta = j["zeta"].get<std::vector<double>>();
      const auto eta = j["eta"].get<std::vector<double>>();
      if (j.contains("K") && j["K"].is_number_integer() &&
          j["K"].get<int>() != static_cast<int>(eta.size()))
        throw FormatError(path + ": field 'K' disagrees with the eta list");
      return ParamSchedule::learned(zeta, eta, rnn);
    }
  } catch (const InvalidParameterError& e) {
    throw FormatError(path + ": " + e.what());
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  throw FormatError(path + ": unknown schedule kind '" + kind + "'");
}

}  // namespace lrmc

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "lrmc/errors.hpp"
#include "lrmc/rng.hpp"
#include "lrmc/schedules.hpp"

using namespace lrmc;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "lrmc_schedules_test";
  fs::create_directories(dir);
  return dir / name;
}

ParamSchedule random_schedule(RandomStream& rng) {
  switch (rng.below(3)) {
    case 0:
      return ParamSchedule::fixed(rng.uniform(0.0, 2.0),
                                  rng.uniform(0.01, 1.5));
    case 1:
      return ParamSchedule::oracle(rng.uniform(0.25, 8.0 / 9.0));
    default: {
      const int depth = static_cast<int>(rng.below(6));
      std::vector<double> zeta, eta;
      for (int i = 0; i <= depth; ++i) zeta.push_back(rng.uniform(0.0, 3.0));
      for (int i = 0; i < depth; ++i) eta.push_back(rng.uniform(0.01, 1.5));
      std::optional<RnnTail> rnn;
      if (rng.next_double() < 0.6)
        rnn = RnnTail{rng.uniform(0.05, 1.0), rng.uniform(0.05, 1.0)};
      return ParamSchedule::learned(zeta, eta, rnn);
    }
  }
}

}  // namespace

TEST_CASE("fixed schedules return their constants") {
  const ParamSchedule s = ParamSchedule::fixed(0.1, 0.5);
  for (int k : {1, 2, 17, 400}) {
    const auto [zeta, eta] = s.param_at(k);
    CHECK(zeta == 0.1);
    CHECK(eta == 0.5);
  }
  CHECK(s.zeta0() == 0.1);
  CHECK_THROWS_AS(s.param_at(0), InvalidParameterError);
}

TEST_CASE("learned schedule geometric tail") {
  const ParamSchedule s = ParamSchedule::learned(
      {1.0, 0.8, 0.6}, {0.5, 0.4}, RnnTail{0.9, 0.7});
  CHECK(s.depth() == 2);
  CHECK(s.zeta0() == 1.0);
  const auto [z2, e2] = s.param_at(2);
  CHECK(z2 == 0.6);
  CHECK(e2 == 0.4);
  const auto [z4, e4] = s.param_at(4);
  CHECK(e4 == doctest::Approx(0.4 * 0.9 * 0.9).epsilon(1e-15));
  CHECK(z4 == doctest::Approx(0.6 * 0.7 * 0.7).epsilon(1e-15));
}

TEST_CASE("unit decay keeps the tail constant") {
  const ParamSchedule s =
      ParamSchedule::learned({1.0, 0.5}, {0.6}, RnnTail{1.0, 1.0});
  for (int k : {2, 10, 100}) {
    const auto [zeta, eta] = s.param_at(k);
    CHECK(zeta == 0.5);
    CHECK(eta == 0.6);
  }
}

TEST_CASE("depth-zero schedule with a tail runs unbounded") {
  const ParamSchedule s =
      ParamSchedule::learned({2.0}, {}, RnnTail{0.9, 0.8});
  const auto [z1, e1] = s.param_at(1);
  CHECK(z1 == doctest::Approx(2.0 * 0.8).epsilon(1e-15));
  CHECK(e1 == doctest::Approx(kDepthZeroEtaAnchor * 0.9).epsilon(1e-15));
  CHECK_NOTHROW(s.param_at(1000));
}

TEST_CASE("feedforward schedules exhaust past their depth") {
  const ParamSchedule s = ParamSchedule::learned({1.0, 0.5}, {0.6});
  CHECK_NOTHROW(s.param_at(1));
  CHECK_THROWS_AS(s.param_at(2), ScheduleExhaustedError);
}

TEST_CASE("tail ratios equal the decay factors") {
  const ParamSchedule s = ParamSchedule::learned(
      {1.3, 0.9}, {0.45}, RnnTail{0.85, 0.6});
  for (int k = 1; k < 40; ++k) {
    const auto [z0, e0] = s.param_at(k);
    const auto [z1, e1] = s.param_at(k + 1);
    CHECK(e1 / e0 == doctest::Approx(0.85).epsilon(1e-14));
    CHECK(z1 / z0 == doctest::Approx(0.6).epsilon(1e-14));
  }
}

TEST_CASE("oracle schedules defer to the solver") {
  const ParamSchedule s = ParamSchedule::oracle(0.5);
  CHECK(s.oracle_eta() == 0.5);
  CHECK_THROWS_AS(s.param_at(1), ConfigurationError);
  CHECK_THROWS_AS(s.zeta0(), ConfigurationError);
}

TEST_CASE("invariant violations are rejected with the field name") {
  CHECK_THROWS_AS(ParamSchedule::fixed(-0.1, 0.5), InvalidParameterError);
  CHECK_THROWS_AS(ParamSchedule::fixed(0.1, 0.0), InvalidParameterError);
  CHECK_THROWS_AS(ParamSchedule::learned({1.0}, {0.5}),
                  InvalidParameterError);  // zeta must hold K+1 entries
  try {
    ParamSchedule::learned({1.0, 0.5, 0.2}, {0.5, -0.4});
    FAIL("expected InvalidParameterError");
  } catch (const InvalidParameterError& e) {
    CHECK(std::string(e.what()).find("eta[2]") != std::string::npos);
  }
  CHECK_THROWS_AS(
      ParamSchedule::learned({1.0, 0.5}, {0.5}, RnnTail{1.1, 0.5}),
      InvalidParameterError);
}

TEST_CASE("save/load round trip preserves schedules structurally") {
  RandomStream rng(91, 1);
  const fs::path path = temp_file("schedule.json");
  for (int trial = 0; trial < 40; ++trial) {
    const ParamSchedule s = random_schedule(rng);
    save_schedule(s, path.string());
    const ParamSchedule back = load_schedule(path.string());
    CHECK(back == s);
  }
}

TEST_CASE("loading rejects invalid files with context") {
  const fs::path path = temp_file("bad.json");
  {
    std::ofstream out(path);
    out << R"({"kind":"learned","K":1,"zeta":[1.0,0.5],"eta":[-0.5]})";
  }
  try {
    load_schedule(path.string());
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("eta") != std::string::npos);
  }
  {
    std::ofstream out(path);
    out << R"({"kind":"unknown"})";
  }
  CHECK_THROWS_AS(load_schedule(path.string()), FormatError);
  {
    std::ofstream out(path);
    out << "not json";
  }
  CHECK_THROWS_AS(load_schedule(path.string()), FormatError);
}

TEST_CASE("hand-written depth-zero file is usable without limit") {
  const fs::path path = temp_file("k0.json");
  {
    std::ofstream out(path);
    out << R"({"kind":"learned","K":0,"zeta":[1.5],"eta":[],)"
        << R"("rnn":{"beta":0.9,"phi":0.8}})";
  }
  const ParamSchedule s = load_schedule(path.string());
  CHECK(s.depth() == 0);
  CHECK(s.zeta0() == 1.5);
  const auto [z50, e50] = s.param_at(50);
  CHECK(z50 > 0.0);
  CHECK(e50 > 0.0);
}

TEST_CASE("every reachable parameter satisfies the type invariants") {
  RandomStream rng(92, 1);
  for (int trial = 0; trial < 60; ++trial) {
    const ParamSchedule s = random_schedule(rng);
    if (s.kind() == ParamSchedule::Kind::Oracle) continue;
    const int limit =
        (s.kind() == ParamSchedule::Kind::Learned && !s.rnn())
            ? s.depth()
            : 200;
    CHECK(s.zeta0() >= 0.0);
    for (int k = 1; k <= limit; ++k) {
      const auto [zeta, eta] = s.param_at(k);
      CHECK(zeta >= 0.0);
      CHECK(eta > 0.0);
    }
  }
}

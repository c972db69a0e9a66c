#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gcausal/harness.hpp"

using namespace gcausal;
using nlohmann::json;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("gcausal-test-" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct env_guard {
  env_guard() { unsetenv(harness::seed_env_var); }
  ~env_guard() { unsetenv(harness::seed_env_var); }
};

}  // namespace

TEST(Config, ParseEmitRoundTrip) {
  const auto cfg = harness::default_config();
  EXPECT_EQ(config::parse(config::emit(cfg)), cfg);
  EXPECT_EQ(config::get<std::string>(cfg, "discovery.test"), "KS");
  EXPECT_EQ(config::get<int>(cfg, "forecaster.hidden_width"), 32);
  EXPECT_EQ(config::at_path(cfg, "sweep.values").size(), 3u);
}

TEST(Config, ParseErrors) {
  EXPECT_THROW(config::parse("x = "), error);
  EXPECT_THROW(config::parse("[unterminated"), error);
  EXPECT_THROW(config::parse("a = \"open"), error);
  try {
    config::parse("a = 1\na = 2\n");
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.kind(), error_kind::config);
  }
}

TEST(Config, SetPathAndMerge) {
  json j = json::object();
  config::set_path(j, "discovery.alpha=0.01");
  config::set_path(j, "method=mc-vgc");
  config::set_path(j, "sweep.values=[1, 2]");
  EXPECT_DOUBLE_EQ(j["discovery"]["alpha"].get<double>(), 0.01);
  EXPECT_EQ(j["method"], "mc-vgc");
  EXPECT_EQ(j["sweep"]["values"].size(), 2u);
  EXPECT_THROW(config::set_path(j, "novalue"), error);

  env_guard g;
  const auto cfg = harness::resolve(config::parse("[discovery]\nalpha = 0.1\ntest = \"CVM\"\n"), {"discovery.alpha=0.2"});
  EXPECT_DOUBLE_EQ(config::get<double>(cfg, "discovery.alpha"), 0.2);
  EXPECT_EQ(config::get<std::string>(cfg, "discovery.test"), "CVM");
  EXPECT_EQ(config::get<int>(cfg, "discovery.stride"), 0);
}

TEST(Config, SeedPrecedence) {
  env_guard g;
  EXPECT_EQ(harness::seed_of(harness::resolve(json::object())), 0u);
  setenv(harness::seed_env_var, "77", 1);
  EXPECT_EQ(harness::seed_of(harness::resolve(json::object())), 77u);
  EXPECT_EQ(harness::seed_of(harness::resolve(config::parse("seed = 5\n"))), 5u);
  EXPECT_EQ(harness::seed_of(harness::resolve(json::object(), {"seed=9"})), 9u);
  setenv(harness::seed_env_var, "abc", 1);
  EXPECT_THROW(harness::resolve(json::object()), error);
  unsetenv(harness::seed_env_var);
  EXPECT_THROW(harness::resolve(json::object(), {"seed=-1"}), error);
}

TEST(Harness, MissingGroupsFileNamesThePath) {
  env_guard g;
  const auto dir = scratch("groups");
  {
    std::ofstream(dir / "panel.csv") << "a,b\n1,2\n3,4\n";
  }
  const std::string missing = (dir / "nope.json").string();
  const auto cfg = harness::resolve(json::object(), {"data.panel=\"" + (dir / "panel.csv").string() + "\"",
                                                     "data.groups=\"" + missing + "\""});
  try {
    harness::load_dataset(cfg);
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.kind(), error_kind::config);
    EXPECT_NE(std::string(e.what()).find(missing), std::string::npos);
  }
}

TEST(Harness, GroupsFileByIndexAndName) {
  const auto dir = scratch("groupfile");
  {
    std::ofstream(dir / "g.json") << R"({"groups": [["b", "a"], [2]]})";
  }
  const time_series_panel p(MatrixXd::Zero(3, 3), {"a", "b", "c"});
  const auto [partition, names] = harness::load_groups((dir / "g.json").string(), p);
  EXPECT_EQ(partition.size(), 2);
  EXPECT_EQ(partition.group_of(2), 1);
  EXPECT_EQ(partition.group_of(0), 0);
  {
    std::ofstream(dir / "bad.json") << R"({"groups": [["a", "zz"], ["b", "c"]]})";
  }
  EXPECT_THROW(harness::load_groups((dir / "bad.json").string(), p), error);
}

TEST(Harness, SimulateArtifacts) {
  env_guard g;
  const auto cfg = harness::resolve(json::object(), {"scm.length=300", "seed=3"});
  const auto dir = scratch("simulate");
  harness::write_simulate(harness::run_simulate(cfg), cfg, dir);
  for (const char* f : {"panel.csv", "truth.json", "spec.json", "groups.json", "resolved_config.toml"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  std::ifstream in(dir / "panel.csv");
  const auto back = parse_panel_csv(in, missing_policy::error, "panel.csv");
  EXPECT_EQ(back.length(), 300);
  EXPECT_EQ(back.variables(), 4);
}

TEST(Harness, BenchmarkShapeAndDeterminism) {
  env_guard g;
  const auto cfg = harness::resolve(json::object(), {"sweep.methods=[\"mc-vgc\"]", "scm.length=500", "seed=11"});
  const auto a = harness::run_benchmark(cfg);
  EXPECT_EQ(a.rows.size(), 9u);
  EXPECT_EQ(a.aggregates.size(), 3u);
  EXPECT_EQ(a.failed_fraction, 0.0);
  const auto d1 = scratch("bench1"), d2 = scratch("bench2");
  harness::write_benchmark(a, cfg, d1);
  harness::write_benchmark(harness::run_benchmark(cfg), cfg, d2);
  for (const char* f : {"results.csv", "summary.csv", "plot.csv", "results.json"})
    EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;

  const auto one = harness::resolve(json::object(), {"sweep.methods=[\"mc-vgc\"]", "sweep.threads=1", "scm.length=500", "seed=11"});
  const auto b = harness::run_benchmark(one);
  for (std::size_t k = 0; k < a.rows.size(); ++k) EXPECT_EQ(a.rows[k].score.f_score, b.rows[k].score.f_score);
}

TEST(Harness, GcdmiSweepPoint) {
  env_guard g;
  const auto cfg = harness::resolve(json::object(), {"sweep.values=[0.9]", "sweep.trials=2", "seed=2"});
  const auto r = harness::run_benchmark(cfg);
  ASSERT_EQ(r.aggregates.size(), 1u);
  EXPECT_EQ(r.aggregates[0].ok_trials, 2);
  EXPECT_GE(r.aggregates[0].mean_precision, 0.0);
  EXPECT_LE(r.aggregates[0].mean_f, 1.0);
  for (const auto& row : r.rows) EXPECT_TRUE(row.ok) << row.error;
}

TEST(Harness, SixRegimeRun) {
  env_guard g;
  const auto cfg = harness::resolve(json::object(), {"regimes.enabled=true", "regimes.k=6", "regimes.window=40",
                                                     "regimes.stride=10", "scm.length=3000", "forecaster.epochs=5"});
  const auto b = harness::run_discovery(cfg);
  ASSERT_TRUE(b.per_regime);
  EXPECT_EQ(b.per_regime->regimes.size() + b.per_regime->skipped_regimes.size(), 6u);
  for (const auto& f : b.per_regime->fractions)
    EXPECT_NEAR(f.forward + f.backward + f.bidirectional + f.none, 1.0, 1e-12);
  const auto dir = scratch("regimes");
  harness::write_discovery(b, cfg, dir);
  for (const auto& r : b.per_regime->regimes)
    EXPECT_TRUE(std::filesystem::exists(dir / ("graph_regime" + std::to_string(r.regime) + ".json")));
  EXPECT_TRUE(std::filesystem::exists(dir / "fractions.csv"));
}

TEST(Harness, UnknownMethod) {
  EXPECT_THROW(harness::check_method("pc"), error);
  EXPECT_NO_THROW(harness::check_method("mc-cdmi"));
}

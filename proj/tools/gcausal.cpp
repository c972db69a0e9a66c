// gcausal command-line front end.

#include <deque>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gcausal/harness.hpp"

namespace fs = std::filesystem;
using namespace gcausal;
using nlohmann::json;

namespace {

struct common_opts {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
};

void add_common(CLI::App* sub, common_opts& o) {
  sub->add_option("-c,--config", o.config_path, "TOML-style config file");
  sub->add_option("-o,--out", o.out, "output directory (default: output_dir key)");
  sub->add_option("--seed", o.seed, "top-level seed");
  sub->add_option("--set", o.sets, "override a config key, e.g. --set discovery.alpha=0.01")->take_all();
}

// Binds a string flag to a config key; only set flags become overrides.
void bind_flag(CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help,
          std::vector<std::pair<std::string, std::string>>& bindings, std::deque<std::string>& storage) {
  storage.emplace_back();
  const std::size_t slot = storage.size() - 1;
  sub->add_option(flag, storage[slot], help);
  bindings.emplace_back(flag, key + "\x1f" + std::to_string(slot));
}

struct resolved {
  json cfg;
  fs::path out;
};

resolved resolve_all(CLI::App* sub, const common_opts& o,
                     const std::vector<std::pair<std::string, std::string>>& bindings,
                     const std::deque<std::string>& storage) {
  json user = o.config_path.empty() ? json::object() : config::load(o.config_path);
  std::vector<std::string> overrides;
  for (const auto& [flag, packed] : bindings) {
    if (sub->get_option(flag)->count() == 0) continue;
    const auto sep = packed.find('\x1f');
    const std::string key = packed.substr(0, sep);
    const std::string& value = storage[std::stoul(packed.substr(sep + 1))];
    // quoted so that paths and names stay strings
    const bool textual = key == "data.panel" || key == "data.groups" || key == "method" || key == "sweep.axis" ||
                         key == "discovery.test" || key == "data.missing";
    overrides.push_back(key + "=" + (textual ? "\"" + value + "\"" : value));
  }
  for (const auto& s : o.sets) overrides.push_back(s);
  if (o.seed) overrides.push_back("seed=" + std::to_string(*o.seed));
  json cfg = harness::resolve(user, overrides);
  fs::path out = o.out.empty() ? fs::path(config::get<std::string>(cfg, "output_dir")) : fs::path(o.out);
  // the output location is not part of the experiment
  cfg.erase("output_dir");
  return {std::move(cfg), std::move(out)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gcausal: group causal discovery toolkit"};
  app.require_subcommand(1);

  struct sub_state {
    CLI::App* app = nullptr;
    common_opts opts;
    std::vector<std::pair<std::string, std::string>> bindings;
    std::deque<std::string> storage;  // stable addresses for CLI11
  };
  std::vector<std::unique_ptr<sub_state>> subs;
  auto make = [&](const std::string& name, const std::string& help) {
    auto s = std::make_unique<sub_state>();
    s->app = app.add_subcommand(name, help);
    add_common(s->app, s->opts);
    subs.push_back(std::move(s));
    return subs.back().get();
  };
  auto data_flags = [](sub_state* s) {
    bind_flag(s->app, "--panel", "data.panel", "panel CSV (header row of variable names)", s->bindings, s->storage);
    bind_flag(s->app, "--groups", "data.groups", "groups JSON", s->bindings, s->storage);
    bind_flag(s->app, "--missing", "data.missing", "missing values: error|drop_rows|interpolate", s->bindings, s->storage);
  };

  auto* simulate = make("simulate", "sample an SCM and write panel, truth graph, spec and groups");
  bind_flag(simulate->app, "--groups-count", "scm.groups", "number of groups", simulate->bindings, simulate->storage);
  bind_flag(simulate->app, "--group-size", "scm.group_size", "variables per group", simulate->bindings, simulate->storage);
  bind_flag(simulate->app, "--density", "scm.density", "cross-group density", simulate->bindings, simulate->storage);
  bind_flag(simulate->app, "--nonlinearity", "scm.nonlinearity", "nonlinear edge fraction", simulate->bindings,
       simulate->storage);
  bind_flag(simulate->app, "--length", "scm.length", "series length", simulate->bindings, simulate->storage);

  auto* discover = make("discover", "run group causal discovery on a panel");
  data_flags(discover);
  bind_flag(discover->app, "--alpha", "discovery.alpha", "significance level", discover->bindings, discover->storage);
  bind_flag(discover->app, "--test", "discovery.test", "KS|MWU|CVM|AD|WSR|WELCH", discover->bindings, discover->storage);
  bind_flag(discover->app, "--regimes", "regimes.k", "cluster into k regimes first", discover->bindings, discover->storage);

  auto* baseline = make("baseline", "run a CCA baseline (mc-vgc or mc-cdmi)");
  data_flags(baseline);
  bind_flag(baseline->app, "--method", "method", "mc-vgc|mc-cdmi", baseline->bindings, baseline->storage);

  auto* benchmark = make("benchmark", "synthetic sweep with scoring against the truth graph");
  bind_flag(benchmark->app, "--axis", "sweep.axis", "density|nonlinearity|groups", benchmark->bindings, benchmark->storage);
  bind_flag(benchmark->app, "--trials", "sweep.trials", "trials per sweep value", benchmark->bindings, benchmark->storage);
  bind_flag(benchmark->app, "--threads", "sweep.threads", "worker threads (0 = all cores)", benchmark->bindings,
       benchmark->storage);

  auto* kdiag = make("knockoff-diag", "knockoff diagnostics and dimension sweep");
  data_flags(kdiag);

  auto* bench = make("test-bench", "power of the two-sample tests under perturbations");
  bind_flag(bench->app, "--n", "test_bench.n", "sample size", bench->bindings, bench->storage);
  bind_flag(bench->app, "--repetitions", "test_bench.repetitions", "repetitions", bench->bindings, bench->storage);

  auto* regimes = make("regimes", "covariance-clustering regime segmentation");
  data_flags(regimes);
  bind_flag(regimes->app, "--k", "regimes.k", "number of regimes", regimes->bindings, regimes->storage);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    for (const auto& s : subs) {
      if (!s->app->parsed()) continue;
      auto [cfg, out] = resolve_all(s->app, s->opts, s->bindings, s->storage);
      const std::string name = s->app->get_name();
      if (name == "simulate") {
        harness::write_simulate(harness::run_simulate(cfg), cfg, out);
      } else if (name == "discover") {
        if (s->app->get_option("--regimes")->count() > 0) cfg["regimes"]["enabled"] = true;
        harness::write_discovery(harness::run_discovery(cfg), cfg, out);
      } else if (name == "baseline") {
        harness::dataset data{time_series_panel(MatrixXd::Zero(1, 1)), group_partition::singletons(1)};
        const auto g = harness::run_baseline(cfg, data);
        harness::write_text(out / "graph.json", harness::dump(harness::graph_artifact(g, data.group_names, cfg)));
        harness::write_text(out / "adjacency.csv", harness::adjacency_csv(g, data.group_names, cfg));
        harness::write_resolved_config(out, cfg);
      } else if (name == "benchmark") {
        const auto r = harness::run_benchmark(cfg);
        harness::write_benchmark(r, cfg, out);
        for (const auto& a : r.aggregates)
          std::cout << a.method << ' ' << r.axis << '=' << format_double(a.value) << " mean_f=" << format_double(a.mean_f)
                    << " ok=" << a.ok_trials << " failed=" << a.failed_trials << '\n';
        if (r.failed_fraction > 0.5) {
          std::cerr << "error: " << format_double(r.failed_fraction * 100.0) << "% of trials failed\n";
          return static_cast<int>(error_kind::numeric);
        }
      } else if (name == "knockoff-diag") {
        harness::write_knockoff_diag(harness::run_knockoff_diag(cfg), cfg, out);
      } else if (name == "test-bench") {
        harness::write_test_bench(harness::run_test_bench(cfg), cfg, out);
      } else if (name == "regimes") {
        harness::write_regimes(harness::run_regimes(cfg), cfg, out);
      }
      std::cout << "wrote " << out.string() << '\n';
    }
  } catch (const gcausal::error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(error_kind::data);
  }
  return 0;
}

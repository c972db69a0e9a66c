#pragma once

// Config-driven experiment runners behind the command-line tool. Every runner
// takes a fully resolved config tree and writes deterministic artifacts that
// embed that config, so rerunning from an emitted config reproduces them.

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cca.hpp"
#include "config.hpp"
#include "core.hpp"
#include "engine.hpp"
#include "knockoffs.hpp"
#include "regimes.hpp"
#include "scm.hpp"
#include "stats.hpp"

namespace gcausal::harness {

using nlohmann::json;
using nlohmann::ordered_json;

inline json default_config() {
  return config::parse(R"(
seed = 0
method = "gcdmi"
output_dir = "gcausal-out"

[data]
panel = ""
groups = ""
missing = "error"

[scm]
groups = 2
group_size = 2
density = 0.5
nonlinearity = 0.0
max_lag = 2
length = 1000
burn_in = 200
noise_std = 1.0

[discovery]
alpha = 0.05
test = "KS"
stride = 0
bonferroni = false
shrinkage = 0.1

[forecaster]
context_len = 5
hidden_width = 32
horizon = 4
learning_rate = 0.003
epochs = 30
batch_size = 32
sigma_floor = 0.001

[baseline]
var_lag = 5

[regimes]
enabled = false
k = 2
window = 50
stride = 10
smoothing = 5

[sweep]
axis = "density"
values = [0.2, 0.5, 0.9]
trials = 3
methods = ["gcdmi"]
threads = 0

[knockoff_diag]
dims = [5, 10, 20, 40]
trials = 10
rho = 0.5
length = 200
shrinkage = 0.1

[test_bench]
n = 100
repetitions = 200
alpha = 0.05
)");
}

inline constexpr const char* seed_env_var = "GCAUSAL_SEED";

/// Defaults <- config file <- overrides; the seed falls back to GCAUSAL_SEED
/// when neither the file nor an override sets it.
inline json resolve(const json& user, const std::vector<std::string>& overrides = {}) {
  json cfg = default_config();
  config::merge(cfg, user);
  json over = json::object();
  for (const auto& o : overrides) config::set_path(over, o);
  config::merge(cfg, over);
  const bool seed_given = user.contains("seed") || over.contains("seed");
  if (!seed_given) {
    if (const char* env = std::getenv(seed_env_var)) {
      std::uint64_t v = 0;
      const std::string_view s(env);
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || p != s.data() + s.size()) throw config_error(std::string(seed_env_var) + " must be an unsigned integer");
      cfg["seed"] = v;
    }
  }
  if (!cfg["seed"].is_number_integer() && !cfg["seed"].is_number_unsigned()) throw config_error("seed must be an integer");
  if (cfg["seed"].is_number_integer() && cfg["seed"].get<std::int64_t>() < 0) throw config_error("seed must be non-negative");
  return cfg;
}

inline std::uint64_t seed_of(const json& cfg) { return config::get<std::uint64_t>(cfg, "seed"); }

inline forecaster_config forecaster_from(const json& cfg) {
  forecaster_config f;
  f.context_len = config::get<int>(cfg, "forecaster.context_len");
  f.hidden_width = config::get<int>(cfg, "forecaster.hidden_width");
  f.horizon = config::get<int>(cfg, "forecaster.horizon");
  f.learning_rate = config::get<double>(cfg, "forecaster.learning_rate");
  f.epochs = config::get<int>(cfg, "forecaster.epochs");
  f.batch_size = config::get<int>(cfg, "forecaster.batch_size");
  f.sigma_floor = config::get<double>(cfg, "forecaster.sigma_floor");
  f.validate();
  return f;
}

inline discovery_config discovery_from(const json& cfg, std::uint64_t seed) {
  discovery_config d;
  d.alpha = config::get<double>(cfg, "discovery.alpha");
  d.kind = parse_test_kind(config::get<std::string>(cfg, "discovery.test"));
  d.stride = config::get<int>(cfg, "discovery.stride");
  d.bonferroni = config::get<bool>(cfg, "discovery.bonferroni");
  d.shrinkage = config::get<double>(cfg, "discovery.shrinkage");
  d.forecaster = forecaster_from(cfg);
  d.seed = seed;
  d.validate();
  return d;
}

// ---------------------------------------------------------------------------
// Datasets

struct dataset {
  time_series_panel panel;
  group_partition partition;
  std::optional<scm_spec> spec;
  std::optional<group_causal_graph> truth;
  std::vector<std::string> group_names;
};

/// Reads {"groups": [[idx or name, ...], ...], "names": [...]}.
inline std::pair<group_partition, std::vector<std::string>> load_groups(const std::string& path,
                                                                        const time_series_panel& panel) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot read groups file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw config_error("groups file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.contains("groups") || !j["groups"].is_array()) throw config_error("groups file '" + path + "' needs a 'groups' array");
  std::vector<std::vector<int>> groups;
  for (const auto& g : j["groups"]) {
    std::vector<int> idx;
    for (const auto& v : g) {
      if (v.is_string()) {
        const auto& names = panel.names();
        const auto it = std::find(names.begin(), names.end(), v.get<std::string>());
        if (it == names.end()) throw config_error("groups file names unknown variable '" + v.get<std::string>() + "'");
        idx.push_back(static_cast<int>(it - names.begin()));
      } else {
        idx.push_back(v.get<int>());
      }
    }
    groups.push_back(std::move(idx));
  }
  std::vector<std::string> names;
  if (j.contains("names")) names = j["names"].get<std::vector<std::string>>();
  group_partition partition(std::move(groups), panel.variables());
  if (!names.empty() && static_cast<int>(names.size()) != partition.size())
    throw config_error("groups file has " + std::to_string(names.size()) + " names for " + std::to_string(partition.size()) + " groups");
  if (names.empty())
    for (int g = 0; g < partition.size(); ++g) names.push_back("G" + std::to_string(g));
  return {std::move(partition), std::move(names)};
}

inline ordered_json groups_to_json(const group_partition& p, const std::vector<std::string>& names) {
  ordered_json j;
  j["groups"] = p.groups();
  j["names"] = names;
  return j;
}

inline group_partition scm_partition(const json& cfg) {
  const int groups = config::get<int>(cfg, "scm.groups");
  const int size = config::get<int>(cfg, "scm.group_size");
  if (groups < 1 || size < 1) throw config_error("scm.groups and scm.group_size must be >= 1");
  return group_partition::uniform(groups, size);
}

inline dataset simulate_dataset(const json& cfg, const group_partition& partition, double density,
                                double nonlinearity, std::uint64_t seed) {
  const auto spec = sample_spec(partition, density, nonlinearity, config::get<int>(cfg, "scm.max_lag"), seed,
                                config::get<double>(cfg, "scm.noise_std"));
  auto sim = simulate(spec, config::get<Index>(cfg, "scm.length"), config::get<Index>(cfg, "scm.burn_in"),
                      derive_seed(seed, 0x5137));
  dataset d{std::move(sim.panel), partition, spec, std::move(sim.truth), {}};
  for (int g = 0; g < partition.size(); ++g) d.group_names.push_back("G" + std::to_string(g));
  return d;
}

/// CSV panel + groups JSON when data.panel is set, otherwise an inline SCM.
inline dataset load_dataset(const json& cfg) {
  const auto panel_path = config::get<std::string>(cfg, "data.panel");
  if (panel_path.empty()) {
    return simulate_dataset(cfg, scm_partition(cfg), config::get<double>(cfg, "scm.density"),
                            config::get<double>(cfg, "scm.nonlinearity"), derive_seed(seed_of(cfg), 0xda7a));
  }
  const auto groups_path = config::get<std::string>(cfg, "data.groups");
  if (groups_path.empty()) throw config_error("data.panel is set but data.groups is empty");
  if (!std::filesystem::exists(groups_path)) throw config_error("groups file not found: '" + groups_path + "'");
  auto panel = load_panel(panel_path, parse_missing_policy(config::get<std::string>(cfg, "data.missing")));
  auto [partition, names] = load_groups(groups_path, panel);
  return {std::move(panel), std::move(partition), std::nullopt, std::nullopt, std::move(names)};
}

// ---------------------------------------------------------------------------
// Methods

inline void check_method(const std::string& method) {
  if (method != "gcdmi" && method != "mc-vgc" && method != "mc-cdmi")
    throw config_error("unknown method '" + method + "' (expected gcdmi|mc-vgc|mc-cdmi)");
}

inline group_causal_graph run_method(const std::string& method, const time_series_panel& panel,
                                     const group_partition& partition, const json& cfg, std::uint64_t seed) {
  check_method(method);
  if (method == "mc-vgc")
    return mc_vgc_discover(panel, partition, config::get<int>(cfg, "baseline.var_lag"),
                           config::get<double>(cfg, "discovery.alpha"));
  const auto dc = discovery_from(cfg, seed);
  if (method == "mc-cdmi") return mc_cdmi_discover(panel, partition, dc);
  return discover(panel, partition, dc).graph;
}

// ---------------------------------------------------------------------------
// Output helpers

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write '" + path.string() + "'");
  out << text;
}

inline std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

/// First line of every CSV artifact: the resolved config as compact JSON.
inline std::string csv_preamble(const json& cfg) { return "# config: " + cfg.dump() + "\n"; }

inline void write_resolved_config(const std::filesystem::path& dir, const json& cfg) {
  write_text(dir / "resolved_config.toml", config::emit(cfg));
}

inline std::string adjacency_csv(const group_causal_graph& g, const std::vector<std::string>& names, const json& cfg) {
  std::ostringstream out;
  out << csv_preamble(cfg) << "source";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (int i = 0; i < g.groups(); ++i) {
    out << names[static_cast<std::size_t>(i)];
    for (int j = 0; j < g.groups(); ++j) out << ',' << (g.edge(i, j) ? 1 : 0);
    out << '\n';
  }
  return out.str();
}

inline ordered_json graph_artifact(const group_causal_graph& g, const std::vector<std::string>& names, const json& cfg) {
  ordered_json j = g.to_json();
  j["names"] = names;
  j["seed"] = seed_of(cfg);
  j["config"] = cfg;
  return j;
}

// ---------------------------------------------------------------------------
// simulate

struct simulate_outputs {
  dataset data;
};

inline simulate_outputs run_simulate(const json& cfg) {
  return {simulate_dataset(cfg, scm_partition(cfg), config::get<double>(cfg, "scm.density"),
                           config::get<double>(cfg, "scm.nonlinearity"), derive_seed(seed_of(cfg), 0xda7a))};
}

inline void write_simulate(const simulate_outputs& s, const json& cfg, const std::filesystem::path& dir) {
  std::ostringstream csv;
  write_panel_csv(csv, s.data.panel);
  write_text(dir / "panel.csv", csv.str());
  write_text(dir / "truth.json", dump(graph_artifact(*s.data.truth, s.data.group_names, cfg)));
  ordered_json spec = s.data.spec->to_json();
  spec["config"] = cfg;
  write_text(dir / "spec.json", dump(spec));
  write_text(dir / "groups.json", dump(groups_to_json(s.data.partition, s.data.group_names)));
  write_resolved_config(dir, cfg);
}

// ---------------------------------------------------------------------------
// discover

struct discovery_bundle {
  dataset data;
  std::optional<discovery_result> single;
  std::optional<regime_labels> regimes;
  std::optional<regime_discovery_result> per_regime;
  std::vector<std::string> log;
};

inline discovery_bundle run_discovery(const json& cfg) {
  discovery_bundle b;
  b.data = load_dataset(cfg);
  const auto dc = discovery_from(cfg, derive_seed(seed_of(cfg), 0xd15c));
  b.log.push_back("panel: T=" + std::to_string(b.data.panel.length()) + " N=" + std::to_string(b.data.panel.variables()) +
                  " groups=" + std::to_string(b.data.partition.size()));
  if (config::get<bool>(cfg, "regimes.enabled")) {
    const auto z = standardize(b.data.panel).panel;
    b.regimes = identify_regimes(z, config::get<Index>(cfg, "regimes.window"), config::get<Index>(cfg, "regimes.stride"),
                                 config::get<int>(cfg, "regimes.k"), config::get<int>(cfg, "regimes.smoothing"),
                                 derive_seed(seed_of(cfg), 0x4e61));
    b.log.push_back("regimes: k=" + std::to_string(b.regimes->clusters) + " segments=" +
                    std::to_string(b.regimes->segments.size()) + " silhouette=" + format_double(b.regimes->silhouette));
    b.per_regime = discover_by_regime(b.data.panel, b.data.partition, *b.regimes, dc);
    for (int r : b.per_regime->skipped_regimes) b.log.push_back("regime " + std::to_string(r) + ": skipped (no segment long enough)");
    for (const auto& r : b.per_regime->regimes)
      b.log.push_back("regime " + std::to_string(r.regime) + ": rows [" + std::to_string(r.segment.start) + ", " +
                      std::to_string(r.segment.end) + "), edges=" + std::to_string(r.result.graph.edge_count()));
  } else {
    b.single = discover(b.data.panel, b.data.partition, dc);
    b.log.push_back("windows: " + std::to_string(b.single->windows));
    b.log.push_back("edges: " + std::to_string(b.single->graph.edge_count()));
  }
  if (b.data.truth) {
    std::vector<group_causal_graph> graphs;
    if (b.single) graphs.push_back(b.single->graph);
    if (b.per_regime)
      for (const auto& r : b.per_regime->regimes) graphs.push_back(r.result.graph);
    for (const auto& g : graphs) {
      const auto s = score_graph(g, *b.data.truth);
      b.log.push_back("score vs truth: precision=" + format_double(s.precision) + " recall=" + format_double(s.recall) +
                      " f=" + format_double(s.f_score));
    }
  }
  return b;
}

inline std::string fractions_csv(const std::vector<pair_fractions>& fr, const std::vector<std::string>& names,
                                 const json& cfg) {
  std::ostringstream out;
  out << csv_preamble(cfg) << "group_i,group_j,->,<-,<->,none\n";
  for (const auto& f : fr)
    out << names[static_cast<std::size_t>(f.i)] << ',' << names[static_cast<std::size_t>(f.j)] << ','
        << format_double(f.forward) << ',' << format_double(f.backward) << ',' << format_double(f.bidirectional) << ','
        << format_double(f.none) << '\n';
  return out.str();
}

inline void write_discovery(const discovery_bundle& b, const json& cfg, const std::filesystem::path& dir) {
  const auto& names = b.data.group_names;
  if (b.single) {
    write_text(dir / "graph.json", dump(graph_artifact(b.single->graph, names, cfg)));
    ordered_json ev;
    ev["seed"] = seed_of(cfg);
    ev["config"] = cfg;
    ev["evidence"] = evidence_to_json(b.single->evidence, b.data.panel.names());
    write_text(dir / "evidence.json", dump(ev));
    write_text(dir / "adjacency.csv", adjacency_csv(b.single->graph, names, cfg));
  }
  if (b.per_regime) {
    ordered_json out;
    out["seed"] = seed_of(cfg);
    out["config"] = cfg;
    auto segs = ordered_json::array();
    for (const auto& s : b.regimes->segments) segs.push_back({{"start", s.start}, {"end", s.end}, {"regime", s.regime}});
    out["segments"] = segs;
    auto regs = ordered_json::array();
    for (const auto& r : b.per_regime->regimes) {
      ordered_json e;
      e["regime"] = r.regime;
      e["start"] = r.segment.start;
      e["end"] = r.segment.end;
      e["graph"] = r.result.graph.to_json();
      e["evidence"] = evidence_to_json(r.result.evidence, b.data.panel.names());
      regs.push_back(e);
    }
    out["regimes"] = regs;
    out["skipped_regimes"] = b.per_regime->skipped_regimes;
    out["fractions"] = fractions_to_json(b.per_regime->fractions);
    write_text(dir / "regimes.json", dump(out));
    write_text(dir / "fractions.csv", fractions_csv(b.per_regime->fractions, names, cfg));
    for (const auto& r : b.per_regime->regimes)
      write_text(dir / ("graph_regime" + std::to_string(r.regime) + ".json"),
                 dump(graph_artifact(r.result.graph, names, cfg)));
  }
  std::ostringstream log;
  log << "seed: " << seed_of(cfg) << '\n';
  for (const auto& l : b.log) log << l << '\n';
  write_text(dir / "log.txt", log.str());
  write_resolved_config(dir, cfg);
}

// ---------------------------------------------------------------------------
// baseline

inline group_causal_graph run_baseline(const json& cfg, dataset& data) {
  data = load_dataset(cfg);
  const auto method = config::get<std::string>(cfg, "method");
  if (method != "mc-vgc" && method != "mc-cdmi") throw config_error("baseline method must be mc-vgc or mc-cdmi");
  return run_method(method, data.panel, data.partition, cfg, derive_seed(seed_of(cfg), 0xd15c));
}

// ---------------------------------------------------------------------------
// benchmark

struct benchmark_row {
  std::string method;
  double value = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  graph_score score;
};

struct benchmark_aggregate {
  std::string method;
  double value = 0.0;
  int ok_trials = 0;
  int failed_trials = 0;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  double mean_f = 0.0;
};

struct benchmark_result {
  std::string axis;
  std::vector<std::string> methods;
  std::vector<double> values;
  std::vector<benchmark_row> rows;  // ordered by (value, trial, method)
  std::vector<benchmark_aggregate> aggregates;  // ordered by (value, method)
  double failed_fraction = 0.0;
};

/// Runs `jobs` on a pool of `threads` workers; result order is the job order.
template <class Result>
std::vector<Result> run_pool(std::size_t jobs, unsigned threads, const std::function<Result(std::size_t)>& job) {
  std::vector<Result> out(jobs);
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(jobs, 1))));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs; k = next++) out[k] = job(k);
  };
  if (threads == 1) {
    worker();
    return out;
  }
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return out;
}

inline benchmark_result run_benchmark(const json& cfg) {
  benchmark_result r;
  r.axis = config::get<std::string>(cfg, "sweep.axis");
  if (r.axis != "density" && r.axis != "nonlinearity" && r.axis != "groups")
    throw config_error("sweep.axis must be density, nonlinearity or groups");
  r.values = config::get<std::vector<double>>(cfg, "sweep.values");
  r.methods = config::get<std::vector<std::string>>(cfg, "sweep.methods");
  const int trials = config::get<int>(cfg, "sweep.trials");
  if (r.values.empty() || r.methods.empty() || trials < 1)
    throw config_error("sweep needs values, methods and trials >= 1");
  for (const auto& m : r.methods) check_method(m);
  for (double v : r.values) {
    if ((r.axis == "density" || r.axis == "nonlinearity") && (v < 0.0 || v > 1.0))
      throw config_error("sweep value " + format_double(v) + " outside [0, 1]");
    if (r.axis == "groups" && (v < 1.0 || v != std::floor(v))) throw config_error("group-count sweep values must be integers >= 1");
  }
  // Validate the per-method configuration once so config errors are not
  // reported as per-trial failures.
  (void)discovery_from(cfg, 0);

  const std::uint64_t seed = seed_of(cfg);
  int threads = config::get<int>(cfg, "sweep.threads");
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  struct job_key {
    std::size_t value_index;
    int trial;
  };
  std::vector<job_key> keys;
  for (std::size_t v = 0; v < r.values.size(); ++v)
    for (int t = 0; t < trials; ++t) keys.push_back({v, t});

  auto job = [&](std::size_t k) {
    const auto [vi, trial] = keys[k];
    const double value = r.values[vi];
    const std::uint64_t trial_seed = derive_seed(seed, vi * 100003ULL + static_cast<std::uint64_t>(trial));
    std::vector<benchmark_row> rows;
    std::optional<dataset> data;
    std::string data_error_msg;
    try {
      double density = config::get<double>(cfg, "scm.density");
      double nonlinearity = config::get<double>(cfg, "scm.nonlinearity");
      group_partition partition = scm_partition(cfg);
      if (r.axis == "density") density = value;
      if (r.axis == "nonlinearity") nonlinearity = value;
      if (r.axis == "groups") partition = group_partition::uniform(static_cast<int>(value), config::get<int>(cfg, "scm.group_size"));
      data = simulate_dataset(cfg, partition, density, nonlinearity, trial_seed);
    } catch (const std::exception& e) {
      data_error_msg = e.what();
    }
    for (const auto& method : r.methods) {
      benchmark_row row{method, value, trial, trial_seed, false, {}, {}};
      if (!data) {
        row.error = data_error_msg;
      } else {
        try {
          const auto g = run_method(method, data->panel, data->partition, cfg, derive_seed(trial_seed, 0xd15c));
          row.score = score_graph(g, *data->truth);
          row.ok = true;
        } catch (const std::exception& e) {
          row.error = e.what();
        }
      }
      rows.push_back(std::move(row));
    }
    return rows;
  };
  const auto per_job = run_pool<std::vector<benchmark_row>>(keys.size(), static_cast<unsigned>(threads), job);
  for (const auto& rows : per_job)
    for (const auto& row : rows) r.rows.push_back(row);

  int failed = 0;
  for (std::size_t v = 0; v < r.values.size(); ++v)
    for (const auto& method : r.methods) {
      benchmark_aggregate a{method, r.values[v]};
      for (const auto& row : r.rows) {
        if (row.method != method || row.value != r.values[v]) continue;
        if (!row.ok) {
          ++a.failed_trials;
          continue;
        }
        ++a.ok_trials;
        a.mean_precision += row.score.precision;
        a.mean_recall += row.score.recall;
        a.mean_f += row.score.f_score;
      }
      if (a.ok_trials > 0) {
        a.mean_precision /= a.ok_trials;
        a.mean_recall /= a.ok_trials;
        a.mean_f /= a.ok_trials;
      }
      failed += a.failed_trials;
      r.aggregates.push_back(a);
    }
  r.failed_fraction = r.rows.empty() ? 0.0 : static_cast<double>(failed) / static_cast<double>(r.rows.size());
  return r;
}

inline void write_benchmark(const benchmark_result& r, const json& cfg, const std::filesystem::path& dir) {
  std::ostringstream rows;
  rows << csv_preamble(cfg) << "method,axis,value,trial,seed,status,precision,recall,f_score\n";
  for (const auto& row : r.rows)
    rows << row.method << ',' << r.axis << ',' << format_double(row.value) << ',' << row.trial << ',' << row.seed << ','
         << (row.ok ? "ok" : "failed") << ',' << format_double(row.score.precision) << ','
         << format_double(row.score.recall) << ',' << format_double(row.score.f_score) << '\n';
  write_text(dir / "results.csv", rows.str());

  std::ostringstream agg;
  agg << csv_preamble(cfg) << "method,axis,value,ok_trials,failed_trials,mean_precision,mean_recall,mean_f\n";
  for (const auto& a : r.aggregates)
    agg << a.method << ',' << r.axis << ',' << format_double(a.value) << ',' << a.ok_trials << ',' << a.failed_trials
        << ',' << format_double(a.mean_precision) << ',' << format_double(a.mean_recall) << ','
        << format_double(a.mean_f) << '\n';
  write_text(dir / "summary.csv", agg.str());

  std::ostringstream plot;
  plot << csv_preamble(cfg) << r.axis;
  for (const auto& m : r.methods) plot << ',' << m;
  plot << '\n';
  for (double v : r.values) {
    plot << format_double(v);
    for (const auto& m : r.methods)
      for (const auto& a : r.aggregates)
        if (a.method == m && a.value == v) plot << ',' << format_double(a.mean_f);
    plot << '\n';
  }
  write_text(dir / "plot.csv", plot.str());

  ordered_json j;
  j["seed"] = seed_of(cfg);
  j["config"] = cfg;
  j["axis"] = r.axis;
  auto rows_json = ordered_json::array();
  for (const auto& row : r.rows) {
    ordered_json e{{"method", row.method}, {"value", row.value}, {"trial", row.trial}, {"seed", row.seed},
                   {"status", row.ok ? "ok" : "failed"}};
    if (row.ok) {
      e["precision"] = row.score.precision;
      e["recall"] = row.score.recall;
      e["f_score"] = row.score.f_score;
    } else {
      e["error"] = row.error;
    }
    rows_json.push_back(e);
  }
  j["rows"] = rows_json;
  auto agg_json = ordered_json::array();
  for (const auto& a : r.aggregates)
    agg_json.push_back({{"method", a.method}, {"value", a.value}, {"ok_trials", a.ok_trials},
                        {"failed_trials", a.failed_trials}, {"mean_precision", a.mean_precision},
                        {"mean_recall", a.mean_recall}, {"mean_f", a.mean_f}});
  j["aggregates"] = agg_json;
  j["failed_fraction"] = r.failed_fraction;
  write_text(dir / "results.json", dump(j));
  write_resolved_config(dir, cfg);
}

// ---------------------------------------------------------------------------
// knockoff-diag

struct knockoff_diag_outputs {
  std::optional<knockoff_report> report;  // when a panel is configured
  std::vector<dimension_sweep_row> sweep;
};

inline knockoff_diag_outputs run_knockoff_diag(const json& cfg) {
  knockoff_diag_outputs out;
  const std::uint64_t seed = seed_of(cfg);
  const double shrinkage = config::get<double>(cfg, "knockoff_diag.shrinkage");
  if (!config::get<std::string>(cfg, "data.panel").empty()) {
    const auto panel = load_panel(config::get<std::string>(cfg, "data.panel"),
                                  parse_missing_policy(config::get<std::string>(cfg, "data.missing")));
    const auto z = standardize(panel).panel;
    out.report = diagnostics(z, make_knockoffs(z, shrinkage, derive_seed(seed, 0x0ff)));
  }
  dimension_sweep_options opt;
  opt.rho = config::get<double>(cfg, "knockoff_diag.rho");
  opt.length = config::get<Index>(cfg, "knockoff_diag.length");
  opt.shrinkage = shrinkage;
  out.sweep = dimension_sweep(config::get<std::vector<Index>>(cfg, "knockoff_diag.dims"),
                              config::get<int>(cfg, "knockoff_diag.trials"), derive_seed(seed, 0x5eee), opt);
  return out;
}

inline void write_knockoff_diag(const knockoff_diag_outputs& o, const json& cfg, const std::filesystem::path& dir) {
  ordered_json j;
  j["seed"] = seed_of(cfg);
  j["config"] = cfg;
  if (o.report)
    j["diagnostics"] = {{"cov_match_error", o.report->cov_match_error},
                        {"mean_self_corr", o.report->mean_self_corr},
                        {"cross_block_error", o.report->cross_block_error}};
  auto sweep = ordered_json::array();
  for (const auto& r : o.sweep) sweep.push_back({{"N", r.n}, {"mean_self_corr", r.mean_self_corr}});
  j["dimension_sweep"] = sweep;
  write_text(dir / "knockoff_diag.json", dump(j));
  std::ostringstream csv;
  csv << csv_preamble(cfg) << "N,mean_self_corr\n";
  for (const auto& r : o.sweep) csv << r.n << ',' << format_double(r.mean_self_corr) << '\n';
  write_text(dir / "dimension_sweep.csv", csv.str());
  write_resolved_config(dir, cfg);
}

// ---------------------------------------------------------------------------
// test-bench

inline std::vector<power_row> run_test_bench(const json& cfg) {
  return sensitivity_study(config::get<std::size_t>(cfg, "test_bench.n"), config::get<int>(cfg, "test_bench.repetitions"),
                           derive_seed(seed_of(cfg), 0x7e57), config::get<double>(cfg, "test_bench.alpha"));
}

inline void write_test_bench(const std::vector<power_row>& rows, const json& cfg, const std::filesystem::path& dir) {
  std::ostringstream csv;
  csv << csv_preamble(cfg) << "test,perturbation,n,power\n";
  for (const auto& r : rows) csv << to_string(r.test) << ',' << to_string(r.change) << ',' << r.n << ',' << format_double(r.power) << '\n';
  write_text(dir / "power.csv", csv.str());
  write_resolved_config(dir, cfg);
}

// ---------------------------------------------------------------------------
// regimes

inline regime_labels run_regimes(const json& cfg) {
  const auto data = load_dataset(cfg);
  return identify_regimes(standardize(data.panel).panel, config::get<Index>(cfg, "regimes.window"),
                          config::get<Index>(cfg, "regimes.stride"), config::get<int>(cfg, "regimes.k"),
                          config::get<int>(cfg, "regimes.smoothing"), derive_seed(seed_of(cfg), 0x4e61));
}

inline void write_regimes(const regime_labels& r, const json& cfg, const std::filesystem::path& dir) {
  ordered_json j;
  j["seed"] = seed_of(cfg);
  j["config"] = cfg;
  j["k"] = r.clusters;
  j["window"] = r.window_length;
  j["stride"] = r.stride;
  j["inertia"] = r.inertia;
  j["silhouette"] = r.silhouette;
  auto segs = ordered_json::array();
  for (const auto& s : r.segments) segs.push_back({{"start", s.start}, {"end", s.end}, {"regime", s.regime}});
  j["segments"] = segs;
  write_text(dir / "segments.json", dump(j));
  std::ostringstream csv;
  csv << csv_preamble(cfg) << "window,start,label,raw_label\n";
  for (std::size_t w = 0; w < r.labels.size(); ++w)
    csv << w << ',' << static_cast<Index>(w) * r.stride << ',' << r.labels[w] << ',' << r.raw_labels[w] << '\n';
  write_text(dir / "labels.csv", csv.str());
  write_resolved_config(dir, cfg);
}

}  // namespace gcausal::harness

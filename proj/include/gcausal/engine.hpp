#pragma once

// Group causal discovery by knockoff interventions on a trained forecaster:
// train once, draw one knockoff panel, compute baseline residuals once, then
// for each source group replace its inputs by knockoffs and test whether the
// residual distribution of any target-group variable shifts.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"
#include "forecaster.hpp"
#include "knockoffs.hpp"
#include "regimes.hpp"
#include "stats.hpp"

namespace gcausal {

struct discovery_config {
  double alpha = 0.05;
  test_kind kind = test_kind::ks;
  forecaster_config forecaster{};
  double shrinkage = default_shrinkage;
  int stride = 0;  // 0 = forecaster horizon (non-overlapping targets)
  bool bonferroni = false;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw config_error("alpha must lie in (0, 1)");
    if (stride < 0) throw config_error("window stride must be >= 0");
    if (!(shrinkage >= 0.0 && shrinkage < 1.0)) throw config_error("shrinkage must lie in [0, 1)");
    forecaster.validate();
  }

  int effective_stride() const { return stride > 0 ? stride : forecaster.horizon; }
};

struct edge_evidence {
  int source = 0;
  int target = 0;
  std::vector<int> variables;  // target-group variables, one per outcome
  std::vector<test_outcome> outcomes;
  double threshold = 0.0;  // alpha, or alpha / D_j with Bonferroni
  bool decision = false;
};

struct discovery_result {
  group_causal_graph graph;
  std::vector<edge_evidence> evidence;  // ordered by (source, target)
  std::size_t windows = 0;
};

/// Residuals of every variable with group i's inputs replaced by knockoffs.
inline std::vector<residual_sample> intervene_group(const model_params& model, const time_series_panel& panel,
                                                    const MatrixXd& replacement_source, const group_partition& partition,
                                                    int group, const std::vector<forecast_window>& windows) {
  if (group < 0 || group >= partition.size())
    throw data_error("group index " + std::to_string(group) + " out of range 0.." + std::to_string(partition.size() - 1));
  if (replacement_source.rows() != panel.length() || replacement_source.cols() != panel.variables())
    throw data_error("knockoff panel is not aligned with the data panel");
  column_substitution sub;
  sub.variables = partition.group(group);
  sub.columns = partition.columns(replacement_source, group);
  return residuals(model, panel, windows, sub);
}

inline std::vector<residual_sample> intervene_group(const model_params& model, const time_series_panel& panel,
                                                    const knockoff_panel& knockoffs, const group_partition& partition,
                                                    int group, const std::vector<forecast_window>& windows) {
  return intervene_group(model, panel, knockoffs.values, partition, group, windows);
}

inline edge_evidence group_edge_test(const std::vector<residual_sample>& observational,
                                     const std::vector<residual_sample>& interventional,
                                     const group_partition& partition, int source, int target,
                                     const discovery_config& config) {
  if (source == target) throw data_error("edge test needs distinct source and target groups");
  auto find = [](const std::vector<residual_sample>& rs, int v) -> const residual_sample& {
    for (const auto& r : rs)
      if (r.variable_index == v) return r;
    throw data_error("missing residuals for variable " + std::to_string(v));
  };
  edge_evidence ev;
  ev.source = source;
  ev.target = target;
  const auto& vars = partition.group(target);
  ev.threshold = config.bonferroni ? config.alpha / static_cast<double>(vars.size()) : config.alpha;
  double min_p = 1.0;
  for (int v : vars) {
    const auto& r = find(observational, v);
    const auto& rt = find(interventional, v);
    const std::uint64_t test_seed =
        derive_seed(config.seed, 0x7e57000000ULL + static_cast<std::uint64_t>(source) * 1000003ULL +
                                     static_cast<std::uint64_t>(v));
    ev.variables.push_back(v);
    ev.outcomes.push_back(two_sample_test(config.kind, r.errors, rt.errors, test_seed));
    min_p = std::min(min_p, ev.outcomes.back().p_value);
  }
  ev.decision = min_p < ev.threshold;
  return ev;
}

namespace detail {
inline constexpr std::uint64_t train_stream = 0x7a1;
inline constexpr std::uint64_t knockoff_stream = 0x0ff;
}  // namespace detail

/// Full procedure. The forecaster seed and knockoff seed are derived from
/// config.seed.
inline discovery_result discover(const time_series_panel& panel, const group_partition& partition,
                                 const discovery_config& config) {
  config.validate();
  if (partition.variables() != panel.variables())
    throw config_error("partition covers " + std::to_string(partition.variables()) + " variables, panel has " +
                       std::to_string(panel.variables()));
  discovery_result result;
  result.graph = group_causal_graph(partition.size());
  if (partition.size() < 2) return result;

  const auto z = standardize(panel).panel;
  forecaster_config fc = config.forecaster;
  fc.seed = derive_seed(config.seed, detail::train_stream);
  const auto windows = make_windows(z, fc.context_len, fc.horizon, config.effective_stride());
  if (windows.size() < min_test_samples)
    throw data_error("only " + std::to_string(windows.size()) + " forecast windows; tests need at least " +
                     std::to_string(min_test_samples));
  result.windows = windows.size();

  const auto model = train(z, fc);
  const auto knockoffs = make_knockoffs(z, config.shrinkage, derive_seed(config.seed, detail::knockoff_stream));
  const auto baseline = residuals(model, z, windows);

  for (int i = 0; i < partition.size(); ++i) {
    const auto intervened = intervene_group(model, z, knockoffs, partition, i, windows);
    for (int j = 0; j < partition.size(); ++j) {
      if (i == j) continue;
      auto ev = group_edge_test(baseline, intervened, partition, i, j, config);
      result.graph.set_edge(i, j, ev.decision);
      result.evidence.push_back(std::move(ev));
    }
  }
  return result;
}

/// Singleton-group special case: variable-level pairwise discovery.
inline discovery_result discover_pairwise(const time_series_panel& panel, const discovery_config& config) {
  return discover(panel, group_partition::singletons(panel.variables()), config);
}

// ---------------------------------------------------------------------------
// Regime-aware discovery

/// Fractions of regimes in which each unordered pair (i < j) shows each label.
struct pair_fractions {
  int i = 0;
  int j = 0;
  double forward = 0.0;
  double backward = 0.0;
  double bidirectional = 0.0;
  double none = 0.0;
};

inline std::vector<pair_fractions> fractional_occurrence(const std::vector<group_causal_graph>& graphs) {
  std::vector<pair_fractions> out;
  if (graphs.empty()) return out;
  const int g = graphs.front().groups();
  for (int i = 0; i < g; ++i)
    for (int j = i + 1; j < g; ++j) {
      pair_fractions f{i, j};
      for (const auto& gr : graphs) {
        switch (gr.label(i, j)) {
          case link_label::forward: f.forward += 1.0; break;
          case link_label::backward: f.backward += 1.0; break;
          case link_label::bidirectional: f.bidirectional += 1.0; break;
          default: f.none += 1.0;
        }
      }
      const double n = static_cast<double>(graphs.size());
      f.forward /= n;
      f.backward /= n;
      f.bidirectional /= n;
      f.none = 1.0 - f.forward - f.backward - f.bidirectional;
      out.push_back(f);
    }
  return out;
}

struct regime_discovery {
  int regime = 0;
  regime_segment segment;  // segment the graph was estimated on
  discovery_result result;
};

struct regime_discovery_result {
  std::vector<regime_discovery> regimes;  // one per regime with an eligible segment
  std::vector<int> skipped_regimes;       // regimes without a long enough segment
  std::vector<pair_fractions> fractions;
};

/// Minimum segment length for per-regime discovery: at least 10 windows.
inline Index min_regime_length(const discovery_config& config) {
  return config.forecaster.context_len + config.forecaster.horizon + 9 * config.effective_stride();
}

/// Runs discover() on the longest segment of each regime.
inline regime_discovery_result discover_by_regime(const time_series_panel& panel, const group_partition& partition,
                                                  const regime_labels& regimes, const discovery_config& config) {
  regime_discovery_result out;
  std::vector<std::optional<regime_segment>> longest(static_cast<std::size_t>(regimes.clusters));
  for (const auto& s : regimes.segments) {
    auto& slot = longest.at(static_cast<std::size_t>(s.regime));
    if (!slot || (s.end - s.start) > (slot->end - slot->start)) slot = s;
  }
  std::vector<group_causal_graph> graphs;
  for (int r = 0; r < regimes.clusters; ++r) {
    const auto& seg = longest[static_cast<std::size_t>(r)];
    if (!seg || std::min(seg->end, panel.length()) - seg->start < min_regime_length(config)) {
      out.skipped_regimes.push_back(r);
      continue;
    }
    discovery_config c = config;
    c.seed = derive_seed(config.seed, 0x4e6000ULL + static_cast<std::uint64_t>(r));
    auto res = discover(panel.slice_rows(seg->start, std::min(seg->end, panel.length())), partition, c);
    graphs.push_back(res.graph);
    out.regimes.push_back({r, *seg, std::move(res)});
  }
  out.fractions = fractional_occurrence(graphs);
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::ordered_json evidence_to_json(const std::vector<edge_evidence>& evidence,
                                               const std::vector<std::string>& names = {}) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& ev : evidence) {
    nlohmann::ordered_json e;
    e["source"] = ev.source;
    e["target"] = ev.target;
    e["threshold"] = ev.threshold;
    e["decision"] = ev.decision;
    auto tests = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < ev.outcomes.size(); ++k) {
      const auto& o = ev.outcomes[k];
      nlohmann::ordered_json t;
      t["variable"] = ev.variables[k];
      if (static_cast<std::size_t>(ev.variables[k]) < names.size()) t["name"] = names[static_cast<std::size_t>(ev.variables[k])];
      t["test"] = to_string(o.kind);
      t["statistic"] = o.statistic;
      t["p_value"] = o.p_value;
      t["n_a"] = o.n_a;
      t["n_b"] = o.n_b;
      tests.push_back(t);
    }
    e["tests"] = tests;
    arr.push_back(e);
  }
  return arr;
}

inline nlohmann::ordered_json fractions_to_json(const std::vector<pair_fractions>& fr) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& f : fr)
    arr.push_back({{"i", f.i}, {"j", f.j}, {"->", f.forward}, {"<-", f.backward}, {"<->", f.bidirectional},
                   {"none", f.none}});
  return arr;
}

}  // namespace gcausal

#pragma once

// Structural causal model benchmark generator. Every variable follows
//   Z_t^j = sum_{edges e -> j} coef_e * f_e(Z_{t-k_e}^{src_e}) + eta_t^j
// with i.i.d. Gaussian noise eta. Group-level ground truth follows from the
// cross-group edges.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "core.hpp"
#include "random.hpp"

namespace gcausal {

enum class edge_function { linear, sin, cos, poly2, poly3 };

inline std::string to_string(edge_function f) {
  switch (f) {
    case edge_function::sin: return "sin";
    case edge_function::cos: return "cos";
    case edge_function::poly2: return "poly2";
    case edge_function::poly3: return "poly3";
    default: return "linear";
  }
}

inline edge_function parse_edge_function(const std::string& s) {
  if (s == "linear") return edge_function::linear;
  if (s == "sin") return edge_function::sin;
  if (s == "cos") return edge_function::cos;
  if (s == "poly2") return edge_function::poly2;
  if (s == "poly3") return edge_function::poly3;
  throw config_error("unknown edge function '" + s + "'");
}

// Polynomial tags are tanh-wrapped so that every nonlinear term is bounded.
inline double apply_edge_function(edge_function f, double x) {
  switch (f) {
    case edge_function::sin: return std::sin(x);
    case edge_function::cos: return std::cos(x);
    case edge_function::poly2: return std::tanh(x * x);
    case edge_function::poly3: return std::tanh(x * x * x);
    default: return x;
  }
}

struct scm_edge {
  int src = 0;
  int dst = 0;
  int lag = 1;
  edge_function function = edge_function::linear;
  double coefficient = 0.0;

  bool operator==(const scm_edge&) const = default;
};

inline constexpr double scm_stability_bound = 0.9;
inline constexpr double scm_self_coefficient = 0.5;
inline constexpr double scm_within_group_probability = 0.3;

/// Generative ground-truth model. Construction validates the lag range, the
/// presence of a self-edge per variable, and the linear stability guard.
class scm_spec {
 public:
  scm_spec() = default;

  scm_spec(group_partition partition, std::vector<scm_edge> edges, double noise_std, double density,
           double nonlinearity, int max_lag, std::uint64_t seed)
      : partition_(std::move(partition)),
        edges_(std::move(edges)),
        noise_std_(noise_std),
        density_(density),
        nonlinearity_(nonlinearity),
        max_lag_(max_lag),
        seed_(seed) {
    validate();
  }

  const group_partition& partition() const noexcept { return partition_; }
  const std::vector<scm_edge>& edges() const noexcept { return edges_; }
  double noise_std() const noexcept { return noise_std_; }
  double density() const noexcept { return density_; }
  double nonlinearity() const noexcept { return nonlinearity_; }
  int max_lag() const noexcept { return max_lag_; }
  std::uint64_t seed() const noexcept { return seed_; }
  Index variables() const noexcept { return partition_.variables(); }

  std::vector<scm_edge> cross_group_edges() const {
    std::vector<scm_edge> out;
    for (const auto& e : edges_)
      if (partition_.group_of(e.src) != partition_.group_of(e.dst)) out.push_back(e);
    return out;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["groups"] = partition_.groups();
    j["noise_std"] = noise_std_;
    j["density"] = density_;
    j["nonlinearity"] = nonlinearity_;
    j["max_lag"] = max_lag_;
    j["seed"] = seed_;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& e : edges_)
      arr.push_back({{"src", e.src}, {"dst", e.dst}, {"lag", e.lag}, {"function", to_string(e.function)},
                     {"coefficient", e.coefficient}});
    j["edges"] = arr;
    return j;
  }

  static scm_spec from_json(const nlohmann::json& j) {
    auto groups = j.at("groups").get<std::vector<std::vector<int>>>();
    Index n = 0;
    for (const auto& g : groups) n += static_cast<Index>(g.size());
    std::vector<scm_edge> edges;
    for (const auto& e : j.at("edges"))
      edges.push_back({e.at("src").get<int>(), e.at("dst").get<int>(), e.at("lag").get<int>(),
                       parse_edge_function(e.at("function").get<std::string>()), e.at("coefficient").get<double>()});
    return {group_partition(std::move(groups), n),
            std::move(edges),
            j.at("noise_std").get<double>(),
            j.value("density", 0.0),
            j.value("nonlinearity", 0.0),
            j.at("max_lag").get<int>(),
            j.value("seed", std::uint64_t{0})};
  }

 private:
  void validate() const {
    const Index n = partition_.variables();
    if (!(noise_std_ > 0.0)) throw config_error("SCM noise_std must be > 0");
    if (max_lag_ < 1) throw config_error("SCM max_lag must be >= 1");
    if (density_ < 0.0 || density_ > 1.0 || nonlinearity_ < 0.0 || nonlinearity_ > 1.0)
      throw config_error("SCM density and nonlinearity must lie in [0, 1]");
    std::vector<bool> has_self(static_cast<std::size_t>(n), false);
    std::vector<double> linear_sum(static_cast<std::size_t>(n), 0.0);
    for (const auto& e : edges_) {
      if (e.src < 0 || e.dst < 0 || e.src >= n || e.dst >= n)
        throw config_error("SCM edge references a variable outside the partition");
      if (e.lag < 1 || e.lag > max_lag_)
        throw config_error("SCM edge lag " + std::to_string(e.lag) + " outside 1.." + std::to_string(max_lag_));
      if (!std::isfinite(e.coefficient)) throw config_error("SCM edge coefficient must be finite");
      if (e.src == e.dst) has_self[static_cast<std::size_t>(e.dst)] = true;
      if (e.function == edge_function::linear) linear_sum[static_cast<std::size_t>(e.dst)] += std::abs(e.coefficient);
    }
    for (Index v = 0; v < n; ++v) {
      if (!has_self[static_cast<std::size_t>(v)])
        throw config_error("SCM variable " + std::to_string(v) + " has no autoregressive self-edge");
      if (linear_sum[static_cast<std::size_t>(v)] > scm_stability_bound + 1e-12)
        throw config_error("SCM variable " + std::to_string(v) + " violates the stability guard: sum of |linear "
                           "coefficients| = " + format_double(linear_sum[static_cast<std::size_t>(v)]) + " > 0.9");
    }
  }

  group_partition partition_;
  std::vector<scm_edge> edges_;
  double noise_std_ = 1.0;
  double density_ = 0.0;
  double nonlinearity_ = 0.0;
  int max_lag_ = 1;
  std::uint64_t seed_ = 0;
};

/// Number of ordered variable pairs (u, v) with u, v in different groups.
inline Index admissible_cross_pairs(const group_partition& partition) {
  const Index n = partition.variables();
  Index within = 0;
  for (const auto& g : partition.groups()) within += static_cast<Index>(g.size() * g.size());
  return n * n - within;
}

inline scm_spec sample_spec(const group_partition& partition, double density, double nonlinearity, int max_lag,
                            std::uint64_t seed, double noise_std = 1.0) {
  if (density < 0.0 || density > 1.0 || nonlinearity < 0.0 || nonlinearity > 1.0)
    throw config_error("density and nonlinearity must lie in [0, 1]");
  if (max_lag < 1) throw config_error("max_lag must be >= 1");
  rng_t rng = make_rng(seed, 0x5c3);
  std::uniform_int_distribution<int> lag_dist(1, max_lag);
  std::uniform_real_distribution<double> magnitude(0.3, 0.8);
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution within_coin(scm_within_group_probability);
  std::uniform_int_distribution<int> nonlinear_kind(1, 4);
  auto draw_coefficient = [&] { return (coin(rng) ? 1.0 : -1.0) * magnitude(rng); };

  const int n = static_cast<int>(partition.variables());
  std::vector<scm_edge> edges;
  for (int v = 0; v < n; ++v) edges.push_back({v, v, 1, edge_function::linear, scm_self_coefficient});

  std::vector<std::pair<int, int>> cross_pairs;
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v)
      if (partition.group_of(u) != partition.group_of(v)) cross_pairs.emplace_back(u, v);
  std::shuffle(cross_pairs.begin(), cross_pairs.end(), rng);
  const auto realized = static_cast<std::size_t>(std::llround(density * static_cast<double>(cross_pairs.size())));
  cross_pairs.resize(realized);
  std::sort(cross_pairs.begin(), cross_pairs.end());

  std::vector<std::size_t> order(realized);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto nonlinear_count = static_cast<std::size_t>(std::llround(nonlinearity * static_cast<double>(realized)));
  std::vector<bool> is_nonlinear(realized, false);
  for (std::size_t k = 0; k < nonlinear_count; ++k) is_nonlinear[order[k]] = true;

  for (std::size_t k = 0; k < realized; ++k) {
    const auto fn = is_nonlinear[k] ? static_cast<edge_function>(nonlinear_kind(rng)) : edge_function::linear;
    const int lag = lag_dist(rng);
    edges.push_back({cross_pairs[k].first, cross_pairs[k].second, lag, fn, draw_coefficient()});
  }

  for (const auto& g : partition.groups())
    for (int u : g)
      for (int v : g)
        if (u != v && within_coin(rng)) {
          const int lag = lag_dist(rng);
          edges.push_back({u, v, lag, edge_function::linear, draw_coefficient()});
        }

  // Rescale non-self linear inputs so each equation meets the stability guard
  // with the self coefficient kept fixed.
  std::vector<double> other_sum(static_cast<std::size_t>(n), 0.0);
  for (const auto& e : edges)
    if (e.src != e.dst && e.function == edge_function::linear)
      other_sum[static_cast<std::size_t>(e.dst)] += std::abs(e.coefficient);
  const double budget = scm_stability_bound - scm_self_coefficient;
  for (auto& e : edges) {
    const double s = other_sum[static_cast<std::size_t>(e.dst)];
    if (e.src != e.dst && e.function == edge_function::linear && s > budget) e.coefficient *= budget / s * (1.0 - 1e-12);
  }

  return {partition, std::move(edges), noise_std, density, nonlinearity, max_lag, seed};
}

inline group_causal_graph truth_graph(const scm_spec& spec) {
  const auto& p = spec.partition();
  group_causal_graph g(p.size());
  for (const auto& e : spec.edges()) {
    const int gi = p.group_of(e.src), gj = p.group_of(e.dst);
    if (gi != gj) g.set_edge(gi, gj);
  }
  return g;
}

struct simulation {
  time_series_panel panel;
  group_causal_graph truth;
};

inline constexpr double scm_divergence_bound = 1e6;

inline simulation simulate(const scm_spec& spec, Index length, Index burn_in, std::uint64_t seed) {
  if (length < 1) throw config_error("simulation length must be >= 1");
  if (burn_in < spec.max_lag())
    throw config_error("burn-in " + std::to_string(burn_in) + " must be >= max_lag " + std::to_string(spec.max_lag()));
  const Index n = spec.variables();
  const Index total = length + burn_in;

  std::vector<std::vector<scm_edge>> incoming(static_cast<std::size_t>(n));
  for (const auto& e : spec.edges()) incoming[static_cast<std::size_t>(e.dst)].push_back(e);

  rng_t rng = make_rng(seed, 0x51a);
  std::normal_distribution<double> noise(0.0, spec.noise_std());
  MatrixXd z = MatrixXd::Zero(total, n);
  for (Index t = 0; t < total; ++t) {
    for (Index v = 0; v < n; ++v) {
      double acc = noise(rng);
      for (const auto& e : incoming[static_cast<std::size_t>(v)]) {
        if (t - e.lag < 0) continue;
        acc += e.coefficient * apply_edge_function(e.function, z(t - e.lag, e.src));
      }
      if (!(std::abs(acc) <= scm_divergence_bound))
        throw numeric_error("SCM simulation diverged at step " + std::to_string(t) + " (variable " +
                            std::to_string(v) + "); use smaller coefficients");
      z(t, v) = acc;
    }
  }
  return {time_series_panel(z.bottomRows(length)), truth_graph(spec)};
}

}  // namespace gcausal

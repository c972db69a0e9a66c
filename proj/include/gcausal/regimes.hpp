#pragma once

// Regime identification: k-means over correlation-normalized sliding-window
// covariance matrices, followed by a majority filter to enforce contiguity.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <vector>

#include "core.hpp"
#include "knockoffs.hpp"
#include "random.hpp"

namespace gcausal {

inline std::vector<MatrixXd> windowed_covariances(const time_series_panel& panel, Index window, Index stride) {
  if (stride < 1) throw config_error("covariance window stride must be >= 1");
  if (window < panel.variables() + 1)
    throw config_error("covariance window " + std::to_string(window) + " must be >= N + 1 = " +
                       std::to_string(panel.variables() + 1));
  if (window > panel.length())
    throw data_error("covariance window " + std::to_string(window) + " exceeds series length " +
                     std::to_string(panel.length()));
  std::vector<MatrixXd> out;
  for (Index off = 0; off + window <= panel.length(); off += stride)
    out.push_back(repair_psd(sample_covariance(panel.values().middleRows(off, window)), 0.0));
  return out;
}

struct regime_segment {
  Index start = 0;  // first time step (inclusive)
  Index end = 0;    // last time step (exclusive)
  int regime = 0;
  std::size_t first_window = 0;
  std::size_t last_window = 0;  // inclusive

  bool operator==(const regime_segment&) const = default;
};

struct regime_labels {
  Index window_length = 0;
  Index stride = 1;
  int clusters = 0;
  std::vector<int> raw_labels;  // k-means labels before smoothing
  std::vector<int> labels;      // smoothed labels, one per window
  std::vector<regime_segment> segments;
  double inertia = 0.0;
  double silhouette = 0.0;
};

namespace detail {

inline std::vector<VectorXd> covariance_features(const std::vector<MatrixXd>& covs) {
  std::vector<VectorXd> out;
  for (const auto& c : covs) {
    const Index n = c.rows();
    if (n < 2) throw data_error("regime clustering needs at least two variables");
    VectorXd d = c.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    VectorXd f(n * (n - 1) / 2);
    Index k = 0;
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) f(k++) = c(i, j) * d(i) * d(j);
    out.push_back(std::move(f));
  }
  return out;
}

struct kmeans_fit {
  std::vector<int> labels;
  double inertia = std::numeric_limits<double>::infinity();
};

inline std::optional<kmeans_fit> kmeans_once(const std::vector<VectorXd>& x, int k, rng_t& rng) {
  const std::size_t n = x.size();
  // k-means++ seeding
  std::vector<VectorXd> centers;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  centers.push_back(x[pick(rng)]);
  std::vector<double> d2(n);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, (x[i] - c).squaredNorm());
      d2[i] = best;
      total += best;
    }
    if (!(total > 0.0)) {
      centers.push_back(x[pick(rng)]);
      continue;
    }
    std::uniform_real_distribution<double> u(0.0, total);
    double r = u(rng);
    std::size_t chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      r -= d2[i];
      if (r <= 0.0) {
        chosen = i;
        break;
      }
    }
    centers.push_back(x[chosen]);
  }

  std::vector<int> labels(n, -1);
  for (int iter = 0; iter < 300; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (x[i] - centers[static_cast<std::size_t>(c)]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    std::vector<VectorXd> sums(static_cast<std::size_t>(k), VectorXd::Zero(x.front().size()));
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums[static_cast<std::size_t>(labels[i])] += x[i];
      counts[static_cast<std::size_t>(labels[i])]++;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0) return std::nullopt;
      centers[static_cast<std::size_t>(c)] = sums[static_cast<std::size_t>(c)] / counts[static_cast<std::size_t>(c)];
    }
    if (!changed) break;
  }
  kmeans_fit fit;
  fit.labels = std::move(labels);
  fit.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) fit.inertia += (x[i] - centers[static_cast<std::size_t>(fit.labels[i])]).squaredNorm();
  return fit;
}

// Majority vote over a centered window (truncated at the ends); ties keep the
// center label. Equivalent to a median filter for two clusters and invariant
// to relabeling for any k.
inline std::vector<int> majority_filter(const std::vector<int>& labels, int width) {
  if (width <= 1) return labels;
  const std::ptrdiff_t half = width / 2;
  const auto n = static_cast<std::ptrdiff_t>(labels.size());
  std::vector<int> out(labels.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    std::map<int, int> votes;
    for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, i - half); j <= std::min(n - 1, i + half); ++j)
      votes[labels[static_cast<std::size_t>(j)]]++;
    int best = labels[static_cast<std::size_t>(i)];
    int best_votes = votes[best];
    for (const auto& [label, count] : votes)
      if (count > best_votes) {
        best = label;
        best_votes = count;
      }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

inline double silhouette(const std::vector<VectorXd>& x, const std::vector<int>& labels, int k) {
  const std::size_t n = x.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
    std::vector<int> cnt(static_cast<std::size_t>(k), 0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sum[static_cast<std::size_t>(labels[j])] += (x[i] - x[j]).norm();
      cnt[static_cast<std::size_t>(labels[j])]++;
    }
    const auto own = static_cast<std::size_t>(labels[i]);
    if (cnt[own] == 0) continue;  // singleton clusters score 0
    const double a = sum[own] / cnt[own];
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sum.size(); ++c)
      if (c != own && cnt[c] > 0) b = std::min(b, sum[c] / cnt[c]);
    if (std::isinf(b)) continue;
    const double m = std::max(a, b);
    if (m > 0.0) total += (b - a) / m;
  }
  return total / static_cast<double>(n);
}

// Renumber labels by order of first appearance.
inline std::vector<int> canonical_labels(const std::vector<int>& labels) {
  std::map<int, int> remap;
  std::vector<int> out;
  for (int l : labels) {
    auto it = remap.find(l);
    if (it == remap.end()) it = remap.emplace(l, static_cast<int>(remap.size())).first;
    out.push_back(it->second);
  }
  return out;
}

}  // namespace detail

/// Segments from label runs. Window l owns time steps [l*stride, (l+1)*stride),
/// the last window extends to l*stride + window_length.
inline std::vector<regime_segment> segments_from_labels(const std::vector<int>& labels, Index window_length,
                                                        Index stride) {
  std::vector<regime_segment> out;
  const std::size_t n = labels.size();
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && labels[j + 1] == labels[i]) ++j;
    regime_segment s;
    s.regime = labels[i];
    s.first_window = i;
    s.last_window = j;
    s.start = static_cast<Index>(i) * stride;
    s.end = (j + 1 == n) ? static_cast<Index>(j) * stride + window_length : static_cast<Index>(j + 1) * stride;
    out.push_back(s);
    i = j + 1;
  }
  return out;
}

inline std::vector<int> labels_from_segments(const std::vector<regime_segment>& segments) {
  std::vector<int> out;
  for (const auto& s : segments)
    for (std::size_t w = s.first_window; w <= s.last_window; ++w) out.push_back(s.regime);
  return out;
}

inline constexpr int kmeans_restarts = 10;

inline regime_labels cluster_regimes(const std::vector<MatrixXd>& covs, int k, int smoothing_width, std::uint64_t seed,
                                     Index window_length = 1, Index stride = 1) {
  if (k < 2) throw config_error("regime clustering needs k >= 2");
  if (static_cast<int>(covs.size()) < k)
    throw data_error("only " + std::to_string(covs.size()) + " covariance windows for k = " + std::to_string(k));
  const auto features = detail::covariance_features(covs);
  rng_t rng = make_rng(seed, 0x7e9);
  std::optional<detail::kmeans_fit> best;
  int successes = 0, failures = 0;
  while (successes < kmeans_restarts) {
    auto fit = detail::kmeans_once(features, k, rng);
    if (!fit) {
      if (++failures >= kmeans_restarts)
        throw numeric_error("k-means produced an empty cluster in " + std::to_string(failures) + " restarts");
      continue;
    }
    ++successes;
    if (!best || fit->inertia < best->inertia) best = std::move(fit);
  }
  regime_labels out;
  out.window_length = window_length;
  out.stride = stride;
  out.clusters = k;
  out.inertia = best->inertia;
  out.raw_labels = detail::canonical_labels(best->labels);
  out.silhouette = detail::silhouette(features, out.raw_labels, k);
  out.labels = detail::majority_filter(out.raw_labels, smoothing_width);
  out.segments = segments_from_labels(out.labels, window_length, stride);
  return out;
}

inline regime_labels identify_regimes(const time_series_panel& panel, Index window, Index stride, int k,
                                      int smoothing_width, std::uint64_t seed) {
  return cluster_regimes(windowed_covariances(panel, window, stride), k, smoothing_width, seed, window, stride);
}

}  // namespace gcausal

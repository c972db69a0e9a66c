#pragma once

// Two-sample tests used to compare observational and interventional residual
// distributions, and the power study over simple distribution perturbations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "error.hpp"
#include "random.hpp"

namespace gcausal {

enum class test_kind { ks, mwu, cvm, wsr, welch, ad };

inline constexpr test_kind all_test_kinds[] = {test_kind::ks,  test_kind::mwu,   test_kind::cvm,
                                               test_kind::wsr, test_kind::welch, test_kind::ad};

inline std::string to_string(test_kind k) {
  switch (k) {
    case test_kind::mwu: return "MWU";
    case test_kind::cvm: return "CVM";
    case test_kind::wsr: return "WSR";
    case test_kind::welch: return "WELCH";
    case test_kind::ad: return "AD";
    default: return "KS";
  }
}

inline test_kind parse_test_kind(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  for (auto k : all_test_kinds)
    if (to_string(k) == s) return k;
  throw config_error("unknown test kind '" + s + "' (expected KS|MWU|CVM|WSR|WELCH|AD)");
}

struct test_outcome {
  test_kind kind = test_kind::ks;
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
};

inline constexpr std::size_t min_test_samples = 5;
inline constexpr int permutation_count = 199;

// ---------------------------------------------------------------------------
// Distribution tails

inline double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

inline double two_sided_normal_p(double z) { return std::min(1.0, 2.0 * normal_upper_tail(std::abs(z))); }

inline double student_t_two_sided_p(double t, double df) {
  if (std::isnan(t)) return 1.0;
  if (std::isinf(t)) return 0.0;
  boost::math::students_t dist(df);
  return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
}

inline double f_upper_tail(double f, double df1, double df2) {
  if (std::isinf(f)) return 0.0;
  if (!(f > 0.0)) return 1.0;
  boost::math::fisher_f dist(df1, df2);
  return std::clamp(boost::math::cdf(boost::math::complement(dist, f)), 0.0, 1.0);
}

/// Asymptotic Kolmogorov tail Q(C) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 C^2),
/// truncated once a term drops below 1e-12. Below C = 1 the same function is
/// evaluated through its theta-function dual, which converges in a handful of
/// terms where the alternating series would need hundreds.
inline double kolmogorov_p_value(double c) {
  if (!(c > 0.0)) return 1.0;
  if (c < 1.0) {
    constexpr double pi = 3.14159265358979323846;
    double acc = 0.0;
    for (int k = 1; k < 100; ++k) {
      const double odd = 2.0 * k - 1.0;
      const double term = std::exp(-odd * odd * pi * pi / (8.0 * c * c));
      acc += term;
      if (term < 1e-16) break;
    }
    return std::clamp(1.0 - std::sqrt(2.0 * pi) / c * acc, 0.0, 1.0);
  }
  double acc = 0.0;
  for (int k = 1; k < 10000; ++k) {
    const double term = std::exp(-2.0 * k * k * c * c);
    acc += (k % 2 == 1) ? term : -term;
    if (term < 1e-12) break;
  }
  return std::clamp(2.0 * acc, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Pooled-sample representation shared by the rank and ECDF statistics

namespace detail {

struct pooled_sample {
  std::vector<double> sorted;      // pooled values, ascending
  std::vector<std::uint8_t> label; // 0 = first sample, 1 = second sample, aligned with `sorted`
  std::vector<std::size_t> tie_end;  // exclusive end index of each run of equal values
  std::size_t n0 = 0, n1 = 0;
};

inline pooled_sample pool(std::span<const double> a, std::span<const double> b) {
  std::vector<std::pair<double, std::uint8_t>> tmp;
  tmp.reserve(a.size() + b.size());
  for (double x : a) tmp.emplace_back(x, 0);
  for (double x : b) tmp.emplace_back(x, 1);
  std::sort(tmp.begin(), tmp.end());
  pooled_sample p;
  p.n0 = a.size();
  p.n1 = b.size();
  for (const auto& [v, l] : tmp) {
    p.sorted.push_back(v);
    p.label.push_back(l);
  }
  for (std::size_t i = 0; i < p.sorted.size(); ++i)
    if (i + 1 == p.sorted.size() || p.sorted[i + 1] != p.sorted[i]) p.tie_end.push_back(i + 1);
  return p;
}

inline double ks_distance(const pooled_sample& p, const std::vector<std::uint8_t>& label) {
  std::size_t c0 = 0, c1 = 0, start = 0;
  double sup = 0.0;
  for (std::size_t end : p.tie_end) {
    for (std::size_t i = start; i < end; ++i) (label[i] ? c1 : c0)++;
    start = end;
    sup = std::max(sup, std::abs(static_cast<double>(c0) / p.n0 - static_cast<double>(c1) / p.n1));
  }
  return sup;
}

inline double cvm_statistic(const pooled_sample& p, const std::vector<std::uint8_t>& label) {
  // midranks for ties; U = n0 sum (r_i - i)^2 + n1 sum (s_j - j)^2
  double u[2] = {0.0, 0.0};
  double seen[2] = {0.0, 0.0};
  std::size_t start = 0;
  for (std::size_t end : p.tie_end) {
    const double rank = (static_cast<double>(start) + static_cast<double>(end) + 1.0) / 2.0;
    for (std::size_t i = start; i < end; ++i) {
      const int s = label[i];
      seen[s] += 1.0;
      u[s] += (rank - seen[s]) * (rank - seen[s]);
    }
    start = end;
  }
  const double n0 = static_cast<double>(p.n0), n1 = static_cast<double>(p.n1), n = n0 + n1;
  return (n0 * u[0] + n1 * u[1]) / (n0 * n1 * n) - (4.0 * n0 * n1 - 1.0) / (6.0 * n);
}

// k-sample Anderson-Darling with midranks for ties, k = 2.
inline double ad_statistic(const pooled_sample& p, const std::vector<std::uint8_t>& label) {
  const double n = static_cast<double>(p.n0 + p.n1);
  const double sizes[2] = {static_cast<double>(p.n0), static_cast<double>(p.n1)};
  double below[2] = {0.0, 0.0};  // sample counts strictly below the current value
  double acc[2] = {0.0, 0.0};
  std::size_t start = 0;
  for (std::size_t end : p.tie_end) {
    double here[2] = {0.0, 0.0};
    for (std::size_t i = start; i < end; ++i) here[label[i]] += 1.0;
    const double lj = static_cast<double>(end - start);
    const double bj = static_cast<double>(start) + lj / 2.0;
    const double denom = bj * (n - bj) - n * lj / 4.0;
    if (denom > 0.0) {
      for (int s = 0; s < 2; ++s) {
        const double mij = below[s] + here[s] / 2.0;
        const double dev = n * mij - bj * sizes[s];
        acc[s] += lj / n * dev * dev / denom;
      }
    }
    below[0] += here[0];
    below[1] += here[1];
    start = end;
  }
  return (n - 1.0) / n * (acc[0] / sizes[0] + acc[1] / sizes[1]);
}

/// Midranks (1-based) of `values`; also returns sum over tie runs of t^3 - t.
inline std::vector<double> midranks(std::span<const double> values, double* tie_term = nullptr) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(values.size());
  double ties = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    const double t = static_cast<double>(j - i + 1);
    ties += t * t * t - t;
    i = j + 1;
  }
  if (tie_term) *tie_term = ties;
  return ranks;
}

template <class Statistic>
test_outcome permutation_test(test_kind kind, std::span<const double> a, std::span<const double> b, std::uint64_t seed,
                              Statistic stat) {
  const auto p = pool(a, b);
  const double observed = stat(p, p.label);
  // Permuted labels are drawn for the smaller sample first so that swapping
  // the argument order reproduces the same permutation set.
  const std::size_t n = p.sorted.size();
  const std::size_t small = std::min(p.n0, p.n1);
  const std::uint8_t small_label = p.n0 <= p.n1 ? 0 : 1;
  rng_t rng = make_rng(seed, 0x9e7);
  std::vector<std::size_t> idx(n);
  std::vector<std::uint8_t> label(n);
  int exceed = 0;
  const double tol = 1e-12 * std::max(1.0, std::abs(observed));
  for (int k = 0; k < permutation_count; ++k) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    std::fill(label.begin(), label.end(), static_cast<std::uint8_t>(1 - small_label));
    for (std::size_t i = 0; i < small; ++i) label[idx[i]] = small_label;
    if (stat(p, label) >= observed - tol) ++exceed;
  }
  return {kind, observed, static_cast<double>(1 + exceed) / (permutation_count + 1), a.size(), b.size()};
}

inline double mean_of(std::span<const double> x) { return std::accumulate(x.begin(), x.end(), 0.0) / x.size(); }

inline double unbiased_variance(std::span<const double> x, double mean) {
  double acc = 0.0;
  for (double v : x) acc += (v - mean) * (v - mean);
  return acc / static_cast<double>(x.size() - 1);
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline test_outcome ks_test(std::span<const double> a, std::span<const double> b) {
  const auto p = detail::pool(a, b);
  const double d = detail::ks_distance(p, p.label);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double c = std::sqrt(na * nb / (na + nb)) * d;
  return {test_kind::ks, c, kolmogorov_p_value(c), a.size(), b.size()};
}

/// Statistic is U of the first sample; normal approximation with tie and
/// continuity corrections.
inline test_outcome mwu_test(std::span<const double> a, std::span<const double> b) {
  std::vector<double> all(a.begin(), a.end());
  all.insert(all.end(), b.begin(), b.end());
  double ties = 0.0;
  const auto ranks = detail::midranks(all, &ties);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size()), n = na + nb;
  const double rank_sum = std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(a.size()), 0.0);
  const double u = rank_sum - na * (na + 1.0) / 2.0;
  const double mu = na * nb / 2.0;
  const double var = na * nb / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
  double p = 1.0;
  if (var > 0.0) {
    const double z = std::max(0.0, std::abs(u - mu) - 0.5) / std::sqrt(var);
    p = two_sided_normal_p(z);
  }
  return {test_kind::mwu, u, p, a.size(), b.size()};
}

inline test_outcome cvm_test(std::span<const double> a, std::span<const double> b, std::uint64_t seed) {
  return detail::permutation_test(test_kind::cvm, a, b, seed, detail::cvm_statistic);
}

inline test_outcome ad_test(std::span<const double> a, std::span<const double> b, std::uint64_t seed) {
  return detail::permutation_test(test_kind::ad, a, b, seed, detail::ad_statistic);
}

/// Paired by index. Statistic is the z score of W+ (positive-rank sum).
inline test_outcome wsr_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw data_error("Wilcoxon signed-rank needs paired samples of equal length (" + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()) + ")");
  std::vector<double> diff, mag;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) {
      diff.push_back(d);
      mag.push_back(std::abs(d));
    }
  }
  if (diff.empty()) return {test_kind::wsr, 0.0, 1.0, a.size(), b.size()};
  double ties = 0.0;
  const auto ranks = detail::midranks(mag, &ties);
  double w_plus = 0.0;
  for (std::size_t i = 0; i < diff.size(); ++i)
    if (diff[i] > 0.0) w_plus += ranks[i];
  const double n = static_cast<double>(diff.size());
  const double mu = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - ties / 48.0;
  if (!(var > 0.0)) return {test_kind::wsr, 0.0, 1.0, a.size(), b.size()};
  const double z = (w_plus - mu) / std::sqrt(var);
  return {test_kind::wsr, z, two_sided_normal_p(z), a.size(), b.size()};
}

/// Welch's unequal-variance t test (unbiased sample variances).
inline test_outcome welch_test(std::span<const double> a, std::span<const double> b) {
  const double ma = detail::mean_of(a), mb = detail::mean_of(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double va = detail::unbiased_variance(a, ma) / na, vb = detail::unbiased_variance(b, mb) / nb;
  const double se2 = va + vb;
  if (!(se2 > 0.0)) {
    if (ma == mb) return {test_kind::welch, 0.0, 1.0, a.size(), b.size()};
    const double inf = std::numeric_limits<double>::infinity();
    return {test_kind::welch, ma > mb ? inf : -inf, 0.0, a.size(), b.size()};
  }
  const double t = (ma - mb) / std::sqrt(se2);
  const double df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  return {test_kind::welch, t, student_t_two_sided_p(t, df), a.size(), b.size()};
}

inline test_outcome two_sample_test(test_kind kind, std::span<const double> a, std::span<const double> b,
                                    std::uint64_t seed = 0) {
  if (a.size() < min_test_samples || b.size() < min_test_samples)
    throw data_error("two-sample " + to_string(kind) + " test needs at least " + std::to_string(min_test_samples) +
                     " samples per side (got " + std::to_string(a.size()) + " and " + std::to_string(b.size()) + ")");
  for (auto s : {a, b})
    for (double x : s)
      if (!std::isfinite(x)) throw data_error("two-sample test received a non-finite value");
  switch (kind) {
    case test_kind::ks: return ks_test(a, b);
    case test_kind::mwu: return mwu_test(a, b);
    case test_kind::cvm: return cvm_test(a, b, seed);
    case test_kind::wsr: return wsr_test(a, b);
    case test_kind::welch: return welch_test(a, b);
    case test_kind::ad: return ad_test(a, b, seed);
  }
  throw config_error("unhandled test kind");
}

/// "Distribution shift detected": p strictly below alpha.
inline bool decide(const test_outcome& outcome, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw config_error("alpha must lie in (0, 1)");
  return outcome.p_value < alpha;
}

// ---------------------------------------------------------------------------
// Power study

enum class perturbation { control, mean_shift, variance, both, half_n };

inline constexpr perturbation all_perturbations[] = {perturbation::control, perturbation::mean_shift,
                                                     perturbation::variance, perturbation::both,
                                                     perturbation::half_n};

inline std::string to_string(perturbation p) {
  switch (p) {
    case perturbation::mean_shift: return "mean+0.5";
    case perturbation::variance: return "var*2";
    case perturbation::both: return "both";
    case perturbation::half_n: return "half-n";
    default: return "control";
  }
}

struct power_row {
  test_kind test = test_kind::ks;
  perturbation change = perturbation::control;
  std::size_t n = 0;
  double power = 0.0;
};

/// Detection rate at alpha of each test comparing N(0,1) samples against a
/// perturbed sample. half-n applies the mean shift with n/2 samples per side.
inline std::vector<power_row> sensitivity_study(std::size_t n, int repetitions, std::uint64_t seed,
                                                double alpha = 0.05) {
  if (n < 20) throw config_error("sensitivity study needs n >= 20");
  if (repetitions < 100) throw config_error("sensitivity study needs at least 100 repetitions");
  std::vector<power_row> rows;
  for (std::size_t pi = 0; pi < std::size(all_perturbations); ++pi) {
    const auto change = all_perturbations[pi];
    const std::size_t size = change == perturbation::half_n ? n / 2 : n;
    const double shift = (change == perturbation::mean_shift || change == perturbation::both ||
                          change == perturbation::half_n) ? 0.5 : 0.0;
    const double scale = (change == perturbation::variance || change == perturbation::both) ? std::sqrt(2.0) : 1.0;
    std::vector<int> hits(std::size(all_test_kinds), 0);
    for (int r = 0; r < repetitions; ++r) {
      const std::uint64_t rep_seed = derive_seed(seed, pi * 1000003ULL + static_cast<std::uint64_t>(r));
      rng_t rng = make_rng(rep_seed, 0);
      std::normal_distribution<double> normal(0.0, 1.0);
      std::vector<double> a(size), b(size);
      for (auto& x : a) x = normal(rng);
      for (auto& x : b) x = shift + scale * normal(rng);
      for (std::size_t k = 0; k < std::size(all_test_kinds); ++k)
        hits[k] += decide(two_sample_test(all_test_kinds[k], a, b, rep_seed), alpha);
    }
    for (std::size_t k = 0; k < std::size(all_test_kinds); ++k)
      rows.push_back({all_test_kinds[k], change, size, static_cast<double>(hits[k]) / repetitions});
  }
  return rows;
}

}  // namespace gcausal

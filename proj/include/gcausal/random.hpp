#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace gcausal {

using rng_t = std::mt19937_64;

// splitmix64 finalizer; used to derive independent generator streams.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for stream `stream` under master seed `seed`. Distinct (seed, stream)
/// pairs give statistically unrelated generators.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix_seed(mix_seed(seed) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

inline rng_t make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return rng_t{derive_seed(seed, stream)};
}

inline Eigen::MatrixXd standard_normal_matrix(Eigen::Index rows, Eigen::Index cols, rng_t& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd out(rows, cols);
  // Row-major fill so that adding columns does not reshuffle earlier draws.
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = normal(rng);
  return out;
}

}  // namespace gcausal

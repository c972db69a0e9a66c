#pragma once

// Second-order Gaussian knockoffs with the equicorrelated s rule. Rows of the
// standardized panel are treated as exchangeable draws of the stationary
// N-dimensional marginal, so knockoff columns carry no autocorrelation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "core.hpp"
#include "random.hpp"

namespace gcausal {

inline constexpr double psd_floor = 1e-8;
inline constexpr double default_shrinkage = 0.1;

/// Clips eigenvalues below `floor` and rebuilds the matrix in its eigenbasis.
inline MatrixXd repair_psd(const MatrixXd& m, double floor = psd_floor) {
  const MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
  if (es.info() != Eigen::Success) throw numeric_error("eigendecomposition failed during PSD repair");
  if (es.eigenvalues().minCoeff() >= floor) return sym;
  const VectorXd clipped = es.eigenvalues().cwiseMax(floor);
  MatrixXd out = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

/// Population-denominator covariance of the columns.
inline MatrixXd sample_covariance(const MatrixXd& x) {
  const MatrixXd c = x.rowwise() - x.colwise().mean();
  return (c.transpose() * c) / static_cast<double>(x.rows());
}

/// Cross-covariance of the columns of a with the columns of b.
inline MatrixXd sample_cross_covariance(const MatrixXd& a, const MatrixXd& b) {
  const MatrixXd ca = a.rowwise() - a.colwise().mean();
  const MatrixXd cb = b.rowwise() - b.colwise().mean();
  return (ca.transpose() * cb) / static_cast<double>(a.rows());
}

inline MatrixXd covariance_to_correlation(const MatrixXd& cov) {
  const VectorXd inv_sd = cov.diagonal().cwiseSqrt().cwiseInverse();
  MatrixXd r = inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
  r.diagonal().setOnes();
  return r;
}

struct moment_estimate {
  VectorXd mean;
  MatrixXd covariance;
  MatrixXd correlation;
};

/// Shrunk covariance (1 - gamma) S + gamma diag(S), PSD-repaired.
inline moment_estimate estimate_moments(const time_series_panel& panel, double shrinkage = default_shrinkage) {
  if (!(shrinkage >= 0.0 && shrinkage < 1.0)) throw config_error("covariance shrinkage must lie in [0, 1)");
  if (panel.length() < 2) throw data_error("moment estimation needs at least 2 rows");
  const auto& x = panel.values();
  moment_estimate m;
  m.mean = column_means(x);
  const MatrixXd s = sample_covariance(x);
  for (Index j = 0; j < s.rows(); ++j)
    if (!(s(j, j) > 0.0)) throw data_error("variable '" + panel.names()[static_cast<std::size_t>(j)] + "' has zero variance");
  MatrixXd shrunk = (1.0 - shrinkage) * s;
  shrunk.diagonal() = s.diagonal();
  m.covariance = repair_psd(shrunk);
  m.correlation = covariance_to_correlation(m.covariance);
  return m;
}

/// Uniform s_j = min(2 lambda_min(R), 1).
inline VectorXd equicorrelated_s(const MatrixXd& correlation) {
  if (correlation.rows() != correlation.cols() || correlation.rows() < 1)
    throw data_error("correlation matrix must be square and non-empty");
  for (Index j = 0; j < correlation.rows(); ++j)
    if (std::abs(correlation(j, j) - 1.0) > 1e-8) throw data_error("correlation matrix must have a unit diagonal");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (correlation + correlation.transpose()), Eigen::EigenvaluesOnly);
  const double s = std::min(2.0 * es.eigenvalues().minCoeff(), 1.0);
  if (!(s > 0.0)) throw numeric_error("correlation matrix is singular; equicorrelated s would be non-positive");
  return VectorXd::Constant(correlation.rows(), s);
}

struct knockoff_panel {
  MatrixXd values;       // T x N, aligned with the source panel
  VectorXd s;            // length N, in (0, 1]
  MatrixXd covariance;   // shrunk covariance the construction targeted
};

/// Draws Ztilde = X (I - R^-1 D) + E, rows of E ~ N(0, 2D - D R^-1 D), for a
/// standardized panel X.
inline knockoff_panel sample_knockoffs(const time_series_panel& panel, const moment_estimate& moments,
                                       const VectorXd& s, std::uint64_t seed) {
  const Index n = panel.variables();
  if (moments.correlation.rows() != n || s.size() != n)
    throw data_error("knockoff moments / s do not match the panel width");
  const MatrixXd& r = moments.correlation;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(r);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() < 1e-12)
    throw numeric_error("correlation matrix is singular after shrinkage");
  const MatrixXd r_inv = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  const auto d = s.asDiagonal();

  MatrixXd v = MatrixXd(2.0 * MatrixXd(d)) - MatrixXd(d * r_inv * d);
  v = 0.5 * (v + v.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> vs(v);
  const double scale = std::max(1.0, v.diagonal().cwiseAbs().maxCoeff());
  if (vs.info() != Eigen::Success || vs.eigenvalues().minCoeff() < -1e-6 * scale)
    throw numeric_error("knockoff conditional covariance is not PSD; s is invalid for this correlation");
  const VectorXd root = vs.eigenvalues().cwiseMax(psd_floor).cwiseSqrt();
  const MatrixXd v_sqrt_t = root.asDiagonal() * vs.eigenvectors().transpose();

  rng_t rng = make_rng(seed, 0x4c0ff);
  const MatrixXd noise = standard_normal_matrix(panel.length(), n, rng) * v_sqrt_t;
  const MatrixXd proj = MatrixXd::Identity(n, n) - r_inv * d;
  knockoff_panel out;
  out.values = panel.values() * proj + noise;
  out.s = s;
  out.covariance = moments.covariance;
  if (!out.values.allFinite()) throw numeric_error("knockoff sampling produced non-finite values");
  return out;
}

/// estimate_moments -> equicorrelated_s -> sample_knockoffs on a standardized panel.
inline knockoff_panel make_knockoffs(const time_series_panel& standardized, double shrinkage, std::uint64_t seed) {
  const auto moments = estimate_moments(standardized, shrinkage);
  return sample_knockoffs(standardized, moments, equicorrelated_s(moments.correlation), seed);
}

struct knockoff_report {
  double cov_match_error = 0.0;
  double mean_self_corr = 0.0;
  double cross_block_error = 0.0;
};

inline knockoff_report diagnostics(const time_series_panel& panel, const knockoff_panel& knockoffs) {
  const MatrixXd& z = panel.values();
  const MatrixXd& zk = knockoffs.values;
  if (z.rows() != zk.rows() || z.cols() != zk.cols()) throw data_error("knockoffs are not aligned with the panel");
  knockoff_report rep;
  const MatrixXd cz = sample_covariance(z);
  rep.cov_match_error = (sample_covariance(zk) - cz).cwiseAbs().maxCoeff();

  const MatrixXd cross = sample_cross_covariance(z, zk);
  const VectorXd sd_z = cz.diagonal().cwiseSqrt();
  const VectorXd sd_k = sample_covariance(zk).diagonal().cwiseSqrt();
  double acc = 0.0;
  for (Index j = 0; j < z.cols(); ++j) {
    const double denom = sd_z(j) * sd_k(j);
    acc += denom > 0.0 ? std::abs(cross(j, j) / denom) : 0.0;
  }
  rep.mean_self_corr = acc / static_cast<double>(z.cols());

  // D in covariance units: s_j * Sigma_jj.
  MatrixXd target = knockoffs.covariance;
  target.diagonal() -= knockoffs.s.cwiseProduct(knockoffs.covariance.diagonal());
  rep.cross_block_error = (cross - target).cwiseAbs().maxCoeff();
  return rep;
}

/// Largest change of the empirical 2N x 2N covariance of [Z, Ztilde] when any
/// single column j is swapped with its knockoff.
inline double swap_deviation(const MatrixXd& z, const MatrixXd& zk) {
  const Index n = z.cols();
  MatrixXd joint(z.rows(), 2 * n);
  joint << z, zk;
  const MatrixXd c = sample_covariance(joint);
  double worst = 0.0;
  for (Index j = 0; j < n; ++j) {
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(2 * n);
    perm.setIdentity();
    perm.indices()(j) = static_cast<int>(n + j);
    perm.indices()(n + j) = static_cast<int>(j);
    const MatrixXd swapped = perm * c * perm.transpose();
    worst = std::max(worst, (swapped - c).cwiseAbs().maxCoeff());
  }
  return worst;
}

/// T x N Gaussian panel with unit variances and common pairwise correlation rho.
inline MatrixXd equicorrelated_gaussian(Index length, Index n, double rho, rng_t& rng) {
  const MatrixXd e = standard_normal_matrix(length, n + 1, rng);
  return std::sqrt(rho) * e.col(n).replicate(1, n) + std::sqrt(1.0 - rho) * e.leftCols(n);
}

struct dimension_sweep_row {
  Index n = 0;
  double mean_self_corr = 0.0;
};

struct dimension_sweep_options {
  double rho = 0.5;
  Index length = 200;
  double shrinkage = default_shrinkage;
};

/// Mean |corr(Z_j, Ztilde_j)| as a function of dimension, averaged over trials.
inline std::vector<dimension_sweep_row> dimension_sweep(const std::vector<Index>& dims, int trials, std::uint64_t seed,
                                                        const dimension_sweep_options& opt = {}) {
  if (dims.empty()) throw config_error("dimension sweep needs at least one dimension");
  if (trials < 1) throw config_error("dimension sweep needs at least one trial");
  std::vector<dimension_sweep_row> out;
  for (std::size_t d = 0; d < dims.size(); ++d) {
    double acc = 0.0;
    for (int t = 0; t < trials; ++t) {
      const std::uint64_t stream = derive_seed(seed, d * 100003ULL + static_cast<std::uint64_t>(t));
      rng_t rng = make_rng(stream, 1);
      const auto z = standardize(time_series_panel(equicorrelated_gaussian(opt.length, dims[d], opt.rho, rng))).panel;
      const auto ko = make_knockoffs(z, opt.shrinkage, stream);
      acc += diagnostics(z, ko).mean_self_corr;
    }
    out.push_back({dims[d], acc / trials});
  }
  return out;
}

}  // namespace gcausal

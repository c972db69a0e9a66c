#pragma once

// Canonical-correlation reduction of groups and the pairwise baselines run on
// the reduced panel (VAR Granger causality, knockoff discovery).

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "core.hpp"
#include "engine.hpp"
#include "knockoffs.hpp"
#include "stats.hpp"

namespace gcausal {

inline constexpr double cca_ridge = 1e-6;

namespace detail {

struct standardized_block {
  MatrixXd z;
  VectorXd sd;
};

inline standardized_block standardize_block(const MatrixXd& x, const char* what) {
  const VectorXd mean = column_means(x);
  const VectorXd sd = column_stddevs(x);
  for (Index c = 0; c < sd.size(); ++c)
    if (!(sd(c) > 1e-12 * std::max(1.0, std::abs(mean(c)))))
      throw data_error(std::string(what) + " column " + std::to_string(c) + " has zero variance");
  return {(x.rowwise() - mean.transpose()).array().rowwise() / sd.transpose().array(), sd};
}

inline MatrixXd ridged(const MatrixXd& cov) {
  MatrixXd out = cov;
  out.diagonal().array() += cca_ridge * cov.trace() / static_cast<double>(cov.rows());
  return out;
}

// Largest-magnitude entry positive.
inline void fix_sign(VectorXd& v) {
  Index k = 0;
  v.cwiseAbs().maxCoeff(&k);
  if (v(k) < 0.0) v = -v;
}

inline double correlation(const VectorXd& a, const VectorXd& b) {
  const VectorXd ca = a.array() - a.mean();
  const VectorXd cb = b.array() - b.mean();
  const double denom = std::sqrt(ca.squaredNorm() * cb.squaredNorm());
  return denom > 0.0 ? ca.dot(cb) / denom : 0.0;
}

}  // namespace detail

struct cca_result {
  VectorXd coef_a;  // raw-unit coefficients, unit variance under the group covariance
  VectorXd coef_b;
  double canonical_correlation = 0.0;  // achieved corr(coef_a' Xa, coef_b' Xb), in [0, 1]
  double eigenvalue = 0.0;             // leading eigenvalue (squared canonical correlation)
};

/// Leading pair of Saa^-1 Sab Sbb^-1 Sba a = lambda a, computed on
/// column-standardized data with a ridge on each group covariance.
inline cca_result pairwise_cca(const MatrixXd& xa, const MatrixXd& xb) {
  if (xa.rows() != xb.rows()) throw data_error("CCA blocks must have the same number of rows");
  if (xa.rows() <= xa.cols() + xb.cols())
    throw data_error("CCA needs T > Da + Db (T = " + std::to_string(xa.rows()) + ")");
  const auto a = detail::standardize_block(xa, "group A");
  const auto b = detail::standardize_block(xb, "group B");
  const double t = static_cast<double>(xa.rows());
  const MatrixXd saa = a.z.transpose() * a.z / t;
  const MatrixXd sbb = b.z.transpose() * b.z / t;
  const MatrixXd sab = a.z.transpose() * b.z / t;

  Eigen::LLT<MatrixXd> laa(detail::ridged(saa)), lbb(detail::ridged(sbb));
  if (laa.info() != Eigen::Success || lbb.info() != Eigen::Success)
    throw numeric_error("group covariance is singular after ridge");
  const MatrixXd m = laa.solve(sab * lbb.solve(sab.transpose()));
  Eigen::EigenSolver<MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw numeric_error("CCA eigendecomposition failed");
  const auto& ev = es.eigenvalues();
  Index lead = 0;
  for (Index k = 0; k < ev.size(); ++k) {
    if (std::abs(ev(k).imag()) > 1e-8) throw numeric_error("CCA eigenproblem produced complex eigenvalues");
    if (ev(k).real() > ev(lead).real()) lead = k;
  }
  VectorXd va = es.eigenvectors().col(lead).real();
  detail::fix_sign(va);
  va /= std::sqrt(va.dot(saa * va));
  VectorXd vb = lbb.solve(sab.transpose() * va);
  const double nb = std::sqrt(vb.dot(sbb * vb));
  if (!(nb > 0.0)) vb = VectorXd::Unit(xb.cols(), 0);
  else vb /= nb;
  double corr = va.dot(sab * vb);
  if (corr < 0.0) {
    vb = -vb;
    corr = -corr;
  }
  cca_result out;
  out.coef_a = va.cwiseQuotient(a.sd);
  out.coef_b = vb.cwiseQuotient(b.sd);
  out.canonical_correlation = std::clamp(corr, 0.0, 1.0);
  out.eigenvalue = std::max(0.0, ev(lead).real());
  return out;
}

struct mcca_result {
  std::vector<VectorXd> coefficients;  // per group, raw units, unit group variance
  time_series_panel canonical;         // T x G, standardized canonical variables
  MatrixXd correlations;               // G x G achieved correlations of canonical variables
  double eigenvalue = 0.0;
};

/// Sum-of-correlations multi-set CCA: leading solution of C a = lambda D a with
/// C the full covariance and D its block diagonal.
inline mcca_result mcca_reduce(const time_series_panel& panel, const group_partition& partition) {
  if (partition.variables() != panel.variables()) throw config_error("partition does not match the panel width");
  if (panel.length() <= panel.variables()) throw data_error("MCCA needs more rows than variables");
  const auto s = detail::standardize_block(panel.values(), "panel");
  const double t = static_cast<double>(panel.length());
  const int g = partition.size();

  // Reorder columns group by group.
  std::vector<int> order;
  std::vector<Index> offset;
  for (int k = 0; k < g; ++k) {
    offset.push_back(static_cast<Index>(order.size()));
    for (int v : partition.group(k)) order.push_back(v);
  }
  offset.push_back(static_cast<Index>(order.size()));
  const Index n = panel.variables();
  MatrixXd z(panel.length(), n);
  for (Index c = 0; c < n; ++c) z.col(c) = s.z.col(order[static_cast<std::size_t>(c)]);
  MatrixXd c = z.transpose() * z / t;
  MatrixXd d = MatrixXd::Zero(n, n);
  for (int k = 0; k < g; ++k) {
    const Index o = offset[static_cast<std::size_t>(k)], len = offset[static_cast<std::size_t>(k) + 1] - o;
    const MatrixXd block = detail::ridged(c.block(o, o, len, len));
    c.block(o, o, len, len) = block;
    d.block(o, o, len, len) = block;
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(c, d);
  if (es.info() != Eigen::Success) throw numeric_error("MCCA block covariance is singular after ridge");
  const VectorXd lead = es.eigenvectors().col(n - 1);

  mcca_result out;
  out.eigenvalue = es.eigenvalues()(n - 1);
  MatrixXd canon(panel.length(), g);
  for (int k = 0; k < g; ++k) {
    const Index o = offset[static_cast<std::size_t>(k)], len = offset[static_cast<std::size_t>(k) + 1] - o;
    VectorXd a = lead.segment(o, len);
    const MatrixXd zk = z.middleCols(o, len);
    const MatrixXd sk = zk.transpose() * zk / t;
    if (!(a.norm() > 0.0)) a = VectorXd::Unit(len, 0);
    if (k == 0) detail::fix_sign(a);
    a /= std::sqrt(a.dot(sk * a));
    VectorXd col = zk * a;
    if (k > 0 && detail::correlation(col, canon.col(0)) < 0.0) {
      a = -a;
      col = -col;
    }
    canon.col(k) = col;
    VectorXd raw(len);
    for (Index q = 0; q < len; ++q) raw(q) = a(q) / s.sd(order[static_cast<std::size_t>(o + q)]);
    out.coefficients.push_back(raw);
  }
  out.correlations = MatrixXd::Identity(g, g);
  for (int i = 0; i < g; ++i)
    for (int j = i + 1; j < g; ++j) out.correlations(i, j) = out.correlations(j, i) = detail::correlation(canon.col(i), canon.col(j));

  std::vector<std::string> names;
  for (int k = 0; k < g; ++k) names.push_back("g" + std::to_string(k));
  const VectorXd mean = column_means(canon), sd = column_stddevs(canon);
  for (Index k = 0; k < g; ++k)
    if (sd(k) > 0.0) canon.col(k) = (canon.col(k).array() - mean(k)) / sd(k);
  out.canonical = time_series_panel(std::move(canon), std::move(names));
  return out;
}

// ---------------------------------------------------------------------------
// VAR and Granger causality

struct var_model {
  int lag_order = 0;
  std::vector<MatrixXd> coefficients;  // per lag k = 1..p: N x N, row = equation
  VectorXd intercept;
  MatrixXd residual_covariance;
};

namespace detail {

// Rows t = p..T-1 of [1, z_{t-1}, ..., z_{t-p}], optionally dropping one column's lags.
inline MatrixXd lagged_design(const MatrixXd& z, int p, int drop_column = -1) {
  const Index n = z.cols(), rows = z.rows() - p;
  const Index per_lag = drop_column >= 0 ? n - 1 : n;
  MatrixXd x(rows, 1 + per_lag * p);
  x.col(0).setOnes();
  for (int k = 1; k <= p; ++k) {
    Index col = 1 + (k - 1) * per_lag;
    for (Index c = 0; c < n; ++c) {
      if (c == drop_column) continue;
      x.col(col++) = z.col(c).segment(p - k, rows);
    }
  }
  return x;
}

// OLS coefficients; ridge > 0 adds ridge * trace(X'X)/k to the normal equations.
inline MatrixXd least_squares(const MatrixXd& x, const MatrixXd& y, double ridge) {
  if (ridge > 0.0) {
    MatrixXd xtx = x.transpose() * x;
    xtx.diagonal().array() += ridge * xtx.trace() / static_cast<double>(xtx.rows());
    Eigen::LDLT<MatrixXd> ldlt(xtx);
    return ldlt.solve(x.transpose() * y);
  }
  Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
  if (qr.rank() < x.cols()) throw numeric_error("VAR regressor matrix is rank deficient");
  return qr.solve(y);
}

}  // namespace detail

inline var_model fit_var(const time_series_panel& panel, int lag_order) {
  if (lag_order < 1) throw config_error("VAR lag order must be >= 1");
  const Index n = panel.variables();
  if (panel.length() <= (n * lag_order + 1) + 10)
    throw data_error("VAR(" + std::to_string(lag_order) + ") on " + std::to_string(n) + " variables needs T > " +
                     std::to_string(n * lag_order + 11));
  const auto& z = panel.values();
  const MatrixXd x = detail::lagged_design(z, lag_order);
  const MatrixXd y = z.bottomRows(z.rows() - lag_order);
  const MatrixXd beta = detail::least_squares(x, y, 0.0);  // (1 + Np) x N
  var_model m;
  m.lag_order = lag_order;
  m.intercept = beta.row(0).transpose();
  for (int k = 0; k < lag_order; ++k) m.coefficients.push_back(beta.middleRows(1 + k * n, n).transpose());
  const MatrixXd resid = y - x * beta;
  m.residual_covariance = resid.transpose() * resid / static_cast<double>(resid.rows());
  return m;
}

struct granger_outcome {
  double f_statistic = 0.0;
  double p_value = 1.0;
  double df1 = 0.0;
  double df2 = 0.0;
  double rss_restricted = 0.0;
  double rss_full = 0.0;
};

/// Nested-model F test of "src Granger-causes dst" with p lags of every column.
inline granger_outcome granger_test(const time_series_panel& panel, int src, int dst, int lag_order,
                                    double ridge = 0.0) {
  if (lag_order < 1) throw config_error("VAR lag order must be >= 1");
  const Index n = panel.variables();
  if (src < 0 || dst < 0 || src >= n || dst >= n || src == dst)
    throw config_error("Granger test needs two distinct valid columns");
  if (panel.length() <= (n * lag_order + 1) + 10)
    throw data_error("Granger test with p = " + std::to_string(lag_order) + " needs T > " +
                     std::to_string(n * lag_order + 11));
  const auto& z = panel.values();
  const VectorXd y = z.col(dst).tail(z.rows() - lag_order);
  const MatrixXd xf = detail::lagged_design(z, lag_order);
  const MatrixXd xr = detail::lagged_design(z, lag_order, src);
  const VectorXd rf = y - xf * detail::least_squares(xf, y, ridge);
  const VectorXd rr = y - xr * detail::least_squares(xr, y, ridge);
  granger_outcome g;
  g.rss_full = rf.squaredNorm();
  g.rss_restricted = rr.squaredNorm();
  g.df1 = lag_order;
  g.df2 = static_cast<double>(y.size() - xf.cols());
  if (g.rss_full <= 1e-24 * std::max(1.0, g.rss_restricted)) {
    g.f_statistic = std::numeric_limits<double>::infinity();
    g.p_value = g.rss_restricted > g.rss_full ? 0.0 : 1.0;
    return g;
  }
  g.f_statistic = std::max(0.0, (g.rss_restricted - g.rss_full) / g.df1) / (g.rss_full / g.df2);
  g.p_value = f_upper_tail(g.f_statistic, g.df1, g.df2);
  return g;
}

inline constexpr int default_var_lag = 5;
inline constexpr double vgc_ridge = 1e-8;

/// MCCA reduction followed by pairwise Granger tests on the canonical panel.
inline group_causal_graph mc_vgc_discover(const time_series_panel& panel, const group_partition& partition,
                                          int lag_order = default_var_lag, double alpha = 0.05) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw config_error("alpha must lie in (0, 1)");
  const auto reduced = mcca_reduce(panel, partition);
  group_causal_graph g(partition.size());
  for (int i = 0; i < partition.size(); ++i)
    for (int j = 0; j < partition.size(); ++j)
      if (i != j) g.set_edge(i, j, granger_test(reduced.canonical, i, j, lag_order, vgc_ridge).p_value < alpha);
  return g;
}

/// MCCA reduction followed by knockoff discovery on the canonical variables.
inline group_causal_graph mc_cdmi_discover(const time_series_panel& panel, const group_partition& partition,
                                           const discovery_config& config) {
  const auto reduced = mcca_reduce(panel, partition);
  return discover_pairwise(reduced.canonical, config).graph;
}

}  // namespace gcausal

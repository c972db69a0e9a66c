#pragma once

// Probabilistic autoregressive forecaster: a single-hidden-layer tanh network
// mapping a flattened p x N lag window to a Gaussian (mu, sigma) per variable,
// trained by minimizing the Gaussian negative log-likelihood with Adam.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "core.hpp"
#include "random.hpp"

namespace gcausal {

struct forecaster_config {
  int context_len = 5;
  int hidden_width = 32;
  int horizon = 4;
  double learning_rate = 3e-3;
  int epochs = 30;
  int batch_size = 32;
  double sigma_floor = 1e-3;
  std::uint64_t seed = 0;

  void validate() const {
    if (context_len < 1 || hidden_width < 1 || horizon < 1 || epochs < 1 || batch_size < 1)
      throw config_error("forecaster context_len, hidden_width, horizon, epochs and batch_size must be positive");
    if (!(learning_rate > 0.0)) throw config_error("forecaster learning_rate must be positive");
    if (!(sigma_floor >= 1e-4)) throw config_error("forecaster sigma_floor must be >= 1e-4");
  }

  bool operator==(const forecaster_config&) const = default;
};

inline void to_json(nlohmann::json& j, const forecaster_config& c) {
  j = nlohmann::json{{"context_len", c.context_len}, {"hidden_width", c.hidden_width},
                     {"horizon", c.horizon},         {"learning_rate", c.learning_rate},
                     {"epochs", c.epochs},           {"batch_size", c.batch_size},
                     {"sigma_floor", c.sigma_floor}, {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, forecaster_config& c) {
  c.context_len = j.at("context_len").get<int>();
  c.hidden_width = j.at("hidden_width").get<int>();
  c.horizon = j.at("horizon").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.sigma_floor = j.at("sigma_floor").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
}

namespace detail {

inline double softplus(double a) { return std::max(a, 0.0) + std::log1p(std::exp(-std::abs(a))); }
inline double sigmoid(double a) {
  if (a >= 0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

inline constexpr double half_log_two_pi = 0.91893853320467274178;

}  // namespace detail

/// Network weights. Hidden layer: tanh(w1 x + b1); output: w2 h + b2 whose
/// first N rows are means and last N rows are pre-scales a, sigma =
/// softplus(a) + sigma_floor.
struct model_params {
  forecaster_config config;
  Index variables = 0;
  MatrixXd w1;  // H x (p N)
  VectorXd b1;  // H
  MatrixXd w2;  // 2N x H
  VectorXd b2;  // 2N

  Index input_size() const noexcept { return static_cast<Index>(config.context_len) * variables; }
  Index parameter_count() const noexcept { return w1.size() + b1.size() + w2.size() + b2.size(); }

  VectorXd flatten() const {
    VectorXd out(parameter_count());
    out << Eigen::Map<const VectorXd>(w1.data(), w1.size()), b1, Eigen::Map<const VectorXd>(w2.data(), w2.size()), b2;
    return out;
  }

  void assign(const VectorXd& flat) {
    if (flat.size() != parameter_count()) throw data_error("parameter vector has the wrong length");
    Index k = 0;
    auto take = [&](auto& dst) {
      Eigen::Map<VectorXd>(dst.data(), dst.size()) = flat.segment(k, dst.size());
      k += dst.size();
    };
    take(w1);
    take(b1);
    take(w2);
    take(b2);
  }

  bool operator==(const model_params& o) const {
    return config == o.config && variables == o.variables && w1 == o.w1 && b1 == o.b1 && w2 == o.w2 && b2 == o.b2;
  }
};

inline model_params init_params(const forecaster_config& config, Index variables, std::uint64_t seed) {
  config.validate();
  model_params m;
  m.config = config;
  m.variables = variables;
  const Index in = m.input_size(), h = config.hidden_width, out = 2 * variables;
  rng_t rng = make_rng(seed, 0xf0c);
  auto glorot = [&](Index rows, Index cols) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double scale = std::sqrt(6.0 / static_cast<double>(rows + cols));
    MatrixXd w(rows, cols);
    for (Index c = 0; c < cols; ++c)
      for (Index r = 0; r < rows; ++r) w(r, c) = scale * u(rng);
    return w;
  };
  m.w1 = glorot(h, in);
  m.b1 = VectorXd::Zero(h);
  m.w2 = glorot(out, h);
  m.b2 = VectorXd::Zero(out);
  return m;
}

inline nlohmann::ordered_json to_json(const model_params& m) {
  nlohmann::ordered_json j;
  j["config"] = nlohmann::json(m.config);
  j["variables"] = m.variables;
  auto vec = [](const auto& x) { return std::vector<double>(x.data(), x.data() + x.size()); };
  j["w1"] = vec(m.w1);
  j["b1"] = vec(m.b1);
  j["w2"] = vec(m.w2);
  j["b2"] = vec(m.b2);
  return j;
}

inline model_params model_from_json(const nlohmann::json& j) {
  model_params m = init_params(j.at("config").get<forecaster_config>(), j.at("variables").get<Index>(), 0);
  auto fill = [&](const char* key, auto& dst) {
    const auto v = j.at(key).get<std::vector<double>>();
    if (static_cast<Index>(v.size()) != dst.size()) throw data_error(std::string("model JSON field '") + key + "' has wrong length");
    std::copy(v.begin(), v.end(), dst.data());
  };
  fill("w1", m.w1);
  fill("b1", m.b1);
  fill("w2", m.w2);
  fill("b2", m.b2);
  if (!m.flatten().allFinite()) throw data_error("model JSON contains non-finite parameters");
  return m;
}

/// Batched forward pass. Columns of `inputs` are flattened contexts.
struct forward_pass {
  MatrixXd hidden;  // H x B
  MatrixXd mu;      // N x B
  MatrixXd pre;     // N x B
  MatrixXd sigma;   // N x B
};

inline forward_pass forward(const model_params& m, const MatrixXd& inputs) {
  forward_pass f;
  f.hidden = ((m.w1 * inputs).colwise() + m.b1).array().tanh().matrix();
  const MatrixXd out = (m.w2 * f.hidden).colwise() + m.b2;
  const Index n = m.variables;
  f.mu = out.topRows(n);
  f.pre = out.bottomRows(n);
  f.sigma = f.pre.unaryExpr([&](double a) { return detail::softplus(a) + m.config.sigma_floor; });
  return f;
}

/// Mean Gaussian NLL over all (variable, sample) entries.
inline double gaussian_nll(const MatrixXd& mu, const MatrixXd& sigma, const MatrixXd& targets) {
  const auto z = ((targets - mu).array() / sigma.array());
  return (detail::half_log_two_pi + sigma.array().log() + 0.5 * z.square()).mean();
}

inline double nll(const model_params& m, const MatrixXd& inputs, const MatrixXd& targets) {
  const auto f = forward(m, inputs);
  return gaussian_nll(f.mu, f.sigma, targets);
}

struct loss_and_gradient {
  double loss = 0.0;
  VectorXd gradient;  // same layout as model_params::flatten()
};

inline loss_and_gradient nll_gradient(const model_params& m, const MatrixXd& inputs, const MatrixXd& targets) {
  const auto f = forward(m, inputs);
  const double count = static_cast<double>(targets.size());
  const Eigen::ArrayXXd diff = (targets - f.mu).array();
  const Eigen::ArrayXXd var = f.sigma.array().square();

  loss_and_gradient out;
  out.loss = (detail::half_log_two_pi + f.sigma.array().log() + 0.5 * diff.square() / var).mean();

  const Index n = m.variables;
  MatrixXd d_out(2 * n, inputs.cols());
  d_out.topRows(n) = (-diff / var / count).matrix();
  const Eigen::ArrayXXd d_sigma = (1.0 / f.sigma.array() - diff.square() / (var * f.sigma.array())) / count;
  d_out.bottomRows(n) = (d_sigma * f.pre.unaryExpr([](double a) { return detail::sigmoid(a); }).array()).matrix();

  const MatrixXd g_w2 = d_out * f.hidden.transpose();
  const VectorXd g_b2 = d_out.rowwise().sum();
  const MatrixXd d_hidden = (m.w2.transpose() * d_out).array() * (1.0 - f.hidden.array().square());
  const MatrixXd g_w1 = d_hidden * inputs.transpose();
  const VectorXd g_b1 = d_hidden.rowwise().sum();

  out.gradient.resize(m.parameter_count());
  out.gradient << Eigen::Map<const VectorXd>(g_w1.data(), g_w1.size()), g_b1,
      Eigen::Map<const VectorXd>(g_w2.data(), g_w2.size()), g_b2;
  return out;
}

/// Flattens rows [offset, offset + p) of `values` row by row (oldest first).
inline void flatten_context(const MatrixXd& values, Index offset, Index p, Eigen::Ref<VectorXd> out) {
  const Index n = values.cols();
  for (Index r = 0; r < p; ++r)
    for (Index c = 0; c < n; ++c) out(r * n + c) = values(offset + r, c);
}

/// One-step-ahead training pairs: every context of p rows with the next row
/// as target. Returns (inputs pN x M, targets N x M).
inline std::pair<MatrixXd, MatrixXd> one_step_samples(const MatrixXd& values, Index p) {
  const Index n = values.cols();
  const Index m = values.rows() - p;
  if (m < 1) throw data_error("series too short for context length " + std::to_string(p));
  MatrixXd x(p * n, m), y(n, m);
  for (Index k = 0; k < m; ++k) {
    flatten_context(values, k, p, x.col(k));
    y.col(k) = values.row(k + p).transpose();
  }
  return {std::move(x), std::move(y)};
}

struct training_result {
  model_params params;
  double initial_nll = 0.0;
  std::vector<double> epoch_nll;  // full-data NLL after each epoch
  int best_epoch = 0;             // 0 = initial parameters
};

/// Adam over mini-batches of one-step-ahead pairs. The returned parameters are
/// those with the lowest full-data NLL seen (initial state included).
inline training_result train_with_history(const time_series_panel& panel, const forecaster_config& config) {
  config.validate();
  const Index p = config.context_len;
  if (panel.length() < p + config.horizon)
    throw data_error("training needs at least context_len + horizon = " + std::to_string(p + config.horizon) +
                     " steps, got " + std::to_string(panel.length()));
  auto [x, y] = one_step_samples(panel.values(), p);
  const Index samples = x.cols();

  training_result result;
  model_params m = init_params(config, panel.variables(), config.seed);
  result.initial_nll = nll(m, x, y);
  model_params best = m;
  double best_nll = result.initial_nll;

  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  VectorXd theta = m.flatten();
  VectorXd m1 = VectorXd::Zero(theta.size()), m2 = VectorXd::Zero(theta.size());
  std::int64_t step = 0;

  rng_t rng = make_rng(config.seed, 0xba7c);
  std::vector<Index> order(static_cast<std::size_t>(samples));
  std::iota(order.begin(), order.end(), Index{0});
  const Index batch = std::min<Index>(config.batch_size, samples);
  MatrixXd bx(x.rows(), batch), by(y.rows(), batch);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    int batch_index = 0;
    for (Index start = 0; start < samples; start += batch, ++batch_index) {
      const Index len = std::min(batch, samples - start);
      bx.resize(x.rows(), len);
      by.resize(y.rows(), len);
      for (Index k = 0; k < len; ++k) {
        bx.col(k) = x.col(order[static_cast<std::size_t>(start + k)]);
        by.col(k) = y.col(order[static_cast<std::size_t>(start + k)]);
      }
      const auto lg = nll_gradient(m, bx, by);
      if (!std::isfinite(lg.loss) || !lg.gradient.allFinite())
        throw numeric_error("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch_index));
      ++step;
      m1 = beta1 * m1 + (1.0 - beta1) * lg.gradient;
      m2 = beta2 * m2 + (1.0 - beta2) * lg.gradient.cwiseAbs2();
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      theta.array() -= config.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
      m.assign(theta);
    }
    const double full = nll(m, x, y);
    if (!std::isfinite(full)) throw numeric_error("non-finite training loss at end of epoch " + std::to_string(epoch));
    result.epoch_nll.push_back(full);
    if (full < best_nll) {
      best_nll = full;
      best = m;
      result.best_epoch = epoch;
    }
  }
  result.params = std::move(best);
  return result;
}

inline model_params train(const time_series_panel& panel, const forecaster_config& config) {
  return train_with_history(panel, config).params;
}

/// Per-step Gaussian forecast over the horizon.
struct gaussian_forecast {
  MatrixXd mu;     // T_f x N
  MatrixXd sigma;  // T_f x N
};

namespace detail {

/// Column substitution applied to model inputs: `variables[k]` takes values
/// from column k of `columns` (aligned row-wise with the panel).
struct substitution_view {
  const std::vector<int>* variables = nullptr;
  const MatrixXd* columns = nullptr;
};

// Recursive multi-step forecast for a batch of windows sharing p and T_f.
// Observed context rows use the (possibly substituted) panel values; rows
// appended during recursion are the predicted means of every variable.
inline std::vector<gaussian_forecast> forecast_batch(const model_params& m, const MatrixXd& values,
                                                     const std::vector<forecast_window>& windows,
                                                     const substitution_view& sub) {
  const Index p = m.config.context_len, n = m.variables, horizon = windows.empty() ? 0 : windows.front().horizon;
  const Index b = static_cast<Index>(windows.size());
  MatrixXd inputs(p * n, b);
  for (Index w = 0; w < b; ++w) {
    const auto& win = windows[static_cast<std::size_t>(w)];
    flatten_context(values, win.offset, p, inputs.col(w));
    if (sub.variables) {
      for (std::size_t k = 0; k < sub.variables->size(); ++k) {
        const int v = (*sub.variables)[k];
        for (Index r = 0; r < p; ++r) inputs(r * n + v, w) = (*sub.columns)(win.offset + r, static_cast<Index>(k));
      }
    }
  }
  std::vector<gaussian_forecast> out(static_cast<std::size_t>(b));
  for (auto& f : out) {
    f.mu.resize(horizon, n);
    f.sigma.resize(horizon, n);
  }
  for (Index step = 0; step < horizon; ++step) {
    const auto f = forward(m, inputs);
    for (Index w = 0; w < b; ++w) {
      out[static_cast<std::size_t>(w)].mu.row(step) = f.mu.col(w).transpose();
      out[static_cast<std::size_t>(w)].sigma.row(step) = f.sigma.col(w).transpose();
    }
    if (step + 1 < horizon) {
      // Shift the lag window by one row and append the predicted means.
      MatrixXd shifted(inputs.rows(), b);
      shifted.topRows((p - 1) * n) = inputs.bottomRows((p - 1) * n);
      shifted.bottomRows(n) = f.mu;
      inputs = std::move(shifted);
    }
  }
  return out;
}

}  // namespace detail

/// Forecast from a raw p x N context.
inline gaussian_forecast forecast(const model_params& m, const MatrixXd& context) {
  if (context.rows() != m.config.context_len || context.cols() != m.variables)
    throw data_error("forecast context must be " + std::to_string(m.config.context_len) + " x " +
                     std::to_string(m.variables) + ", got " + std::to_string(context.rows()) + " x " +
                     std::to_string(context.cols()));
  const std::vector<forecast_window> one{{0, m.config.context_len, m.config.horizon}};
  auto out = detail::forecast_batch(m, context, one, {});
  return std::move(out.front());
}

inline constexpr double residual_epsilon = 1e-8;

/// Replacement of the listed variables by the given columns.
struct column_substitution {
  std::vector<int> variables;
  MatrixXd columns;  // T x variables.size()
};

/// Windowed relative forecast errors
///   e_il = (1/T_f) sum_t |z_i(t) - zhat_i(t)| / max(|z_i(t)|, 1e-8),
/// one residual_sample per variable. With a substitution, the listed variables'
/// observed context values are replaced; targets stay the original observations.
inline std::vector<residual_sample> residuals(const model_params& m, const time_series_panel& panel,
                                              const std::vector<forecast_window>& windows,
                                              const std::optional<column_substitution>& substitute = std::nullopt) {
  if (windows.empty()) throw data_error("residuals need at least one window");
  const Index n = m.variables;
  if (panel.variables() != n)
    throw data_error("panel has " + std::to_string(panel.variables()) + " variables, model expects " + std::to_string(n));
  for (const auto& w : windows) {
    if (w.context_len != m.config.context_len || w.horizon != windows.front().horizon)
      throw data_error("window context length / horizon does not match the model");
    if (w.offset < 0 || w.offset + w.context_len + w.horizon > panel.length())
      throw data_error("window exceeds the panel length");
  }
  detail::substitution_view view;
  if (substitute) {
    if (substitute->columns.rows() != panel.length() ||
        substitute->columns.cols() != static_cast<Index>(substitute->variables.size()))
      throw data_error("replacement columns must be " + std::to_string(panel.length()) + " x " +
                       std::to_string(substitute->variables.size()));
    for (int v : substitute->variables)
      if (v < 0 || v >= n) throw data_error("substituted variable index out of range");
    view = {&substitute->variables, &substitute->columns};
  }

  const auto& values = panel.values();
  const auto forecasts = detail::forecast_batch(m, values, windows, view);
  std::vector<residual_sample> out(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)].variable_index = static_cast<int>(i);
    out[static_cast<std::size_t>(i)].errors.reserve(windows.size());
  }
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto target = windows[w].target(values);
    const auto& mu = forecasts[w].mu;
    const double horizon = static_cast<double>(target.rows());
    for (Index i = 0; i < n; ++i) {
      double acc = 0.0;
      for (Index t = 0; t < target.rows(); ++t)
        acc += std::abs(target(t, i) - mu(t, i)) / std::max(std::abs(target(t, i)), residual_epsilon);
      out[static_cast<std::size_t>(i)].errors.push_back(acc / horizon);
    }
  }
  return out;
}

}  // namespace gcausal

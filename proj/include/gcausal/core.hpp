#pragma once

// Data model shared by every module: panels, group partitions, group-level
// graphs, residual samples, CSV ingestion, standardization, forecast windows
// and graph scoring.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "error.hpp"

namespace gcausal {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// TimeSeriesPanel

/// T x N observation matrix with one named column per variable.
class time_series_panel {
 public:
  time_series_panel() = default;

  time_series_panel(MatrixXd values, std::vector<std::string> names)
      : values_(std::move(values)), names_(std::move(names)) {
    if (values_.rows() < 1 || values_.cols() < 1)
      throw data_error("panel must have at least one row and one column");
    if (static_cast<Index>(names_.size()) != values_.cols())
      throw data_error("panel has " + std::to_string(values_.cols()) + " columns but " +
                       std::to_string(names_.size()) + " names");
    std::set<std::string> seen;
    for (const auto& n : names_)
      if (!seen.insert(n).second) throw data_error("duplicate variable name '" + n + "'");
    if (!values_.allFinite()) throw data_error("panel contains non-finite values");
  }

  /// Columns named v0..v{N-1}.
  explicit time_series_panel(MatrixXd values)
      : time_series_panel(values, default_names(values.cols())) {}

  const MatrixXd& values() const noexcept { return values_; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  Index length() const noexcept { return values_.rows(); }
  Index variables() const noexcept { return values_.cols(); }

  /// Contiguous row range [begin, end).
  time_series_panel slice_rows(Index begin, Index end) const {
    if (begin < 0 || end > length() || begin >= end)
      throw data_error("invalid row slice [" + std::to_string(begin) + ", " + std::to_string(end) + ")");
    return {values_.middleRows(begin, end - begin), names_};
  }

  static std::vector<std::string> default_names(Index n) {
    std::vector<std::string> out;
    for (Index i = 0; i < n; ++i) out.push_back("v" + std::to_string(i));
    return out;
  }

 private:
  MatrixXd values_;
  std::vector<std::string> names_;
};

// ---------------------------------------------------------------------------
// GroupPartition

/// Disjoint cover of the variable indices 0..N-1 by G non-empty groups.
class group_partition {
 public:
  group_partition() = default;

  group_partition(std::vector<std::vector<int>> groups, Index n_variables) : groups_(std::move(groups)) {
    if (groups_.empty()) throw config_error("partition must contain at least one group");
    std::vector<int> owner(static_cast<std::size_t>(n_variables), -1);
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      if (groups_[g].empty()) throw config_error("group " + std::to_string(g) + " is empty");
      for (int v : groups_[g]) {
        if (v < 0 || v >= n_variables)
          throw config_error("group " + std::to_string(g) + " references variable " + std::to_string(v) +
                             " outside 0.." + std::to_string(n_variables - 1));
        if (owner[static_cast<std::size_t>(v)] >= 0)
          throw config_error("variable " + std::to_string(v) + " appears in groups " +
                             std::to_string(owner[static_cast<std::size_t>(v)]) + " and " + std::to_string(g));
        owner[static_cast<std::size_t>(v)] = static_cast<int>(g);
      }
    }
    for (std::size_t v = 0; v < owner.size(); ++v)
      if (owner[v] < 0) throw config_error("variable " + std::to_string(v) + " is not assigned to any group");
    owner_ = std::move(owner);
  }

  /// `count` consecutive groups of `size` variables each.
  static group_partition uniform(int count, int size) {
    std::vector<std::vector<int>> groups(static_cast<std::size_t>(count));
    for (int g = 0; g < count; ++g)
      for (int k = 0; k < size; ++k) groups[static_cast<std::size_t>(g)].push_back(g * size + k);
    return {std::move(groups), static_cast<Index>(count) * size};
  }

  static group_partition singletons(Index n) {
    std::vector<std::vector<int>> groups;
    for (Index i = 0; i < n; ++i) groups.push_back({static_cast<int>(i)});
    return {std::move(groups), n};
  }

  int size() const noexcept { return static_cast<int>(groups_.size()); }
  Index variables() const noexcept { return static_cast<Index>(owner_.size()); }
  const std::vector<int>& group(int g) const { return groups_.at(static_cast<std::size_t>(g)); }
  const std::vector<std::vector<int>>& groups() const noexcept { return groups_; }
  int group_of(int variable) const { return owner_.at(static_cast<std::size_t>(variable)); }

  /// Columns of `m` belonging to group g, in partition order.
  MatrixXd columns(const MatrixXd& m, int g) const {
    const auto& idx = group(g);
    MatrixXd out(m.rows(), static_cast<Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Index>(k)) = m.col(idx[k]);
    return out;
  }

 private:
  std::vector<std::vector<int>> groups_;
  std::vector<int> owner_;
};

// ---------------------------------------------------------------------------
// GroupCausalGraph

enum class link_label { none, forward, backward, bidirectional };

inline std::string to_string(link_label l) {
  switch (l) {
    case link_label::forward: return "->";
    case link_label::backward: return "<-";
    case link_label::bidirectional: return "<->";
    default: return "none";
  }
}

/// Directed graph over G groups; entry (i, j) means "group i causes group j".
class group_causal_graph {
 public:
  group_causal_graph() = default;
  explicit group_causal_graph(int groups)
      : groups_(groups), adjacency_(static_cast<std::size_t>(groups * groups), false) {
    if (groups < 1) throw data_error("graph needs at least one group");
  }

  int groups() const noexcept { return groups_; }

  bool edge(int i, int j) const { return adjacency_.at(index(i, j)); }

  void set_edge(int i, int j, bool value = true) {
    if (i == j) {
      if (value) throw data_error("self-edges are not allowed (group " + std::to_string(i) + ")");
      return;
    }
    adjacency_.at(index(i, j)) = value;
  }

  /// Label of the unordered pair {i, j} read from i's perspective.
  link_label label(int i, int j) const {
    const bool ij = edge(i, j), ji = edge(j, i);
    if (ij && ji) return link_label::bidirectional;
    if (ij) return link_label::forward;
    if (ji) return link_label::backward;
    return link_label::none;
  }

  int edge_count() const { return static_cast<int>(std::count(adjacency_.begin(), adjacency_.end(), true)); }

  bool operator==(const group_causal_graph&) const = default;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["groups"] = groups_;
    auto rows = nlohmann::ordered_json::array();
    for (int i = 0; i < groups_; ++i) {
      auto row = nlohmann::ordered_json::array();
      for (int k = 0; k < groups_; ++k) row.push_back(static_cast<bool>(edge(i, k)));
      rows.push_back(row);
    }
    j["adjacency"] = rows;
    return j;
  }

  static group_causal_graph from_json(const nlohmann::json& j) {
    if (!j.contains("groups") || !j.contains("adjacency")) throw data_error("graph JSON needs 'groups' and 'adjacency'");
    const int g = j.at("groups").get<int>();
    const auto& rows = j.at("adjacency");
    if (!rows.is_array() || static_cast<int>(rows.size()) != g) throw data_error("graph adjacency must have G rows");
    group_causal_graph out(g);
    for (int i = 0; i < g; ++i) {
      const auto& row = rows.at(static_cast<std::size_t>(i));
      if (!row.is_array() || static_cast<int>(row.size()) != g) throw data_error("graph adjacency must be G x G");
      for (int k = 0; k < g; ++k) {
        const bool v = row.at(static_cast<std::size_t>(k)).get<bool>();
        if (i == k && v) throw data_error("graph JSON asserts a self-edge");
        if (i != k) out.set_edge(i, k, v);
      }
    }
    return out;
  }

 private:
  std::size_t index(int i, int j) const {
    if (i < 0 || j < 0 || i >= groups_ || j >= groups_)
      throw data_error("group index out of range: (" + std::to_string(i) + ", " + std::to_string(j) + ")");
    return static_cast<std::size_t>(i * groups_ + j);
  }

  int groups_ = 0;
  std::vector<bool> adjacency_;
};

// ---------------------------------------------------------------------------
// ResidualSample

/// Windowed forecast errors of one variable, one entry per evaluation window.
struct residual_sample {
  int variable_index = 0;
  std::vector<double> errors;
};

// ---------------------------------------------------------------------------
// CSV ingestion

enum class missing_policy { error, drop_rows, interpolate };

inline missing_policy parse_missing_policy(std::string_view s) {
  if (s == "error") return missing_policy::error;
  if (s == "drop_rows") return missing_policy::drop_rows;
  if (s == "interpolate") return missing_policy::interpolate;
  throw config_error("unknown missing policy '" + std::string(s) + "' (expected error|drop_rows|interpolate)");
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline bool is_missing_token(std::string_view s) {
  return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "null";
}

inline std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

/// Parses CSV text (header row of variable names, one row per time step).
inline time_series_panel parse_panel_csv(std::istream& in, missing_policy policy,
                                         const std::string& source = "<stream>") {
  std::string line;
  std::vector<std::string> names;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    std::string_view header = line;
    if (header.size() >= 3 && header.substr(0, 3) == "\xEF\xBB\xBF") header.remove_prefix(3);  // UTF-8 BOM
    for (auto n : detail::split_commas(header)) {
      if (n.empty()) throw data_error(source + ": empty name in header row");
      names.emplace_back(n);
    }
    break;
  }
  if (names.empty()) throw data_error(source + ": empty file");
  {
    std::set<std::string> seen;
    for (const auto& n : names)
      if (!seen.insert(n).second) throw data_error(source + ": duplicate header name '" + n + "'");
  }

  const std::size_t n_cols = names.size();
  std::vector<std::vector<double>> rows;
  std::vector<std::vector<bool>> missing;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_commas(line);
    if (cells.size() != n_cols)
      throw data_error(source + ": line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                       " fields, expected " + std::to_string(n_cols));
    std::vector<double> row(n_cols, 0.0);
    std::vector<bool> miss(n_cols, false);
    for (std::size_t c = 0; c < n_cols; ++c) {
      if (auto v = detail::parse_double(cells[c])) {
        row[c] = *v;
        continue;
      }
      const bool missing_cell = detail::is_missing_token(cells[c]);
      if (policy == missing_policy::error || !missing_cell)
        throw data_error(source + ": " + (missing_cell ? "missing" : "non-numeric") + " value at row " +
                         std::to_string(rows.size()) + " (line " + std::to_string(line_no) + "), column '" +
                         names[c] + "'");
      miss[c] = true;
    }
    rows.push_back(std::move(row));
    missing.push_back(std::move(miss));
  }
  if (rows.empty()) throw data_error(source + ": no data rows");

  if (policy == missing_policy::drop_rows) {
    std::vector<std::vector<double>> kept;
    for (std::size_t r = 0; r < rows.size(); ++r)
      if (std::none_of(missing[r].begin(), missing[r].end(), [](bool b) { return b; })) kept.push_back(rows[r]);
    if (kept.empty()) throw data_error(source + ": every row has a missing value");
    rows = std::move(kept);
  } else if (policy == missing_policy::interpolate) {
    const std::size_t n_rows = rows.size();
    for (std::size_t c = 0; c < n_cols; ++c) {
      std::vector<std::size_t> known;
      for (std::size_t r = 0; r < n_rows; ++r)
        if (!missing[r][c]) known.push_back(r);
      if (known.empty()) throw data_error(source + ": column '" + names[c] + "' has no values");
      for (std::size_t r = 0; r < n_rows; ++r) {
        if (!missing[r][c]) continue;
        const auto hi = std::lower_bound(known.begin(), known.end(), r);
        if (hi == known.begin()) {
          rows[r][c] = rows[*hi][c];
        } else if (hi == known.end()) {
          rows[r][c] = rows[known.back()][c];
        } else {
          const std::size_t a = *(hi - 1), b = *hi;
          const double w = static_cast<double>(r - a) / static_cast<double>(b - a);
          rows[r][c] = (1.0 - w) * rows[a][c] + w * rows[b][c];
        }
      }
    }
  }

  MatrixXd values(static_cast<Index>(rows.size()), static_cast<Index>(n_cols));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < n_cols; ++c) values(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  return {std::move(values), std::move(names)};
}

inline time_series_panel load_panel(const std::string& path, missing_policy policy = missing_policy::error) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot read panel file '" + path + "'");
  return parse_panel_csv(in, policy, path);
}

inline std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

/// Writes shortest round-trip decimal representations.
inline void write_panel_csv(std::ostream& out, const time_series_panel& panel) {
  const auto& names = panel.names();
  for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << names[c];
  out << '\n';
  const auto& v = panel.values();
  for (Index r = 0; r < v.rows(); ++r) {
    for (Index c = 0; c < v.cols(); ++c) out << (c ? "," : "") << format_double(v(r, c));
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Standardization. Sample statistics use the population denominator n.

struct standardization {
  time_series_panel panel;
  VectorXd mean;
  VectorXd stddev;
};

inline VectorXd column_means(const MatrixXd& m) { return m.colwise().mean().transpose(); }

inline VectorXd column_stddevs(const MatrixXd& m) {
  const MatrixXd centered = m.rowwise() - m.colwise().mean();
  return (centered.colwise().squaredNorm() / static_cast<double>(m.rows())).cwiseSqrt().transpose();
}

inline standardization standardize(const time_series_panel& panel) {
  const auto& v = panel.values();
  VectorXd mean = column_means(v);
  VectorXd sd = column_stddevs(v);
  for (Index c = 0; c < sd.size(); ++c) {
    // Relative threshold: rounding leaves ~1e-16 * |mean| of spurious spread.
    if (!(sd(c) > 1e-12 * std::max(1.0, std::abs(mean(c)))))
      throw data_error("variable '" + panel.names()[static_cast<std::size_t>(c)] + "' has zero variance");
  }
  MatrixXd z = (v.rowwise() - mean.transpose()).array().rowwise() / sd.transpose().array();
  return {time_series_panel(std::move(z), panel.names()), std::move(mean), std::move(sd)};
}

inline time_series_panel destandardize(const time_series_panel& z, const VectorXd& mean, const VectorXd& sd) {
  MatrixXd v = (z.values().array().rowwise() * sd.transpose().array()).matrix().rowwise() + mean.transpose();
  return {std::move(v), z.names()};
}

// ---------------------------------------------------------------------------
// Forecast windows

/// A context of `context_len` rows followed by a target of `horizon` rows.
struct forecast_window {
  Index offset = 0;
  Index context_len = 0;
  Index horizon = 0;

  Index target_begin() const noexcept { return offset + context_len; }

  auto context(const MatrixXd& m) const { return m.middleRows(offset, context_len); }
  auto target(const MatrixXd& m) const { return m.middleRows(target_begin(), horizon); }
};

inline std::vector<forecast_window> make_windows(Index length, Index context_len, Index horizon, Index stride) {
  if (context_len < 1 || horizon < 1 || stride < 1)
    throw config_error("context length, horizon and stride must all be >= 1");
  if (length < context_len + horizon)
    throw data_error("series of length " + std::to_string(length) + " is too short: need at least " +
                     std::to_string(context_len + horizon) + " steps (context + horizon)");
  std::vector<forecast_window> out;
  for (Index off = 0; off + context_len + horizon <= length; off += stride) out.push_back({off, context_len, horizon});
  return out;
}

inline std::vector<forecast_window> make_windows(const time_series_panel& panel, Index context_len, Index horizon,
                                                 Index stride) {
  return make_windows(panel.length(), context_len, horizon, stride);
}

// ---------------------------------------------------------------------------
// Graph scoring over directed group edges

struct graph_score {
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
  int true_positives = 0;
  int false_positives = 0;
  int false_negatives = 0;
};

inline graph_score score_graph(const group_causal_graph& predicted, const group_causal_graph& truth) {
  if (predicted.groups() != truth.groups())
    throw data_error("cannot score graphs with " + std::to_string(predicted.groups()) + " and " +
                     std::to_string(truth.groups()) + " groups");
  graph_score s;
  for (int i = 0; i < truth.groups(); ++i)
    for (int j = 0; j < truth.groups(); ++j) {
      if (i == j) continue;
      const bool p = predicted.edge(i, j), t = truth.edge(i, j);
      s.true_positives += p && t;
      s.false_positives += p && !t;
      s.false_negatives += !p && t;
    }
  const int pp = s.true_positives + s.false_positives;
  const int tt = s.true_positives + s.false_negatives;
  s.precision = pp == 0 ? 1.0 : static_cast<double>(s.true_positives) / pp;
  s.recall = tt == 0 ? 1.0 : static_cast<double>(s.true_positives) / tt;
  const double denom = s.precision + s.recall;
  s.f_score = denom == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / denom;
  return s;
}

}  // namespace gcausal

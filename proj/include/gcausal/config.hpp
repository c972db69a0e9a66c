#pragma once

// Minimal TOML-style configuration: `key = value` lines grouped under
// `[table]` / `[table.sub]` headers. Values are strings, booleans, integers,
// floats, or (nested) single-line arrays. Parsed into a JSON tree.

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "error.hpp"

namespace gcausal::config {

using nlohmann::json;

namespace detail {

struct cursor {
  std::string_view text;
  std::size_t pos = 0;
  std::size_t line = 0;

  void skip_ws() {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  }
  bool done() const { return pos >= text.size(); }
  char peek() const { return done() ? '\0' : text[pos]; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw config_error("config line " + std::to_string(line) + ": " + msg);
  }
};

inline json parse_value(cursor& c);

inline json parse_string(cursor& c) {
  ++c.pos;  // opening quote
  std::string out;
  while (!c.done() && c.peek() != '"') {
    char ch = c.text[c.pos++];
    if (ch == '\\') {
      if (c.done()) c.fail("unterminated escape");
      const char e = c.text[c.pos++];
      switch (e) {
        case 'n': ch = '\n'; break;
        case 't': ch = '\t'; break;
        case '"': ch = '"'; break;
        case '\\': ch = '\\'; break;
        default: c.fail(std::string("unsupported escape \\") + e);
      }
    }
    out.push_back(ch);
  }
  if (c.done()) c.fail("unterminated string");
  ++c.pos;
  return out;
}

inline json parse_array(cursor& c) {
  ++c.pos;  // [
  json arr = json::array();
  for (;;) {
    c.skip_ws();
    if (c.peek() == ']') {
      ++c.pos;
      return arr;
    }
    arr.push_back(parse_value(c));
    c.skip_ws();
    if (c.peek() == ',') {
      ++c.pos;
      continue;
    }
    if (c.peek() == ']') {
      ++c.pos;
      return arr;
    }
    c.fail("expected ',' or ']' in array");
  }
}

inline json parse_scalar(cursor& c) {
  const std::size_t start = c.pos;
  while (!c.done() && c.peek() != ',' && c.peek() != ']' && c.peek() != '#' && c.peek() != ' ' && c.peek() != '\t')
    ++c.pos;
  std::string_view tok = c.text.substr(start, c.pos - start);
  if (tok == "true") return true;
  if (tok == "false") return false;
  if (tok.empty()) c.fail("missing value");
  std::string_view num = tok;
  if (num.front() == '+') num.remove_prefix(1);
  const bool is_float = num.find_first_of(".eE") != std::string_view::npos || num == "inf" || num == "-inf";
  if (!is_float) {
    std::int64_t iv = 0;
    const auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), iv);
    if (ec == std::errc{} && p == num.data() + num.size()) return iv;
    std::uint64_t uv = 0;
    const auto [p2, ec2] = std::from_chars(num.data(), num.data() + num.size(), uv);
    if (ec2 == std::errc{} && p2 == num.data() + num.size()) return uv;
  }
  double dv = 0.0;
  const auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), dv);
  if (ec == std::errc{} && p == num.data() + num.size()) return dv;
  c.fail("cannot parse value '" + std::string(tok) + "' (strings must be quoted)");
}

inline json parse_value(cursor& c) {
  c.skip_ws();
  if (c.peek() == '"') return parse_string(c);
  if (c.peek() == '[') return parse_array(c);
  return parse_scalar(c);
}

inline std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    out.emplace_back(gcausal::detail::trim(path.substr(start, dot == std::string_view::npos ? dot : dot - start)));
    if (out.back().empty()) throw config_error("empty component in key path '" + std::string(path) + "'");
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return out;
}

}  // namespace detail

inline json parse(std::string_view text) {
  json root = json::object();
  json* table = &root;
  std::size_t line_no = 0, begin = 0;
  while (begin <= text.size()) {
    const auto end = text.find('\n', begin);
    std::string_view line = text.substr(begin, end == std::string_view::npos ? std::string_view::npos : end - begin);
    begin = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    line = gcausal::detail::trim(line);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      const auto close = line.find(']');
      if (close == std::string_view::npos) throw config_error("config line " + std::to_string(line_no) + ": unterminated table header");
      table = &root;
      for (const auto& part : detail::split_path(line.substr(1, close - 1))) {
        json& next = (*table)[part];
        if (next.is_null()) next = json::object();
        if (!next.is_object()) throw config_error("config line " + std::to_string(line_no) + ": '" + part + "' is not a table");
        table = &next;
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw config_error("config line " + std::to_string(line_no) + ": expected key = value");
    const auto key = detail::split_path(gcausal::detail::trim(line.substr(0, eq)));
    detail::cursor c{line.substr(eq + 1), 0, line_no};
    json value = detail::parse_value(c);
    c.skip_ws();
    if (!c.done() && c.peek() != '#') c.fail("unexpected trailing characters");
    json* target = table;
    for (std::size_t k = 0; k + 1 < key.size(); ++k) {
      json& next = (*target)[key[k]];
      if (next.is_null()) next = json::object();
      if (!next.is_object()) throw config_error("config line " + std::to_string(line_no) + ": '" + key[k] + "' is not a table");
      target = &next;
    }
    if (target->contains(key.back()))
      throw config_error("config line " + std::to_string(line_no) + ": duplicate key '" + key.back() + "'");
    (*target)[key.back()] = std::move(value);
  }
  return root;
}

inline json load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

namespace detail {

inline std::string emit_value(const json& v) {
  switch (v.type()) {
    case json::value_t::string: {
      std::string out = "\"";
      for (char ch : v.get<std::string>()) {
        if (ch == '"' || ch == '\\') out.push_back('\\');
        if (ch == '\n') {
          out += "\\n";
          continue;
        }
        out.push_back(ch);
      }
      return out + "\"";
    }
    case json::value_t::boolean: return v.get<bool>() ? "true" : "false";
    case json::value_t::number_integer: return std::to_string(v.get<std::int64_t>());
    case json::value_t::number_unsigned: return std::to_string(v.get<std::uint64_t>());
    case json::value_t::number_float: {
      std::string s = format_double(v.get<double>());
      if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
      return s;
    }
    case json::value_t::array: {
      std::string out = "[";
      for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + emit_value(v[i]);
      return out + "]";
    }
    default: throw config_error("cannot emit config value of this type");
  }
}

inline void emit_table(std::ostream& out, const json& table, const std::string& prefix) {
  for (const auto& [k, v] : table.items())
    if (!v.is_object()) out << k << " = " << emit_value(v) << '\n';
  for (const auto& [k, v] : table.items())
    if (v.is_object()) {
      const std::string name = prefix.empty() ? k : prefix + "." + k;
      out << "\n[" << name << "]\n";
      emit_table(out, v, name);
    }
}

}  // namespace detail

/// Canonical text form: scalars first, then sub-tables, keys sorted.
inline std::string emit(const json& root) {
  std::ostringstream out;
  detail::emit_table(out, root, "");
  return out.str();
}

/// Recursively overlays `overlay` onto `base`.
inline void merge(json& base, const json& overlay) {
  for (const auto& [k, v] : overlay.items()) {
    if (v.is_object() && base.contains(k) && base[k].is_object()) merge(base[k], v);
    else base[k] = v;
  }
}

/// Applies `a.b.c=value` (value parsed with config value syntax; bare words
/// that do not parse are taken as strings).
inline void set_path(json& root, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw config_error("override '" + std::string(assignment) + "' must be key=value");
  const auto path = detail::split_path(gcausal::detail::trim(assignment.substr(0, eq)));
  const std::string_view raw = gcausal::detail::trim(assignment.substr(eq + 1));
  json value;
  try {
    detail::cursor c{raw, 0, 0};
    value = detail::parse_value(c);
    c.skip_ws();
    if (!c.done()) throw config_error("trailing");
  } catch (const error&) {
    value = std::string(raw);
  }
  json* t = &root;
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    json& next = (*t)[path[k]];
    if (!next.is_object()) next = json::object();
    t = &next;
  }
  (*t)[path.back()] = std::move(value);
}

/// Value at a dotted path, or null.
inline const json& at_path(const json& root, std::string_view path) {
  static const json null_value;
  const json* t = &root;
  for (const auto& part : detail::split_path(path)) {
    if (!t->is_object() || !t->contains(part)) return null_value;
    t = &(*t)[part];
  }
  return *t;
}

template <class T>
T get(const json& root, std::string_view path) {
  const json& v = at_path(root, path);
  if (v.is_null()) throw config_error("missing config key '" + std::string(path) + "'");
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw config_error("config key '" + std::string(path) + "' has the wrong type");
  }
}

}  // namespace gcausal::config

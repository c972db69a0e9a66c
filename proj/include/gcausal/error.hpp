#pragma once

#include <stdexcept>
#include <string>

namespace gcausal {

// Failure categories map one-to-one onto CLI exit codes.
enum class error_kind { config = 2, data = 3, numeric = 4 };

class error : public std::runtime_error {
 public:
  error(error_kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  error_kind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  error_kind kind_;
};

inline error config_error(const std::string& msg) { return {error_kind::config, msg}; }
inline error data_error(const std::string& msg) { return {error_kind::data, msg}; }
inline error numeric_error(const std::string& msg) { return {error_kind::numeric, msg}; }

}  // namespace gcausal

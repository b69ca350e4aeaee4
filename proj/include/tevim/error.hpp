#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tevim {

enum class ErrorKind {
  schema,      // missing or unknown column / field
  parse,       // malformed input text
  validation,  // data violates a documented invariant
  config,      // bad hyperparameter or option
  contract,    // caller passed inconsistent shapes
  estimation,  // an estimator cannot be computed from the data at hand
  numeric,     // non-finite intermediate
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  std::string_view kind_name() const noexcept {
    switch (kind_) {
      case ErrorKind::schema: return "schema";
      case ErrorKind::parse: return "parse";
      case ErrorKind::validation: return "validation";
      case ErrorKind::config: return "config";
      case ErrorKind::contract: return "contract";
      case ErrorKind::estimation: return "estimation";
      case ErrorKind::numeric: return "numeric";
    }
    return "unknown";
  }

  /// Process exit code for the command-line tool: 2 for input/configuration
  /// problems, 1 for failures during estimation.
  int exit_code() const noexcept {
    return (kind_ == ErrorKind::estimation || kind_ == ErrorKind::numeric) ? 1 : 2;
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace tevim

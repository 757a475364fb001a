#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace brqst {

enum class ErrorKind {
  invalid_argument,
  dimension_mismatch,
  eigen_failure,
  failure_set,
  infeasible,
  degenerate_estimate,
  parse,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::dimension_mismatch: return "dimension_mismatch";
    case ErrorKind::eigen_failure: return "eigen_failure";
    case ErrorKind::failure_set: return "failure_set";
    case ErrorKind::infeasible: return "infeasible";
    case ErrorKind::degenerate_estimate: return "degenerate_estimate";
    case ErrorKind::parse: return "parse";
  }
  return "unknown";
}

/// Base exception for every error raised by the library. The kind tells
/// callers (and the CLI exit-code mapping) which class of failure occurred.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Domain failures are properties of the data (singular blocks, empty
  /// feasible sets); everything else is a usage problem.
  bool is_domain_failure() const noexcept {
    return kind_ == ErrorKind::failure_set || kind_ == ErrorKind::infeasible ||
           kind_ == ErrorKind::degenerate_estimate ||
           kind_ == ErrorKind::eigen_failure;
  }

 private:
  ErrorKind kind_;
};

/// Raised when an algebraic completion needs a block that is numerically
/// singular. `member` is the index of the offending plan member.
class FailureSetError : public Error {
 public:
  FailureSetError(std::size_t member, const std::string& what)
      : Error(ErrorKind::failure_set, what), member_(member) {}

  std::size_t member() const noexcept { return member_; }

 private:
  std::size_t member_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorKind::invalid_argument, what);
}

}  // namespace brqst

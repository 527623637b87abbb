#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sdc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

enum class ErrorKind {
  invalid_dimensions,
  invalid_input,
  invalid_step,
  parse_error,
  unsupported_label,
  step_failure,
  divergence,
  audit_invalid,
  invalid_config,
  io_error,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_dimensions: return "invalid-dimensions";
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::invalid_step: return "invalid-step";
    case ErrorKind::parse_error: return "parse-error";
    case ErrorKind::unsupported_label: return "unsupported-label";
    case ErrorKind::step_failure: return "step-failure";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::audit_invalid: return "audit-invalid";
    case ErrorKind::invalid_config: return "invalid-config";
    case ErrorKind::io_error: return "io-error";
  }
  return "unknown";
}

/// Every failure raised by the library. `kind()` is stable and machine-checkable;
/// the message carries the human-readable detail (line numbers, step indices...).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace sdc

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace csbp {

/// Failure categories. Each maps to a stable, machine-parsable name used by
/// the command line tool (see error_code_name).
enum class ErrorCode {
  kDomain,
  kInvalidParameter,
  kNotSupercritical,
  kLinearMechanism,
  kNumerical,
  kNStarMassUndefined,
  kCapability,
  kImmigrationDisabled,
  kInvariantViolation,
  kPopulationBlowup,
  kConfig,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace csbp

#include "csbp/error.hpp"

namespace csbp {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kDomain: return "DOMAIN_ERROR";
    case ErrorCode::kInvalidParameter: return "INVALID_PARAMETER";
    case ErrorCode::kNotSupercritical: return "NOT_SUPERCRITICAL";
    case ErrorCode::kLinearMechanism: return "LINEAR_MECHANISM";
    case ErrorCode::kNumerical: return "NUMERICAL_FAILURE";
    case ErrorCode::kNStarMassUndefined: return "NSTAR_MASS_UNDEFINED";
    case ErrorCode::kCapability: return "UNSUPPORTED_FAMILY";
    case ErrorCode::kImmigrationDisabled: return "IMMIGRATION_DISABLED";
    case ErrorCode::kInvariantViolation: return "INVARIANT_VIOLATION";
    case ErrorCode::kPopulationBlowup: return "POPULATION_BLOWUP";
    case ErrorCode::kConfig: return "CONFIG_ERROR";
  }
  return "UNKNOWN_ERROR";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace csbp

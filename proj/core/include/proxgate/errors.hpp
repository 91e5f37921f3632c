#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace proxgate {

/// Machine-readable failure codes. These names are part of the wire
/// contract: HTTP error bodies and CLI diagnostics carry them verbatim.
enum class ErrorCode {
  // registry
  InvalidIdentifiers,
  AlreadyRegistered,
  NotFound,
  // signal
  InvalidDistance,
  InvalidConfig,
  MissingSetting,
  IncompleteSession,
  IoError,
  SchemaError,
  FormatError,
  // ml
  DegenerateLabels,
  InvalidData,
  InvalidK,
  DimensionError,
  // eval
  EmptyTestSet,
  UndefinedMetric,
  // protocol
  RoleViolation,
  NotSignedIn,
  InvalidTransition,
  Expired,
  ForeignDevice,
  StaleReports,
  // persistence / misc
  IntegrityError,
  InvalidArgument,
};

std::string_view error_code_name(ErrorCode code);
std::optional<ErrorCode> error_code_from_name(std::string_view name);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace proxgate

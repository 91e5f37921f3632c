#include "proxgate/errors.hpp"

#include <array>
#include <utility>

namespace proxgate {

namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 24> kNames{{
    {ErrorCode::InvalidIdentifiers, "InvalidIdentifiers"},
    {ErrorCode::AlreadyRegistered, "AlreadyRegistered"},
    {ErrorCode::NotFound, "NotFound"},
    {ErrorCode::InvalidDistance, "InvalidDistance"},
    {ErrorCode::InvalidConfig, "InvalidConfig"},
    {ErrorCode::MissingSetting, "MissingSetting"},
    {ErrorCode::IncompleteSession, "IncompleteSession"},
    {ErrorCode::IoError, "IoError"},
    {ErrorCode::SchemaError, "SchemaError"},
    {ErrorCode::FormatError, "FormatError"},
    {ErrorCode::DegenerateLabels, "DegenerateLabels"},
    {ErrorCode::InvalidData, "InvalidData"},
    {ErrorCode::InvalidK, "InvalidK"},
    {ErrorCode::DimensionError, "DimensionError"},
    {ErrorCode::EmptyTestSet, "EmptyTestSet"},
    {ErrorCode::UndefinedMetric, "UndefinedMetric"},
    {ErrorCode::RoleViolation, "RoleViolation"},
    {ErrorCode::NotSignedIn, "NotSignedIn"},
    {ErrorCode::InvalidTransition, "InvalidTransition"},
    {ErrorCode::Expired, "Expired"},
    {ErrorCode::ForeignDevice, "ForeignDevice"},
    {ErrorCode::StaleReports, "StaleReports"},
    {ErrorCode::IntegrityError, "IntegrityError"},
    {ErrorCode::InvalidArgument, "InvalidArgument"},
}};

}  // namespace

std::string_view error_code_name(ErrorCode code) {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "UnknownError";
}

std::optional<ErrorCode> error_code_from_name(std::string_view name) {
  for (const auto& [c, n] : kNames) {
    if (n == name) return c;
  }
  return std::nullopt;
}

}  // namespace proxgate

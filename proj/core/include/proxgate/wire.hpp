#pragma once

#include <string>

#include "proxgate/errors.hpp"
#include "proxgate/protocol.hpp"
#include "proxgate/registry.hpp"

namespace proxgate::wire {

/// Canonical JSON renderings shared by the HTTP service and the CLI so
/// both surfaces always agree on field names and formats.

std::string profile_json(const registry::DeviceProfile& profile);

std::string session_json(const protocol::MeasurementSession& session);

std::string decision_json(const protocol::AccessDecision& decision);

std::string policy_json(const protocol::PolicyConfig& policy);

protocol::PolicyConfig policy_from_json(const std::string& text);

std::string error_json(ErrorCode code, const std::string& message);

}  // namespace proxgate::wire

#include "proxgate/wire.hpp"

#include <json.hpp>

#include "proxgate/errors.hpp"

namespace proxgate::wire {

using nlohmann::json;

namespace {

json identifiers_to_json(const registry::DeviceIdentifiers& ids) {
  json extra = json::array();
  for (const auto& [name, value] : ids.extra) {
    extra.push_back(json{{"name", name}, {"value", value}});
  }
  return json{{"uuid", ids.uuid},
              {"imei", ids.imei},
              {"device_id", ids.device_id},
              {"extra", extra}};
}

json decision_to_json(const protocol::AccessDecision& decision) {
  return json{{"granted", decision.granted},
              {"reason", protocol::reason_name(decision.reason)},
              {"score", decision.score},
              {"decided_at_ms", decision.decided_at_ms}};
}

}  // namespace

std::string profile_json(const registry::DeviceProfile& profile) {
  json doc{{"signature", profile.signature.to_hex()},
           {"group", registry::group_name(profile.group)},
           {"display_name", profile.display_name},
           {"identifiers", identifiers_to_json(profile.identifiers)},
           {"registered_at_ms", profile.registered_at_ms},
           {"signed_in", profile.signed_in}};
  return doc.dump(2);
}

std::string session_json(const protocol::MeasurementSession& session) {
  std::size_t forward = 0, reverse = 0;
  for (const auto& r : session.reports) {
    if (r.measurer == session.requester) forward += 1;
    else reverse += 1;
  }

  json doc{{"session_id", session.id.to_hex()},
           {"requester", session.requester.to_hex()},
           {"owner", session.owner.to_hex()},
           {"state", protocol::state_name(session.state)},
           {"created_at_ms", session.created_at_ms},
           {"deadline_ms", session.deadline_ms},
           {"reports",
            {{"requester_to_owner", forward}, {"owner_to_requester", reverse}}}};
  if (session.verdict) {
    doc["verdict"] = json{{"label", session.verdict->label},
                          {"score", session.verdict->score}};
  }
  if (session.model_id) doc["model_id"] = *session.model_id;
  if (session.decision) doc["decision"] = decision_to_json(*session.decision);
  return doc.dump(2);
}

std::string decision_json(const protocol::AccessDecision& decision) {
  return decision_to_json(decision).dump(2);
}

std::string policy_json(const protocol::PolicyConfig& policy) {
  json doc{
      {"require_signed_in", policy.require_signed_in},
      {"data_sensitivity",
       policy.data_sensitivity == protocol::DataSensitivity::Sensitive
           ? "sensitive"
           : "insensitive"},
      {"require_user_action_for_sensitive",
       policy.require_user_action_for_sensitive},
      {"report_staleness_window_s", policy.report_staleness_window_s},
      {"session_ttl_s", policy.session_ttl_s},
      {"min_reports_per_direction", policy.min_reports_per_direction}};
  return doc.dump(2);
}

protocol::PolicyConfig policy_from_json(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) {
    raise(ErrorCode::FormatError, "policy document is not valid JSON");
  }
  protocol::PolicyConfig policy;
  try {
    if (doc.contains("require_signed_in")) {
      policy.require_signed_in = doc["require_signed_in"].get<bool>();
    }
    if (doc.contains("data_sensitivity")) {
      auto s = doc["data_sensitivity"].get<std::string>();
      if (s == "sensitive") {
        policy.data_sensitivity = protocol::DataSensitivity::Sensitive;
      } else if (s == "insensitive") {
        policy.data_sensitivity = protocol::DataSensitivity::Insensitive;
      } else {
        raise(ErrorCode::FormatError, "unknown data_sensitivity '" + s + "'");
      }
    }
    if (doc.contains("require_user_action_for_sensitive")) {
      policy.require_user_action_for_sensitive =
          doc["require_user_action_for_sensitive"].get<bool>();
    }
    if (doc.contains("report_staleness_window_s")) {
      policy.report_staleness_window_s =
          doc["report_staleness_window_s"].get<double>();
    }
    if (doc.contains("session_ttl_s")) {
      policy.session_ttl_s = doc["session_ttl_s"].get<double>();
    }
    if (doc.contains("min_reports_per_direction")) {
      policy.min_reports_per_direction =
          doc["min_reports_per_direction"].get<int>();
    }
  } catch (const json::exception& e) {
    raise(ErrorCode::FormatError,
          std::string("malformed policy document: ") + e.what());
  }
  policy.validate();
  return policy;
}

std::string error_json(ErrorCode code, const std::string& message) {
  json doc{{"error",
            {{"code", error_code_name(code)}, {"message", message}}}};
  return doc.dump(2);
}

}  // namespace proxgate::wire

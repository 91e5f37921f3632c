#include "proxgate/protocol.hpp"

#include <algorithm>

#include "proxgate/errors.hpp"

namespace proxgate::protocol {

std::string_view state_name(SessionState s) {
  switch (s) {
    case SessionState::Requested: return "Requested";
    case SessionState::Triggered: return "Triggered";
    case SessionState::Reporting: return "Reporting";
    case SessionState::Evaluated: return "Evaluated";
    case SessionState::Decided: return "Decided";
    case SessionState::Expired: return "Expired";
  }
  return "?";
}

std::optional<SessionState> state_from_name(std::string_view name) {
  for (auto s : {SessionState::Requested, SessionState::Triggered,
                 SessionState::Reporting, SessionState::Evaluated,
                 SessionState::Decided, SessionState::Expired}) {
    if (state_name(s) == name) return s;
  }
  return std::nullopt;
}

std::string_view reason_name(DecisionReason reason) {
  switch (reason) {
    case DecisionReason::Proximate: return "Proximate";
    case DecisionReason::NotProximate: return "NotProximate";
    case DecisionReason::NotSignedIn: return "NotSignedIn";
    case DecisionReason::ActionNotConfirmed: return "ActionNotConfirmed";
    case DecisionReason::StaleReports: return "StaleReports";
    case DecisionReason::Expired: return "Expired";
    case DecisionReason::PolicyDenied: return "PolicyDenied";
  }
  return "?";
}

std::optional<DecisionReason> reason_from_name(std::string_view name) {
  for (auto r : {DecisionReason::Proximate, DecisionReason::NotProximate,
                 DecisionReason::NotSignedIn, DecisionReason::ActionNotConfirmed,
                 DecisionReason::StaleReports, DecisionReason::Expired,
                 DecisionReason::PolicyDenied}) {
    if (reason_name(r) == name) return r;
  }
  return std::nullopt;
}

void PolicyConfig::validate() const {
  if (report_staleness_window_s <= 0.0 || session_ttl_s <= 0.0 ||
      min_reports_per_direction <= 0) {
    raise(ErrorCode::InvalidConfig,
          "policy windows and report counts must be positive");
  }
}

std::string SessionId::to_hex() const { return proxgate::to_hex(bytes); }

std::optional<SessionId> SessionId::from_hex(std::string_view hex) {
  SessionId id;
  if (!proxgate::from_hex(hex, id.bytes)) return std::nullopt;
  return id;
}

namespace {

bool terminal(SessionState s) {
  return s == SessionState::Decided || s == SessionState::Expired;
}

// Every operation passes through here first: an overdue session expires
// before its state precondition is checked, so nothing ever proceeds on a
// dead session.
void check_liveness(MeasurementSession& session, UtcMillis now) {
  expire_if_due(session, now);
  if (session.state == SessionState::Expired) {
    raise(ErrorCode::Expired,
          "session " + session.id.to_hex() + " has expired");
  }
}

void require_state(const MeasurementSession& session, SessionState expected) {
  if (session.state != expected) {
    raise(ErrorCode::InvalidTransition,
          "session " + session.id.to_hex() + " is " +
              std::string(state_name(session.state)) + ", expected " +
              std::string(state_name(expected)));
  }
}

}  // namespace

MeasurementSession begin_session(SessionId id,
                                 const registry::DeviceProfile& requester,
                                 const registry::DeviceProfile& owner,
                                 const PolicyConfig& policy, UtcMillis now) {
  policy.validate();
  if (requester.group != registry::DeviceGroup::GroupTwo) {
    raise(ErrorCode::RoleViolation,
          "requester must belong to Group Two (data requesters)");
  }
  if (owner.group != registry::DeviceGroup::GroupOne) {
    raise(ErrorCode::RoleViolation,
          "owner must belong to Group One (data owners)");
  }
  if (requester.signature == owner.signature) {
    raise(ErrorCode::InvalidArgument,
          "requester and owner must be distinct devices");
  }
  if (policy.require_signed_in && !requester.signed_in) {
    raise(ErrorCode::NotSignedIn,
          "requester is not signed in; access denied up front");
  }

  MeasurementSession session;
  session.id = id;
  session.requester = requester.signature;
  session.owner = owner.signature;
  session.state = SessionState::Requested;
  session.created_at_ms = now;
  session.deadline_ms =
      now + static_cast<UtcMillis>(policy.session_ttl_s * kMillisPerSecond);
  return session;
}

AdvertisingInstruction trigger_measurement(MeasurementSession& session,
                                           UtcMillis now) {
  check_liveness(session, now);
  require_state(session, SessionState::Requested);

  session.state = SessionState::Triggered;
  return AdvertisingInstruction{session.requester, session.owner,
                                "non-connectable", session.deadline_ms};
}

SubmitOutcome submit_report(MeasurementSession& session,
                            std::span<const signal::RssiSample> samples,
                            const PolicyConfig& policy, UtcMillis now) {
  policy.validate();
  check_liveness(session, now);
  if (session.state != SessionState::Triggered &&
      session.state != SessionState::Reporting) {
    require_state(session, SessionState::Triggered);
  }
  if (samples.empty()) {
    raise(ErrorCode::InvalidArgument, "empty report batch");
  }

  // Validate the whole batch before accepting any of it.
  for (const auto& sample : samples) {
    signal::validate(sample);
    const bool forward = sample.measurer == session.requester &&
                         sample.target == session.owner;
    const bool reverse = sample.measurer == session.owner &&
                         sample.target == session.requester;
    if (!forward && !reverse) {
      raise(ErrorCode::ForeignDevice,
            "report involves a device outside this session");
    }
  }

  const auto window_ms =
      static_cast<UtcMillis>(policy.report_staleness_window_s * kMillisPerSecond);
  SubmitOutcome outcome;
  std::vector<signal::RssiSample> fresh;
  for (const auto& sample : samples) {
    if (sample.timestamp_ms < now - window_ms) {
      outcome.rejected_stale += 1;
    } else {
      fresh.push_back(sample);
    }
  }
  if (fresh.empty()) {
    raise(ErrorCode::StaleReports,
          "every sample in the batch is older than the staleness window");
  }

  session.reports.insert(session.reports.end(), fresh.begin(), fresh.end());
  session.state = SessionState::Reporting;
  outcome.accepted = fresh.size();
  return outcome;
}

ml::Prediction evaluate_proximity(MeasurementSession& session,
                                  const ml::TrainedModel& model,
                                  const PolicyConfig& policy, UtcMillis now) {
  policy.validate();
  check_liveness(session, now);
  require_state(session, SessionState::Reporting);

  std::size_t forward = 0, reverse = 0;
  for (const auto& r : session.reports) {
    if (r.measurer == session.requester) forward += 1;
    else reverse += 1;
  }
  const auto need = static_cast<std::size_t>(policy.min_reports_per_direction);
  if (forward < need || reverse < need) {
    raise(ErrorCode::IncompleteSession,
          "need at least " + std::to_string(need) +
              " reports per direction, have " + std::to_string(forward) +
              " forward and " + std::to_string(reverse) + " reverse");
  }

  auto features =
      signal::featurize(session.reports, session.requester, session.owner);
  auto verdict = ml::predict(model, features);

  session.verdict = verdict;
  session.model_id = ml::model_id(model);
  session.state = SessionState::Evaluated;
  return verdict;
}

AccessDecision decide(MeasurementSession& session, const PolicyConfig& policy,
                      bool action_confirmed, UtcMillis now) {
  policy.validate();
  check_liveness(session, now);
  require_state(session, SessionState::Evaluated);

  const bool proximate = session.verdict->label;
  const bool action_gate_open =
      policy.data_sensitivity == DataSensitivity::Insensitive ||
      !policy.require_user_action_for_sensitive || action_confirmed;

  AccessDecision decision;
  decision.score = session.verdict->score;
  decision.decided_at_ms = now;
  if (!proximate) {
    decision.granted = false;
    decision.reason = DecisionReason::NotProximate;
  } else if (!action_gate_open) {
    decision.granted = false;
    decision.reason = DecisionReason::ActionNotConfirmed;
  } else {
    decision.granted = true;
    decision.reason = DecisionReason::Proximate;
  }

  session.decision = decision;
  session.state = SessionState::Decided;
  return decision;
}

bool expire_if_due(MeasurementSession& session, UtcMillis now) {
  if (!terminal(session.state) && now > session.deadline_ms) {
    session.state = SessionState::Expired;
    return true;
  }
  return false;
}

SessionEngine::SessionEngine(PolicyConfig policy,
                             std::optional<std::uint64_t> id_seed)
    : policy_(policy),
      id_rng_(id_seed ? *id_seed : std::random_device{}()) {
  policy_.validate();
}

SessionId SessionEngine::next_id() {
  SessionId id;
  do {
    for (std::size_t i = 0; i < id.bytes.size(); i += 8) {
      std::uint64_t word = id_rng_();
      for (std::size_t b = 0; b < 8; ++b) {
        id.bytes[i + b] = static_cast<std::uint8_t>(word >> (8 * b));
      }
    }
  } while (sessions_.contains(id));
  return id;
}

MeasurementSession& SessionEngine::request_access(
    const registry::DeviceProfile& requester,
    const registry::DeviceProfile& owner, UtcMillis now) {
  auto session = begin_session(next_id(), requester, owner, policy_, now);
  auto [it, inserted] = sessions_.emplace(session.id, std::move(session));
  return it->second;
}

MeasurementSession* SessionEngine::find(const SessionId& id) {
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : &it->second;
}

const MeasurementSession* SessionEngine::find(const SessionId& id) const {
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : &it->second;
}

MeasurementSession& SessionEngine::require(const SessionId& id) {
  if (auto* session = find(id)) return *session;
  raise(ErrorCode::NotFound, "unknown session " + id.to_hex());
}

void SessionEngine::adopt(MeasurementSession session) {
  sessions_.insert_or_assign(session.id, std::move(session));
}

std::size_t SessionEngine::expire_sessions(UtcMillis now) {
  std::size_t expired = 0;
  for (auto& [_, session] : sessions_) {
    if (expire_if_due(session, now)) expired += 1;
  }
  return expired;
}

}  // namespace proxgate::protocol

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "proxgate/common.hpp"
#include "proxgate/ml.hpp"
#include "proxgate/registry.hpp"
#include "proxgate/signal.hpp"

namespace proxgate::protocol {

/// Session life cycle. Transitions run strictly forward:
/// Requested -> Triggered -> Reporting -> Evaluated -> Decided,
/// and any non-terminal state falls to Expired once the deadline passes.
/// Decided and Expired are terminal.
enum class SessionState {
  Requested,
  Triggered,
  Reporting,
  Evaluated,
  Decided,
  Expired,
};

std::string_view state_name(SessionState s);
std::optional<SessionState> state_from_name(std::string_view name);

enum class DecisionReason {
  Proximate,
  NotProximate,
  NotSignedIn,
  ActionNotConfirmed,
  StaleReports,
  Expired,
  PolicyDenied,
};

std::string_view reason_name(DecisionReason reason);
std::optional<DecisionReason> reason_from_name(std::string_view name);

struct AccessDecision {
  bool granted = false;
  DecisionReason reason = DecisionReason::PolicyDenied;
  double score = 0.0;
  UtcMillis decided_at_ms = 0;
};

enum class DataSensitivity { Insensitive, Sensitive };

/// Gates applied around the proximity verdict. Defaults fail closed:
/// requesters must be signed in and sensitive data needs an explicit user
/// action.
struct PolicyConfig {
  bool require_signed_in = true;
  DataSensitivity data_sensitivity = DataSensitivity::Sensitive;
  bool require_user_action_for_sensitive = true;
  double report_staleness_window_s = 30.0;
  double session_ttl_s = 120.0;
  int min_reports_per_direction = 3;

  void validate() const;
};

struct SessionId {
  std::array<std::uint8_t, 16> bytes{};

  auto operator<=>(const SessionId&) const = default;
  std::string to_hex() const;
  static std::optional<SessionId> from_hex(std::string_view hex);
};

struct MeasurementSession {
  SessionId id;
  registry::DeviceSignature requester;  // Group Two
  registry::DeviceSignature owner;      // Group One
  SessionState state = SessionState::Requested;
  std::vector<signal::RssiSample> reports;
  std::optional<ml::Prediction> verdict;
  std::optional<std::string> model_id;
  std::optional<AccessDecision> decision;
  UtcMillis created_at_ms = 0;
  UtcMillis deadline_ms = 0;
};

/// What the provider tells both devices when measurement starts.
struct AdvertisingInstruction {
  registry::DeviceSignature requester;
  registry::DeviceSignature owner;
  std::string mode;  // always "non-connectable"
  UtcMillis report_deadline_ms = 0;
};

struct SubmitOutcome {
  std::size_t accepted = 0;
  std::size_t rejected_stale = 0;
};

/// Step 1: validates roles and the sign-in gate, creates the session.
MeasurementSession begin_session(SessionId id,
                                 const registry::DeviceProfile& requester,
                                 const registry::DeviceProfile& owner,
                                 const PolicyConfig& policy, UtcMillis now);

/// Step 2: Requested -> Triggered; both devices are told to advertise.
AdvertisingInstruction trigger_measurement(MeasurementSession& session,
                                           UtcMillis now);

/// Step 3/4: appends mutual RSSI reports. Samples between foreign devices
/// reject the whole batch; stale samples are dropped individually and an
/// all-stale batch is an error.
SubmitOutcome submit_report(MeasurementSession& session,
                            std::span<const signal::RssiSample> samples,
                            const PolicyConfig& policy, UtcMillis now);

/// Step 5: medians per direction through the model; Reporting -> Evaluated.
ml::Prediction evaluate_proximity(MeasurementSession& session,
                                  const ml::TrainedModel& model,
                                  const PolicyConfig& policy, UtcMillis now);

/// Step 6: grant iff the verdict is proximate and the sensitivity gate is
/// satisfied. Evaluated -> Decided.
AccessDecision decide(MeasurementSession& session, const PolicyConfig& policy,
                      bool action_confirmed, UtcMillis now);

/// Moves a non-terminal session past its deadline to Expired.
bool expire_if_due(MeasurementSession& session, UtcMillis now);

/// Owns live sessions and hands out ids. Not internally synchronized;
/// callers serialize access (the service holds one lock around it).
class SessionEngine {
 public:
  explicit SessionEngine(PolicyConfig policy,
                         std::optional<std::uint64_t> id_seed = std::nullopt);

  MeasurementSession& request_access(const registry::DeviceProfile& requester,
                                     const registry::DeviceProfile& owner,
                                     UtcMillis now);

  MeasurementSession* find(const SessionId& id);
  const MeasurementSession* find(const SessionId& id) const;
  MeasurementSession& require(const SessionId& id);

  /// Restores a persisted session (service start-up).
  void adopt(MeasurementSession session);

  std::size_t expire_sessions(UtcMillis now);

  const PolicyConfig& policy() const { return policy_; }
  const std::map<SessionId, MeasurementSession>& sessions() const {
    return sessions_;
  }

 private:
  SessionId next_id();

  PolicyConfig policy_;
  std::map<SessionId, MeasurementSession> sessions_;
  std::mt19937_64 id_rng_;
};

}  // namespace proxgate::protocol

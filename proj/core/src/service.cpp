#include "proxgate/service.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "proxgate/errors.hpp"
#include "proxgate/ml.hpp"
#include "proxgate/registry.hpp"
#include "proxgate/store.hpp"
#include "proxgate/wire.hpp"

namespace proxgate::service {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    raise(ErrorCode::IoError, "cannot open " + path.string());
  }
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound:
      return 404;
    case ErrorCode::AlreadyRegistered:
    case ErrorCode::InvalidTransition:
      return 409;
    case ErrorCode::Expired:
      return 410;
    case ErrorCode::RoleViolation:
    case ErrorCode::NotSignedIn:
    case ErrorCode::ForeignDevice:
      return 403;
    case ErrorCode::StaleReports:
    case ErrorCode::IncompleteSession:
      return 422;
    case ErrorCode::InvalidIdentifiers:
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidData:
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidDistance:
    case ErrorCode::InvalidK:
    case ErrorCode::DimensionError:
    case ErrorCode::FormatError:
    case ErrorCode::SchemaError:
      return 400;
    default:
      return 500;
  }
}

json parse_body(const httplib::Request& req) {
  json doc = json::parse(req.body.empty() ? "{}" : req.body, nullptr, false);
  if (doc.is_discarded()) {
    raise(ErrorCode::FormatError, "request body is not valid JSON");
  }
  return doc;
}

registry::DeviceSignature parse_signature(const std::string& hex) {
  auto sig = registry::DeviceSignature::from_hex(hex);
  if (!sig) {
    raise(ErrorCode::InvalidArgument,
          "signatures are 64 lowercase hex characters");
  }
  return *sig;
}

protocol::SessionId parse_session_id(const std::string& hex) {
  auto id = protocol::SessionId::from_hex(hex);
  if (!id) {
    raise(ErrorCode::InvalidArgument,
          "session ids are 32 lowercase hex characters");
  }
  return *id;
}

}  // namespace

ServiceConfig ServiceConfig::from_json_text(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) {
    raise(ErrorCode::FormatError, "config is not valid JSON");
  }

  ServiceConfig config;
  try {
    if (doc.contains("listen_address")) {
      std::string address = doc["listen_address"].get<std::string>();
      auto colon = address.rfind(':');
      if (colon == std::string::npos) {
        raise(ErrorCode::InvalidConfig,
              "listen_address must look like host:port");
      }
      config.listen_host = address.substr(0, colon);
      config.listen_port = std::stoi(address.substr(colon + 1));
    }
    if (doc.contains("database_path")) {
      config.database_path = doc["database_path"].get<std::string>();
    }
    if (doc.contains("registry_secret_hex")) {
      config.registry_secret_hex =
          doc["registry_secret_hex"].get<std::string>();
    }
    if (doc.contains("model_path")) {
      config.model_path = doc["model_path"].get<std::string>();
    }
    if (doc.contains("policy")) {
      config.policy = wire::policy_from_json(doc["policy"].dump());
    }
    if (doc.contains("path_loss")) {
      const json& pl = doc["path_loss"];
      if (pl.contains("rssi_at_1m_dbm")) {
        config.path_loss.rssi_at_1m_dbm = pl["rssi_at_1m_dbm"].get<double>();
      }
      if (pl.contains("path_loss_exponent_n")) {
        config.path_loss.path_loss_exponent_n =
            pl["path_loss_exponent_n"].get<double>();
      }
      if (pl.contains("shadowing_sigma_db")) {
        config.path_loss.shadowing_sigma_db =
            pl["shadowing_sigma_db"].get<double>();
      }
      if (pl.contains("rng_seed")) {
        config.path_loss.rng_seed = pl["rng_seed"].get<std::uint64_t>();
      }
    }
    if (doc.contains("tau_m")) config.tau_m = doc["tau_m"].get<double>();
    if (doc.contains("seed")) config.seed = doc["seed"].get<std::uint64_t>();
  } catch (const json::exception& e) {
    raise(ErrorCode::FormatError, std::string("malformed config: ") + e.what());
  }

  if (const char* env = std::getenv("PROXGATE_REGISTRY_SECRET_HEX")) {
    config.registry_secret_hex = env;
  }
  return config;
}

ServiceConfig ServiceConfig::from_json_file(const std::filesystem::path& path) {
  return from_json_text(read_file(path));
}

std::string ServiceConfig::to_json_text() const {
  json doc{{"listen_address",
            listen_host + ":" + std::to_string(listen_port)},
           {"database_path", database_path.string()},
           {"registry_secret_hex", registry_secret_hex},
           {"model_path", model_path.string()},
           {"policy", json::parse(wire::policy_json(policy))},
           {"path_loss",
            {{"rssi_at_1m_dbm", path_loss.rssi_at_1m_dbm},
             {"path_loss_exponent_n", path_loss.path_loss_exponent_n},
             {"shadowing_sigma_db", path_loss.shadowing_sigma_db},
             {"rng_seed", path_loss.rng_seed}}},
           {"tau_m", tau_m},
           {"seed", seed}};
  return doc.dump(2);
}

void ServiceConfig::validate() const {
  registry::secret_from_hex(registry_secret_hex);  // throws when malformed
  if (database_path.empty()) {
    raise(ErrorCode::InvalidConfig, "database_path is required");
  }
  if (model_path.empty()) {
    raise(ErrorCode::InvalidConfig, "model_path is required");
  }
  if (!(tau_m > 0.0)) {
    raise(ErrorCode::InvalidConfig, "tau_m must be positive");
  }
  if (listen_port < 0 || listen_port > 65535) {
    raise(ErrorCode::InvalidConfig, "listen port out of range");
  }
  policy.validate();
  path_loss.validate();
}

struct Daemon::Impl {
  ServiceConfig config;
  store::Database db;
  store::SqliteProfileStore profiles;
  registry::Registry registry;
  protocol::SessionEngine engine;
  ml::TrainedModel model;
  std::string model_id;
  std::string model_document;

  httplib::Server server;
  std::thread thread;
  int bound_port = 0;
  std::mutex mu;  // serializes engine + store mutations

  explicit Impl(ServiceConfig cfg)
      : config(std::move(cfg)),
        db(config.database_path),
        profiles(db),
        registry(registry::secret_from_hex(config.registry_secret_hex),
                 profiles),
        engine(config.policy),
        model(ml::from_json(read_file(config.model_path))) {
    model_id = ml::model_id(model);
    model_document = ml::to_json(model);
    db.put_model(model_id, model_document, now_utc_millis());

    // Crash recovery: restore persisted sessions, then expire anything
    // whose deadline passed while the daemon was down.
    for (auto& session : db.list_sessions()) {
      engine.adopt(std::move(session));
    }
    if (engine.expire_sessions(now_utc_millis()) > 0) {
      for (const auto& [_, session] : engine.sessions()) {
        db.upsert_session(session);
      }
    }

    install_routes();
  }

  void respond_error(httplib::Response& res, const Error& e) {
    res.status = status_for(e.code());
    res.set_content(wire::error_json(e.code(), e.what()), "application/json");
  }

  template <typename Fn>
  void handle(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      respond_error(res, e);
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(wire::error_json(ErrorCode::IntegrityError, e.what()),
                      "application/json");
    }
  }

  /// Runs a transition and persists the session state whether it succeeds
  /// or throws (a failed call may still have expired the session).
  template <typename Fn>
  auto with_persist(protocol::MeasurementSession& session, Fn&& fn) {
    try {
      auto result = fn();
      db.upsert_session(session);
      return result;
    } catch (...) {
      db.upsert_session(session);
      throw;
    }
  }

  void install_routes() {
    server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      json doc{{"status", "ok"}, {"model_id", model_id}};
      res.set_content(doc.dump(2), "application/json");
    });

    server.Post("/devices", [this](const httplib::Request& req,
                                   httplib::Response& res) {
      handle(res, [&] {
        json body = parse_body(req);
        registry::DeviceIdentifiers ids;
        if (body.contains("identifiers")) {
          const json& j = body["identifiers"];
          ids.uuid = j.value("uuid", "");
          ids.imei = j.value("imei", "");
          ids.device_id = j.value("device_id", "");
          for (const auto& e : j.value("extra", json::array())) {
            ids.extra.emplace_back(e.value("name", ""), e.value("value", ""));
          }
        }
        auto group = registry::group_from_name(body.value("group", ""));
        if (!group) {
          raise(ErrorCode::InvalidArgument, "group must be 'one' or 'two'");
        }
        auto profile =
            registry.register_device(body.value("display_name", ""), ids,
                                     *group, now_utc_millis());
        res.status = 201;
        res.set_content(wire::profile_json(profile), "application/json");
      });
    });

    server.Post("/devices/:sig/sign-in", [this](const httplib::Request& req,
                                                httplib::Response& res) {
      handle(res, [&] {
        auto sig = parse_signature(req.path_params.at("sig"));
        json body = parse_body(req);
        if (!body.contains("signed_in") || !body["signed_in"].is_boolean()) {
          raise(ErrorCode::InvalidArgument, "body needs boolean 'signed_in'");
        }
        registry.set_signed_in(sig, body["signed_in"].get<bool>());
        res.set_content(wire::profile_json(registry.lookup(sig)),
                        "application/json");
      });
    });

    server.Post("/sessions", [this](const httplib::Request& req,
                                    httplib::Response& res) {
      handle(res, [&] {
        json body = parse_body(req);
        auto requester =
            registry.lookup(parse_signature(body.value("requester", "")));
        auto owner = registry.lookup(parse_signature(body.value("owner", "")));

        std::lock_guard lock(mu);
        auto& session =
            engine.request_access(requester, owner, now_utc_millis());
        db.upsert_session(session);
        res.status = 201;
        res.set_content(wire::session_json(session), "application/json");
      });
    });

    server.Post("/sessions/:id/trigger", [this](const httplib::Request& req,
                                                httplib::Response& res) {
      handle(res, [&] {
        auto id = parse_session_id(req.path_params.at("id"));
        std::lock_guard lock(mu);
        auto& session = engine.require(id);
        auto instruction = with_persist(session, [&] {
          return protocol::trigger_measurement(session, now_utc_millis());
        });
        json doc{{"session_id", session.id.to_hex()},
                 {"instruction",
                  {{"requester", instruction.requester.to_hex()},
                   {"owner", instruction.owner.to_hex()},
                   {"mode", instruction.mode},
                   {"report_deadline_ms", instruction.report_deadline_ms}}}};
        res.set_content(doc.dump(2), "application/json");
      });
    });

    server.Post("/sessions/:id/reports", [this](const httplib::Request& req,
                                                httplib::Response& res) {
      handle(res, [&] {
        auto id = parse_session_id(req.path_params.at("id"));
        json body = parse_body(req);
        std::vector<signal::RssiSample> samples;
        for (const auto& j : body.value("samples", json::array())) {
          signal::RssiSample s;
          s.measurer = parse_signature(j.value("measurer", ""));
          s.target = parse_signature(j.value("target", ""));
          if (!j.contains("rssi_dbm") || !j["rssi_dbm"].is_number()) {
            raise(ErrorCode::InvalidArgument, "sample needs numeric rssi_dbm");
          }
          s.rssi_dbm = j["rssi_dbm"].get<double>();
          if (!j.contains("timestamp_ms") ||
              !j["timestamp_ms"].is_number_integer()) {
            raise(ErrorCode::InvalidArgument,
                  "sample needs integer timestamp_ms");
          }
          s.timestamp_ms = j["timestamp_ms"].get<UtcMillis>();
          samples.push_back(s);
        }

        std::lock_guard lock(mu);
        auto& session = engine.require(id);
        const std::size_t before = session.reports.size();
        auto outcome = with_persist(session, [&] {
          return protocol::submit_report(session, samples, engine.policy(),
                                         now_utc_millis());
        });
        db.append_measurements(
            session.id,
            std::span(session.reports).subspan(before), now_utc_millis());
        json doc{{"session_id", session.id.to_hex()},
                 {"state", protocol::state_name(session.state)},
                 {"accepted", outcome.accepted},
                 {"rejected_stale", outcome.rejected_stale}};
        res.set_content(doc.dump(2), "application/json");
      });
    });

    server.Post("/sessions/:id/decision", [this](const httplib::Request& req,
                                                 httplib::Response& res) {
      handle(res, [&] {
        auto id = parse_session_id(req.path_params.at("id"));
        json body = parse_body(req);
        bool action_confirmed = body.value("action_confirmed", false);

        std::lock_guard lock(mu);
        auto& session = engine.require(id);
        auto decision = with_persist(session, [&] {
          if (session.state == protocol::SessionState::Reporting) {
            protocol::evaluate_proximity(session, model, engine.policy(),
                                         now_utc_millis());
          }
          return protocol::decide(session, engine.policy(), action_confirmed,
                                  now_utc_millis());
        });
        db.insert_decision(
            session.id,
            store::StoredDecision{decision, model_id,
                                  wire::policy_json(engine.policy())});
        json doc = json::parse(wire::decision_json(decision));
        doc["session_id"] = session.id.to_hex();
        doc["model_id"] = model_id;
        res.set_content(doc.dump(2), "application/json");
      });
    });

    server.Get("/sessions/:id", [this](const httplib::Request& req,
                                       httplib::Response& res) {
      handle(res, [&] {
        auto id = parse_session_id(req.path_params.at("id"));
        std::lock_guard lock(mu);
        auto& session = engine.require(id);
        if (protocol::expire_if_due(session, now_utc_millis())) {
          db.upsert_session(session);
        }
        res.set_content(wire::session_json(session), "application/json");
      });
    });
  }

};

Daemon::Daemon(ServiceConfig config) : impl_() {
  config.validate();
  impl_ = std::make_unique<Impl>(std::move(config));
}

Daemon::~Daemon() { stop(); }

bool Daemon::run() {
  impl_->bound_port = impl_->config.listen_port;
  if (impl_->config.listen_port == 0) {
    impl_->bound_port = impl_->server.bind_to_any_port(impl_->config.listen_host);
    if (impl_->bound_port < 0) return false;
    return impl_->server.listen_after_bind();
  }
  return impl_->server.listen(impl_->config.listen_host,
                              impl_->config.listen_port);
}

void Daemon::start_background() {
  if (impl_->config.listen_port == 0) {
    impl_->bound_port = impl_->server.bind_to_any_port(impl_->config.listen_host);
  } else {
    impl_->server.bind_to_port(impl_->config.listen_host,
                               impl_->config.listen_port);
    impl_->bound_port = impl_->config.listen_port;
  }
  if (impl_->bound_port <= 0) {
    raise(ErrorCode::IoError, "cannot bind " + impl_->config.listen_host);
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  while (!impl_->server.is_running()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
}

void Daemon::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int Daemon::port() const { return impl_->bound_port; }

const std::string& Daemon::model_id() const { return impl_->model_id; }

}  // namespace proxgate::service

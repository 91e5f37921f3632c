#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "proxgate/protocol.hpp"
#include "proxgate/signal.hpp"

namespace proxgate::service {

/// Daemon configuration, loaded from JSON with environment overrides
/// (PROXGATE_REGISTRY_SECRET_HEX takes precedence over the file).
struct ServiceConfig {
  std::string listen_host = "127.0.0.1";
  int listen_port = 8080;  // 0 binds an ephemeral port
  std::filesystem::path database_path;
  std::string registry_secret_hex;
  std::filesystem::path model_path;
  protocol::PolicyConfig policy;
  signal::PathLossParams path_loss;
  double tau_m = 2.0;
  std::uint64_t seed = 42;

  static ServiceConfig from_json_text(const std::string& text);
  static ServiceConfig from_json_file(const std::filesystem::path& path);
  std::string to_json_text() const;
  void validate() const;
};

/// The service provider: registration, session protocol, and decisions
/// over HTTP with JSON bodies. One instance owns the store, the registry,
/// the session engine and the active model.
class Daemon {
 public:
  explicit Daemon(ServiceConfig config);
  ~Daemon();

  Daemon(const Daemon&) = delete;
  Daemon& operator=(const Daemon&) = delete;

  /// Blocks serving requests until stop() is called.
  bool run();

  /// Binds and serves on a background thread; returns once the socket is
  /// accepting. The bound port is available via port().
  void start_background();
  void stop();

  int port() const;
  const std::string& model_id() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace proxgate::service

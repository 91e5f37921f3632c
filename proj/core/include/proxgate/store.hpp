#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "proxgate/common.hpp"
#include "proxgate/protocol.hpp"
#include "proxgate/registry.hpp"
#include "proxgate/signal.hpp"

struct sqlite3;

namespace proxgate::store {

struct StoredDecision {
  protocol::AccessDecision decision;
  std::string model_id;
  std::string policy_json;
};

/// Single-file relational store (SQLite). Schema is migrated on open and
/// verified with an integrity check; measurements are append-only by
/// construction (no update or delete surface exists for them).
class Database {
 public:
  explicit Database(const std::filesystem::path& path);
  ~Database();

  Database(Database&& other) noexcept;
  Database& operator=(Database&& other) noexcept;
  Database(const Database&) = delete;
  Database& operator=(const Database&) = delete;

  // profiles
  bool insert_profile(const registry::DeviceProfile& profile);
  std::optional<registry::DeviceProfile> get_profile(
      const registry::DeviceSignature& sig);
  bool update_signed_in(const registry::DeviceSignature& sig, bool flag);
  std::vector<registry::DeviceProfile> list_profiles();

  // sessions (reports live in the measurements table)
  void upsert_session(const protocol::MeasurementSession& session);
  std::optional<protocol::MeasurementSession> get_session(
      const protocol::SessionId& id);
  std::vector<protocol::MeasurementSession> list_sessions();

  // measurements
  void append_measurements(const std::optional<protocol::SessionId>& session,
                           std::span<const signal::RssiSample> samples,
                           UtcMillis inserted_at_ms);
  std::uint64_t count_measurements();
  std::vector<signal::RssiSample> session_measurements(
      const protocol::SessionId& id);
  std::vector<signal::RssiSample> dataset_measurements();

  // decisions
  void insert_decision(const protocol::SessionId& session,
                       const StoredDecision& stored);
  std::optional<StoredDecision> get_decision(const protocol::SessionId& id);

  // models
  void put_model(const std::string& id, const std::string& document,
                 UtcMillis created_at_ms);
  std::optional<std::string> get_model_document(const std::string& id);

  /// Groups several writes into one transaction.
  class Transaction {
   public:
    explicit Transaction(Database& db);
    ~Transaction();
    void commit();

   private:
    Database& db_;
    bool done_ = false;
  };

 private:
  void exec(const char* sql);
  void migrate();

  sqlite3* db_ = nullptr;
};

/// registry::ProfileStore backed by the relational store.
class SqliteProfileStore final : public registry::ProfileStore {
 public:
  explicit SqliteProfileStore(Database& db) : db_(db) {}

  bool insert(const registry::DeviceProfile& profile) override;
  std::optional<registry::DeviceProfile> get(
      const registry::DeviceSignature& sig) override;
  bool set_signed_in(const registry::DeviceSignature& sig, bool flag) override;
  std::vector<registry::DeviceProfile> list() override;

 private:
  Database& db_;
};

}  // namespace proxgate::store

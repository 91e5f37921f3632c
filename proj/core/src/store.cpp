#include "proxgate/store.hpp"

#include <sqlite3.h>

#include <json.hpp>

#include "proxgate/errors.hpp"

namespace proxgate::store {

using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

[[noreturn]] void raise_sqlite(sqlite3* db, const std::string& what) {
  raise(ErrorCode::IntegrityError,
        what + ": " + (db ? sqlite3_errmsg(db) : "no database handle"));
}

/// Prepared statement with RAII finalize and 1-based bind helpers.
class Stmt {
 public:
  Stmt(sqlite3* db, const char* sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql, -1, &stmt_, nullptr) != SQLITE_OK) {
      raise_sqlite(db, std::string("prepare failed for: ") + sql);
    }
  }
  ~Stmt() { sqlite3_finalize(stmt_); }
  Stmt(const Stmt&) = delete;
  Stmt& operator=(const Stmt&) = delete;

  Stmt& bind(int idx, const std::string& text) {
    check(sqlite3_bind_text(stmt_, idx, text.c_str(),
                            static_cast<int>(text.size()), SQLITE_TRANSIENT));
    return *this;
  }
  Stmt& bind(int idx, std::int64_t value) {
    check(sqlite3_bind_int64(stmt_, idx, value));
    return *this;
  }
  Stmt& bind(int idx, double value) {
    check(sqlite3_bind_double(stmt_, idx, value));
    return *this;
  }
  Stmt& bind_null(int idx) {
    check(sqlite3_bind_null(stmt_, idx));
    return *this;
  }

  /// Returns true while a row is available.
  bool step() {
    int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    raise_sqlite(db_, "step failed");
  }

  /// Runs a statement expected to produce no rows.
  void run() {
    if (step()) {
      raise(ErrorCode::IntegrityError, "statement unexpectedly returned rows");
    }
  }

  /// Makes the statement runnable again with fresh bindings.
  void reset() {
    sqlite3_reset(stmt_);
    sqlite3_clear_bindings(stmt_);
  }

  std::string column_text(int idx) {
    const unsigned char* text = sqlite3_column_text(stmt_, idx);
    return text ? reinterpret_cast<const char*>(text) : "";
  }
  std::int64_t column_int64(int idx) {
    return sqlite3_column_int64(stmt_, idx);
  }
  double column_double(int idx) { return sqlite3_column_double(stmt_, idx); }
  bool column_null(int idx) {
    return sqlite3_column_type(stmt_, idx) == SQLITE_NULL;
  }

 private:
  void check(int rc) {
    if (rc != SQLITE_OK) raise_sqlite(db_, "bind failed");
  }

  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

std::string identifiers_to_json(const registry::DeviceIdentifiers& ids) {
  json extra = json::array();
  for (const auto& [n, v] : ids.extra) extra.push_back(json::array({n, v}));
  return json{{"uuid", ids.uuid},
              {"imei", ids.imei},
              {"device_id", ids.device_id},
              {"extra", extra}}
      .dump();
}

registry::DeviceIdentifiers identifiers_from_json(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) {
    raise(ErrorCode::IntegrityError, "corrupted identifiers payload");
  }
  registry::DeviceIdentifiers ids;
  ids.uuid = doc.value("uuid", "");
  ids.imei = doc.value("imei", "");
  ids.device_id = doc.value("device_id", "");
  for (const auto& pair : doc.value("extra", json::array())) {
    ids.extra.emplace_back(pair.at(0).get<std::string>(),
                           pair.at(1).get<std::string>());
  }
  return ids;
}

registry::DeviceSignature signature_from_hex_checked(const std::string& hex) {
  auto sig = registry::DeviceSignature::from_hex(hex);
  if (!sig) {
    raise(ErrorCode::IntegrityError, "corrupted signature value: " + hex);
  }
  return *sig;
}

}  // namespace

Database::Database(const std::filesystem::path& path) {
  if (sqlite3_open(path.string().c_str(), &db_) != SQLITE_OK) {
    std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
    sqlite3_close(db_);
    db_ = nullptr;
    raise(ErrorCode::IoError, "cannot open database " + path.string() + ": " + msg);
  }
  exec("PRAGMA foreign_keys = ON");

  {
    Stmt check(db_, "PRAGMA quick_check");
    if (!check.step() || check.column_text(0) != "ok") {
      raise(ErrorCode::IntegrityError,
            "database failed its integrity check: " + path.string());
    }
  }
  migrate();
}

Database::~Database() { sqlite3_close(db_); }

Database::Database(Database&& other) noexcept : db_(other.db_) {
  other.db_ = nullptr;
}

Database& Database::operator=(Database&& other) noexcept {
  if (this != &other) {
    sqlite3_close(db_);
    db_ = other.db_;
    other.db_ = nullptr;
  }
  return *this;
}

void Database::exec(const char* sql) {
  char* err = nullptr;
  if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown error";
    sqlite3_free(err);
    raise(ErrorCode::IntegrityError, "sql failed (" + std::string(sql) + "): " + msg);
  }
}

void Database::migrate() {
  exec(R"sql(
    CREATE TABLE IF NOT EXISTS meta(
      key TEXT PRIMARY KEY,
      value TEXT NOT NULL
    );
    CREATE TABLE IF NOT EXISTS profiles(
      signature TEXT PRIMARY KEY,
      display_name TEXT NOT NULL,
      group_name TEXT NOT NULL CHECK(group_name IN ('one','two')),
      identifiers_json TEXT NOT NULL,
      registered_at_ms INTEGER NOT NULL,
      signed_in INTEGER NOT NULL DEFAULT 0
    );
    CREATE TABLE IF NOT EXISTS sessions(
      id TEXT PRIMARY KEY,
      requester TEXT NOT NULL REFERENCES profiles(signature),
      owner TEXT NOT NULL REFERENCES profiles(signature),
      state TEXT NOT NULL,
      created_at_ms INTEGER NOT NULL,
      deadline_ms INTEGER NOT NULL,
      verdict_label INTEGER,
      verdict_score REAL,
      model_id TEXT
    );
    CREATE TABLE IF NOT EXISTS measurements(
      seq INTEGER PRIMARY KEY AUTOINCREMENT,
      session_id TEXT REFERENCES sessions(id),
      measurer TEXT NOT NULL,
      target TEXT NOT NULL,
      rssi_dbm REAL NOT NULL,
      timestamp_ms INTEGER NOT NULL,
      distance_m REAL,
      setting TEXT,
      inserted_at_ms INTEGER NOT NULL
    );
    CREATE INDEX IF NOT EXISTS idx_measurements_session
      ON measurements(session_id);
    CREATE TABLE IF NOT EXISTS decisions(
      session_id TEXT PRIMARY KEY REFERENCES sessions(id),
      granted INTEGER NOT NULL,
      reason TEXT NOT NULL,
      score REAL NOT NULL,
      decided_at_ms INTEGER NOT NULL,
      model_id TEXT NOT NULL,
      policy_json TEXT NOT NULL
    );
    CREATE TABLE IF NOT EXISTS models(
      id TEXT PRIMARY KEY,
      document TEXT NOT NULL,
      created_at_ms INTEGER NOT NULL
    );
  )sql");

  Stmt get(db_, "SELECT value FROM meta WHERE key = 'schema_version'");
  if (get.step()) {
    if (get.column_text(0) != std::to_string(kSchemaVersion)) {
      raise(ErrorCode::IntegrityError,
            "unsupported schema version " + get.column_text(0));
    }
  } else {
    Stmt set(db_, "INSERT INTO meta(key, value) VALUES('schema_version', ?1)");
    set.bind(1, std::to_string(kSchemaVersion)).run();
  }
}

bool Database::insert_profile(const registry::DeviceProfile& profile) {
  Stmt stmt(db_, R"sql(
    INSERT OR IGNORE INTO profiles
      (signature, display_name, group_name, identifiers_json,
       registered_at_ms, signed_in)
    VALUES (?1, ?2, ?3, ?4, ?5, ?6)
  )sql");
  stmt.bind(1, profile.signature.to_hex())
      .bind(2, profile.display_name)
      .bind(3, std::string(registry::group_name(profile.group)))
      .bind(4, identifiers_to_json(profile.identifiers))
      .bind(5, profile.registered_at_ms)
      .bind(6, static_cast<std::int64_t>(profile.signed_in ? 1 : 0))
      .run();
  return sqlite3_changes(db_) == 1;
}

std::optional<registry::DeviceProfile> Database::get_profile(
    const registry::DeviceSignature& sig) {
  Stmt stmt(db_, R"sql(
    SELECT display_name, group_name, identifiers_json, registered_at_ms,
           signed_in
    FROM profiles WHERE signature = ?1
  )sql");
  stmt.bind(1, sig.to_hex());
  if (!stmt.step()) return std::nullopt;

  registry::DeviceProfile profile;
  profile.signature = sig;
  profile.display_name = stmt.column_text(0);
  auto group = registry::group_from_name(stmt.column_text(1));
  if (!group) {
    raise(ErrorCode::IntegrityError, "corrupted group value");
  }
  profile.group = *group;
  profile.identifiers = identifiers_from_json(stmt.column_text(2));
  profile.registered_at_ms = stmt.column_int64(3);
  profile.signed_in = stmt.column_int64(4) != 0;
  return profile;
}

bool Database::update_signed_in(const registry::DeviceSignature& sig,
                                bool flag) {
  Stmt stmt(db_, "UPDATE profiles SET signed_in = ?2 WHERE signature = ?1");
  stmt.bind(1, sig.to_hex())
      .bind(2, static_cast<std::int64_t>(flag ? 1 : 0))
      .run();
  return sqlite3_changes(db_) == 1;
}

std::vector<registry::DeviceProfile> Database::list_profiles() {
  Stmt stmt(db_, "SELECT signature FROM profiles ORDER BY signature");
  std::vector<registry::DeviceProfile> out;
  std::vector<std::string> hexes;
  while (stmt.step()) hexes.push_back(stmt.column_text(0));
  for (const auto& hex : hexes) {
    auto profile = get_profile(signature_from_hex_checked(hex));
    if (profile) out.push_back(std::move(*profile));
  }
  return out;
}

void Database::upsert_session(const protocol::MeasurementSession& session) {
  Stmt stmt(db_, R"sql(
    INSERT INTO sessions
      (id, requester, owner, state, created_at_ms, deadline_ms,
       verdict_label, verdict_score, model_id)
    VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9)
    ON CONFLICT(id) DO UPDATE SET
      state = excluded.state,
      verdict_label = excluded.verdict_label,
      verdict_score = excluded.verdict_score,
      model_id = excluded.model_id
  )sql");
  stmt.bind(1, session.id.to_hex())
      .bind(2, session.requester.to_hex())
      .bind(3, session.owner.to_hex())
      .bind(4, std::string(protocol::state_name(session.state)))
      .bind(5, session.created_at_ms)
      .bind(6, session.deadline_ms);
  if (session.verdict) {
    stmt.bind(7, static_cast<std::int64_t>(session.verdict->label ? 1 : 0))
        .bind(8, session.verdict->score);
  } else {
    stmt.bind_null(7).bind_null(8);
  }
  if (session.model_id) {
    stmt.bind(9, *session.model_id);
  } else {
    stmt.bind_null(9);
  }
  stmt.run();
}

std::optional<protocol::MeasurementSession> Database::get_session(
    const protocol::SessionId& id) {
  Stmt stmt(db_, R"sql(
    SELECT requester, owner, state, created_at_ms, deadline_ms,
           verdict_label, verdict_score, model_id
    FROM sessions WHERE id = ?1
  )sql");
  stmt.bind(1, id.to_hex());
  if (!stmt.step()) return std::nullopt;

  protocol::MeasurementSession session;
  session.id = id;
  session.requester = signature_from_hex_checked(stmt.column_text(0));
  session.owner = signature_from_hex_checked(stmt.column_text(1));
  auto state = protocol::state_from_name(stmt.column_text(2));
  if (!state) {
    raise(ErrorCode::IntegrityError, "corrupted session state");
  }
  session.state = *state;
  session.created_at_ms = stmt.column_int64(3);
  session.deadline_ms = stmt.column_int64(4);
  if (!stmt.column_null(5)) {
    session.verdict = ml::Prediction{stmt.column_int64(5) != 0,
                                     stmt.column_double(6)};
  }
  if (!stmt.column_null(7)) session.model_id = stmt.column_text(7);

  session.reports = session_measurements(id);
  if (auto stored = get_decision(id)) {
    session.decision = stored->decision;
  }
  return session;
}

std::vector<protocol::MeasurementSession> Database::list_sessions() {
  Stmt stmt(db_, "SELECT id FROM sessions ORDER BY created_at_ms, id");
  std::vector<std::string> hexes;
  while (stmt.step()) hexes.push_back(stmt.column_text(0));

  std::vector<protocol::MeasurementSession> out;
  for (const auto& hex : hexes) {
    auto id = protocol::SessionId::from_hex(hex);
    if (!id) {
      raise(ErrorCode::IntegrityError, "corrupted session id: " + hex);
    }
    if (auto session = get_session(*id)) out.push_back(std::move(*session));
  }
  return out;
}

void Database::append_measurements(
    const std::optional<protocol::SessionId>& session,
    std::span<const signal::RssiSample> samples, UtcMillis inserted_at_ms) {
  Transaction tx(*this);
  Stmt row(db_, R"sql(
    INSERT INTO measurements
      (session_id, measurer, target, rssi_dbm, timestamp_ms, distance_m,
       setting, inserted_at_ms)
    VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)
  )sql");
  for (const auto& s : samples) {
    if (session) row.bind(1, session->to_hex());
    else row.bind_null(1);
    row.bind(2, s.measurer.to_hex())
        .bind(3, s.target.to_hex())
        .bind(4, s.rssi_dbm)
        .bind(5, s.timestamp_ms);
    if (s.distance_m) row.bind(6, *s.distance_m);
    else row.bind_null(6);
    if (s.setting) row.bind(7, std::string(signal::setting_name(*s.setting)));
    else row.bind_null(7);
    row.bind(8, inserted_at_ms);
    row.run();
    row.reset();
  }
  tx.commit();
}

std::uint64_t Database::count_measurements() {
  Stmt stmt(db_, "SELECT COUNT(*) FROM measurements");
  stmt.step();
  return static_cast<std::uint64_t>(stmt.column_int64(0));
}

namespace {

signal::RssiSample sample_from_row(Stmt& stmt) {
  signal::RssiSample s;
  s.measurer = signature_from_hex_checked(stmt.column_text(0));
  s.target = signature_from_hex_checked(stmt.column_text(1));
  s.rssi_dbm = stmt.column_double(2);
  s.timestamp_ms = stmt.column_int64(3);
  if (!stmt.column_null(4)) s.distance_m = stmt.column_double(4);
  if (!stmt.column_null(5)) {
    auto setting = signal::setting_from_name(stmt.column_text(5));
    if (!setting) {
      raise(ErrorCode::IntegrityError, "corrupted wear setting");
    }
    s.setting = setting;
  }
  return s;
}

}  // namespace

std::vector<signal::RssiSample> Database::session_measurements(
    const protocol::SessionId& id) {
  Stmt stmt(db_, R"sql(
    SELECT measurer, target, rssi_dbm, timestamp_ms, distance_m, setting
    FROM measurements WHERE session_id = ?1 ORDER BY seq
  )sql");
  stmt.bind(1, id.to_hex());
  std::vector<signal::RssiSample> out;
  while (stmt.step()) out.push_back(sample_from_row(stmt));
  return out;
}

std::vector<signal::RssiSample> Database::dataset_measurements() {
  Stmt stmt(db_, R"sql(
    SELECT measurer, target, rssi_dbm, timestamp_ms, distance_m, setting
    FROM measurements WHERE session_id IS NULL ORDER BY seq
  )sql");
  std::vector<signal::RssiSample> out;
  while (stmt.step()) out.push_back(sample_from_row(stmt));
  return out;
}

void Database::insert_decision(const protocol::SessionId& session,
                               const StoredDecision& stored) {
  Stmt stmt(db_, R"sql(
    INSERT INTO decisions
      (session_id, granted, reason, score, decided_at_ms, model_id,
       policy_json)
    VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)
  )sql");
  stmt.bind(1, session.to_hex())
      .bind(2, static_cast<std::int64_t>(stored.decision.granted ? 1 : 0))
      .bind(3, std::string(protocol::reason_name(stored.decision.reason)))
      .bind(4, stored.decision.score)
      .bind(5, stored.decision.decided_at_ms)
      .bind(6, stored.model_id)
      .bind(7, stored.policy_json)
      .run();
}

std::optional<StoredDecision> Database::get_decision(
    const protocol::SessionId& id) {
  Stmt stmt(db_, R"sql(
    SELECT granted, reason, score, decided_at_ms, model_id, policy_json
    FROM decisions WHERE session_id = ?1
  )sql");
  stmt.bind(1, id.to_hex());
  if (!stmt.step()) return std::nullopt;

  StoredDecision stored;
  stored.decision.granted = stmt.column_int64(0) != 0;
  auto reason = protocol::reason_from_name(stmt.column_text(1));
  if (!reason) {
    raise(ErrorCode::IntegrityError, "corrupted decision reason");
  }
  stored.decision.reason = *reason;
  stored.decision.score = stmt.column_double(2);
  stored.decision.decided_at_ms = stmt.column_int64(3);
  stored.model_id = stmt.column_text(4);
  stored.policy_json = stmt.column_text(5);
  return stored;
}

void Database::put_model(const std::string& id, const std::string& document,
                         UtcMillis created_at_ms) {
  Stmt stmt(db_, R"sql(
    INSERT OR IGNORE INTO models(id, document, created_at_ms)
    VALUES (?1, ?2, ?3)
  )sql");
  stmt.bind(1, id).bind(2, document).bind(3, created_at_ms).run();
}

std::optional<std::string> Database::get_model_document(const std::string& id) {
  Stmt stmt(db_, "SELECT document FROM models WHERE id = ?1");
  stmt.bind(1, id);
  if (!stmt.step()) return std::nullopt;
  return stmt.column_text(0);
}

Database::Transaction::Transaction(Database& db) : db_(db) {
  db_.exec("BEGIN IMMEDIATE");
}

Database::Transaction::~Transaction() {
  if (!done_) db_.exec("ROLLBACK");
}

void Database::Transaction::commit() {
  db_.exec("COMMIT");
  done_ = true;
}

bool SqliteProfileStore::insert(const registry::DeviceProfile& profile) {
  return db_.insert_profile(profile);
}

std::optional<registry::DeviceProfile> SqliteProfileStore::get(
    const registry::DeviceSignature& sig) {
  return db_.get_profile(sig);
}

bool SqliteProfileStore::set_signed_in(const registry::DeviceSignature& sig,
                                       bool flag) {
  return db_.update_signed_in(sig, flag);
}

std::vector<registry::DeviceProfile> SqliteProfileStore::list() {
  return db_.list_profiles();
}

}  // namespace proxgate::store

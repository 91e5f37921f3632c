// proxgate: proximity-gated data sharing over BLE RSSI.
//
// Subcommands cover the whole pipeline: device registration, dataset
// ingestion, synthetic data, training, evaluation, threshold sweeps, the
// HTTP daemon, and a scripted end-to-end demo.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "proxgate/errors.hpp"
#include "proxgate/eval.hpp"
#include "proxgate/ml.hpp"
#include "proxgate/protocol.hpp"
#include "proxgate/registry.hpp"
#include "proxgate/service.hpp"
#include "proxgate/signal.hpp"
#include "proxgate/store.hpp"
#include "proxgate/wire.hpp"

using namespace proxgate;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
}

std::vector<double> parse_doubles(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(std::stod(std::string(trim(item))));
  }
  return out;
}

std::vector<int> parse_ints(const std::string& csv) {
  std::vector<int> out;
  for (double v : parse_doubles(csv)) out.push_back(static_cast<int>(v));
  return out;
}

struct SchemaFlags {
  std::string setting = "setting";
  std::string distance = "distance_m";
  std::string rssi_a = "rssi_a_dbm";
  std::string rssi_b = "rssi_b_dbm";
  std::string timestamp = "timestamp_unix";

  void attach(CLI::App* cmd) {
    cmd->add_option("--col-setting", setting, "Wear-setting column name");
    cmd->add_option("--col-distance", distance, "Distance column name");
    cmd->add_option("--col-rssi-a", rssi_a, "First RSSI column name");
    cmd->add_option("--col-rssi-b", rssi_b,
                    "Second RSSI column name ('' when absent)");
    cmd->add_option("--col-timestamp", timestamp,
                    "Timestamp column name ('' when absent)");
  }

  signal::ColumnSchema schema() const {
    return signal::ColumnSchema{setting, distance, rssi_a, rssi_b, timestamp};
  }
};

struct PathLossFlags {
  double rssi1m = -59.0;
  double exponent = 2.0;
  double sigma = 3.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--rssi1m", rssi1m, "Reference RSSI at 1 m, dBm");
    cmd->add_option("--exponent", exponent, "Path-loss exponent n");
    cmd->add_option("--sigma", sigma, "Shadowing sigma, dB");
  }

  signal::PathLossParams params(std::uint64_t seed) const {
    signal::PathLossParams p;
    p.rssi_at_1m_dbm = rssi1m;
    p.path_loss_exponent_n = exponent;
    p.shadowing_sigma_db = sigma;
    p.rng_seed = seed;
    return p;
  }
};

signal::Category category_of(std::span<const signal::RssiSample> samples) {
  std::optional<signal::Category> seen;
  for (const auto& s : samples) {
    if (!s.setting) return signal::Category::Mixed;
    auto c = signal::category(*s.setting);
    if (seen && *seen != c) return signal::Category::Mixed;
    seen = c;
  }
  return seen.value_or(signal::Category::Mixed);
}

signal::LabeledDataset labeled_from_csv(const std::filesystem::path& input,
                                        const SchemaFlags& schema, double tau) {
  auto result = signal::load_dataset(input, schema.schema());
  return signal::make_labeled(result.samples, tau, category_of(result.samples),
                              signal::Provenance::File);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  return seed ^ (salt + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

// ---------------------------------------------------------------- register

struct RegisterArgs {
  std::string db;
  std::string secret_hex;
  std::string name;
  std::string group;
  std::string uuid, imei, device_id;
  std::vector<std::string> extra;
  bool signed_in = false;
  std::int64_t now_ms = -1;
};

int cmd_register(const RegisterArgs& args) {
  std::string secret = args.secret_hex;
  if (secret.empty()) {
    if (const char* env = std::getenv("PROXGATE_REGISTRY_SECRET_HEX")) {
      secret = env;
    }
  }
  if (secret.empty()) {
    raise(ErrorCode::InvalidConfig,
          "no registry secret: pass --secret-hex or set "
          "PROXGATE_REGISTRY_SECRET_HEX");
  }

  registry::DeviceIdentifiers ids;
  ids.uuid = args.uuid;
  ids.imei = args.imei;
  ids.device_id = args.device_id;
  for (const auto& pair : args.extra) {
    auto eq = pair.find('=');
    if (eq == std::string::npos) {
      raise(ErrorCode::InvalidArgument, "--extra expects name=value, got '" +
                                            pair + "'");
    }
    ids.extra.emplace_back(pair.substr(0, eq), pair.substr(eq + 1));
  }
  auto group = registry::group_from_name(args.group);
  if (!group) {
    raise(ErrorCode::InvalidArgument, "group must be 'one' or 'two'");
  }

  store::Database db(args.db);
  store::SqliteProfileStore profiles(db);
  registry::Registry reg(registry::secret_from_hex(secret), profiles);

  UtcMillis now = args.now_ms >= 0 ? args.now_ms : now_utc_millis();
  auto profile = reg.register_device(args.name, ids, *group, now);
  if (args.signed_in) {
    reg.set_signed_in(profile.signature, true);
    profile = reg.lookup(profile.signature);
  }
  std::cout << wire::profile_json(profile) << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------ ingest

struct IngestArgs {
  std::string db;
  std::string input;
  SchemaFlags schema;
  std::int64_t now_ms = -1;
};

int cmd_ingest(const IngestArgs& args) {
  auto result = signal::load_dataset(args.input, args.schema.schema());

  store::Database db(args.db);
  UtcMillis now = args.now_ms >= 0 ? args.now_ms : now_utc_millis();
  db.append_measurements(std::nullopt, result.samples, now);

  auto [crosswise, direct] = signal::combine_settings(result.samples);

  json per_setting;
  for (const auto& [setting, count] : result.rows_per_setting) {
    per_setting[std::string(signal::setting_name(setting))] = count;
  }
  json rejected = json::array();
  for (const auto& [row, why] : result.rejected) {
    rejected.push_back(json{{"row", row}, {"reason", why}});
  }
  json report{{"rows_total", result.rows_total},
              {"rows_per_setting", per_setting},
              {"samples_stored", result.samples.size()},
              {"paired", result.paired},
              {"crosswise_samples", crosswise.size()},
              {"direct_samples", direct.size()},
              {"rejected", rejected}};
  std::cout << report.dump(2) << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- synth

struct SynthArgs {
  std::string output;
  std::size_t n = 10000;
  std::uint64_t seed = 42;
  double tau = 2.0;
  std::string distances;
  PathLossFlags path_loss;
};

int cmd_synth(const SynthArgs& args) {
  auto grid = args.distances.empty() ? signal::default_distance_grid()
                                     : parse_doubles(args.distances);
  auto ds = signal::synth_dataset(args.n, grid, args.tau,
                                  args.path_loss.params(args.seed));
  auto samples = signal::dataset_to_samples(ds);
  signal::write_dataset_csv(args.output, samples);

  std::size_t positives = 0;
  for (auto y : ds.labels) positives += y;
  json summary{{"output", args.output},
               {"rows", ds.size()},
               {"positives", positives},
               {"negatives", ds.size() - positives},
               {"tau_m", args.tau},
               {"seed", args.seed}};
  std::cout << summary.dump(2) << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  std::string input;
  bool synthetic = false;
  std::string model;
  std::string output;
  double tau = 2.0;
  std::uint64_t seed = 42;
  double split = 0.8;
  bool full = false;
  int k = 5;
  double learning_rate = 0.1;
  int epochs = 500;
  double l2 = 1e-4;
  std::size_t n = 10000;
  SchemaFlags schema;
  PathLossFlags path_loss;
};

signal::LabeledDataset train_input_dataset(const TrainArgs& args) {
  if (args.synthetic) {
    return signal::synth_dataset(args.n, signal::default_distance_grid(),
                                 args.tau, args.path_loss.params(args.seed));
  }
  if (args.input.empty()) {
    raise(ErrorCode::InvalidConfig, "pass --input CSV or --synthetic");
  }
  return labeled_from_csv(args.input, args.schema, args.tau);
}

int cmd_train(const TrainArgs& args) {
  auto data = train_input_dataset(args);

  signal::LabeledDataset train = std::move(data);
  if (!args.full) {
    auto [tr, te] = eval::split(train, args.split, args.seed);
    train = std::move(tr);
  }

  ml::TrainedModel model = [&] {
    if (args.model == "lr") {
      return ml::train_logistic(train,
                                {args.learning_rate, args.epochs, args.l2});
    }
    if (args.model == "knn") return ml::train_knn(train, args.k);
    if (args.model == "gnb") return ml::train_gnb(train);
    raise(ErrorCode::InvalidArgument, "model must be lr, knn or gnb");
  }();
  model.metadata.seed = args.seed;

  auto document = ml::to_json(model);
  write_text_file(args.output, document);

  json summary{{"output", args.output},
               {"kind", std::string(model.kind())},
               {"model_id", ml::model_id(model)},
               {"n_train", train.size()},
               {"tau_m", args.tau},
               {"seed", args.seed}};
  std::cout << summary.dump(2) << "\n";
  return kExitOk;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  bool synthetic = false;
  std::string input;
  std::string crosswise;
  std::string direct;
  std::string model_file;
  double tau = 2.0;
  std::uint64_t seed = 42;
  double split = 0.8;
  int k = 5;
  double learning_rate = 0.1;
  int epochs = 500;
  double l2 = 1e-4;
  std::size_t n = 10000;
  std::string json_out;
  std::string csv_out;
  SchemaFlags schema;
  PathLossFlags path_loss;
};

eval::Hyper hyper_of(double lr, int epochs, double l2, int k) {
  eval::Hyper h;
  h.lr = {lr, epochs, l2};
  h.k = k;
  return h;
}

int cmd_eval(const EvalArgs& args) {
  auto hyper = hyper_of(args.learning_rate, args.epochs, args.l2, args.k);
  eval::EvaluationReport report;

  if (!args.model_file.empty()) {
    // evaluate a saved model on the held-out side of a fresh split
    if (args.input.empty()) {
      raise(ErrorCode::InvalidConfig, "--model needs --input data");
    }
    auto data = labeled_from_csv(args.input, args.schema, args.tau);
    auto model = ml::from_json(read_text_file(args.model_file));
    auto [train, test] = eval::split(data, args.split, args.seed);

    eval::CategorySection section;
    section.name = std::string(signal::category_name(data.category));
    auto kind_index = [&]() -> std::size_t {
      if (model.kind() == "lr") return 0;
      if (model.kind() == "knn") return 1;
      return 2;
    }();
    section.models[kind_index] = eval::evaluate_model(model, test);
    report.sections.push_back(std::move(section));
    report.meta = {args.seed, args.split, args.tau,
                   std::string(signal::provenance_name(data.provenance))};
  } else if (args.synthetic) {
    auto crosswise = signal::synth_dataset(
        args.n, signal::default_distance_grid(), args.tau,
        args.path_loss.params(mix_seed(args.seed, 1)));
    crosswise.category = signal::Category::Crosswise;
    auto direct = signal::synth_dataset(
        args.n, signal::default_distance_grid(), args.tau,
        args.path_loss.params(mix_seed(args.seed, 2)));
    direct.category = signal::Category::Direct;
    report = eval::run_experiment(crosswise, direct, args.seed, hyper);
  } else if (!args.crosswise.empty() || !args.direct.empty()) {
    if (args.crosswise.empty() || args.direct.empty()) {
      raise(ErrorCode::InvalidConfig,
            "--crosswise and --direct go together");
    }
    auto crosswise = labeled_from_csv(args.crosswise, args.schema, args.tau);
    crosswise.category = signal::Category::Crosswise;
    auto direct = labeled_from_csv(args.direct, args.schema, args.tau);
    direct.category = signal::Category::Direct;
    report = eval::run_experiment(crosswise, direct, args.seed, hyper);
  } else if (!args.input.empty()) {
    auto result = signal::load_dataset(args.input, args.schema.schema());
    auto [cross_samples, direct_samples] =
        signal::combine_settings(result.samples);
    auto crosswise =
        signal::make_labeled(cross_samples, args.tau,
                             signal::Category::Crosswise,
                             signal::Provenance::File);
    auto direct = signal::make_labeled(direct_samples, args.tau,
                                       signal::Category::Direct,
                                       signal::Provenance::File);
    report = eval::run_experiment(crosswise, direct, args.seed, hyper);
  } else {
    raise(ErrorCode::InvalidConfig,
          "pass --synthetic, --input, or --crosswise/--direct");
  }

  std::cout << eval::render_report(report);
  if (!args.json_out.empty()) {
    write_text_file(args.json_out, eval::report_to_json(report));
  }
  if (!args.csv_out.empty()) {
    write_text_file(args.csv_out, eval::report_to_csv(report));
  }
  return kExitOk;
}

// ------------------------------------------------------------------- sweep

struct SweepArgs {
  bool synthetic = false;
  std::string input;
  std::string output;
  std::string taus = "0.75,1.25,1.75,2.25,2.75,3.25,3.75,4.25,4.75";
  std::string ks = "1,3,5,7";
  double tau = 2.0;
  std::uint64_t seed = 42;
  double learning_rate = 0.1;
  int epochs = 500;
  double l2 = 1e-4;
  std::size_t n = 10000;
  SchemaFlags schema;
  PathLossFlags path_loss;
};

int cmd_sweep(const SweepArgs& args) {
  signal::LabeledDataset data = [&] {
    if (args.synthetic) {
      return signal::synth_dataset(args.n, signal::default_distance_grid(),
                                   args.tau, args.path_loss.params(args.seed));
    }
    if (args.input.empty()) {
      raise(ErrorCode::InvalidConfig, "pass --input CSV or --synthetic");
    }
    return labeled_from_csv(args.input, args.schema, args.tau);
  }();

  auto taus = parse_doubles(args.taus);
  auto ks = parse_ints(args.ks);
  auto hyper = hyper_of(args.learning_rate, args.epochs, args.l2, 5);
  auto result = eval::sweep(data, taus, ks, args.seed, hyper);
  write_text_file(args.output, eval::sweep_to_csv(result));

  std::size_t failed = 0;
  for (const auto& e : result.entries) failed += e.error.has_value();
  json summary{{"output", args.output},
               {"grid_points", result.entries.size()},
               {"failed_points", failed},
               {"seed", args.seed}};
  std::cout << summary.dump(2) << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- serve

int cmd_serve(const std::string& config_path) {
  auto config = service::ServiceConfig::from_json_file(config_path);
  service::Daemon daemon(std::move(config));
  std::cerr << "proxgate daemon listening" << std::endl;
  return daemon.run() ? kExitOk : kExitData;
}

// -------------------------------------------------------------------- demo

struct DemoArgs {
  std::string scenario = "fig1a";
  std::uint64_t seed = 42;
  double tau = 2.0;
  double distance = 0.5;
  double sigma = 0.0;
  std::string json_out;
};

int cmd_demo(const DemoArgs& args) {
  constexpr UtcMillis kBase = 1700000000000;
  const bool device_owner = args.scenario == "fig1b";
  if (!device_owner && args.scenario != "fig1a") {
    raise(ErrorCode::InvalidArgument, "scenario must be fig1a or fig1b");
  }

  json transcript;
  transcript["scenario"] = args.scenario;
  json steps = json::array();
  auto step = [&](int number, const std::string& title, json detail) {
    std::cout << "[" << number << "/6] " << title << "\n";
    for (auto it = detail.begin(); it != detail.end(); ++it) {
      std::cout << "      " << it.key() << ": "
                << (it.value().is_string() ? it.value().get<std::string>()
                                           : it.value().dump())
                << "\n";
    }
    detail["step"] = number;
    detail["title"] = title;
    steps.push_back(detail);
  };

  // The provider side, assembled in memory with a throwaway relational
  // store. Identical wiring to the daemon, driven by a scripted clock.
  store::Database db(":memory:");
  store::SqliteProfileStore profiles(db);
  registry::SecretKey secret{};
  secret.fill(0x5c);
  registry::Registry reg(secret, profiles);

  signal::PathLossParams model_params;
  model_params.rng_seed = mix_seed(args.seed, 7);
  auto training =
      signal::synth_dataset(4000, signal::default_distance_grid(), args.tau,
                            model_params);
  auto model = ml::train_logistic(training);
  model.metadata.seed = args.seed;

  protocol::PolicyConfig policy;
  policy.data_sensitivity = device_owner
                                ? protocol::DataSensitivity::Insensitive
                                : protocol::DataSensitivity::Sensitive;
  protocol::SessionEngine engine(policy, args.seed);

  registry::DeviceIdentifiers owner_ids;
  owner_ids.uuid = device_owner ? "iot-shelf-sensor" : "user-a-watch";
  owner_ids.imei = "490154203237518";
  auto owner = reg.register_device(
      device_owner ? "Office IoT sensor" : "User A's smartwatch", owner_ids,
      registry::DeviceGroup::GroupOne, kBase);

  registry::DeviceIdentifiers requester_ids;
  requester_ids.uuid = "user-b-watch";
  requester_ids.imei = "358673013795895";
  auto requester =
      reg.register_device("User B's smartwatch", requester_ids,
                          registry::DeviceGroup::GroupTwo, kBase);
  reg.set_signed_in(requester.signature, true);
  requester = reg.lookup(requester.signature);

  auto& session = engine.request_access(requester, owner, kBase + 1000);
  db.upsert_session(session);
  step(1, "request: Group Two asks the provider for access",
       {{"requester", requester.display_name},
        {"requester_signature", requester.signature.to_hex()},
        {"owner", owner.display_name},
        {"session", session.id.to_hex()},
        {"state", std::string(protocol::state_name(session.state))}});

  auto instruction = protocol::trigger_measurement(session, kBase + 2000);
  db.upsert_session(session);
  step(2, "trigger: both devices advertise their signatures",
       {{"mode", instruction.mode},
        {"owner_signature", instruction.owner.to_hex()},
        {"report_deadline_ms", instruction.report_deadline_ms},
        {"state", std::string(protocol::state_name(session.state))}});

  signal::Rng rng(mix_seed(args.seed, 11));
  signal::PathLossParams channel;
  channel.shadowing_sigma_db = args.sigma;
  std::vector<signal::RssiSample> readings;
  for (int i = 0; i < 3; ++i) {
    signal::RssiSample fwd;
    fwd.measurer = requester.signature;
    fwd.target = owner.signature;
    fwd.rssi_dbm = signal::synth_rssi(args.distance, channel, rng);
    fwd.timestamp_ms = kBase + 3000 + i * 100;
    readings.push_back(fwd);

    signal::RssiSample rev = fwd;
    rev.measurer = owner.signature;
    rev.target = requester.signature;
    rev.rssi_dbm = signal::synth_rssi(args.distance, channel, rng);
    readings.push_back(rev);
  }
  auto outcome =
      protocol::submit_report(session, readings, policy, kBase + 4000);
  step(3, "measure: mutual RSSI readings reported with timestamps",
       {{"distance_m", args.distance},
        {"accepted", outcome.accepted},
        {"rejected_stale", outcome.rejected_stale},
        {"state", std::string(protocol::state_name(session.state))}});

  db.upsert_session(session);
  db.append_measurements(session.id, session.reports, kBase + 4000);
  step(4, "store: provider persists the readings relationally",
       {{"measurements_stored", db.count_measurements()},
        {"session", session.id.to_hex()}});

  auto verdict =
      protocol::evaluate_proximity(session, model, policy, kBase + 5000);
  db.upsert_session(session);
  step(5, "classify: ML model scores the mutual signal levels",
       {{"model", std::string(model.kind())},
        {"model_id", ml::model_id(model)},
        {"score", verdict.score},
        {"proximate", verdict.label}});

  auto decision =
      protocol::decide(session, policy, /*action_confirmed=*/true,
                       kBase + 6000);
  db.upsert_session(session);
  db.insert_decision(session.id,
                     store::StoredDecision{decision, ml::model_id(model),
                                           wire::policy_json(policy)});
  step(6, "decide: permission granted or denied",
       {{"granted", decision.granted},
        {"reason", std::string(protocol::reason_name(decision.reason))},
        {"score", decision.score},
        {"state", std::string(protocol::state_name(session.state))}});

  transcript["steps"] = steps;
  transcript["decision"] = json::parse(wire::decision_json(decision));
  transcript["session"] = json::parse(wire::session_json(session));
  if (!args.json_out.empty()) {
    write_text_file(args.json_out, transcript.dump(2));
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Proximity-gated BLE data sharing service and toolkit"};
  app.require_subcommand(1);

  RegisterArgs reg_args;
  auto* reg_cmd = app.add_subcommand("register", "Register a device profile");
  reg_cmd->add_option("--db", reg_args.db, "SQLite database path")->required();
  reg_cmd->add_option("--secret-hex", reg_args.secret_hex,
                      "Registry secret (64 hex chars)");
  reg_cmd->add_option("--name", reg_args.name, "Display name")->required();
  reg_cmd->add_option("--group", reg_args.group, "one (owner) or two "
                                                  "(requester)")
      ->required();
  reg_cmd->add_option("--uuid", reg_args.uuid, "Device UUID");
  reg_cmd->add_option("--imei", reg_args.imei, "Device IMEI");
  reg_cmd->add_option("--device-id", reg_args.device_id, "Device ID");
  reg_cmd->add_option("--extra", reg_args.extra,
                      "Extra identifier name=value (repeatable)");
  reg_cmd->add_flag("--signed-in", reg_args.signed_in,
                    "Mark the device as signed in");
  reg_cmd->add_option("--now-ms", reg_args.now_ms,
                      "Registration timestamp override (unix ms)");

  IngestArgs ingest_args;
  auto* ingest_cmd =
      app.add_subcommand("ingest", "Load a CSV dataset into the store");
  ingest_cmd->add_option("--db", ingest_args.db, "SQLite database path")
      ->required();
  ingest_cmd->add_option("--input", ingest_args.input, "CSV file")->required();
  ingest_args.schema.attach(ingest_cmd);
  ingest_cmd->add_option("--now-ms", ingest_args.now_ms,
                         "Insertion timestamp override (unix ms)");

  SynthArgs synth_args;
  auto* synth_cmd =
      app.add_subcommand("synth", "Generate a synthetic RSSI dataset CSV");
  synth_cmd->add_option("--output", synth_args.output, "Output CSV")
      ->required();
  synth_cmd->add_option("--n", synth_args.n, "Rows to generate");
  synth_cmd->add_option("--seed", synth_args.seed, "RNG seed");
  synth_cmd->add_option("--tau", synth_args.tau, "Proximity threshold, m");
  synth_cmd->add_option("--distances", synth_args.distances,
                        "Comma-separated distance grid");
  synth_args.path_loss.attach(synth_cmd);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a classifier");
  train_cmd->add_option("--input", train_args.input, "Labeled CSV");
  train_cmd->add_flag("--synthetic", train_args.synthetic,
                      "Train on synthetic data");
  train_cmd->add_option("--model", train_args.model, "lr | knn | gnb")
      ->required();
  train_cmd->add_option("--output", train_args.output, "Model JSON path")
      ->required();
  train_cmd->add_option("--tau", train_args.tau, "Proximity threshold, m");
  train_cmd->add_option("--seed", train_args.seed, "Split / synthesis seed");
  train_cmd->add_option("--split", train_args.split, "Train fraction");
  train_cmd->add_flag("--full", train_args.full, "Train on every row");
  train_cmd->add_option("--k", train_args.k, "k for k-NN");
  train_cmd->add_option("--learning-rate", train_args.learning_rate,
                        "LR step size");
  train_cmd->add_option("--epochs", train_args.epochs, "LR epochs");
  train_cmd->add_option("--l2", train_args.l2, "LR L2 strength");
  train_cmd->add_option("--n", train_args.n, "Synthetic rows");
  train_args.schema.attach(train_cmd);
  train_args.path_loss.attach(train_cmd);

  EvalArgs eval_args;
  auto* eval_cmd =
      app.add_subcommand("eval", "Run the evaluation pipeline");
  eval_cmd->add_flag("--synthetic", eval_args.synthetic,
                     "Evaluate on synthetic data");
  eval_cmd->add_option("--input", eval_args.input,
                       "Single CSV with wear settings");
  eval_cmd->add_option("--crosswise", eval_args.crosswise, "Crosswise CSV");
  eval_cmd->add_option("--direct", eval_args.direct, "Direct CSV");
  eval_cmd->add_option("--model", eval_args.model_file,
                       "Evaluate a saved model JSON instead of retraining");
  eval_cmd->add_option("--tau", eval_args.tau, "Proximity threshold, m");
  eval_cmd->add_option("--seed", eval_args.seed, "Split seed");
  eval_cmd->add_option("--split", eval_args.split, "Train fraction");
  eval_cmd->add_option("--k", eval_args.k, "k for k-NN");
  eval_cmd->add_option("--learning-rate", eval_args.learning_rate,
                       "LR step size");
  eval_cmd->add_option("--epochs", eval_args.epochs, "LR epochs");
  eval_cmd->add_option("--l2", eval_args.l2, "LR L2 strength");
  eval_cmd->add_option("--n", eval_args.n, "Synthetic rows per category");
  eval_cmd->add_option("--json", eval_args.json_out, "Write report JSON here");
  eval_cmd->add_option("--csv", eval_args.csv_out, "Write report CSV here");
  eval_args.schema.attach(eval_cmd);
  eval_args.path_loss.attach(eval_cmd);

  SweepArgs sweep_args;
  auto* sweep_cmd =
      app.add_subcommand("sweep", "Sweep thresholds and k over a dataset");
  sweep_cmd->add_flag("--synthetic", sweep_args.synthetic,
                      "Sweep synthetic data");
  sweep_cmd->add_option("--input", sweep_args.input, "Labeled CSV");
  sweep_cmd->add_option("--output", sweep_args.output, "Sweep CSV output")
      ->required();
  sweep_cmd->add_option("--taus", sweep_args.taus, "Comma-separated taus");
  sweep_cmd->add_option("--ks", sweep_args.ks, "Comma-separated ks");
  sweep_cmd->add_option("--tau", sweep_args.tau,
                        "Threshold for synthetic generation");
  sweep_cmd->add_option("--seed", sweep_args.seed, "Seed");
  sweep_cmd->add_option("--learning-rate", sweep_args.learning_rate,
                        "LR step size");
  sweep_cmd->add_option("--epochs", sweep_args.epochs, "LR epochs");
  sweep_cmd->add_option("--l2", sweep_args.l2, "LR L2 strength");
  sweep_cmd->add_option("--n", sweep_args.n, "Synthetic rows");
  sweep_args.schema.attach(sweep_cmd);
  sweep_args.path_loss.attach(sweep_cmd);

  std::string config_path;
  auto* serve_cmd = app.add_subcommand("serve", "Run the provider daemon");
  serve_cmd->add_option("--config", config_path, "Config JSON")->required();

  DemoArgs demo_args;
  auto* demo_cmd =
      app.add_subcommand("demo", "Scripted end-to-end protocol walkthrough");
  demo_cmd->add_option("--scenario", demo_args.scenario, "fig1a | fig1b");
  demo_cmd->add_option("--seed", demo_args.seed, "Seed");
  demo_cmd->add_option("--tau", demo_args.tau, "Proximity threshold, m");
  demo_cmd->add_option("--distance", demo_args.distance,
                       "Simulated separation, m");
  demo_cmd->add_option("--sigma", demo_args.sigma, "Shadowing sigma, dB");
  demo_cmd->add_option("--json", demo_args.json_out,
                       "Write the transcript JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*reg_cmd) return cmd_register(reg_args);
    if (*ingest_cmd) return cmd_ingest(ingest_args);
    if (*synth_cmd) return cmd_synth(synth_args);
    if (*train_cmd) return cmd_train(train_args);
    if (*eval_cmd) return cmd_eval(eval_args);
    if (*sweep_cmd) return cmd_sweep(sweep_args);
    if (*serve_cmd) return cmd_serve(config_path);
    if (*demo_cmd) return cmd_demo(demo_args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitData;
  }
  return kExitUsage;
}

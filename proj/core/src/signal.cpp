#include "proxgate/signal.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>

#include "proxgate/csv.hpp"
#include "proxgate/errors.hpp"

namespace proxgate::signal {

Category category(WearSetting setting) {
  switch (setting) {
    case WearSetting::LL:
    case WearSetting::RR:
      return Category::Crosswise;
    case WearSetting::RL:
    case WearSetting::LR:
      return Category::Direct;
  }
  return Category::Mixed;
}

std::string_view setting_name(WearSetting setting) {
  switch (setting) {
    case WearSetting::LL: return "LL";
    case WearSetting::RR: return "RR";
    case WearSetting::RL: return "RL";
    case WearSetting::LR: return "LR";
  }
  return "?";
}

std::optional<WearSetting> setting_from_name(std::string_view name) {
  std::string upper;
  for (char c : name) upper.push_back(static_cast<char>(std::toupper(c)));
  if (upper == "LL") return WearSetting::LL;
  if (upper == "RR") return WearSetting::RR;
  if (upper == "RL") return WearSetting::RL;
  if (upper == "LR") return WearSetting::LR;
  return std::nullopt;
}

std::string_view category_name(Category c) {
  switch (c) {
    case Category::Crosswise: return "Crosswise";
    case Category::Direct: return "Direct";
    case Category::Mixed: return "Mixed";
  }
  return "?";
}

std::string_view provenance_name(Provenance p) {
  return p == Provenance::File ? "file" : "synthetic";
}

void validate(const RssiSample& sample) {
  if (!std::isfinite(sample.rssi_dbm) || sample.rssi_dbm < kRssiMinDbm ||
      sample.rssi_dbm > kRssiMaxDbm) {
    raise(ErrorCode::InvalidData,
          "rssi " + format_double(sample.rssi_dbm) + " outside [" +
              format_double(kRssiMinDbm) + ", " + format_double(kRssiMaxDbm) +
              "] dBm");
  }
  if (sample.distance_m) {
    double d = *sample.distance_m;
    if (!std::isfinite(d) || d <= 0.0 || d > kMaxDistanceM) {
      raise(ErrorCode::InvalidData,
            "distance " + format_double(d) + " outside (0, " +
                format_double(kMaxDistanceM) + "] m");
    }
  }
  if (sample.measurer == sample.target) {
    raise(ErrorCode::InvalidData, "a device cannot measure itself");
  }
}

void PathLossParams::validate() const {
  if (!std::isfinite(rssi_at_1m_dbm) || !std::isfinite(path_loss_exponent_n) ||
      !std::isfinite(shadowing_sigma_db)) {
    raise(ErrorCode::InvalidConfig, "path-loss parameters must be finite");
  }
  if (path_loss_exponent_n <= 0.0) {
    raise(ErrorCode::InvalidConfig, "path-loss exponent must be positive");
  }
  if (shadowing_sigma_db < 0.0) {
    raise(ErrorCode::InvalidConfig, "shadowing sigma must be non-negative");
  }
}

void LabeledDataset::validate() const {
  if (features.rows == 0 || features.cols == 0) {
    raise(ErrorCode::InvalidData, "dataset must have at least one row");
  }
  if (labels.size() != features.rows) {
    raise(ErrorCode::InvalidData, "labels do not match feature rows");
  }
  if (!distances_m.empty() && distances_m.size() != features.rows) {
    raise(ErrorCode::InvalidData, "distances do not match feature rows");
  }
  for (double v : features.data) {
    if (!std::isfinite(v)) {
      raise(ErrorCode::InvalidData, "non-finite feature value");
    }
  }
}

double Rng::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal(double mean, double sigma) {
  // Box-Muller; u1 shifted into (0, 1] so the log is finite.
  double u1 = 1.0 - uniform01();
  double u2 = uniform01();
  double z = std::sqrt(-2.0 * std::log(u1)) *
             std::cos(2.0 * std::numbers::pi * u2);
  return mean + sigma * z;
}

std::size_t Rng::index(std::size_t n) { return engine_() % n; }

double path_loss_mean_dbm(double distance_m, const PathLossParams& params) {
  return params.rssi_at_1m_dbm -
         10.0 * params.path_loss_exponent_n * std::log10(distance_m);
}

double synth_rssi(double distance_m, const PathLossParams& params, Rng& rng) {
  params.validate();
  if (!std::isfinite(distance_m) || distance_m <= 0.0) {
    raise(ErrorCode::InvalidDistance,
          "distance must be positive, got " + format_double(distance_m));
  }
  double value = path_loss_mean_dbm(distance_m, params) +
                 rng.normal(0.0, params.shadowing_sigma_db);
  return std::clamp(value, kRssiMinDbm, kRssiMaxDbm);
}

std::vector<double> default_distance_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 10; ++i) grid.push_back(0.5 * i);
  return grid;
}

LabeledDataset synth_dataset(std::size_t n, std::span<const double> distances,
                             double threshold_m, const PathLossParams& params) {
  params.validate();
  if (n == 0) {
    raise(ErrorCode::InvalidConfig, "dataset size must be at least 1");
  }
  if (distances.empty()) {
    raise(ErrorCode::InvalidConfig, "distance grid is empty");
  }
  for (double d : distances) {
    if (!std::isfinite(d) || d <= 0.0) {
      raise(ErrorCode::InvalidConfig,
            "distance grid entries must be positive");
    }
  }
  if (!std::isfinite(threshold_m) || threshold_m <= 0.0) {
    raise(ErrorCode::InvalidConfig, "proximity threshold must be positive");
  }

  Rng rng(params.rng_seed);
  LabeledDataset ds;
  ds.features = Matrix(n, 2);
  ds.labels.resize(n);
  ds.distances_m.resize(n);
  ds.proximity_threshold_m = threshold_m;
  ds.category = Category::Mixed;
  ds.provenance = Provenance::Synthetic;

  for (std::size_t i = 0; i < n; ++i) {
    double d = distances[rng.index(distances.size())];
    ds.features.at(i, 0) = synth_rssi(d, params, rng);
    ds.features.at(i, 1) = synth_rssi(d, params, rng);
    ds.labels[i] = d <= threshold_m ? 1 : 0;
    ds.distances_m[i] = d;
  }
  return ds;
}

namespace {

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

std::array<double, 2> featurize(std::span<const RssiSample> session_samples,
                                const registry::DeviceSignature& a,
                                const registry::DeviceSignature& b) {
  std::vector<double> ab, ba;
  for (const auto& s : session_samples) {
    if (s.measurer == a && s.target == b) {
      ab.push_back(s.rssi_dbm);
    } else if (s.measurer == b && s.target == a) {
      ba.push_back(s.rssi_dbm);
    } else {
      raise(ErrorCode::InvalidArgument,
            "sample endpoints do not match the session pair");
    }
  }
  if (ab.empty() || ba.empty()) {
    raise(ErrorCode::IncompleteSession,
          "need at least one reading in each direction");
  }
  return {median(std::move(ab)), median(std::move(ba))};
}

registry::DeviceSignature dataset_device_a() {
  registry::DeviceSignature sig;
  sig.bytes.fill(0x0a);
  return sig;
}

registry::DeviceSignature dataset_device_b() {
  registry::DeviceSignature sig;
  sig.bytes.fill(0x0b);
  return sig;
}

namespace {

std::optional<double> parse_double(std::string_view text) {
  auto t = trim(text);
  if (t.empty()) return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || ptr != t.data() + t.size()) return std::nullopt;
  return value;
}

// Case-insensitive header lookup; returns npos when absent.
std::size_t find_column(const std::vector<std::string>& header,
                        std::string_view name) {
  auto lower = [](std::string_view s) {
    std::string out;
    for (char c : s) out.push_back(static_cast<char>(std::tolower(c)));
    return out;
  };
  std::string want = lower(trim(name));
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (lower(trim(header[i])) == want) return i;
  }
  return static_cast<std::size_t>(-1);
}

}  // namespace

IngestResult load_dataset(const std::filesystem::path& path,
                          const ColumnSchema& schema) {
  const auto table = csv::read_file(path);

  auto require = [&](const std::string& name) {
    if (trim(name).empty()) {
      raise(ErrorCode::SchemaError, "schema leaves a required column unmapped");
    }
    std::size_t idx = find_column(table.header, name);
    if (idx == static_cast<std::size_t>(-1)) {
      raise(ErrorCode::SchemaError,
            "column '" + name + "' not found in " + path.string());
    }
    return idx;
  };
  auto optional_col = [&](const std::string& name) -> std::optional<std::size_t> {
    if (trim(name).empty()) return std::nullopt;
    std::size_t idx = find_column(table.header, name);
    if (idx == static_cast<std::size_t>(-1)) {
      raise(ErrorCode::SchemaError,
            "column '" + name + "' not found in " + path.string());
    }
    return idx;
  };

  const std::size_t setting_col = require(schema.setting);
  const std::size_t distance_col = require(schema.distance);
  const std::size_t rssi_a_col = require(schema.rssi_a);
  const auto rssi_b_col = optional_col(schema.rssi_b);
  const auto timestamp_col = optional_col(schema.timestamp);

  IngestResult result;
  result.paired = rssi_b_col.has_value();
  const auto dev_a = dataset_device_a();
  const auto dev_b = dataset_device_b();

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t row_no = r + 2;  // 1-based, after the header
    auto reject = [&](const std::string& why) {
      result.rejected.emplace_back(row_no, why);
    };

    std::size_t needed = std::max({setting_col, distance_col, rssi_a_col,
                                   rssi_b_col.value_or(0),
                                   timestamp_col.value_or(0)});
    if (row.size() <= needed) {
      reject("too few fields");
      continue;
    }

    std::optional<WearSetting> setting;
    auto setting_text = trim(row[setting_col]);
    if (!setting_text.empty()) {
      setting = setting_from_name(setting_text);
      if (!setting) {
        reject("unknown setting '" + std::string(setting_text) + "'");
        continue;
      }
    }

    std::optional<double> distance = parse_double(row[distance_col]);
    if (!trim(row[distance_col]).empty() && !distance) {
      reject("unparseable distance");
      continue;
    }
    if (distance && (*distance <= 0.0 || *distance > kMaxDistanceM)) {
      reject("distance out of range");
      continue;
    }

    UtcMillis ts = static_cast<UtcMillis>(r) * kMillisPerSecond;
    if (timestamp_col) {
      auto seconds = parse_double(row[*timestamp_col]);
      if (!seconds) {
        reject("unparseable timestamp");
        continue;
      }
      ts = static_cast<UtcMillis>(*seconds * kMillisPerSecond);
    }

    auto rssi_a = parse_double(row[rssi_a_col]);
    if (!rssi_a || *rssi_a < kRssiMinDbm || *rssi_a > kRssiMaxDbm) {
      reject("rssi_a out of range");
      continue;
    }

    std::optional<double> rssi_b;
    if (rssi_b_col) {
      rssi_b = parse_double(row[*rssi_b_col]);
      if (!rssi_b || *rssi_b < kRssiMinDbm || *rssi_b > kRssiMaxDbm) {
        reject("rssi_b out of range");
        continue;
      }
    }

    RssiSample forward{dev_a, dev_b, *rssi_a, ts, distance, setting};
    result.samples.push_back(forward);
    if (rssi_b) {
      RssiSample reverse{dev_b, dev_a, *rssi_b, ts, distance, setting};
      result.samples.push_back(reverse);
    }

    result.rows_total += 1;
    if (setting) result.rows_per_setting[*setting] += 1;
  }

  const std::size_t parsed = result.rows_total + result.rejected.size();
  if (result.rows_total == 0 ||
      result.rejected.size() * 100 > parsed) {  // > 1% malformed
    std::string detail = result.rejected.empty()
                             ? "no valid rows"
                             : "row " + std::to_string(result.rejected[0].first) +
                                   ": " + result.rejected[0].second;
    raise(ErrorCode::FormatError,
          path.string() + ": " + std::to_string(result.rejected.size()) +
              " malformed rows of " + std::to_string(parsed) + " (" + detail +
              ")");
  }
  return result;
}

std::pair<std::vector<RssiSample>, std::vector<RssiSample>> combine_settings(
    std::span<const RssiSample> samples) {
  std::vector<RssiSample> crosswise, direct;
  for (const auto& s : samples) {
    if (!s.setting) {
      raise(ErrorCode::MissingSetting,
            "sample without a wear setting cannot be categorized");
    }
    if (category(*s.setting) == Category::Crosswise) {
      crosswise.push_back(s);
    } else {
      direct.push_back(s);
    }
  }
  return {std::move(crosswise), std::move(direct)};
}

namespace {

bool mirrored(const RssiSample& a, const RssiSample& b) {
  return a.measurer == b.target && a.target == b.measurer &&
         a.timestamp_ms == b.timestamp_ms && a.distance_m == b.distance_m &&
         a.setting == b.setting;
}

}  // namespace

LabeledDataset make_labeled(std::span<const RssiSample> samples,
                            double threshold_m, Category category,
                            Provenance provenance) {
  if (samples.empty()) {
    raise(ErrorCode::InvalidData, "no samples to label");
  }
  if (!std::isfinite(threshold_m) || threshold_m <= 0.0) {
    raise(ErrorCode::InvalidConfig, "proximity threshold must be positive");
  }

  // Decide the feature layout: every sample paired with its mirror (two
  // readings per row) or none of them (one reading per row).
  std::vector<std::array<double, 2>> pairs;
  std::vector<double> singles;
  std::vector<double> distances;

  std::size_t i = 0;
  while (i < samples.size()) {
    if (!samples[i].distance_m) {
      raise(ErrorCode::InvalidData,
            "labeling requires ground-truth distances on every sample");
    }
    if (i + 1 < samples.size() && mirrored(samples[i], samples[i + 1])) {
      pairs.push_back({samples[i].rssi_dbm, samples[i + 1].rssi_dbm});
      distances.push_back(*samples[i].distance_m);
      i += 2;
    } else {
      singles.push_back(samples[i].rssi_dbm);
      distances.push_back(*samples[i].distance_m);
      i += 1;
    }
  }
  if (!pairs.empty() && !singles.empty()) {
    raise(ErrorCode::InvalidData,
          "input mixes paired and unpaired samples; cannot build one "
          "feature matrix");
  }

  LabeledDataset ds;
  ds.proximity_threshold_m = threshold_m;
  ds.category = category;
  ds.provenance = provenance;
  ds.distances_m = distances;

  if (!pairs.empty()) {
    ds.features = Matrix(pairs.size(), 2);
    for (std::size_t r = 0; r < pairs.size(); ++r) {
      ds.features.at(r, 0) = pairs[r][0];
      ds.features.at(r, 1) = pairs[r][1];
    }
  } else {
    ds.features = Matrix(singles.size(), 1);
    for (std::size_t r = 0; r < singles.size(); ++r) {
      ds.features.at(r, 0) = singles[r];
    }
  }

  ds.labels.resize(distances.size());
  for (std::size_t r = 0; r < distances.size(); ++r) {
    ds.labels[r] = distances[r] <= threshold_m ? 1 : 0;
  }
  ds.validate();
  return ds;
}

void write_dataset_csv(const std::filesystem::path& path,
                       std::span<const RssiSample> samples) {
  csv::Table table;
  table.header = {"setting", "distance_m", "rssi_a_dbm", "rssi_b_dbm",
                  "timestamp_unix"};

  std::size_t i = 0;
  while (i < samples.size()) {
    const auto& s = samples[i];
    std::string rssi_b;
    if (i + 1 < samples.size() && mirrored(s, samples[i + 1])) {
      rssi_b = format_double(samples[i + 1].rssi_dbm);
      i += 2;
    } else {
      i += 1;
    }
    table.rows.push_back(
        {s.setting ? std::string(setting_name(*s.setting)) : "",
         s.distance_m ? format_double(*s.distance_m) : "",
         format_double(s.rssi_dbm), rssi_b,
         format_double(static_cast<double>(s.timestamp_ms) /
                       kMillisPerSecond)});
  }
  csv::write_file(path, table);
}

std::vector<RssiSample> dataset_to_samples(const LabeledDataset& dataset) {
  dataset.validate();
  if (dataset.features.cols != 2) {
    raise(ErrorCode::InvalidData,
          "expected two feature columns (one reading per direction)");
  }
  if (dataset.distances_m.empty()) {
    raise(ErrorCode::InvalidData, "dataset carries no ground-truth distances");
  }

  std::vector<RssiSample> samples;
  samples.reserve(dataset.size() * 2);
  const auto dev_a = dataset_device_a();
  const auto dev_b = dataset_device_b();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    UtcMillis ts = static_cast<UtcMillis>(i) * kMillisPerSecond;
    samples.push_back(RssiSample{dev_a, dev_b, dataset.features.at(i, 0), ts,
                                 dataset.distances_m[i], std::nullopt});
    samples.push_back(RssiSample{dev_b, dev_a, dataset.features.at(i, 1), ts,
                                 dataset.distances_m[i], std::nullopt});
  }
  return samples;
}

}  // namespace proxgate::signal

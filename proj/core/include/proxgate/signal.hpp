#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "proxgate/common.hpp"
#include "proxgate/registry.hpp"

namespace proxgate::signal {

/// Which wrist each participant wore the watch on, measurer-to-target.
enum class WearSetting { LL, RR, RL, LR };

enum class Category { Crosswise, Direct, Mixed };

/// Same-hand pairs face crosswise, opposite-hand pairs face each other.
Category category(WearSetting setting);

std::string_view setting_name(WearSetting setting);
std::optional<WearSetting> setting_from_name(std::string_view name);
std::string_view category_name(Category c);

/// Valid RSSI range for BLE hardware, dBm.
constexpr double kRssiMinDbm = -110.0;
constexpr double kRssiMaxDbm = 0.0;
constexpr double kMaxDistanceM = 100.0;

/// One RSSI reading of `target`'s advertisements taken by `measurer`.
/// Ground-truth distance and wear setting are present in dataset and
/// synthetic samples, absent in live protocol reports.
struct RssiSample {
  registry::DeviceSignature measurer;
  registry::DeviceSignature target;
  double rssi_dbm = 0.0;
  UtcMillis timestamp_ms = 0;
  std::optional<double> distance_m;
  std::optional<WearSetting> setting;
};

/// Throws InvalidData when a sample is out of physical range or measures
/// itself.
void validate(const RssiSample& sample);

/// Log-distance path-loss model parameters with Gaussian shadowing.
struct PathLossParams {
  double rssi_at_1m_dbm = -59.0;
  double path_loss_exponent_n = 2.0;
  double shadowing_sigma_db = 3.0;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

enum class Provenance { File, Synthetic };
std::string_view provenance_name(Provenance p);

/// Feature matrix plus proximity labels. `distances_m` is kept when ground
/// truth is available so thresholds can be re-applied later; it is either
/// empty or has one entry per row.
struct LabeledDataset {
  Matrix features;
  std::vector<std::uint8_t> labels;  // 1 = proximate
  double proximity_threshold_m = 0.0;
  Category category = Category::Mixed;
  Provenance provenance = Provenance::Synthetic;
  std::vector<double> distances_m;

  std::size_t size() const { return features.rows; }
  void validate() const;
};

/// Deterministic generator: mt19937_64 plus a Box-Muller transform so the
/// byte stream does not depend on the standard library's distribution
/// implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform01();                  // [0, 1)
  double normal(double mean, double sigma);
  std::size_t index(std::size_t n);    // [0, n)

 private:
  std::mt19937_64 engine_;
};

/// Expected RSSI at `distance_m` under the log-distance model, before
/// shadowing and clamping.
double path_loss_mean_dbm(double distance_m, const PathLossParams& params);

/// One simulated reading: mean path loss plus Gaussian shadowing, clamped
/// to the physical RSSI range. Throws InvalidDistance for distance <= 0.
double synth_rssi(double distance_m, const PathLossParams& params, Rng& rng);

/// The 0.5 m .. 5.0 m half-metre grid.
std::vector<double> default_distance_grid();

/// Synthetic dataset: distances drawn uniformly from the grid, two
/// independent readings per row (one per direction), labels from the
/// threshold. Deterministic for a fixed params.rng_seed.
LabeledDataset synth_dataset(std::size_t n, std::span<const double> distances,
                             double threshold_m, const PathLossParams& params);

/// Direction-wise medians over a session window: [median(a measures b),
/// median(b measures a)]. Throws IncompleteSession when a direction has no
/// readings, InvalidArgument for samples not between a and b.
std::array<double, 2> featurize(std::span<const RssiSample> session_samples,
                                const registry::DeviceSignature& a,
                                const registry::DeviceSignature& b);

/// Column-name mapping from a foreign CSV header onto the canonical
/// schema. `rssi_b` and `timestamp` may be empty when the file has a
/// single RSSI column or no timestamps.
struct ColumnSchema {
  std::string setting = "setting";
  std::string distance = "distance_m";
  std::string rssi_a = "rssi_a_dbm";
  std::string rssi_b = "rssi_b_dbm";
  std::string timestamp = "timestamp_unix";
};

/// Placeholder endpoints for dataset rows, where no real registration
/// exists: byte patterns 0x0a.. and 0x0b...
registry::DeviceSignature dataset_device_a();
registry::DeviceSignature dataset_device_b();

struct IngestResult {
  std::vector<RssiSample> samples;
  std::size_t rows_total = 0;                       // accepted data rows
  std::map<WearSetting, std::size_t> rows_per_setting;
  std::vector<std::pair<std::size_t, std::string>> rejected;  // (row no, why)
  bool paired = false;  // two samples per row
};

/// Loads a CSV dataset through the schema adapter. Each row yields a
/// mirrored sample pair when two RSSI columns are mapped, otherwise a
/// single sample. Malformed rows are collected with their row numbers;
/// more than 1% of them fails the whole load.
IngestResult load_dataset(const std::filesystem::path& path,
                          const ColumnSchema& schema = {});

/// Partition into (crosswise, direct) by wear-setting category. Samples
/// are preserved verbatim; a sample without a setting is an error.
std::pair<std::vector<RssiSample>, std::vector<RssiSample>> combine_settings(
    std::span<const RssiSample> samples);

/// Builds a labeled dataset from distance-annotated samples. Consecutive
/// mirrored pairs become one two-feature row; otherwise each sample is a
/// one-feature row. Mixing the two layouts in one input is an error.
LabeledDataset make_labeled(std::span<const RssiSample> samples,
                            double threshold_m, Category category,
                            Provenance provenance);

/// Writes samples in the canonical CSV schema
/// (setting,distance_m,rssi_a_dbm,rssi_b_dbm,timestamp_unix). Mirrored
/// pairs collapse back into one row.
void write_dataset_csv(const std::filesystem::path& path,
                       std::span<const RssiSample> samples);

/// Expands a synthetic dataset into mirrored sample pairs (row i gets
/// timestamp i seconds) so it can round-trip through the CSV schema.
std::vector<RssiSample> dataset_to_samples(const LabeledDataset& dataset);

}  // namespace proxgate::signal

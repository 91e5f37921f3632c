#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "proxgate/errors.hpp"
#include "proxgate/signal.hpp"
#include "test_util.hpp"

using namespace proxgate;
using namespace proxgate::signal;

namespace {

RssiSample sample(WearSetting setting, double rssi, double distance) {
  RssiSample s;
  s.measurer = dataset_device_a();
  s.target = dataset_device_b();
  s.rssi_dbm = rssi;
  s.distance_m = distance;
  s.setting = setting;
  return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("wear settings map to their categories") {
  CHECK(category(WearSetting::LL) == Category::Crosswise);
  CHECK(category(WearSetting::RR) == Category::Crosswise);
  CHECK(category(WearSetting::RL) == Category::Direct);
  CHECK(category(WearSetting::LR) == Category::Direct);
  CHECK(setting_from_name("lr") == WearSetting::LR);
  CHECK_FALSE(setting_from_name("XX").has_value());
}

TEST_CASE("sample validation enforces physical ranges") {
  CHECK_NOTHROW(validate(sample(WearSetting::LL, -60.0, 1.0)));
  CHECK_THROWS_AS(validate(sample(WearSetting::LL, 5.0, 1.0)), Error);
  CHECK_THROWS_AS(validate(sample(WearSetting::LL, -160.0, 1.0)), Error);
  CHECK_THROWS_AS(validate(sample(WearSetting::LL, -60.0, 0.0)), Error);
  CHECK_THROWS_AS(validate(sample(WearSetting::LL, -60.0, 250.0)), Error);

  RssiSample self = sample(WearSetting::LL, -60.0, 1.0);
  self.target = self.measurer;
  CHECK_THROWS_AS(validate(self), Error);
}

TEST_CASE("path loss at reference points") {
  PathLossParams params;
  params.shadowing_sigma_db = 0.0;
  Rng rng(1);

  CHECK(synth_rssi(1.0, params, rng) == doctest::Approx(-59.0).epsilon(1e-12));
  CHECK(synth_rssi(10.0, params, rng) == doctest::Approx(-79.0).epsilon(1e-12));

  CHECK_THROWS_AS(synth_rssi(0.0, params, rng), Error);
  CHECK_THROWS_AS(synth_rssi(-1.0, params, rng), Error);

  PathLossParams bad;
  bad.path_loss_exponent_n = 0.0;
  CHECK_THROWS_AS(synth_rssi(1.0, bad, rng), Error);
}

TEST_CASE("shadowing statistics match the model") {
  // Monte-Carlo against the closed form: mean -59 - 20*log10(2) = -65.0206,
  // sigma 3.
  PathLossParams params;
  params.rng_seed = 777;
  Rng rng(params.rng_seed);

  const int n = 10000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double v = synth_rssi(2.0, params, rng);
    sum += v;
    sum_sq += v * v;
  }
  double mean = sum / n;
  double stddev = std::sqrt(sum_sq / n - mean * mean);
  CHECK(mean == doctest::Approx(-65.0206).epsilon(0).scale(0));
  CHECK(std::abs(mean - (-65.0206)) < 0.1);
  CHECK(std::abs(stddev - 3.0) < 0.15);
}

TEST_CASE("noiseless path loss is strictly monotone in distance") {
  PathLossParams params;
  params.shadowing_sigma_db = 0.0;
  Rng rng(5);
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> dist(0.1, 50.0);
  for (int i = 0; i < 200; ++i) {
    double d1 = dist(gen), d2 = dist(gen);
    if (d1 == d2) continue;
    if (d1 > d2) std::swap(d1, d2);
    CHECK(synth_rssi(d1, params, rng) > synth_rssi(d2, params, rng));
  }
}

TEST_CASE("synthetic dataset labeling and determinism") {
  auto grid = default_distance_grid();
  REQUIRE(grid.size() == 10);

  PathLossParams params;
  params.shadowing_sigma_db = 0.0;
  params.rng_seed = 3;
  auto ds = synth_dataset(10, grid, 2.0, params);
  REQUIRE(ds.size() == 10);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(ds.labels[i] == (ds.distances_m[i] <= 2.0 ? 1 : 0));
  }

  PathLossParams noisy;
  noisy.rng_seed = 12345;
  auto a = synth_dataset(500, grid, 2.0, noisy);
  auto b = synth_dataset(500, grid, 2.0, noisy);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  CHECK(a.distances_m == b.distances_m);

  CHECK_THROWS_AS(synth_dataset(0, grid, 2.0, noisy), Error);
  CHECK_THROWS_AS(synth_dataset(10, std::span<const double>{}, 2.0, noisy),
                  Error);
}

TEST_CASE("synthetic class balance tracks the grid proportion") {
  // 4 of the 10 default grid points sit at or below 2 m, so labels should
  // run close to 40% positive.
  PathLossParams params;
  params.rng_seed = 2024;
  auto ds = synth_dataset(10000, default_distance_grid(), 2.0, params);
  double positives = 0;
  for (auto y : ds.labels) positives += y;
  CHECK(positives / 10000.0 == doctest::Approx(0.4).epsilon(0.05));
  CHECK(std::abs(positives / 10000.0 - 0.4) < 0.02);
}

TEST_CASE("featurize takes direction-wise medians") {
  auto a = dataset_device_a();
  auto b = dataset_device_b();
  auto make = [&](bool forward, double rssi) {
    RssiSample s;
    s.measurer = forward ? a : b;
    s.target = forward ? b : a;
    s.rssi_dbm = rssi;
    return s;
  };

  std::vector<RssiSample> one{make(true, -60), make(false, -62)};
  auto f1 = featurize(one, a, b);
  CHECK(f1[0] == -60);
  CHECK(f1[1] == -62);

  // the -90 outlier is damped by the median
  std::vector<RssiSample> outlier{make(true, -60), make(true, -58),
                                  make(true, -90), make(false, -62)};
  auto f2 = featurize(outlier, a, b);
  CHECK(f2[0] == -60);
  CHECK(f2[1] == -62);

  std::vector<RssiSample> oneway{make(true, -60)};
  try {
    featurize(oneway, a, b);
    FAIL("expected IncompleteSession");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IncompleteSession);
  }
}

TEST_CASE("combine_settings partitions by category") {
  std::vector<RssiSample> lls;
  for (int i = 0; i < 5; ++i) lls.push_back(sample(WearSetting::LL, -60, 1));
  auto [cross, direct] = combine_settings(lls);
  CHECK(cross.size() == 5);
  CHECK(direct.empty());

  RssiSample missing = sample(WearSetting::LL, -60, 1);
  missing.setting.reset();
  std::vector<RssiSample> with_missing{missing};
  try {
    combine_settings(with_missing);
    FAIL("expected MissingSetting");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingSetting);
  }
}

TEST_CASE("combine_settings agrees with a per-sample oracle") {
  std::mt19937_64 rng(4242);
  std::vector<RssiSample> samples;
  for (int i = 0; i < 1000; ++i) {
    auto setting = static_cast<WearSetting>(rng() % 4);
    samples.push_back(sample(setting, -40.0 - double(rng() % 60), 1.0 + i % 5));
  }
  auto [cross, direct] = combine_settings(samples);
  CHECK(cross.size() + direct.size() == samples.size());

  std::size_t expect_cross = 0;
  for (const auto& s : samples) {
    if (*s.setting == WearSetting::LL || *s.setting == WearSetting::RR) {
      expect_cross += 1;
    }
  }
  CHECK(cross.size() == expect_cross);
  for (const auto& s : cross) {
    CHECK((*s.setting == WearSetting::LL || *s.setting == WearSetting::RR));
  }
  for (const auto& s : direct) {
    CHECK((*s.setting == WearSetting::RL || *s.setting == WearSetting::LR));
  }
}

TEST_CASE("csv ingestion parses the canonical schema") {
  testutil::TempDir tmp;
  auto path = tmp.file("rows.csv");
  write_text(path,
             "setting,distance_m,rssi_a_dbm,rssi_b_dbm,timestamp_unix\n"
             "RL,1.0,-58.4,-61.2,1650000000\n");

  auto result = load_dataset(path);
  CHECK(result.paired);
  CHECK(result.rows_total == 1);
  REQUIRE(result.samples.size() == 2);
  CHECK(result.samples[0].setting == WearSetting::RL);
  CHECK(result.samples[0].distance_m == 1.0);
  CHECK(result.samples[0].rssi_dbm == -58.4);
  CHECK(result.samples[0].timestamp_ms == 1650000000000LL);
  CHECK(result.samples[1].rssi_dbm == -61.2);
  CHECK(result.samples[1].measurer == dataset_device_b());
  CHECK(result.rows_per_setting.at(WearSetting::RL) == 1);
}

TEST_CASE("csv ingestion error paths") {
  testutil::TempDir tmp;

  try {
    load_dataset(tmp.file("missing.csv"));
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoError);
  }

  auto empty = tmp.file("empty.csv");
  write_text(empty, "");
  try {
    load_dataset(empty);
    FAIL("expected FormatError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FormatError);
  }

  auto header_only = tmp.file("header.csv");
  write_text(header_only, "setting,distance_m,rssi_a_dbm,rssi_b_dbm\n");
  CHECK_THROWS_AS(load_dataset(header_only), Error);

  auto missing_col = tmp.file("badcol.csv");
  write_text(missing_col, "setting,rssi_a_dbm\nRL,-60\n");
  try {
    load_dataset(missing_col);
    FAIL("expected SchemaError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SchemaError);
  }
}

TEST_CASE("malformed-row budget is one percent") {
  testutil::TempDir tmp;

  // 1 bad row in 200: under budget, recorded but tolerated
  std::string ok = "setting,distance_m,rssi_a_dbm,rssi_b_dbm,timestamp_unix\n";
  for (int i = 0; i < 199; ++i) ok += "LL,1.0,-60,-61," + std::to_string(i) + "\n";
  ok += "LL,not_a_number,-60,-61,5\n";
  auto tolerant = tmp.file("tolerant.csv");
  write_text(tolerant, ok);
  auto result = load_dataset(tolerant);
  CHECK(result.rows_total == 199);
  REQUIRE(result.rejected.size() == 1);
  CHECK(result.rejected[0].first == 201);  // 1-based, counting the header

  // 3 bad rows in 100: loud failure
  std::string bad = "setting,distance_m,rssi_a_dbm,rssi_b_dbm,timestamp_unix\n";
  for (int i = 0; i < 97; ++i) bad += "LL,1.0,-60,-61," + std::to_string(i) + "\n";
  bad += "LL,x,-60,-61,1\nLL,1.0,nope,-61,2\nXX,1.0,-60,-61,3\n";
  auto strict = tmp.file("strict.csv");
  write_text(strict, bad);
  try {
    load_dataset(strict);
    FAIL("expected FormatError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FormatError);
  }
}

TEST_CASE("single-rssi-column files yield one sample per row") {
  testutil::TempDir tmp;
  auto path = tmp.file("single.csv");
  write_text(path,
             "setting,distance_m,rssi\n"
             "RR,0.5,-52\n"
             "LR,3.0,-70\n");
  ColumnSchema schema;
  schema.rssi_a = "rssi";
  schema.rssi_b = "";
  schema.timestamp = "";
  auto result = load_dataset(path, schema);
  CHECK_FALSE(result.paired);
  CHECK(result.samples.size() == 2);
  CHECK(result.rows_total == 2);
  CHECK(result.rows_per_setting.at(WearSetting::RR) == 1);

  auto ds = make_labeled(result.samples, 2.0, Category::Mixed,
                         Provenance::File);
  CHECK(ds.features.cols == 1);
  CHECK(ds.labels == std::vector<std::uint8_t>{1, 0});
}

TEST_CASE("labeled datasets follow the threshold rule") {
  std::vector<RssiSample> samples;
  auto a = dataset_device_a(), b = dataset_device_b();
  for (int i = 0; i < 6; ++i) {
    double d = 0.5 + i;
    RssiSample fwd{a, b, -55.0 - i, static_cast<UtcMillis>(i) * 1000, d,
                   std::nullopt};
    RssiSample rev{b, a, -56.0 - i, static_cast<UtcMillis>(i) * 1000, d,
                   std::nullopt};
    samples.push_back(fwd);
    samples.push_back(rev);
  }
  auto ds = make_labeled(samples, 2.0, Category::Mixed, Provenance::File);
  CHECK(ds.features.cols == 2);
  CHECK(ds.size() == 6);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK((ds.labels[i] == 1) == (ds.distances_m[i] <= 2.0));
  }

  // mixing paired and unpaired rows is rejected
  samples.push_back(samples.front());
  CHECK_THROWS_AS(
      make_labeled(samples, 2.0, Category::Mixed, Provenance::File), Error);
}

TEST_CASE("synthetic datasets round-trip through the canonical csv") {
  testutil::TempDir tmp;
  PathLossParams params;
  params.rng_seed = 9;
  auto ds = synth_dataset(50, default_distance_grid(), 2.0, params);

  auto samples = dataset_to_samples(ds);
  auto path = tmp.file("synth.csv");
  write_dataset_csv(path, samples);

  auto loaded = load_dataset(path);
  CHECK(loaded.paired);
  CHECK(loaded.rows_total == 50);
  auto ds2 = make_labeled(loaded.samples, 2.0, Category::Mixed,
                          Provenance::Synthetic);
  CHECK(ds2.features == ds.features);
  CHECK(ds2.labels == ds.labels);
  CHECK(ds2.distances_m == ds.distances_m);
}

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "proxgate/errors.hpp"
#include "proxgate/ml.hpp"
#include "proxgate/signal.hpp"

using namespace proxgate;
using namespace proxgate::ml;
using signal::LabeledDataset;

namespace {

LabeledDataset dataset(const std::vector<std::vector<double>>& rows,
                       const std::vector<int>& labels) {
  LabeledDataset ds;
  ds.features = Matrix(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      ds.features.at(i, j) = rows[i][j];
    }
  }
  ds.labels.assign(labels.begin(), labels.end());
  ds.proximity_threshold_m = 2.0;
  return ds;
}

LabeledDataset random_dataset(std::mt19937_64& rng, std::size_t n,
                              std::size_t d) {
  LabeledDataset ds;
  ds.features = Matrix(n, d);
  ds.labels.resize(n);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    bool positive = i % 2 == 0;
    ds.labels[i] = positive ? 1 : 0;
    for (std::size_t j = 0; j < d; ++j) {
      ds.features.at(i, j) = (positive ? 1.5 : -1.5) + noise(rng);
    }
  }
  ds.proximity_threshold_m = 2.0;
  return ds;
}

TrainedModel untrained_lr(std::size_t d) {
  LrModel m;
  m.weights.assign(d, 0.0);
  m.bias = 0.0;
  m.standardizer.mean.assign(d, 0.0);
  m.standardizer.stddev.assign(d, 1.0);
  return TrainedModel{std::move(m), {}};
}

}  // namespace

TEST_CASE("untrained logistic model scores one half and denies") {
  auto model = untrained_lr(2);
  auto p = predict(model, std::vector<double>{-60.0, -70.0});
  CHECK(p.score == 0.5);
  CHECK(p.label == false);  // ties resolve to not-proximate
}

TEST_CASE("logistic regression separates a signed 1-D problem") {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 100; ++i) {
    rows.push_back({-1.0});
    labels.push_back(0);
    rows.push_back({1.0});
    labels.push_back(1);
  }
  auto model = train_logistic(dataset(rows, labels));
  const auto& lr = std::get<LrModel>(model.impl);
  CHECK(lr.weights[0] > 0.0);

  int correct = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (predict(model, rows[i]).label == (labels[i] == 1)) correct += 1;
  }
  CHECK(correct == 200);
}

TEST_CASE("logistic gradient matches central finite differences") {
  std::mt19937_64 rng(31337);
  auto ds = random_dataset(rng, 50, 3);
  const Matrix& x = ds.features;
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double l2 = 1e-4;
  const double h = 1e-5;

  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> w{unit(rng), unit(rng), unit(rng)};
    double bias = unit(rng);

    std::vector<double> grad(3, 0.0);
    double grad_bias = detail::lr_gradient(w, bias, x, ds.labels, l2, grad);

    for (std::size_t j = 0; j <= 3; ++j) {
      auto wp = w, wm = w;
      double bp = bias, bm = bias;
      double analytic;
      if (j < 3) {
        wp[j] += h;
        wm[j] -= h;
        analytic = grad[j];
      } else {
        bp += h;
        bm -= h;
        analytic = grad_bias;
      }
      double fd = (detail::lr_loss(wp, bp, x, ds.labels, l2) -
                   detail::lr_loss(wm, bm, x, ds.labels, l2)) /
                  (2.0 * h);
      double rel = std::abs(analytic - fd) / std::max(std::abs(fd), 1e-6);
      CHECK(rel < 1e-5);
    }
  }
}

TEST_CASE("logistic training loss never increases") {
  std::mt19937_64 rng(7);
  auto ds = random_dataset(rng, 120, 2);
  std::vector<double> history;
  train_logistic(ds, {}, &history);
  REQUIRE(history.size() == 501);
  for (std::size_t i = 1; i < history.size(); ++i) {
    CHECK(history[i] <= history[i - 1] + 1e-9);
  }
}

TEST_CASE("logistic rejects degenerate input") {
  CHECK_THROWS_AS(train_logistic(dataset({{1.0}, {2.0}}, {1, 1})), Error);
  try {
    train_logistic(dataset({{1.0}, {2.0}, {3.0}}, {0, 0, 0}));
    FAIL("expected DegenerateLabels");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateLabels);
  }
}

TEST_CASE("knn nails its own training points and majority votes") {
  auto self = train_knn(dataset({{-50.0}, {-80.0}}, {1, 0}), 1);
  auto p = predict(self, std::vector<double>{-50.0});
  CHECK(p.label == true);
  CHECK(p.score == 1.0);

  auto near = predict(self, std::vector<double>{-52.0});
  CHECK(near.label == true);

  auto vote = train_knn(dataset({{-1.0}, {1.0}, {2.0}}, {1, 1, 0}), 3);
  auto v = predict(vote, std::vector<double>{0.0});
  CHECK(v.label == true);
  CHECK(v.score == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("knn validates k") {
  auto ds = dataset({{0.0}, {1.0}, {2.0}, {3.0}}, {0, 0, 1, 1});
  try {
    train_knn(ds, 2);
    FAIL("expected InvalidK");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidK);
  }
  CHECK_THROWS_AS(train_knn(ds, 5), Error);
  CHECK_THROWS_AS(train_knn(ds, -1), Error);
  CHECK_NOTHROW(train_knn(ds, 3));
}

TEST_CASE("knn agrees with a linear-scan oracle") {
  std::mt19937_64 rng(555);
  auto ds = random_dataset(rng, 200, 2);
  auto model = train_knn(ds, 5);
  const auto& knn = std::get<KnnModel>(model.impl);

  std::uniform_real_distribution<double> span(-4.0, 4.0);
  for (int q = 0; q < 100; ++q) {
    std::vector<double> query{span(rng), span(rng)};
    auto got = predict(model, query);

    // oracle: standardize, sort every (distance, index) pair, take the top
    // k, majority vote
    auto x = knn.standardizer.apply(query);
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i = 0; i < knn.train_features.rows; ++i) {
      auto row = knn.train_features.row(i);
      double dist = std::hypot(row[0] - x[0], row[1] - x[1]);
      all.emplace_back(dist, i);
    }
    std::sort(all.begin(), all.end());
    int votes = 0;
    for (int i = 0; i < 5; ++i) votes += knn.train_labels[all[i].second];
    double oracle_score = votes / 5.0;

    CHECK(got.score == oracle_score);
    CHECK(got.label == (oracle_score > 0.5));
  }
}

TEST_CASE("gnb symmetry scores one half at the midpoint") {
  auto ds = dataset({{-1.1}, {-0.9}, {0.9}, {1.1}}, {0, 0, 1, 1});
  auto model = train_gnb(ds);
  auto p = predict(model, std::vector<double>{0.0});
  CHECK(p.score == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p.label == false);

  auto inside = predict(model, std::vector<double>{1.05});
  CHECK(inside.label == true);
}

TEST_CASE("gnb needs two samples per class") {
  try {
    train_gnb(dataset({{-1.0}, {1.0}, {1.1}}, {0, 1, 1}));
    FAIL("expected DegenerateLabels");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateLabels);
  }
}

TEST_CASE("gnb matches a direct bayes-rule oracle") {
  std::mt19937_64 rng(909);
  auto ds = random_dataset(rng, 150, 2);
  auto model = train_gnb(ds);
  const auto& gnb = std::get<GnbModel>(model.impl);

  auto density = [](double x, double mean, double var) {
    return std::exp(-(x - mean) * (x - mean) / (2.0 * var)) /
           std::sqrt(2.0 * std::numbers::pi * var);
  };

  std::uniform_real_distribution<double> span(-4.0, 4.0);
  for (int q = 0; q < 50; ++q) {
    std::vector<double> query{span(rng), span(rng)};
    auto got = predict(model, query);

    // plain products of densities, no log space
    std::array<double, 2> joint{std::exp(gnb.log_priors[0]),
                                std::exp(gnb.log_priors[1])};
    for (std::size_t c = 0; c < 2; ++c) {
      for (std::size_t j = 0; j < 2; ++j) {
        joint[c] *= density(query[j], gnb.means.at(c, j), gnb.variances.at(c, j));
      }
    }
    double oracle = joint[1] / (joint[0] + joint[1]);
    CHECK(std::abs(got.score - oracle) < 1e-9);
    // posteriors of the two classes sum to one
    double negative = 1.0 - got.score;
    CHECK(std::abs(negative - joint[0] / (joint[0] + joint[1])) < 1e-9);
  }
}

TEST_CASE("prediction input validation") {
  auto model = untrained_lr(2);
  CHECK_THROWS_AS(predict(model, std::vector<double>{1.0}), Error);
  try {
    predict(model, std::vector<double>{1.0, 2.0, 3.0});
    FAIL("expected DimensionError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionError);
  }
  CHECK_THROWS_AS(
      predict(model, std::vector<double>{std::nan(""), 0.0}), Error);
}

TEST_CASE("scores stay within [0, 1] on extreme inputs") {
  std::mt19937_64 rng(11);
  auto ds = random_dataset(rng, 60, 2);
  for (auto model : {train_logistic(ds), train_knn(ds, 5), train_gnb(ds)}) {
    for (double v : {-1e6, -100.0, 0.0, 100.0, 1e6}) {
      auto p = predict(model, std::vector<double>{v, -v});
      CHECK(p.score >= 0.0);
      CHECK(p.score <= 1.0);
    }
  }
}

TEST_CASE("affine feature changes do not move lr or knn predictions") {
  std::mt19937_64 rng(2718);
  std::uniform_real_distribution<double> scale(0.5, 3.0);
  std::uniform_real_distribution<double> shift(-10.0, 10.0);

  for (int trial = 0; trial < 5; ++trial) {
    auto ds = random_dataset(rng, 80, 2);
    double a0 = scale(rng), a1 = scale(rng);
    double b0 = shift(rng), b1 = shift(rng);

    LabeledDataset moved = ds;
    for (std::size_t i = 0; i < moved.size(); ++i) {
      moved.features.at(i, 0) = a0 * ds.features.at(i, 0) + b0;
      moved.features.at(i, 1) = a1 * ds.features.at(i, 1) + b1;
    }

    auto check_pair = [&](const TrainedModel& base, const TrainedModel& other) {
      std::uniform_real_distribution<double> span(-3.0, 3.0);
      for (int q = 0; q < 20; ++q) {
        std::vector<double> query{span(rng), span(rng)};
        std::vector<double> moved_query{a0 * query[0] + b0,
                                        a1 * query[1] + b1};
        auto p = predict(base, query);
        auto p2 = predict(other, moved_query);
        CHECK(p.label == p2.label);
        CHECK(std::abs(p.score - p2.score) < 1e-9);
      }
    };
    check_pair(train_logistic(ds), train_logistic(moved));
    check_pair(train_knn(ds, 5), train_knn(moved, 5));
  }
}

TEST_CASE("training is deterministic") {
  std::mt19937_64 rng(99);
  auto ds = random_dataset(rng, 100, 2);
  CHECK(to_json(train_logistic(ds)) == to_json(train_logistic(ds)));
  CHECK(to_json(train_knn(ds, 5)) == to_json(train_knn(ds, 5)));
  CHECK(to_json(train_gnb(ds)) == to_json(train_gnb(ds)));
}

TEST_CASE("serialization round-trips with bit-identical predictions") {
  std::mt19937_64 rng(123);
  auto ds = random_dataset(rng, 90, 2);
  std::uniform_real_distribution<double> span(-3.0, 3.0);

  for (auto model : {train_logistic(ds), train_knn(ds, 7), train_gnb(ds)}) {
    auto text = to_json(model);
    auto loaded = from_json(text);
    CHECK(to_json(loaded) == text);
    CHECK(model_id(loaded) == model_id(model));
    for (int q = 0; q < 25; ++q) {
      std::vector<double> query{span(rng), span(rng)};
      auto p1 = predict(model, query);
      auto p2 = predict(loaded, query);
      CHECK(p1.score == p2.score);
      CHECK(p1.label == p2.label);
    }
  }
}

TEST_CASE("model document validation") {
  CHECK_THROWS_AS(from_json("not json at all"), Error);
  CHECK_THROWS_AS(from_json("{}"), Error);
  CHECK_THROWS_AS(
      from_json(R"({"format_version":99,"kind":"lr","parameters":{}})"),
      Error);
  CHECK_THROWS_AS(
      from_json(
          R"({"format_version":1,"kind":"forest","parameters":{},"metadata":{}})"),
      Error);
}

TEST_CASE("all three models ace a separable synthetic benchmark") {
  signal::PathLossParams params;
  params.shadowing_sigma_db = 0.0;
  params.rng_seed = 1;
  auto train = signal::synth_dataset(2000, signal::default_distance_grid(),
                                     2.0, params);
  params.rng_seed = 2;
  auto test = signal::synth_dataset(500, signal::default_distance_grid(), 2.0,
                                    params);

  for (auto model : {train_logistic(train), train_knn(train, 5),
                     train_gnb(train)}) {
    int correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      if (predict(model, test.features.row(i)).label ==
          (test.labels[i] == 1)) {
        correct += 1;
      }
    }
    CHECK(correct >= 495);  // >= 99%
  }
}

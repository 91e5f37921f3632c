#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "proxgate/common.hpp"
#include "proxgate/signal.hpp"

namespace proxgate::ml {

/// Per-feature mean/std fitted on training data. Stds are floored at
/// kStdFloor so constant features map to zero instead of dividing by zero.
struct Standardizer {
  static constexpr double kStdFloor = 1e-9;

  std::vector<double> mean;
  std::vector<double> stddev;

  static Standardizer fit(const Matrix& features);
  std::vector<double> apply(std::span<const double> row) const;
  Matrix apply(const Matrix& features) const;

  bool operator==(const Standardizer&) const = default;
};

struct LrHyper {
  double learning_rate = 0.1;
  int epochs = 500;
  double l2 = 1e-4;
};

struct LrModel {
  std::vector<double> weights;
  double bias = 0.0;
  Standardizer standardizer;
};

struct KnnModel {
  int k = 5;
  Matrix train_features;  // standardized
  std::vector<std::uint8_t> train_labels;
  Standardizer standardizer;
};

/// Gaussian class-conditional densities on raw features; no standardizer.
struct GnbModel {
  static constexpr double kVarianceFloor = 1e-6;

  std::array<double, 2> log_priors{};  // [negative, positive]
  Matrix means;                        // 2 x D
  Matrix variances;                    // 2 x D, floored
};

struct ModelMetadata {
  std::string provenance;  // "file", "synthetic", ...
  double tau_m = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t n_train = 0;
};

struct TrainedModel {
  std::variant<LrModel, KnnModel, GnbModel> impl;
  ModelMetadata metadata;

  std::size_t dimension() const;
  std::string_view kind() const;  // "lr" | "knn" | "gnb"
};

/// score is P(proximate) for LR/GNB and the neighbour vote fraction for
/// k-NN. A score of exactly 0.5 resolves to not-proximate: ties deny.
struct Prediction {
  bool label = false;
  double score = 0.0;
};

inline bool label_from_score(double score) { return score > 0.5; }

/// Full-batch gradient descent on the L2-regularized mean negative
/// log-likelihood, zero-initialized, on standardized features. When
/// `loss_history` is given it receives the loss before the first step and
/// after every epoch.
TrainedModel train_logistic(const signal::LabeledDataset& data,
                            const LrHyper& hyper = {},
                            std::vector<double>* loss_history = nullptr);

/// Stores the standardized training set; k must be odd and within [1, N].
TrainedModel train_knn(const signal::LabeledDataset& data, int k = 5);

/// Empirical priors and per-class per-feature Gaussian moments; each class
/// needs at least two samples.
TrainedModel train_gnb(const signal::LabeledDataset& data);

Prediction predict(const TrainedModel& model, std::span<const double> features);

/// Versioned JSON document; save -> load -> predict is bit-identical.
std::string to_json(const TrainedModel& model);
TrainedModel from_json(std::string_view text);

/// Content id: prefix of the SHA-256 of the serialized form.
std::string model_id(const TrainedModel& model);

namespace detail {

/// Mean NLL plus (l2/2)|w|^2, on already-standardized features.
double lr_loss(std::span<const double> weights, double bias, const Matrix& x,
               std::span<const std::uint8_t> labels, double l2);

/// Analytic gradient of lr_loss; out_weights has dimension D, bias gradient
/// is returned. Exposed so it can be checked against finite differences.
double lr_gradient(std::span<const double> weights, double bias,
                   const Matrix& x, std::span<const std::uint8_t> labels,
                   double l2, std::span<double> out_weights);

double sigmoid(double z);

}  // namespace detail

}  // namespace proxgate::ml

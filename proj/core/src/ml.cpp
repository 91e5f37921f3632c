#include "proxgate/ml.hpp"

#include <openssl/sha.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <json.hpp>

#include "proxgate/errors.hpp"

namespace proxgate::ml {

using nlohmann::json;

Standardizer Standardizer::fit(const Matrix& features) {
  Standardizer s;
  s.mean.assign(features.cols, 0.0);
  s.stddev.assign(features.cols, 0.0);
  const double n = static_cast<double>(features.rows);

  for (std::size_t i = 0; i < features.rows; ++i) {
    for (std::size_t j = 0; j < features.cols; ++j) {
      s.mean[j] += features.at(i, j);
    }
  }
  for (std::size_t j = 0; j < features.cols; ++j) s.mean[j] /= n;

  for (std::size_t i = 0; i < features.rows; ++i) {
    for (std::size_t j = 0; j < features.cols; ++j) {
      double d = features.at(i, j) - s.mean[j];
      s.stddev[j] += d * d;
    }
  }
  for (std::size_t j = 0; j < features.cols; ++j) {
    s.stddev[j] = std::max(std::sqrt(s.stddev[j] / n), kStdFloor);
  }
  return s;
}

std::vector<double> Standardizer::apply(std::span<const double> row) const {
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) {
    out[j] = (row[j] - mean[j]) / stddev[j];
  }
  return out;
}

Matrix Standardizer::apply(const Matrix& features) const {
  Matrix out(features.rows, features.cols);
  for (std::size_t i = 0; i < features.rows; ++i) {
    for (std::size_t j = 0; j < features.cols; ++j) {
      out.at(i, j) = (features.at(i, j) - mean[j]) / stddev[j];
    }
  }
  return out;
}

std::size_t TrainedModel::dimension() const {
  return std::visit(
      [](const auto& m) -> std::size_t {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LrModel>) {
          return m.weights.size();
        } else if constexpr (std::is_same_v<T, KnnModel>) {
          return m.train_features.cols;
        } else {
          return m.means.cols;
        }
      },
      impl);
}

std::string_view TrainedModel::kind() const {
  if (std::holds_alternative<LrModel>(impl)) return "lr";
  if (std::holds_alternative<KnnModel>(impl)) return "knn";
  return "gnb";
}

namespace detail {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

namespace {

// log(1 + e^t) without overflow.
double softplus(double t) {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

double dot_row(const Matrix& x, std::size_t i, std::span<const double> w,
               double bias) {
  double z = bias;
  auto row = x.row(i);
  for (std::size_t j = 0; j < w.size(); ++j) z += w[j] * row[j];
  return z;
}

}  // namespace

double lr_loss(std::span<const double> weights, double bias, const Matrix& x,
               std::span<const std::uint8_t> labels, double l2) {
  double nll = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    double z = dot_row(x, i, weights, bias);
    // -log p(y|x): softplus(-z) for positives, softplus(z) for negatives
    nll += labels[i] ? softplus(-z) : softplus(z);
  }
  nll /= static_cast<double>(x.rows);

  double reg = 0.0;
  for (double w : weights) reg += w * w;
  return nll + 0.5 * l2 * reg;
}

double lr_gradient(std::span<const double> weights, double bias,
                   const Matrix& x, std::span<const std::uint8_t> labels,
                   double l2, std::span<double> out_weights) {
  std::fill(out_weights.begin(), out_weights.end(), 0.0);
  double grad_bias = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    double residual = sigmoid(dot_row(x, i, weights, bias)) -
                      static_cast<double>(labels[i]);
    auto row = x.row(i);
    for (std::size_t j = 0; j < weights.size(); ++j) {
      out_weights[j] += residual * row[j];
    }
    grad_bias += residual;
  }
  const double n = static_cast<double>(x.rows);
  for (std::size_t j = 0; j < weights.size(); ++j) {
    out_weights[j] = out_weights[j] / n + l2 * weights[j];
  }
  return grad_bias / n;
}

}  // namespace detail

namespace {

void check_trainable(const signal::LabeledDataset& data) {
  data.validate();
  std::size_t positives =
      std::accumulate(data.labels.begin(), data.labels.end(), std::size_t{0});
  if (positives == 0 || positives == data.labels.size()) {
    raise(ErrorCode::DegenerateLabels,
          "training data contains a single class");
  }
}

ModelMetadata metadata_for(const signal::LabeledDataset& data) {
  ModelMetadata md;
  md.provenance = std::string(signal::provenance_name(data.provenance));
  md.tau_m = data.proximity_threshold_m;
  md.n_train = data.size();
  return md;
}

}  // namespace

TrainedModel train_logistic(const signal::LabeledDataset& data,
                            const LrHyper& hyper,
                            std::vector<double>* loss_history) {
  check_trainable(data);
  if (data.size() < 2) {
    raise(ErrorCode::InvalidData, "need at least two training samples");
  }
  if (hyper.learning_rate <= 0.0 || hyper.epochs < 1 || hyper.l2 < 0.0) {
    raise(ErrorCode::InvalidConfig, "bad logistic-regression hyperparameters");
  }

  LrModel model;
  model.standardizer = Standardizer::fit(data.features);
  const Matrix x = model.standardizer.apply(data.features);
  model.weights.assign(x.cols, 0.0);
  model.bias = 0.0;

  std::vector<double> grad(x.cols, 0.0);
  if (loss_history) {
    loss_history->clear();
    loss_history->push_back(
        detail::lr_loss(model.weights, model.bias, x, data.labels, hyper.l2));
  }
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    double grad_bias = detail::lr_gradient(model.weights, model.bias, x,
                                           data.labels, hyper.l2, grad);
    for (std::size_t j = 0; j < grad.size(); ++j) {
      model.weights[j] -= hyper.learning_rate * grad[j];
    }
    model.bias -= hyper.learning_rate * grad_bias;
    if (loss_history) {
      loss_history->push_back(detail::lr_loss(model.weights, model.bias, x,
                                              data.labels, hyper.l2));
    }
  }

  for (double w : model.weights) {
    if (!std::isfinite(w)) {
      raise(ErrorCode::InvalidData, "training diverged to non-finite weights");
    }
  }

  TrainedModel trained{std::move(model), metadata_for(data)};
  return trained;
}

TrainedModel train_knn(const signal::LabeledDataset& data, int k) {
  check_trainable(data);
  if (k < 1 || k % 2 == 0 || static_cast<std::size_t>(k) > data.size()) {
    raise(ErrorCode::InvalidK,
          "k must be odd and within [1, " + std::to_string(data.size()) +
              "], got " + std::to_string(k));
  }

  KnnModel model;
  model.k = k;
  model.standardizer = Standardizer::fit(data.features);
  model.train_features = model.standardizer.apply(data.features);
  model.train_labels = data.labels;

  TrainedModel trained{std::move(model), metadata_for(data)};
  return trained;
}

TrainedModel train_gnb(const signal::LabeledDataset& data) {
  check_trainable(data);
  const std::size_t d = data.features.cols;
  std::array<std::size_t, 2> counts{};
  for (auto y : data.labels) counts[y] += 1;
  if (counts[0] < 2 || counts[1] < 2) {
    raise(ErrorCode::DegenerateLabels,
          "each class needs at least two samples to fit a variance");
  }

  GnbModel model;
  model.means = Matrix(2, d);
  model.variances = Matrix(2, d);
  const double n = static_cast<double>(data.size());
  model.log_priors = {std::log(counts[0] / n), std::log(counts[1] / n)};

  for (std::size_t i = 0; i < data.size(); ++i) {
    auto cls = data.labels[i];
    for (std::size_t j = 0; j < d; ++j) {
      model.means.at(cls, j) += data.features.at(i, j);
    }
  }
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t j = 0; j < d; ++j) {
      model.means.at(c, j) /= static_cast<double>(counts[c]);
    }
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto cls = data.labels[i];
    for (std::size_t j = 0; j < d; ++j) {
      double diff = data.features.at(i, j) - model.means.at(cls, j);
      model.variances.at(cls, j) += diff * diff;
    }
  }
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t j = 0; j < d; ++j) {
      model.variances.at(c, j) = std::max(
          model.variances.at(c, j) / static_cast<double>(counts[c]),
          GnbModel::kVarianceFloor);
    }
  }

  TrainedModel trained{std::move(model), metadata_for(data)};
  return trained;
}

namespace {

void check_features(const TrainedModel& model,
                    std::span<const double> features) {
  if (features.size() != model.dimension()) {
    raise(ErrorCode::DimensionError,
          "expected " + std::to_string(model.dimension()) + " features, got " +
              std::to_string(features.size()));
  }
  for (double v : features) {
    if (!std::isfinite(v)) {
      raise(ErrorCode::InvalidData, "non-finite feature value");
    }
  }
}

double predict_lr(const LrModel& m, std::span<const double> features) {
  auto x = m.standardizer.apply(features);
  double z = m.bias;
  for (std::size_t j = 0; j < x.size(); ++j) z += m.weights[j] * x[j];
  return detail::sigmoid(z);
}

double predict_knn(const KnnModel& m, std::span<const double> features) {
  auto x = m.standardizer.apply(features);
  const std::size_t n = m.train_features.rows;

  // (squared distance, train index); equal distances resolve to the lower
  // training-row index.
  std::vector<std::pair<double, std::size_t>> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = m.train_features.row(i);
    double d2 = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      double diff = row[j] - x[j];
      d2 += diff * diff;
    }
    order[i] = {d2, i};
  }
  const auto k = static_cast<std::size_t>(m.k);
  std::nth_element(order.begin(), order.begin() + (k - 1), order.end());

  std::size_t votes = 0;
  for (std::size_t i = 0; i < k; ++i) {
    votes += m.train_labels[order[i].second];
  }
  return static_cast<double>(votes) / static_cast<double>(k);
}

double predict_gnb(const GnbModel& m, std::span<const double> features) {
  std::array<double, 2> log_post = m.log_priors;
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t j = 0; j < features.size(); ++j) {
      double var = m.variances.at(c, j);
      double diff = features[j] - m.means.at(c, j);
      log_post[c] += -0.5 * std::log(2.0 * std::numbers::pi * var) -
                     diff * diff / (2.0 * var);
    }
  }
  // P(positive | x) via log-sum-exp
  double mx = std::max(log_post[0], log_post[1]);
  double denom = std::exp(log_post[0] - mx) + std::exp(log_post[1] - mx);
  return std::exp(log_post[1] - mx) / denom;
}

}  // namespace

Prediction predict(const TrainedModel& model, std::span<const double> features) {
  check_features(model, features);
  double score = std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LrModel>) {
          return predict_lr(m, features);
        } else if constexpr (std::is_same_v<T, KnnModel>) {
          return predict_knn(m, features);
        } else {
          return predict_gnb(m, features);
        }
      },
      model.impl);
  return Prediction{label_from_score(score), score};
}

namespace {

constexpr int kFormatVersion = 1;

json standardizer_to_json(const Standardizer& s) {
  return json{{"mean", s.mean}, {"stddev", s.stddev}};
}

Standardizer standardizer_from_json(const json& j) {
  Standardizer s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.stddev = j.at("stddev").get<std::vector<double>>();
  if (s.mean.size() != s.stddev.size()) {
    raise(ErrorCode::FormatError, "standardizer mean/stddev length mismatch");
  }
  return s;
}

json matrix_to_json(const Matrix& m) {
  return json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

Matrix matrix_from_json(const json& j) {
  Matrix m;
  m.rows = j.at("rows").get<std::size_t>();
  m.cols = j.at("cols").get<std::size_t>();
  m.data = j.at("data").get<std::vector<double>>();
  if (m.data.size() != m.rows * m.cols) {
    raise(ErrorCode::FormatError, "matrix payload does not match its shape");
  }
  return m;
}

}  // namespace

std::string to_json(const TrainedModel& model) {
  json parameters;
  json standardizer;

  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LrModel>) {
          parameters = {{"weights", m.weights}, {"bias", m.bias}};
          standardizer = standardizer_to_json(m.standardizer);
        } else if constexpr (std::is_same_v<T, KnnModel>) {
          parameters = {{"k", m.k},
                        {"train_features", matrix_to_json(m.train_features)},
                        {"train_labels", m.train_labels}};
          standardizer = standardizer_to_json(m.standardizer);
        } else {
          parameters = {{"log_priors", m.log_priors},
                        {"means", matrix_to_json(m.means)},
                        {"variances", matrix_to_json(m.variances)}};
        }
      },
      model.impl);

  json doc{{"format_version", kFormatVersion},
           {"kind", std::string(model.kind())},
           {"parameters", parameters},
           {"metadata",
            {{"provenance", model.metadata.provenance},
             {"tau_m", model.metadata.tau_m},
             {"seed", model.metadata.seed},
             {"n_train", model.metadata.n_train}}}};
  if (!standardizer.is_null()) doc["standardizer"] = standardizer;
  return doc.dump(2);
}

TrainedModel from_json(std::string_view text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) {
    raise(ErrorCode::FormatError, "model document is not valid JSON");
  }
  try {
    if (doc.at("format_version").get<int>() != kFormatVersion) {
      raise(ErrorCode::FormatError, "unsupported model format version");
    }
    const std::string kind = doc.at("kind").get<std::string>();
    const json& p = doc.at("parameters");

    TrainedModel model;
    if (kind == "lr") {
      LrModel m;
      m.weights = p.at("weights").get<std::vector<double>>();
      m.bias = p.at("bias").get<double>();
      m.standardizer = standardizer_from_json(doc.at("standardizer"));
      model.impl = std::move(m);
    } else if (kind == "knn") {
      KnnModel m;
      m.k = p.at("k").get<int>();
      m.train_features = matrix_from_json(p.at("train_features"));
      m.train_labels = p.at("train_labels").get<std::vector<std::uint8_t>>();
      m.standardizer = standardizer_from_json(doc.at("standardizer"));
      if (m.train_labels.size() != m.train_features.rows) {
        raise(ErrorCode::FormatError, "knn labels do not match rows");
      }
      model.impl = std::move(m);
    } else if (kind == "gnb") {
      GnbModel m;
      auto priors = p.at("log_priors").get<std::vector<double>>();
      if (priors.size() != 2) {
        raise(ErrorCode::FormatError, "gnb needs exactly two priors");
      }
      m.log_priors = {priors[0], priors[1]};
      m.means = matrix_from_json(p.at("means"));
      m.variances = matrix_from_json(p.at("variances"));
      model.impl = std::move(m);
    } else {
      raise(ErrorCode::FormatError, "unknown model kind '" + kind + "'");
    }

    const json& md = doc.at("metadata");
    model.metadata.provenance = md.at("provenance").get<std::string>();
    model.metadata.tau_m = md.at("tau_m").get<double>();
    model.metadata.seed = md.at("seed").get<std::uint64_t>();
    model.metadata.n_train = md.at("n_train").get<std::uint64_t>();
    return model;
  } catch (const json::exception& e) {
    raise(ErrorCode::FormatError,
          std::string("malformed model document: ") + e.what());
  }
}

std::string model_id(const TrainedModel& model) {
  const std::string doc = to_json(model);
  std::array<std::uint8_t, SHA256_DIGEST_LENGTH> digest{};
  SHA256(reinterpret_cast<const unsigned char*>(doc.data()), doc.size(),
         digest.data());
  return to_hex(std::span(digest).first(8));
}

}  // namespace proxgate::ml

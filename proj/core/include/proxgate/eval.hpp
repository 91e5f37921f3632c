#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "proxgate/errors.hpp"
#include "proxgate/ml.hpp"
#include "proxgate/signal.hpp"

namespace proxgate::eval {

struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

/// The four headline metrics, as percentages. Each throws UndefinedMetric
/// when its denominator is zero; callers must surface that, not coerce it.
double accuracy_pct(const ConfusionMatrix& cm);
double sensitivity_pct(const ConfusionMatrix& cm);   // TP / (TP + FN)
double specificity_pct(const ConfusionMatrix& cm);   // TN / (TN + FP)
double precision_pct(const ConfusionMatrix& cm);     // TP / (TP + FP)

enum class Metric { Accuracy = 0, Sensitivity = 1, Specificity = 2, Precision = 3 };
constexpr std::array<Metric, 4> kAllMetrics{Metric::Accuracy, Metric::Sensitivity,
                                            Metric::Specificity, Metric::Precision};
std::string_view metric_name(Metric m);

/// Seeded stratified split. The train side gets exactly
/// floor(fraction * N) rows, allocated per class by largest remainder so
/// each class stays within one sample of its overall proportion.
std::pair<signal::LabeledDataset, signal::LabeledDataset> split(
    const signal::LabeledDataset& data, double train_fraction,
    std::uint64_t seed);

ConfusionMatrix confusion(const ml::TrainedModel& model,
                          const signal::LabeledDataset& test);

enum class ModelKind { LR = 0, KNN = 1, GNB = 2 };
constexpr std::array<ModelKind, 3> kAllModels{ModelKind::LR, ModelKind::KNN,
                                              ModelKind::GNB};
std::string_view model_kind_name(ModelKind kind);  // "LR" | "KNN" | "NB"

struct ModelEval {
  ConfusionMatrix cm;
  // Indexed by Metric; nullopt means the metric's denominator was zero.
  std::array<std::optional<double>, 4> metrics_pct;
};

ModelEval evaluate_model(const ml::TrainedModel& model,
                         const signal::LabeledDataset& test);

struct CategorySection {
  std::string name;  // "Crosswise", "Direct", ...
  std::array<ModelEval, 3> models;  // indexed by ModelKind
};

struct Hyper {
  ml::LrHyper lr;
  int k = 5;
};

struct ReportMeta {
  std::uint64_t seed = 0;
  double split_fraction = 0.8;
  double tau_m = 0.0;
  std::string provenance;
};

struct EvaluationReport {
  std::vector<CategorySection> sections;
  ReportMeta meta;
};

/// Split, train all three classifiers, evaluate on the held-out side.
CategorySection evaluate_category(std::string name,
                                  const signal::LabeledDataset& data,
                                  std::uint64_t seed, double train_fraction,
                                  const Hyper& hyper);

/// The full two-category pipeline over a crosswise and a direct dataset.
EvaluationReport run_experiment(const signal::LabeledDataset& crosswise,
                                const signal::LabeledDataset& direct,
                                std::uint64_t seed, const Hyper& hyper = {});

/// One results table: metric rows by classifier columns, values as
/// percentages with two decimals, undefined metrics rendered by name.
std::string render_section(const CategorySection& section);
std::string render_report(const EvaluationReport& report);

std::string report_to_json(const EvaluationReport& report);
std::string report_to_csv(const EvaluationReport& report);

struct SweepEntry {
  double tau_m = 0.0;
  int k = 0;
  std::optional<CategorySection> result;
  std::optional<ErrorCode> error;  // set when this grid point failed
};

struct SweepResult {
  std::vector<SweepEntry> entries;
  std::uint64_t seed = 0;
};

/// Re-labels the dataset at each threshold and re-runs the pipeline per
/// (tau, k) grid point. Requires ground-truth distances. A grid where no
/// tau can produce two classes is rejected outright; individual degenerate
/// grid points are recorded in their entry instead.
SweepResult sweep(const signal::LabeledDataset& data,
                  std::span<const double> taus, std::span<const int> ks,
                  std::uint64_t seed, const Hyper& hyper = {});

/// CSV with header tau_m,k,model,metric,value_pct. Undefined metrics get
/// an empty value; failed grid points appear as a single row with
/// metric "error" and the error code in the value column.
std::string sweep_to_csv(const SweepResult& result);

}  // namespace proxgate::eval

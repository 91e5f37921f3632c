#include "proxgate/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include <json.hpp>

namespace proxgate::eval {

using nlohmann::json;
using signal::LabeledDataset;

namespace {

constexpr double kDefaultTrainFraction = 0.8;

double ratio_pct(std::uint64_t numerator, std::uint64_t denominator,
                 std::string_view which) {
  if (denominator == 0) {
    raise(ErrorCode::UndefinedMetric,
          std::string(which) + " has a zero denominator");
  }
  return 100.0 * static_cast<double>(numerator) /
         static_cast<double>(denominator);
}

}  // namespace

double accuracy_pct(const ConfusionMatrix& cm) {
  return ratio_pct(cm.tp + cm.tn, cm.total(), "accuracy");
}

double sensitivity_pct(const ConfusionMatrix& cm) {
  return ratio_pct(cm.tp, cm.tp + cm.fn, "sensitivity");
}

double specificity_pct(const ConfusionMatrix& cm) {
  return ratio_pct(cm.tn, cm.tn + cm.fp, "specificity");
}

double precision_pct(const ConfusionMatrix& cm) {
  return ratio_pct(cm.tp, cm.tp + cm.fp, "precision");
}

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::Accuracy: return "Accuracy";
    case Metric::Sensitivity: return "Sensitivity";
    case Metric::Specificity: return "Specificity";
    case Metric::Precision: return "Precision";
  }
  return "?";
}

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::LR: return "LR";
    case ModelKind::KNN: return "KNN";
    case ModelKind::GNB: return "NB";
  }
  return "?";
}

namespace {

LabeledDataset subset(const LabeledDataset& data,
                      const std::vector<std::size_t>& indices) {
  LabeledDataset out;
  out.features = Matrix(indices.size(), data.features.cols);
  out.labels.resize(indices.size());
  out.proximity_threshold_m = data.proximity_threshold_m;
  out.category = data.category;
  out.provenance = data.provenance;
  if (!data.distances_m.empty()) out.distances_m.resize(indices.size());

  for (std::size_t r = 0; r < indices.size(); ++r) {
    auto src = data.features.row(indices[r]);
    std::copy(src.begin(), src.end(), out.features.row(r).begin());
    out.labels[r] = data.labels[indices[r]];
    if (!data.distances_m.empty()) {
      out.distances_m[r] = data.distances_m[indices[r]];
    }
  }
  return out;
}

void fisher_yates(std::vector<std::size_t>& items, std::mt19937_64& engine) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = engine() % i;
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& data,
                                                double train_fraction,
                                                std::uint64_t seed) {
  data.validate();
  if (!(train_fraction > 0.0) || !(train_fraction < 1.0)) {
    raise(ErrorCode::InvalidConfig,
          "train fraction must lie strictly between 0 and 1");
  }
  if (data.size() < 5) {
    raise(ErrorCode::InvalidData, "need at least 5 samples to split");
  }

  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < data.size(); ++i) {
    by_class[data.labels[i]].push_back(i);
  }
  if (by_class[0].empty() || by_class[1].empty()) {
    raise(ErrorCode::DegenerateLabels, "both classes must be present");
  }

  const auto target =
      static_cast<std::size_t>(std::floor(train_fraction * data.size()));

  // Largest-remainder allocation keeps each class within one sample of its
  // overall proportion while hitting the target size exactly.
  std::array<std::size_t, 2> take{};
  std::array<double, 2> remainder{};
  for (std::size_t c = 0; c < 2; ++c) {
    double exact = train_fraction * static_cast<double>(by_class[c].size());
    take[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - static_cast<double>(take[c]);
  }
  std::size_t allocated = take[0] + take[1];
  while (allocated < target) {
    std::size_t c = remainder[1] > remainder[0] ? 1 : 0;
    if (take[c] >= by_class[c].size()) c = 1 - c;
    take[c] += 1;
    remainder[c] = -1.0;
    allocated += 1;
  }

  std::mt19937_64 engine(seed);
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t c = 0; c < 2; ++c) {
    fisher_yates(by_class[c], engine);
    train_idx.insert(train_idx.end(), by_class[c].begin(),
                     by_class[c].begin() + take[c]);
    test_idx.insert(test_idx.end(), by_class[c].begin() + take[c],
                    by_class[c].end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  return {subset(data, train_idx), subset(data, test_idx)};
}

ConfusionMatrix confusion(const ml::TrainedModel& model,
                          const LabeledDataset& test) {
  if (test.size() == 0) {
    raise(ErrorCode::EmptyTestSet, "cannot evaluate on an empty test set");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < test.size(); ++i) {
    bool predicted = ml::predict(model, test.features.row(i)).label;
    bool actual = test.labels[i] != 0;
    if (predicted && actual) cm.tp += 1;
    else if (!predicted && !actual) cm.tn += 1;
    else if (predicted && !actual) cm.fp += 1;
    else cm.fn += 1;
  }
  return cm;
}

ModelEval evaluate_model(const ml::TrainedModel& model,
                         const LabeledDataset& test) {
  ModelEval ev;
  ev.cm = confusion(model, test);

  auto compute = [&](Metric m, double (*fn)(const ConfusionMatrix&)) {
    try {
      ev.metrics_pct[static_cast<std::size_t>(m)] = fn(ev.cm);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UndefinedMetric) throw;
      ev.metrics_pct[static_cast<std::size_t>(m)] = std::nullopt;
    }
  };
  compute(Metric::Accuracy, accuracy_pct);
  compute(Metric::Sensitivity, sensitivity_pct);
  compute(Metric::Specificity, specificity_pct);
  compute(Metric::Precision, precision_pct);
  return ev;
}

CategorySection evaluate_category(std::string name, const LabeledDataset& data,
                                  std::uint64_t seed, double train_fraction,
                                  const Hyper& hyper) {
  auto [train, test] = split(data, train_fraction, seed);

  auto lr = ml::train_logistic(train, hyper.lr);
  auto knn = ml::train_knn(train, hyper.k);
  auto gnb = ml::train_gnb(train);
  lr.metadata.seed = knn.metadata.seed = gnb.metadata.seed = seed;

  CategorySection section;
  section.name = std::move(name);
  section.models[static_cast<std::size_t>(ModelKind::LR)] =
      evaluate_model(lr, test);
  section.models[static_cast<std::size_t>(ModelKind::KNN)] =
      evaluate_model(knn, test);
  section.models[static_cast<std::size_t>(ModelKind::GNB)] =
      evaluate_model(gnb, test);
  return section;
}

EvaluationReport run_experiment(const LabeledDataset& crosswise,
                                const LabeledDataset& direct,
                                std::uint64_t seed, const Hyper& hyper) {
  if (crosswise.proximity_threshold_m != direct.proximity_threshold_m) {
    raise(ErrorCode::InvalidConfig,
          "crosswise and direct datasets were labeled with different "
          "thresholds");
  }

  EvaluationReport report;
  report.meta.seed = seed;
  report.meta.split_fraction = kDefaultTrainFraction;
  report.meta.tau_m = crosswise.proximity_threshold_m;
  report.meta.provenance =
      crosswise.provenance == direct.provenance
          ? std::string(signal::provenance_name(crosswise.provenance))
          : "mixed";

  report.sections.push_back(evaluate_category(
      "Crosswise", crosswise, seed, kDefaultTrainFraction, hyper));
  report.sections.push_back(
      evaluate_category("Direct", direct, seed, kDefaultTrainFraction, hyper));
  return report;
}

namespace {

std::string format_pct(const std::optional<double>& value) {
  if (!value) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", *value);
  return buf;
}

void append_padded(std::string& out, std::string_view text, std::size_t width,
                   bool last) {
  out += text;
  if (!last && text.size() < width) {
    out.append(width - text.size(), ' ');
  }
}

}  // namespace

std::string render_section(const CategorySection& section) {
  constexpr std::size_t kNameWidth = 13;
  constexpr std::size_t kValueWidth = 11;

  std::string out = section.name + " Results\n";
  append_padded(out, "ML Model", kNameWidth, false);
  for (std::size_t m = 0; m < kAllModels.size(); ++m) {
    append_padded(out, model_kind_name(kAllModels[m]), kValueWidth,
                  m + 1 == kAllModels.size());
  }
  out += '\n';

  for (Metric metric : kAllMetrics) {
    append_padded(out, metric_name(metric), kNameWidth, false);
    for (std::size_t m = 0; m < kAllModels.size(); ++m) {
      const auto& ev = section.models[m];
      append_padded(out,
                    format_pct(ev.metrics_pct[static_cast<std::size_t>(metric)]),
                    kValueWidth, m + 1 == kAllModels.size());
    }
    out += '\n';
  }
  return out;
}

std::string render_report(const EvaluationReport& report) {
  std::string out;
  for (std::size_t i = 0; i < report.sections.size(); ++i) {
    if (i > 0) out += '\n';
    out += render_section(report.sections[i]);
  }
  char meta[160];
  std::snprintf(meta, sizeof(meta),
                "\nseed=%llu split=%s tau_m=%s provenance=%s\n",
                static_cast<unsigned long long>(report.meta.seed),
                format_double(report.meta.split_fraction).c_str(),
                format_double(report.meta.tau_m).c_str(),
                report.meta.provenance.c_str());
  out += meta;
  return out;
}

namespace {

json section_to_json(const CategorySection& section) {
  json models = json::array();
  for (std::size_t m = 0; m < kAllModels.size(); ++m) {
    const auto& ev = section.models[m];
    json metrics;
    for (Metric metric : kAllMetrics) {
      std::string key = std::string(metric_name(metric)) + "_pct";
      std::transform(key.begin(), key.end(), key.begin(), ::tolower);
      const auto& v = ev.metrics_pct[static_cast<std::size_t>(metric)];
      metrics[key] = v ? json(*v) : json(nullptr);
    }
    models.push_back(json{{"model", model_kind_name(kAllModels[m])},
                          {"confusion",
                           {{"tp", ev.cm.tp},
                            {"tn", ev.cm.tn},
                            {"fp", ev.cm.fp},
                            {"fn", ev.cm.fn}}},
                          {"metrics", metrics}});
  }
  return json{{"name", section.name}, {"models", models}};
}

}  // namespace

std::string report_to_json(const EvaluationReport& report) {
  json sections = json::array();
  for (const auto& s : report.sections) sections.push_back(section_to_json(s));
  json doc{{"meta",
            {{"seed", report.meta.seed},
             {"split_fraction", report.meta.split_fraction},
             {"tau_m", report.meta.tau_m},
             {"provenance", report.meta.provenance}}},
           {"sections", sections}};
  return doc.dump(2);
}

std::string report_to_csv(const EvaluationReport& report) {
  std::string out = "category,model,metric,value_pct\n";
  for (const auto& section : report.sections) {
    for (std::size_t m = 0; m < kAllModels.size(); ++m) {
      for (Metric metric : kAllMetrics) {
        std::string name(metric_name(metric));
        std::transform(name.begin(), name.end(), name.begin(), ::tolower);
        const auto& v =
            section.models[m].metrics_pct[static_cast<std::size_t>(metric)];
        out += section.name;
        out += ',';
        out += model_kind_name(kAllModels[m]);
        out += ',';
        out += name;
        out += ',';
        if (v) out += format_double(*v);
        out += '\n';
      }
    }
  }
  return out;
}

SweepResult sweep(const LabeledDataset& data, std::span<const double> taus,
                  std::span<const int> ks, std::uint64_t seed,
                  const Hyper& hyper) {
  data.validate();
  if (data.distances_m.empty()) {
    raise(ErrorCode::InvalidConfig,
          "sweep needs ground-truth distances to re-label");
  }
  if (taus.empty() || ks.empty()) {
    raise(ErrorCode::InvalidConfig, "tau and k grids must be non-empty");
  }
  for (double tau : taus) {
    if (!std::isfinite(tau) || tau <= 0.0) {
      raise(ErrorCode::InvalidConfig, "tau grid entries must be positive");
    }
  }
  for (int k : ks) {
    if (k < 1) {
      raise(ErrorCode::InvalidConfig, "k grid entries must be positive");
    }
  }

  const auto [min_it, max_it] =
      std::minmax_element(data.distances_m.begin(), data.distances_m.end());
  bool any_viable = std::any_of(taus.begin(), taus.end(), [&](double tau) {
    return tau >= *min_it && tau < *max_it;
  });
  if (!any_viable) {
    raise(ErrorCode::InvalidConfig,
          "every tau lies outside the dataset's distance range [" +
              format_double(*min_it) + ", " + format_double(*max_it) + "]");
  }

  SweepResult result;
  result.seed = seed;
  for (double tau : taus) {
    LabeledDataset relabeled = data;
    relabeled.proximity_threshold_m = tau;
    for (std::size_t i = 0; i < relabeled.size(); ++i) {
      relabeled.labels[i] = relabeled.distances_m[i] <= tau ? 1 : 0;
    }
    for (int k : ks) {
      SweepEntry entry;
      entry.tau_m = tau;
      entry.k = k;
      try {
        Hyper h = hyper;
        h.k = k;
        entry.result = evaluate_category(
            std::string(signal::category_name(data.category)), relabeled, seed,
            kDefaultTrainFraction, h);
      } catch (const Error& e) {
        entry.error = e.code();
      }
      result.entries.push_back(std::move(entry));
    }
  }
  return result;
}

std::string sweep_to_csv(const SweepResult& result) {
  std::string out = "tau_m,k,model,metric,value_pct\n";
  for (const auto& entry : result.entries) {
    std::string prefix =
        format_double(entry.tau_m) + ',' + std::to_string(entry.k) + ',';
    if (entry.error) {
      out += prefix;
      out += ",error,";
      out += error_code_name(*entry.error);
      out += '\n';
      continue;
    }
    for (std::size_t m = 0; m < kAllModels.size(); ++m) {
      for (Metric metric : kAllMetrics) {
        std::string name(metric_name(metric));
        std::transform(name.begin(), name.end(), name.begin(), ::tolower);
        const auto& v =
            entry.result->models[m].metrics_pct[static_cast<std::size_t>(metric)];
        out += prefix;
        out += model_kind_name(kAllModels[m]);
        out += ',';
        out += name;
        out += ',';
        if (v) out += format_double(*v);
        out += '\n';
      }
    }
  }
  return out;
}

}  // namespace proxgate::eval

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "medcbr/metrics/classification.hpp"
#include "medcbr/util/csv.hpp"
#include "medcbr/util/error.hpp"
#include "medcbr/util/strings.hpp"

namespace medcbr {

// Columns: sample_id,y_true,y_score, then true_<key>/score_<key> per concept.
inline void save_predictions(const PredictionSet& ps, const std::filesystem::path& path) {
  ps.validate();
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  std::vector<std::string> row{"sample_id", "y_true", "y_score"};
  for (const auto& k : ps.concept_keys) {
    row.push_back("true_" + k);
    row.push_back("score_" + k);
  }
  csv::write_row(out, row);
  char buf[32];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : ps.records) {
    row = {r.sample_id, std::to_string(r.y_true), num(r.y_score)};
    for (std::size_t j = 0; j < ps.concept_keys.size(); ++j) {
      row.push_back(std::to_string(r.c_true[j]));
      row.push_back(num(r.c_score[j]));
    }
    csv::write_row(out, row);
  }
}

inline PredictionSet load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LookupError("cannot open predictions " + path.string());
  const auto t = csv::read(in);
  if (t.header.size() < 3 || t.header[0] != "sample_id" || t.header[1] != "y_true" || t.header[2] != "y_score" ||
      (t.header.size() - 3) % 2 != 0)
    throw ValidationError(path.string() + ": unexpected prediction header");
  PredictionSet ps;
  for (std::size_t c = 3; c < t.header.size(); c += 2) {
    const auto& h = t.header[c];
    if (!str::starts_with(h, "true_") || t.header[c + 1] != "score_" + h.substr(5))
      throw ValidationError(path.string() + ": concept columns must come in true_<key>,score_<key> pairs");
    ps.concept_keys.push_back(h.substr(5));
  }
  for (const auto& [line, f] : t.rows) {
    PredictionRecord r;
    try {
      r.sample_id = f[0];
      r.y_true = std::stoi(f[1]);
      r.y_score = std::stod(f[2]);
      for (std::size_t c = 3; c < f.size(); c += 2) {
        r.c_true.push_back(static_cast<std::uint8_t>(std::stoi(f[c])));
        r.c_score.push_back(std::stod(f[c + 1]));
      }
    } catch (const std::logic_error&) {
      throw ValidationError(path.string() + " row " + std::to_string(line) + ": malformed number");
    }
    ps.records.push_back(std::move(r));
  }
  ps.validate();
  return ps;
}

struct MetricsReport {
  std::size_t n = 0, n_positive = 0;
  double threshold = 0.5;
  std::optional<double> auroc, balanced_accuracy;
  std::optional<ConfusionStats> confusion;
  std::vector<std::string> concept_keys;
  std::vector<std::optional<double>> concept_auroc;
  std::optional<double> mean_concept_auroc;
};

inline MetricsReport compute_report(const PredictionSet& ps, double threshold = 0.5) {
  ps.validate();
  MetricsReport r;
  r.n = ps.records.size();
  r.threshold = threshold;
  const auto y = ps.y_true();
  for (int v : y) r.n_positive += v == 1;
  try {
    r.auroc = auroc(ps.y_scores(), y);
    const auto preds = threshold_scores(ps.y_scores(), threshold);
    r.confusion = confusion_stats(preds, y);
    r.balanced_accuracy = 0.5 * (r.confusion->sensitivity + r.confusion->specificity);
  } catch (const UndefinedMetricError&) {
  }
  r.concept_keys = ps.concept_keys;
  r.concept_auroc = per_concept_auroc(ps);
  r.mean_concept_auroc = mean_present(r.concept_auroc);
  return r;
}

namespace detail {
inline nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }
inline std::string pct(const std::optional<double>& v) {
  if (!v) return "absent";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * *v);
  return buf;
}
}  // namespace detail

// One machine-readable record per metric.
inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json recs = nlohmann::json::array();
  auto add = [&](const std::string& name, const std::optional<double>& v, const std::string& scope = "diagnosis") {
    recs.push_back({{"metric", name}, {"scope", scope}, {"value", detail::opt(v)}});
  };
  add("auroc", r.auroc);
  add("balanced_accuracy", r.balanced_accuracy);
  add("sensitivity", r.confusion ? std::optional(r.confusion->sensitivity) : std::nullopt);
  add("specificity", r.confusion ? std::optional(r.confusion->specificity) : std::nullopt);
  add("f1", r.confusion ? std::optional(r.confusion->f1) : std::nullopt);
  add("mean_concept_auroc", r.mean_concept_auroc, "concepts");
  for (std::size_t j = 0; j < r.concept_keys.size(); ++j) add("auroc", r.concept_auroc[j], "concept:" + r.concept_keys[j]);
  nlohmann::json j = {{"n", r.n}, {"n_positive", r.n_positive}, {"threshold", r.threshold}, {"metrics", recs}};
  if (r.confusion) {
    j["confusion"] = {{"tp", r.confusion->tp}, {"fn", r.confusion->fn}, {"tn", r.confusion->tn},
                      {"fp", r.confusion->fp}, {"f1_undefined", r.confusion->f1_undefined}};
  }
  return j;
}

inline std::string to_text(const MetricsReport& r) {
  std::ostringstream o;
  o << "samples " << r.n << " (positive " << r.n_positive << "), threshold " << r.threshold << "\n\n";
  o << "metric              value(%)\n";
  o << "AUROC               " << detail::pct(r.auroc) << "\n";
  o << "Bal. Accuracy       " << detail::pct(r.balanced_accuracy) << "\n";
  if (r.confusion) {
    o << "Sensitivity         " << detail::pct(r.confusion->sensitivity) << "\n";
    o << "Specificity         " << detail::pct(r.confusion->specificity) << "\n";
    o << "F1                  " << detail::pct(r.confusion->f1) << (r.confusion->f1_undefined ? " (undefined)" : "") << "\n";
  }
  o << "Mean concept AUROC  " << detail::pct(r.mean_concept_auroc) << "\n\nconcept                       AUROC(%)\n";
  for (std::size_t j = 0; j < r.concept_keys.size(); ++j) {
    std::string k = r.concept_keys[j];
    k.resize(std::max<std::size_t>(k.size(), 30), ' ');
    o << k << detail::pct(r.concept_auroc[j]) << "\n";
  }
  return o.str();
}

}  // namespace medcbr

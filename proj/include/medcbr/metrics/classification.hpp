#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "medcbr/util/error.hpp"

namespace medcbr {

namespace detail {
inline void check_binary(const std::vector<int>& labels, const char* what) {
  bool pos = false, neg = false;
  for (int y : labels) {
    if (y != 0 && y != 1) throw ValidationError(std::string(what) + ": labels must be 0 or 1");
    (y ? pos : neg) = true;
  }
  if (!pos || !neg) throw UndefinedMetricError(std::string(what) + " is undefined when only one class is present");
}
}  // namespace detail

// Mann-Whitney form: fraction of (positive, negative) pairs ordered correctly,
// ties counting one half. Computed from mid-ranks in O(n log n).
inline double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ValidationError("auroc: scores and labels differ in length");
  detail::check_binary(labels, "auroc");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0;
  double n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]]) {
        rank_sum += mid;
        n_pos += 1;
      }
    i = j;
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  return (rank_sum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg);
}

inline std::vector<int> threshold_scores(const std::vector<double>& scores, double threshold = 0.5) {
  std::vector<int> out;
  out.reserve(scores.size());
  for (double s : scores) out.push_back(s >= threshold ? 1 : 0);
  return out;
}

struct ConfusionStats {
  std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
  double sensitivity = 0, specificity = 0, precision = 0, f1 = 0;
  bool f1_undefined = false;  // zero denominator; f1 reported as 0
};

inline ConfusionStats confusion_stats(const std::vector<int>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size()) throw ValidationError("confusion_stats: preds and labels differ in length");
  detail::check_binary(labels, "confusion_stats");
  ConfusionStats c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] != 0;
    if (labels[i]) (p ? c.tp : c.fn)++;
    else (p ? c.fp : c.tn)++;
  }
  c.sensitivity = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  c.specificity = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  c.precision = c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  const auto denom = 2 * c.tp + c.fp + c.fn;
  if (c.tp == 0) {
    c.f1 = 0;
    c.f1_undefined = denom == 0 || c.tp + c.fp == 0;
  } else {
    c.f1 = 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
  }
  return c;
}

inline double balanced_accuracy(const std::vector<int>& preds, const std::vector<int>& labels) {
  const auto c = confusion_stats(preds, labels);
  return 0.5 * (c.sensitivity + c.specificity);
}

// One row of model output joined with ground truth.
struct PredictionRecord {
  std::string sample_id;
  int y_true = 0;
  double y_score = 0;
  std::vector<std::uint8_t> c_true;
  std::vector<double> c_score;
};

struct PredictionSet {
  std::vector<std::string> concept_keys;
  std::vector<PredictionRecord> records;

  std::vector<double> y_scores() const {
    std::vector<double> v;
    for (const auto& r : records) v.push_back(r.y_score);
    return v;
  }
  std::vector<int> y_true() const {
    std::vector<int> v;
    for (const auto& r : records) v.push_back(r.y_true);
    return v;
  }
  void validate() const {
    for (const auto& r : records) {
      if (r.c_true.size() != concept_keys.size() || r.c_score.size() != concept_keys.size())
        throw ValidationError("prediction '" + r.sample_id + "': concept vector length mismatch");
      if (!(r.y_score >= 0 && r.y_score <= 1))
        throw ValidationError("prediction '" + r.sample_id + "': y_score outside [0,1]");
      for (double s : r.c_score)
        if (!(s >= 0 && s <= 1)) throw ValidationError("prediction '" + r.sample_id + "': c_score outside [0,1]");
    }
  }
};

// nullopt where the concept has a single class in the split.
inline std::vector<std::optional<double>> per_concept_auroc(const PredictionSet& ps) {
  ps.validate();
  std::vector<std::optional<double>> out(ps.concept_keys.size());
  for (std::size_t j = 0; j < ps.concept_keys.size(); ++j) {
    std::vector<double> s;
    std::vector<int> y;
    for (const auto& r : ps.records) {
      s.push_back(r.c_score[j]);
      y.push_back(r.c_true[j]);
    }
    try {
      out[j] = auroc(s, y);
    } catch (const UndefinedMetricError&) {
    }
  }
  return out;
}

inline std::optional<double> mean_present(const std::vector<std::optional<double>>& v) {
  double sum = 0;
  int n = 0;
  for (const auto& x : v)
    if (x) {
      sum += *x;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / n;
}

}  // namespace medcbr

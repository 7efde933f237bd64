#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "medcbr/corpus/manifest.hpp"
#include "medcbr/util/digest.hpp"
#include "medcbr/util/error.hpp"

namespace medcbr {

// Patient-level k-fold assignment. All images of a patient share one fold.
struct SplitPlan {
  int k = 0;
  std::uint64_t seed = 0;
  std::map<std::string, int> assignment;  // patient_id -> fold

  int fold_of(const std::string& patient_id) const {
    auto it = assignment.find(patient_id);
    if (it == assignment.end()) throw LookupError("patient '" + patient_id + "' has no fold");
    return it->second;
  }

  std::vector<std::size_t> fold_sizes() const {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (const auto& [p, f] : assignment) ++sizes[static_cast<std::size_t>(f)];
    return sizes;
  }
};

// Patients are sorted, shuffled with the seed and dealt round-robin, so fold
// patient counts differ by at most one. Records tagged train_only are not
// assigned a fold.
inline SplitPlan make_patient_folds(const DatasetManifest& manifest, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("fold count k must be >= 2, got " + std::to_string(k));
  std::set<std::string> patients;
  for (const auto& r : manifest.records)
    if (!r.train_only()) patients.insert(r.patient_id);
  if (patients.size() < static_cast<std::size_t>(k))
    throw ValidationError("cannot build " + std::to_string(k) + " folds from " +
                          std::to_string(patients.size()) + " patients");
  std::vector<std::string> order(patients.begin(), patients.end());
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  SplitPlan plan{k, seed, {}};
  for (std::size_t i = 0; i < order.size(); ++i) plan.assignment[order[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  return plan;
}

// Sample indices for one cross-validation round.
struct FoldSplit {
  int test_fold = 0;
  int val_fold = -1;
  std::vector<std::size_t> train, val, test;
};

// test = fold f; val = fold (f+1) mod k when with_validation; train = the rest
// plus every train_only record.
inline FoldSplit split_for_fold(const DatasetManifest& m, const SplitPlan& plan, int test_fold,
                                bool with_validation = true) {
  if (test_fold < 0 || test_fold >= plan.k) throw ValidationError("fold " + std::to_string(test_fold) + " out of range");
  FoldSplit s;
  s.test_fold = test_fold;
  s.val_fold = with_validation ? (test_fold + 1) % plan.k : -1;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    const auto& r = m.records[i];
    if (r.train_only()) {
      s.train.push_back(i);
      continue;
    }
    int f = plan.fold_of(r.patient_id);
    if (f == test_fold) s.test.push_back(i);
    else if (f == s.val_fold) s.val.push_back(i);
    else s.train.push_back(i);
  }
  return s;
}

inline nlohmann::json to_json(const SplitPlan& p) {
  nlohmann::json j;
  j["k"] = p.k;
  j["seed"] = p.seed;
  j["assignment"] = p.assignment;
  return j;
}

inline SplitPlan split_plan_from_json(const nlohmann::json& j) {
  SplitPlan p;
  p.k = j.at("k").get<int>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.assignment = j.at("assignment").get<std::map<std::string, int>>();
  for (const auto& [pat, f] : p.assignment)
    if (f < 0 || f >= p.k) throw ValidationError("split plan: patient '" + pat + "' has fold " + std::to_string(f));
  return p;
}

inline void save_split_plan(const SplitPlan& p, const std::filesystem::path& path) {
  write_file(path, to_json(p).dump(2) + "\n");
}

inline SplitPlan load_split_plan(const std::filesystem::path& path) {
  return split_plan_from_json(nlohmann::json::parse(read_file(path)));
}

}  // namespace medcbr

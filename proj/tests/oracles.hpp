#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "medcbr/metrics/classification.hpp"
#include "medcbr/metrics/rubric.hpp"

namespace medcbr::test {

// O(n^2) pair count: P(score_pos > score_neg) + 0.5 P(tie).
inline double brute_auroc(const std::vector<double>& s, const std::vector<int>& y) {
  double good = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1;
        good += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return good / pairs;
}

struct AurocInstance {
  std::vector<double> scores;
  std::vector<int> labels;
};

// Sizes 2..50, both classes present, scores on a coarse grid so ties occur.
inline AurocInstance random_auroc_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(2, 50), grid(0, 20), bit(0, 1);
  AurocInstance a;
  const int n = size(rng);
  for (int i = 0; i < n; ++i) {
    a.scores.push_back(grid(rng) / 20.0);
    a.labels.push_back(bit(rng));
  }
  a.labels[0] = 1;
  a.labels[1] = 0;
  std::shuffle(a.labels.begin(), a.labels.end(), rng);
  return a;
}

// Worst |fast - brute| over `count` instances.
inline double auroc_oracle_gap(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0;
  for (int k = 0; k < count; ++k) {
    const auto a = random_auroc_instance(rng);
    worst = std::max(worst, std::abs(auroc(a.scores, a.labels) - brute_auroc(a.scores, a.labels)));
  }
  return worst;
}

// Twenty reviewer rows (two reviewers x ten cases) with hand-computed means.
inline std::string rubric_fixture_csv() {
  std::ostringstream o;
  o << "case_id,reviewer_id,cints,cigs,bas\n";
  const char* cints[] = {"6/7", "1", "0", "3/4", "1/2", "2/3", "0.5", "5/5", "1/3", "0/2"};
  const char* cigs[] = {"0.75", "1", "0", "0.25", "0.75", "1", "0.25", "0.75", "0", "1"};
  const char* bas[] = {"0.8", "1", "0", "0.8", "1", "0.8", "0.8", "1", "0", "1"};
  for (int r = 0; r < 2; ++r)
    for (int i = 0; i < 10; ++i)
      o << "case" << i << ",rev" << r << "," << cints[i] << "," << cigs[i] << "," << bas[i] << "\n";
  return o.str();
}

inline constexpr double kRubricFixtureCints = 100.0 * (6.0 / 7 + 1 + 0 + 0.75 + 0.5 + 2.0 / 3 + 0.5 + 1 + 1.0 / 3 + 0) / 10;
inline constexpr double kRubricFixtureCigs = 57.5;
inline constexpr double kRubricFixtureBas = 72.0;

}  // namespace medcbr::test

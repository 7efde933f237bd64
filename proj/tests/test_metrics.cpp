#include <sstream>

#include <gtest/gtest.h>

#include "medcbr/metrics/report.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace medcbr;

TEST(Auroc, MatchesBruteForceOn100Instances) { EXPECT_LT(test::auroc_oracle_gap(100, 42), 1e-12); }

TEST(Auroc, Examples) {
  EXPECT_DOUBLE_EQ(auroc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}), 0.75);
  EXPECT_DOUBLE_EQ(auroc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(auroc({0.9, 0.8, 0.2, 0.1}, {0, 0, 1, 1}), 0.0);
  EXPECT_DOUBLE_EQ(auroc({0.5, 0.5}, {0, 1}), 0.5);
}

TEST(Auroc, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 20; ++k) {
    auto a = test::random_auroc_instance(rng);
    auto t = a.scores;
    for (auto& s : t) s = std::exp(3 * s) - 7;
    EXPECT_EQ(auroc(a.scores, a.labels), auroc(t, a.labels));
  }
}

TEST(Auroc, SingleClassAndBadInputs) {
  EXPECT_THROW(auroc({0.1, 0.2}, {1, 1}), UndefinedMetricError);
  EXPECT_THROW(auroc({0.1, 0.2}, {0, 0}), UndefinedMetricError);
  EXPECT_THROW(auroc({0.1}, {0, 1}), ValidationError);
  EXPECT_THROW(auroc({0.1, 0.2}, {0, 2}), ValidationError);
}

TEST(Auroc, PermutedLabelsGiveChance) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> s;
  std::vector<int> y;
  for (int i = 0; i < 4000; ++i) {
    s.push_back(u(rng));
    y.push_back(s.back() > 0.5);
  }
  EXPECT_EQ(auroc(s, y), 1.0);
  std::shuffle(y.begin(), y.end(), rng);
  EXPECT_NEAR(auroc(s, y), 0.5, 0.05);
}

TEST(Confusion, Example) {
  std::vector<int> preds, labels;
  auto add = [&](int p, int l, int n) {
    for (int i = 0; i < n; ++i) {
      preds.push_back(p);
      labels.push_back(l);
    }
  };
  add(1, 1, 8);
  add(0, 1, 2);
  add(0, 0, 9);
  add(1, 0, 1);
  const auto c = confusion_stats(preds, labels);
  EXPECT_EQ(c.tp, 8u);
  EXPECT_EQ(c.fn, 2u);
  EXPECT_EQ(c.tn, 9u);
  EXPECT_EQ(c.fp, 1u);
  EXPECT_DOUBLE_EQ(c.sensitivity, 0.8);
  EXPECT_DOUBLE_EQ(c.specificity, 0.9);
  EXPECT_NEAR(c.f1, 16.0 / 19.0, 1e-12);
  EXPECT_NEAR(balanced_accuracy(preds, labels), 0.85, 1e-12);
}

TEST(Confusion, BalancedAccuracyExamples) {
  EXPECT_DOUBLE_EQ(balanced_accuracy({1, 1, 1, 1}, {1, 0, 0, 0}), 0.5);
  EXPECT_DOUBLE_EQ(balanced_accuracy({1, 0, 0, 0}, {1, 0, 0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(balanced_accuracy({0, 1}, {1, 0}), 0.0);
  const auto none = confusion_stats({0, 0}, {1, 0});
  EXPECT_EQ(none.f1, 0.0);
  EXPECT_TRUE(none.f1_undefined);
  EXPECT_EQ(threshold_scores({0.49, 0.5, 0.51}), (std::vector<int>{0, 1, 1}));
}

namespace {
PredictionSet small_set() {
  PredictionSet ps;
  ps.concept_keys = {"spiculated", "halo"};
  ps.records = {{"a", 1, 0.9, {1, 0}, {0.8, 0.1}},
                {"b", 0, 0.2, {0, 0}, {0.3, 0.2}},
                {"c", 1, 0.6, {1, 0}, {0.4, 0.7}},
                {"d", 0, 0.7, {0, 0}, {0.1, 0.3}}};
  return ps;
}
}  // namespace

TEST(PerConcept, SingleClassConceptsAreAbsent) {
  const auto v = per_concept_auroc(small_set());
  ASSERT_EQ(v.size(), 2u);
  EXPECT_DOUBLE_EQ(*v[0], 1.0);
  EXPECT_FALSE(v[1].has_value());
  EXPECT_DOUBLE_EQ(*mean_present(v), 1.0);
  EXPECT_FALSE(mean_present({std::nullopt}).has_value());
}

TEST(Report, PredictionsRoundTripAndReport) {
  test::TempDir dir;
  const auto ps = small_set();
  save_predictions(ps, dir / "p.csv");
  const auto back = load_predictions(dir / "p.csv");
  ASSERT_EQ(back.records.size(), 4u);
  EXPECT_EQ(back.concept_keys, ps.concept_keys);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(back.records[i].y_score, ps.records[i].y_score);
    EXPECT_EQ(back.records[i].c_score, ps.records[i].c_score);
  }
  const auto r = compute_report(back);
  EXPECT_EQ(r.n, 4u);
  EXPECT_EQ(r.n_positive, 2u);
  EXPECT_DOUBLE_EQ(*r.auroc, 0.75);
  EXPECT_DOUBLE_EQ(*r.balanced_accuracy, 0.75);
  const auto j = to_json(r);
  EXPECT_EQ(j.at("metrics").at(0).at("metric"), "auroc");
  EXPECT_EQ(j.at("metrics").at(0).at("value"), 0.75);
  EXPECT_FALSE(to_text(r).empty());
  write_file(dir / "bad.csv", "sample_id,y_true,y_score\na,1,1.5\n");
  EXPECT_THROW(load_predictions(dir / "bad.csv"), ValidationError);
}

TEST(Rubric, LevelsAndRanges) {
  EXPECT_NEAR(parse_cints("6/7"), 6.0 / 7.0, 1e-15);
  EXPECT_EQ(parse_cints("0.5"), 0.5);
  EXPECT_THROW(parse_cints("1.2", 4), ValidationError);
  EXPECT_THROW(parse_cints("3/2"), ValidationError);
  EXPECT_THROW(parse_cints("1/0"), ValidationError);
  EXPECT_EQ(parse_cigs("0.25"), 0.25);
  EXPECT_THROW(parse_cigs("0.5"), ValidationError);
  EXPECT_EQ(parse_bas("0.8"), 0.8);
  EXPECT_THROW(parse_bas("0.75"), ValidationError);
  try {
    parse_cints("1.2", 4);
  } catch (const ValidationError& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("row 4"), std::string::npos);
    EXPECT_NE(m.find("cints"), std::string::npos);
  }
}

TEST(Rubric, SingleCaseExample) {
  std::istringstream in("case_id,reviewer_id,cints,cigs,bas\nc1,r1,6/7,0.75,0.8\n");
  const auto s = aggregate_rubric(read_rubric_scores(in));
  EXPECT_NEAR(s.mean_cints, 85.7, 0.05);
  EXPECT_DOUBLE_EQ(s.mean_cigs, 75.0);
  EXPECT_DOUBLE_EQ(s.mean_bas, 80.0);
  EXPECT_EQ(s.n, 1u);
}

TEST(Rubric, TwentyRowFixture) {
  std::istringstream in(test::rubric_fixture_csv());
  const auto rows = read_rubric_scores(in);
  ASSERT_EQ(rows.size(), 20u);
  const auto s = aggregate_rubric(rows);
  EXPECT_NEAR(s.mean_cints, test::kRubricFixtureCints, 1e-9);
  EXPECT_NEAR(s.mean_cigs, test::kRubricFixtureCigs, 1e-9);
  EXPECT_NEAR(s.mean_bas, test::kRubricFixtureBas, 1e-9);
  std::istringstream missing("case_id,cints,cigs,bas\nc,1,1,1\n");
  EXPECT_THROW(read_rubric_scores(missing), ValidationError);
  EXPECT_THROW(aggregate_rubric({}), ValidationError);
}

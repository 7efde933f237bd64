#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gradcheck.hpp"
#include "medcbr/encoder/losses.hpp"

using namespace medcbr;

namespace {

// Independent cross-entropy of one logit row against a target index.
double ce(const std::vector<double>& z, int y) {
  double m = *std::max_element(z.begin(), z.end()), s = 0;
  for (double v : z) s += std::exp(v - m);
  return -(z[static_cast<std::size_t>(y)] - m - std::log(s));
}

// Symmetric InfoNCE written out row by row and column by column.
double clip_brute(const Matrix& hv, const Matrix& ht, double tau) {
  const auto B = hv.rows();
  double i2t = 0, t2i = 0;
  for (Eigen::Index i = 0; i < B; ++i) {
    std::vector<double> row, col;
    for (Eigen::Index j = 0; j < B; ++j) {
      row.push_back(hv.row(i).dot(ht.row(j)) / tau);
      col.push_back(hv.row(j).dot(ht.row(i)) / tau);
    }
    i2t += ce(row, static_cast<int>(i));
    t2i += ce(col, static_cast<int>(i));
  }
  return 0.5 * (i2t + t2i) / static_cast<double>(B);
}

}  // namespace

TEST(ClipLoss, SinglePairIsZero) {
  std::mt19937_64 rng(1);
  const Matrix h = test::unit_rows(test::random_matrix(rng, 1, 4));
  EXPECT_DOUBLE_EQ(clip_loss(h, test::unit_rows(test::random_matrix(rng, 1, 4)), 0.07).value, 0.0);
}

TEST(ClipLoss, IdenticalPairIsLn2) {
  Matrix h(2, 3);
  h << 0.6, 0.8, 0, 0.6, 0.8, 0;
  EXPECT_NEAR(clip_loss(h, h, 0.07).value, std::log(2.0), 1e-6);
}

TEST(ClipLoss, TwoByTwoMatchesHandSoftmax) {
  const Matrix I = Matrix::Identity(2, 2);
  // Rows and columns of [[1,0],[0,1]] each give -log(e / (e + 1)).
  const double expect = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
  EXPECT_NEAR(clip_loss(I, I, 1.0).value, expect, 1e-12);
}

TEST(ClipLoss, MatchesBruteForce) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    const Matrix hv = test::unit_rows(test::random_matrix(rng, 5, 6)), ht = test::unit_rows(test::random_matrix(rng, 5, 6));
    EXPECT_NEAR(clip_loss(hv, ht, 0.3).value, clip_brute(hv, ht, 0.3), 1e-10);
  }
}

TEST(ClipLoss, PermutationInvariant) {
  std::mt19937_64 rng(3);
  const Matrix hv = test::unit_rows(test::random_matrix(rng, 4, 5)), ht = test::unit_rows(test::random_matrix(rng, 4, 5));
  std::vector<int> perm{0, 1, 2, 3};
  const double base = clip_loss(hv, ht, 0.1).value;
  do {
    Matrix pv(4, 5), pt(4, 5);
    for (int i = 0; i < 4; ++i) {
      pv.row(i) = hv.row(perm[static_cast<std::size_t>(i)]);
      pt.row(i) = ht.row(perm[static_cast<std::size_t>(i)]);
    }
    EXPECT_NEAR(clip_loss(pv, pt, 0.1).value, base, 1e-12);
  } while (std::next_permutation(perm.begin(), perm.end()));
}

TEST(ClipLoss, OneDirectionalForms) {
  std::mt19937_64 rng(4);
  const Matrix hv = test::unit_rows(test::random_matrix(rng, 3, 4)), ht = test::unit_rows(test::random_matrix(rng, 3, 4));
  const double a = clip_loss(hv, ht, 0.2, ClipDirection::kImageToText).value;
  const double b = clip_loss(hv, ht, 0.2, ClipDirection::kTextToImage).value;
  EXPECT_NEAR(clip_loss(hv, ht, 0.2).value, 0.5 * (a + b), 1e-12);
  EXPECT_NEAR(b, clip_loss(ht, hv, 0.2, ClipDirection::kImageToText).value, 1e-12);
}

TEST(ClipLoss, RejectsNonPositiveTemperature) {
  const Matrix I = Matrix::Identity(2, 2);
  EXPECT_THROW(clip_loss(I, I, 0.0), ValidationError);
  EXPECT_THROW(clip_loss(I, I, -1.0), ValidationError);
}

TEST(DiagLoss, Examples) {
  Matrix confident(2, 2);
  confident << -60, 60, 60, -60;
  EXPECT_LT(diag_loss(confident, {1, 0}).value, 1e-20);
  EXPECT_NEAR(diag_loss(Matrix::Zero(3, 2), {0, 1, 1}).value, std::log(2.0), 1e-12);
  Matrix z(3, 3);
  z << 0.2, -1.0, 2.0, 1.5, 0.3, -0.7, 0.0, 0.1, 0.2;
  const double expect = (ce({0.2, -1.0, 2.0}, 2) + ce({1.5, 0.3, -0.7}, 0) + ce({0.0, 0.1, 0.2}, 1)) / 3.0;
  EXPECT_NEAR(diag_loss(z, {2, 0, 1}).value, expect, 1e-12);
}

TEST(ConceptLoss, Examples) {
  Matrix targets(2, 3);
  targets << 1, 0, 1, 0, 0, 1;
  const Matrix perfect = 80.0 * (2.0 * targets.array() - 1.0).matrix();
  EXPECT_LT(concept_loss(perfect, targets).value, 1e-30);
  EXPECT_NEAR(concept_loss(Matrix::Zero(2, 3), targets).value, std::log(2.0), 1e-12);
  // N_c = 3: each concept's mean two-class CE, then the mean over concepts.
  Matrix m(2, 3);
  m << 0.5, -1.2, 2.0, -0.3, 0.8, -2.5;
  double sum = 0;
  for (int j = 0; j < 3; ++j) {
    double per = 0;
    for (int i = 0; i < 2; ++i) per += ce({0.0, m(i, j)}, static_cast<int>(targets(i, j)));
    sum += per / 2.0;
  }
  EXPECT_NEAR(concept_loss(m, targets).value, sum / 3.0, 1e-12);
  EXPECT_THROW(concept_loss(Matrix::Zero(2, 4), targets), ValidationError);
}

TEST(TotalLoss, Examples) {
  EXPECT_DOUBLE_EQ(total_loss(0.5, 0.2, 0.1, {0, 0, 0}), 0.0);
  EXPECT_NEAR(total_loss(0.5, 0.2, 0.1, {1, 1, 0.8}), 0.78, 1e-15);
  EXPECT_NEAR(total_loss(0.3, 0.4, 0.5, {1, 1, 1}), 1.2, 1e-15);
  const LossWeights w{0.7, 1.3, 0.4};
  const double h = 1e-3;
  EXPECT_NEAR((total_loss(0.5 + h, 0.2, 0.1, w) - total_loss(0.5, 0.2, 0.1, w)) / h, 0.7, 1e-9);
  EXPECT_NEAR((total_loss(0.5, 0.2 + h, 0.1, w) - total_loss(0.5, 0.2, 0.1, w)) / h, 1.3, 1e-9);
  EXPECT_NEAR((total_loss(0.5, 0.2, 0.1 + h, w) - total_loss(0.5, 0.2, 0.1, w)) / h, 0.4, 1e-9);
}

TEST(LossGradients, MatchFiniteDifferences) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20; ++i) {
    const auto e = test::loss_gradient_instance(rng);
    EXPECT_LT(e.worst(), 1e-4) << "instance " << i << ": clip_v=" << e.clip_image << " clip_t=" << e.clip_text
                               << " tau=" << e.clip_tau << " diag=" << e.diag << " concept=" << e.concepts;
  }
}

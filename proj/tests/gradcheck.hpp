#pragma once

#include <algorithm>
#include <random>

#include "medcbr/encoder/losses.hpp"

namespace medcbr::test {

// Central differences of a scalar function over every entry of x.
template <class F>
Matrix numeric_grad(F&& f, Matrix x, double eps = 1e-6) {
  Matrix g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x.data()[i];
    x.data()[i] = keep + eps;
    const double up = f(x);
    x.data()[i] = keep - eps;
    const double down = f(x);
    x.data()[i] = keep;
    g.data()[i] = (up - down) / (2 * eps);
  }
  return g;
}

// Norm-wise relative error; two (near-)zero gradients agree exactly.
inline double rel_error(const Matrix& analytic, const Matrix& numeric) {
  const double scale = std::max(analytic.norm(), numeric.norm());
  if (scale < 1e-12) return 0.0;
  return (analytic - numeric).norm() / scale;
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

inline Matrix unit_rows(Matrix m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) m.row(i).normalize();
  return m;
}

struct LossGradErrors {
  double clip_image = 0, clip_text = 0, clip_tau = 0, diag = 0, concepts = 0;
  double worst() const { return std::max({clip_image, clip_text, clip_tau, diag, concepts}); }
};

// One random small instance (B <= 4, d <= 8) for each loss.
inline LossGradErrors loss_gradient_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> batch(2, 4), dim(2, 8), classes(2, 3), n_concepts(1, 5), coin(0, 1);
  std::uniform_real_distribution<double> tau_draw(0.05, 1.0);
  LossGradErrors e;

  const int B = batch(rng), d = dim(rng);
  const double tau = tau_draw(rng);
  const Matrix hv = unit_rows(random_matrix(rng, B, d)), ht = unit_rows(random_matrix(rng, B, d));
  const auto c = clip_loss(hv, ht, tau);
  e.clip_image = rel_error(c.d_image, numeric_grad([&](const Matrix& x) { return clip_loss(x, ht, tau).value; }, hv));
  e.clip_text = rel_error(c.d_text, numeric_grad([&](const Matrix& x) { return clip_loss(hv, x, tau).value; }, ht));
  Matrix t(1, 1);
  t(0, 0) = tau;
  Matrix dt(1, 1);
  dt(0, 0) = c.d_tau;
  e.clip_tau = rel_error(dt, numeric_grad([&](const Matrix& x) { return clip_loss(hv, ht, x(0, 0)).value; }, t));

  const int K = classes(rng);
  const Matrix logits = random_matrix(rng, B, K, 2.0);
  std::vector<int> labels;
  for (int i = 0; i < B; ++i) labels.push_back(std::uniform_int_distribution<int>(0, K - 1)(rng));
  e.diag = rel_error(diag_loss(logits, labels).d_logits,
                     numeric_grad([&](const Matrix& x) { return diag_loss(x, labels).value; }, logits));

  const int nc = n_concepts(rng);
  const Matrix margins = random_matrix(rng, B, nc, 2.0);
  Matrix targets(B, nc);
  for (Eigen::Index i = 0; i < targets.size(); ++i) targets.data()[i] = coin(rng);
  e.concepts = rel_error(concept_loss(margins, targets).d_logits,
                         numeric_grad([&](const Matrix& x) { return concept_loss(x, targets).value; }, margins));
  return e;
}

}  // namespace medcbr::test

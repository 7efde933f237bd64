#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "medcbr/util/error.hpp"

namespace medcbr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct LossWeights {
  double lambda = 1.0;  // contrastive
  double mu = 1.0;      // diagnostic
  double nu = 1.0;      // concept

  void validate() const {
    for (double w : {lambda, mu, nu})
      if (!std::isfinite(w) || w < 0) throw ValidationError("loss weights must be finite and non-negative");
  }
};

// Stable log(1 + exp(x)).
inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Row-wise log-softmax.
inline Matrix log_softmax_rows(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    const double lse = m + std::log((z.row(i).array() - m).exp().sum());
    out.row(i) = z.row(i).array() - lse;
  }
  return out;
}

enum class ClipDirection { kSymmetric, kImageToText, kTextToImage };

struct ClipLoss {
  double value = 0;
  Matrix d_image;  // dL/dh_v
  Matrix d_text;   // dL/dh_t
  double d_tau = 0;
};

// InfoNCE over the B x B similarity matrix h_v h_t^T / tau with batch-local
// negatives. kSymmetric averages the image->text and text->image terms.
inline ClipLoss clip_loss(const Matrix& h_image, const Matrix& h_text, double tau,
                          ClipDirection dir = ClipDirection::kSymmetric) {
  if (!(tau > 0)) throw ValidationError("clip_loss: temperature must be > 0");
  if (h_image.rows() != h_text.rows() || h_image.cols() != h_text.cols() || h_image.rows() < 1)
    throw ValidationError("clip_loss: embeddings must be row-matched non-empty batches");
  const auto B = h_image.rows();
  const double scale = 1.0 / tau;
  const Matrix sim = h_image * h_text.transpose();
  const Matrix logits = scale * sim;

  double w_i2t = 0.5, w_t2i = 0.5;
  if (dir == ClipDirection::kImageToText) w_i2t = 1, w_t2i = 0;
  if (dir == ClipDirection::kTextToImage) w_i2t = 0, w_t2i = 1;

  const Matrix lsr = log_softmax_rows(logits);
  const Matrix lsc = log_softmax_rows(logits.transpose());  // row j = column j of logits
  const double l_i2t = -lsr.diagonal().mean();
  const double l_t2i = -lsc.diagonal().mean();

  // dL/dlogits
  Matrix d_logits = Matrix::Zero(B, B);
  const Matrix eye = Matrix::Identity(B, B);
  if (w_i2t > 0) d_logits += w_i2t * (lsr.array().exp().matrix() - eye) / static_cast<double>(B);
  if (w_t2i > 0) d_logits += w_t2i * (lsc.array().exp().matrix() - eye).transpose() / static_cast<double>(B);

  ClipLoss out;
  out.value = w_i2t * l_i2t + w_t2i * l_t2i;
  out.d_image = scale * d_logits * h_text;
  out.d_text = scale * d_logits.transpose() * h_image;
  const double d_scale = (d_logits.array() * sim.array()).sum();
  out.d_tau = d_scale * (-1.0 / (tau * tau));
  return out;
}

struct HeadLoss {
  double value = 0;
  Matrix d_logits;
};

// Mean softmax cross-entropy over the batch; logits are B x K.
inline HeadLoss diag_loss(const Matrix& logits, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size() || labels.empty())
    throw ValidationError("diag_loss: logits/labels batch mismatch");
  const auto B = logits.rows();
  const Matrix ls = log_softmax_rows(logits);
  HeadLoss out;
  out.d_logits = ls.array().exp().matrix();
  for (Eigen::Index i = 0; i < B; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= logits.cols()) throw ValidationError("diag_loss: label " + std::to_string(y) + " out of range");
    out.value -= ls(i, y);
    out.d_logits(i, y) -= 1.0;
  }
  out.value /= static_cast<double>(B);
  out.d_logits /= static_cast<double>(B);
  return out;
}

// Mean over concepts of each concept's mean two-class cross-entropy. `margins`
// holds z_pos - z_neg per (sample, concept); two-class softmax CE on (z_neg,
// z_pos) equals softplus(-margin) for a positive target, softplus(margin) else.
inline HeadLoss concept_loss(const Matrix& margins, const Matrix& targets) {
  if (margins.rows() != targets.rows() || margins.cols() != targets.cols())
    throw ValidationError("concept_loss: N_c mismatch between logits (" + std::to_string(margins.cols()) +
                          ") and concepts (" + std::to_string(targets.cols()) + ")");
  if (margins.size() == 0) throw ValidationError("concept_loss: empty batch");
  const double n = static_cast<double>(margins.size());
  HeadLoss out;
  out.d_logits.resize(margins.rows(), margins.cols());
  for (Eigen::Index i = 0; i < margins.rows(); ++i) {
    for (Eigen::Index j = 0; j < margins.cols(); ++j) {
      const double m = margins(i, j), c = targets(i, j);
      out.value += c * softplus(-m) + (1 - c) * softplus(m);
      out.d_logits(i, j) = (sigmoid(m) - c) / n;
    }
  }
  out.value /= n;
  return out;
}

inline double total_loss(double l_clip, double l_diag, double l_concept, const LossWeights& w) {
  return w.lambda * l_clip + w.mu * l_diag + w.nu * l_concept;
}

}  // namespace medcbr

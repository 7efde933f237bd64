#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "medcbr/encoder/features.hpp"
#include "medcbr/encoder/losses.hpp"
#include "medcbr/util/error.hpp"

namespace medcbr {

struct EncoderConfig {
  int embed_dim = 32;
  int vision_hidden = 128;
  std::string vision_backbone_id = "tiny-blockstats-mlp";
  std::string text_backbone_id = "tiny-hashed-bow";
  int n_concepts = 0;
  int n_classes = 2;
  double temperature_init = 0.07;
  bool temperature_learnable = true;
  int image_grid = 14;
  int text_buckets = 1024;
  int max_tokens = 77;
  std::uint64_t init_seed = 0;
  // Optional checkpoint whose encoder weights (vision, text, temperature)
  // initialize this model; heads stay freshly initialized.
  std::string pretrained_checkpoint;

  int adapter_hidden() const { return std::max(1, embed_dim / 4); }

  void validate() const {
    if (embed_dim <= 0) throw ValidationError("encoder.embed_dim must be > 0");
    if (vision_hidden <= 0) throw ValidationError("encoder.vision_hidden must be > 0");
    if (n_concepts <= 0) throw ValidationError("encoder.n_concepts must be > 0");
    if (n_classes < 2) throw ValidationError("encoder.n_classes must be >= 2");
    if (!(temperature_init > 0)) throw ValidationError("encoder.temperature_init must be > 0");
    if (image_grid <= 0 || kImageSize % image_grid != 0) throw ValidationError("encoder.image_grid must divide 224");
    if (text_buckets <= 0 || max_tokens <= 0) throw ValidationError("encoder text stem sizes must be > 0");
    if (vision_backbone_id != "tiny-blockstats-mlp")
      throw ValidationError("unknown vision backbone '" + vision_backbone_id + "'");
    if (text_backbone_id != "tiny-hashed-bow") throw ValidationError("unknown text backbone '" + text_backbone_id + "'");
  }

  ImageStem image_stem() const { return {image_grid}; }
  TextStem text_stem() const { return {text_buckets, max_tokens}; }
};

inline nlohmann::json to_json(const EncoderConfig& c) {
  return {{"embed_dim", c.embed_dim},
          {"vision_hidden", c.vision_hidden},
          {"vision_backbone_id", c.vision_backbone_id},
          {"text_backbone_id", c.text_backbone_id},
          {"n_concepts", c.n_concepts},
          {"n_classes", c.n_classes},
          {"temperature_init", c.temperature_init},
          {"temperature_learnable", c.temperature_learnable},
          {"image_grid", c.image_grid},
          {"text_buckets", c.text_buckets},
          {"max_tokens", c.max_tokens},
          {"init_seed", c.init_seed},
          {"pretrained_checkpoint", c.pretrained_checkpoint}};
}

inline EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.vision_hidden = j.value("vision_hidden", c.vision_hidden);
  c.vision_backbone_id = j.value("vision_backbone_id", c.vision_backbone_id);
  c.text_backbone_id = j.value("text_backbone_id", c.text_backbone_id);
  c.n_concepts = j.value("n_concepts", c.n_concepts);
  c.n_classes = j.value("n_classes", c.n_classes);
  c.temperature_init = j.value("temperature_init", c.temperature_init);
  c.temperature_learnable = j.value("temperature_learnable", c.temperature_learnable);
  c.image_grid = j.value("image_grid", c.image_grid);
  c.text_buckets = j.value("text_buckets", c.text_buckets);
  c.max_tokens = j.value("max_tokens", c.max_tokens);
  c.init_seed = j.value("init_seed", c.init_seed);
  c.pretrained_checkpoint = j.value("pretrained_checkpoint", c.pretrained_checkpoint);
  return c;
}

// How the diagnostic head reads the visual embedding.
enum class HeadKind {
  kEmbedding,          // logits = W_y h_v
  kConceptBottleneck,  // logits = W_y sigma(g(h_v)); diagnosis sees concepts only
};

// A trainable configuration: head wiring, whether the text branch is active,
// and the loss weights.
struct ModelAssembly {
  HeadKind head = HeadKind::kEmbedding;
  bool use_text = true;
  LossWeights weights;
};

struct Dense {
  Matrix W;  // out x in
  Vector b;

  static Dense zeros(Eigen::Index out, Eigen::Index in) { return {Matrix::Zero(out, in), Vector::Zero(out)}; }

  Matrix apply(const Matrix& x) const { return (x * W.transpose()).rowwise() + b.transpose(); }
};

struct ModelParams {
  Dense vision_in, vision_out;  // stem -> hidden -> d
  Dense text_proj;              // text stem -> d
  Dense diag;                   // d -> K, or N_c -> K for the bottleneck head
  std::vector<Dense> adapter_in, adapter_out;  // per concept: d -> d/4 -> 2
  double log_tau = std::log(0.07);

  double tau() const { return std::exp(log_tau); }
};

// Flat views over every parameter tensor, in a fixed order.
struct TensorRef {
  std::string name;
  double* data;
  Eigen::Index size;
  bool decay;  // weight matrices decay; biases and temperature do not
};

inline std::vector<TensorRef> tensors(ModelParams& p) {
  std::vector<TensorRef> out;
  auto dense = [&](const std::string& name, Dense& d) {
    out.push_back({name + ".W", d.W.data(), d.W.size(), true});
    out.push_back({name + ".b", d.b.data(), d.b.size(), false});
  };
  dense("vision_in", p.vision_in);
  dense("vision_out", p.vision_out);
  dense("text_proj", p.text_proj);
  dense("diag", p.diag);
  for (std::size_t i = 0; i < p.adapter_in.size(); ++i) {
    dense("adapter_in." + std::to_string(i), p.adapter_in[i]);
    dense("adapter_out." + std::to_string(i), p.adapter_out[i]);
  }
  out.push_back({"log_tau", &p.log_tau, 1, false});
  return out;
}

inline ModelParams zeros_like(const ModelParams& p) {
  ModelParams g;
  auto z = [](const Dense& d) { return Dense::zeros(d.W.rows(), d.W.cols()); };
  g.vision_in = z(p.vision_in);
  g.vision_out = z(p.vision_out);
  g.text_proj = z(p.text_proj);
  g.diag = z(p.diag);
  for (const auto& a : p.adapter_in) g.adapter_in.push_back(z(a));
  for (const auto& a : p.adapter_out) g.adapter_out.push_back(z(a));
  g.log_tau = 0;
  return g;
}

inline ModelParams init_params(const EncoderConfig& cfg, HeadKind head) {
  cfg.validate();
  std::mt19937_64 rng(cfg.init_seed);
  auto glorot = [&](Eigen::Index out, Eigen::Index in) {
    const double lim = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-lim, lim);
    Dense d = Dense::zeros(out, in);
    for (Eigen::Index i = 0; i < d.W.size(); ++i) d.W.data()[i] = u(rng);
    return d;
  };
  const int d = cfg.embed_dim, q = cfg.adapter_hidden();
  ModelParams p;
  p.vision_in = glorot(cfg.vision_hidden, cfg.image_stem().dim());
  p.vision_out = glorot(d, cfg.vision_hidden);
  p.text_proj = glorot(d, cfg.text_stem().dim());
  std::normal_distribution<double> small(0.0, 0.01);
  for (Eigen::Index i = 0; i < p.text_proj.b.size(); ++i) p.text_proj.b(i) = small(rng);
  p.diag = glorot(cfg.n_classes, head == HeadKind::kEmbedding ? d : cfg.n_concepts);
  for (int i = 0; i < cfg.n_concepts; ++i) {
    p.adapter_in.push_back(glorot(q, d));
    p.adapter_out.push_back(glorot(2, q));
  }
  p.log_tau = std::log(cfg.temperature_init);
  return p;
}

// Per-row L2 normalization. Zero rows map to e_0 so outputs stay unit norm.
inline Matrix normalize_rows(const Matrix& u, Vector& norms) {
  norms = u.rowwise().norm();
  Matrix h(u.rows(), u.cols());
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    if (norms(i) < 1e-12) {
      h.row(i).setZero();
      h(i, 0) = 1.0;
    } else {
      h.row(i) = u.row(i) / norms(i);
    }
  }
  return h;
}

inline Matrix normalize_rows_backward(const Matrix& h, const Vector& norms, const Matrix& dh) {
  Matrix du(h.rows(), h.cols());
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    if (norms(i) < 1e-12) {
      du.row(i).setZero();
      continue;
    }
    du.row(i) = (dh.row(i) - h.row(i) * h.row(i).dot(dh.row(i))) / norms(i);
  }
  return du;
}

inline Matrix relu(const Matrix& z) { return z.cwiseMax(0.0); }

// Activations kept for the backward pass.
struct ForwardState {
  Matrix image_features, vis_pre, vis_act, vis_u, h_image;
  Vector vis_norm;
  Matrix text_features, text_u, h_text;
  Vector text_norm;
  std::vector<Matrix> adapter_pre, adapter_act;
  Matrix margins;       // B x N_c, positive-minus-negative adapter logit
  Matrix concept_prob;  // sigma(margins)
  Matrix diag_logits;   // B x K
  bool has_text = false;
};

// The externally visible outputs of one forward pass.
struct ModelOutputs {
  Matrix h_image, h_text, diag_logits, concept_logits;
};

inline ModelOutputs outputs(const ForwardState& s) {
  return {s.h_image, s.has_text ? s.h_text : Matrix(), s.diag_logits, s.margins};
}

inline Matrix encode_image_features(const ModelParams& p, const Matrix& x, ForwardState* s = nullptr) {
  if (x.cols() != p.vision_in.W.cols())
    throw ValidationError("encode_image: feature width " + std::to_string(x.cols()) + " != " +
                          std::to_string(p.vision_in.W.cols()));
  Matrix pre = p.vision_in.apply(x);
  Matrix act = relu(pre);
  Matrix u = p.vision_out.apply(act);
  Vector norms;
  Matrix h = normalize_rows(u, norms);
  if (s) {
    s->image_features = x;
    s->vis_pre = std::move(pre);
    s->vis_act = std::move(act);
    s->vis_u = std::move(u);
    s->vis_norm = norms;
    s->h_image = h;
  }
  return h;
}

inline Matrix encode_text_features(const ModelParams& p, const Matrix& t, ForwardState* s = nullptr) {
  if (t.cols() != p.text_proj.W.cols())
    throw ValidationError("encode_text: feature width " + std::to_string(t.cols()) + " != " +
                          std::to_string(p.text_proj.W.cols()));
  Matrix u = p.text_proj.apply(t);
  Vector norms;
  Matrix h = normalize_rows(u, norms);
  if (s) {
    s->text_features = t;
    s->text_u = std::move(u);
    s->text_norm = norms;
    s->h_text = h;
    s->has_text = true;
  }
  return h;
}

// Concept adapters and diagnostic head; both read h_v only.
inline void heads_forward(const ModelParams& p, HeadKind head, const Matrix& h, ForwardState& s) {
  const auto n_c = static_cast<Eigen::Index>(p.adapter_in.size());
  s.adapter_pre.resize(static_cast<std::size_t>(n_c));
  s.adapter_act.resize(static_cast<std::size_t>(n_c));
  s.margins.resize(h.rows(), n_c);
  for (Eigen::Index i = 0; i < n_c; ++i) {
    const auto k = static_cast<std::size_t>(i);
    s.adapter_pre[k] = p.adapter_in[k].apply(h);
    s.adapter_act[k] = relu(s.adapter_pre[k]);
    Matrix o = p.adapter_out[k].apply(s.adapter_act[k]);
    s.margins.col(i) = o.col(1) - o.col(0);
  }
  s.concept_prob = s.margins.unaryExpr([](double m) { return sigmoid(m); });
  s.diag_logits = p.diag.apply(head == HeadKind::kEmbedding ? h : s.concept_prob);
}

inline ForwardState forward(const ModelParams& p, HeadKind head, const Matrix& image_features,
                            const Matrix* text_features = nullptr) {
  ForwardState s;
  encode_image_features(p, image_features, &s);
  if (text_features) encode_text_features(p, *text_features, &s);
  heads_forward(p, head, s.h_image, s);
  return s;
}

// Upstream gradients for one backward pass.
struct OutputGrads {
  Matrix d_diag_logits;  // B x K (may be empty)
  Matrix d_margins;      // B x N_c (may be empty)
  Matrix d_h_image;      // extra gradient on h_v, e.g. from the contrastive term
  Matrix d_h_text;
  double d_log_tau = 0;
};

inline void accumulate_dense(Dense& g, const Matrix& d_out, const Matrix& in) {
  g.W += d_out.transpose() * in;
  g.b += d_out.colwise().sum().transpose();
}

inline ModelParams backward(const ModelParams& p, HeadKind head, const ForwardState& s, const OutputGrads& up) {
  ModelParams g = zeros_like(p);
  const auto B = s.h_image.rows();
  Matrix d_h = up.d_h_image.size() ? up.d_h_image : Matrix::Zero(B, s.h_image.cols());
  Matrix d_margins = up.d_margins.size() ? up.d_margins : Matrix::Zero(B, s.margins.cols());

  if (up.d_diag_logits.size()) {
    const Matrix& in = head == HeadKind::kEmbedding ? s.h_image : s.concept_prob;
    accumulate_dense(g.diag, up.d_diag_logits, in);
    Matrix d_in = up.d_diag_logits * p.diag.W;
    if (head == HeadKind::kEmbedding) {
      d_h += d_in;
    } else {
      d_margins += (d_in.array() * s.concept_prob.array() * (1.0 - s.concept_prob.array())).matrix();
    }
  }

  for (std::size_t k = 0; k < p.adapter_in.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    Matrix d_o(B, 2);
    d_o.col(0) = -d_margins.col(i);
    d_o.col(1) = d_margins.col(i);
    accumulate_dense(g.adapter_out[k], d_o, s.adapter_act[k]);
    Matrix d_act = d_o * p.adapter_out[k].W;
    Matrix d_pre = (d_act.array() * (s.adapter_pre[k].array() > 0).cast<double>()).matrix();
    accumulate_dense(g.adapter_in[k], d_pre, s.h_image);
    d_h += d_pre * p.adapter_in[k].W;
  }

  Matrix d_u = normalize_rows_backward(s.h_image, s.vis_norm, d_h);
  accumulate_dense(g.vision_out, d_u, s.vis_act);
  Matrix d_act = d_u * p.vision_out.W;
  Matrix d_pre = (d_act.array() * (s.vis_pre.array() > 0).cast<double>()).matrix();
  accumulate_dense(g.vision_in, d_pre, s.image_features);

  if (s.has_text && up.d_h_text.size()) {
    Matrix d_tu = normalize_rows_backward(s.h_text, s.text_norm, up.d_h_text);
    accumulate_dense(g.text_proj, d_tu, s.text_features);
  }
  g.log_tau = up.d_log_tau;
  return g;
}

// Features and targets for one mini-batch.
struct Batch {
  Matrix image_features;  // B x F
  Matrix text_features;   // B x V, empty when the text branch is off
  std::vector<int> labels;
  Matrix concepts;        // B x N_c in {0,1}
};

struct LossBreakdown {
  double clip = 0, diag = 0, concepts = 0, total = 0;
};

// Weighted objective and its gradient with respect to every parameter.
inline LossBreakdown loss_and_grad(const ModelParams& p, const ModelAssembly& a, const Batch& b,
                                   bool learn_tau, ModelParams* grads) {
  const bool text = a.use_text && a.weights.lambda > 0 && b.text_features.size() > 0;
  ForwardState s = forward(p, a.head, b.image_features, text ? &b.text_features : nullptr);
  LossBreakdown l;
  OutputGrads up;
  if (text) {
    auto c = clip_loss(s.h_image, s.h_text, p.tau());
    l.clip = c.value;
    up.d_h_image = a.weights.lambda * c.d_image;
    up.d_h_text = a.weights.lambda * c.d_text;
    if (learn_tau) up.d_log_tau = a.weights.lambda * c.d_tau * p.tau();
  }
  auto dl = diag_loss(s.diag_logits, b.labels);
  auto cl = concept_loss(s.margins, b.concepts);
  l.diag = dl.value;
  l.concepts = cl.value;
  l.total = total_loss(l.clip, l.diag, l.concepts, a.weights);
  if (grads) {
    up.d_diag_logits = a.weights.mu * dl.d_logits;
    up.d_margins = a.weights.nu * cl.d_logits;
    *grads = backward(p, a.head, s, up);
  }
  return l;
}

// Probabilities read off the heads.
struct Predictions {
  double y_hat = 0;            // P(malignant), or P(class 1) for binary corpora
  std::vector<double> c_hat;   // per-concept positive probability
  std::vector<double> class_probs;
};

inline std::vector<Predictions> predictions_from(const ForwardState& s) {
  std::vector<Predictions> out;
  const Matrix ls = log_softmax_rows(s.diag_logits);
  for (Eigen::Index i = 0; i < s.diag_logits.rows(); ++i) {
    Predictions pr;
    for (Eigen::Index k = 0; k < ls.cols(); ++k) pr.class_probs.push_back(std::exp(ls(i, k)));
    pr.y_hat = ls.cols() == 2 ? sigmoid(s.diag_logits(i, 1) - s.diag_logits(i, 0)) : pr.class_probs.back();
    for (Eigen::Index j = 0; j < s.concept_prob.cols(); ++j) pr.c_hat.push_back(s.concept_prob(i, j));
    out.push_back(std::move(pr));
  }
  return out;
}

inline std::vector<Predictions> predict_features(const ModelParams& p, HeadKind head, const Matrix& image_features) {
  return predictions_from(forward(p, head, image_features));
}

}  // namespace medcbr

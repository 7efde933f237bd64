#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "medcbr/encoder/model.hpp"
#include "medcbr/util/error.hpp"

namespace medcbr {

// Linear warmup from 0 to lr0, then cosine decay to 0 at total_steps.
inline double lr_schedule(long step, long total_steps, long warmup_steps, double lr0) {
  if (total_steps <= 0 || warmup_steps < 0 || warmup_steps > total_steps)
    throw ValidationError("lr_schedule: need 0 <= warmup_steps <= total_steps and total_steps > 0");
  if (step < 0 || step > total_steps) throw ValidationError("lr_schedule: step out of range");
  if (step < warmup_steps) return lr0 * static_cast<double>(step) / static_cast<double>(warmup_steps);
  if (total_steps == warmup_steps) return step == total_steps ? 0.0 : lr0;
  const double progress = static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
  return 0.5 * lr0 * (1.0 + std::cos(std::numbers::pi * progress));
}

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  // frozen: tensor names that are not updated.
  void step(ModelParams& params, ModelParams& grads, double lr, const std::vector<std::string>& frozen = {}) {
    auto p = tensors(params);
    auto g = tensors(grads);
    if (m_.empty()) {
      for (const auto& r : p) {
        m_.push_back(Vector::Zero(r.size));
        v_.push_back(Vector::Zero(r.size));
      }
    }
    if (m_.size() != p.size() || g.size() != p.size()) throw ValidationError("AdamW: parameter layout changed");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (std::find(frozen.begin(), frozen.end(), p[k].name) != frozen.end()) continue;
      Eigen::Map<Vector> w(p[k].data, p[k].size);
      Eigen::Map<const Vector> dw(g[k].data, g[k].size);
      m_[k] = cfg_.beta1 * m_[k] + (1 - cfg_.beta1) * dw;
      v_[k] = cfg_.beta2 * v_[k] + (1 - cfg_.beta2) * dw.cwiseAbs2();
      if (p[k].decay && cfg_.weight_decay > 0) w *= 1.0 - lr * cfg_.weight_decay;
      w.array() -= lr * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + cfg_.eps);
    }
  }

  long steps() const { return t_; }

 private:
  AdamWConfig cfg_;
  std::vector<Vector> m_, v_;
  long t_ = 0;
};

// Stops after `patience` consecutive epochs without improvement. patience <= 0
// never stops.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience, double min_delta = 0.0) : patience_(patience), min_delta_(min_delta) {}

  // Returns true when training should stop.
  bool update(int epoch, double value) {
    if (value < best_ - min_delta_) {
      best_ = value;
      best_epoch_ = epoch;
      bad_ = 0;
      return false;
    }
    ++bad_;
    return patience_ > 0 && bad_ >= patience_;
  }

  bool improved_at(int epoch) const { return best_epoch_ == epoch; }
  double best() const { return best_; }
  int best_epoch() const { return best_epoch_; }

 private:
  int patience_;
  double min_delta_;
  double best_ = std::numeric_limits<double>::infinity();
  int best_epoch_ = -1;
  int bad_ = 0;
};

}  // namespace medcbr

#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <opencv2/core.hpp>

#include "medcbr/corpus/image_ops.hpp"
#include "medcbr/util/digest.hpp"
#include "medcbr/util/error.hpp"
#include "medcbr/util/log.hpp"
#include "medcbr/util/strings.hpp"

namespace medcbr {

// Fixed (non-learned) stem of the tiny vision encoder: per-block mean and
// standard deviation over a grid x grid tiling of the 224x224 image.
struct ImageStem {
  int grid = 14;

  int dim() const { return 2 * grid * grid; }

  Eigen::VectorXd operator()(const cv::Mat& image) const {
    if (image.cols != kImageSize || image.rows != kImageSize || image.type() != CV_8UC1)
      throw ValidationError("image encoder expects a 224x224 8-bit grayscale image");
    if (kImageSize % grid != 0) throw ValidationError("image stem grid must divide 224");
    const int cell = kImageSize / grid;
    Eigen::VectorXd f(dim());
    for (int by = 0; by < grid; ++by) {
      for (int bx = 0; bx < grid; ++bx) {
        double s = 0, s2 = 0;
        for (int y = by * cell; y < (by + 1) * cell; ++y) {
          const auto* row = image.ptr<std::uint8_t>(y);
          for (int x = bx * cell; x < (bx + 1) * cell; ++x) {
            const double v = row[x];
            s += v;
            s2 += v * v;
          }
        }
        const double n = cell * cell;
        const double mean = s / n;
        const double var = std::max(0.0, s2 / n - mean * mean);
        const int k = by * grid + bx;
        f(k) = mean / 255.0 - 0.5;
        f(grid * grid + k) = std::sqrt(var) / 64.0;
      }
    }
    return f;
  }
};

// Hashed bag of unigrams and bigrams over lower-cased word tokens, averaged by
// token count. Texts longer than max_tokens are truncated.
struct TextStem {
  int buckets = 1024;
  int max_tokens = 77;

  int dim() const { return buckets; }

  Eigen::VectorXd operator()(std::string_view text) const {
    auto toks = str::words(text);
    if (toks.size() > static_cast<std::size_t>(max_tokens)) toks.resize(static_cast<std::size_t>(max_tokens));
    Eigen::VectorXd f = Eigen::VectorXd::Zero(buckets);
    if (toks.empty()) {
      log::warn("text encoder: empty text, embedding comes from the projection bias only");
      return f;
    }
    auto bump = [&](std::string_view tok) { f(static_cast<Eigen::Index>(fnv1a64(tok) % static_cast<std::uint64_t>(buckets))) += 1.0; };
    for (std::size_t i = 0; i < toks.size(); ++i) {
      bump(toks[i]);
      if (i + 1 < toks.size()) bump(toks[i] + " " + toks[i + 1]);
    }
    f /= static_cast<double>(toks.size());
    return f;
  }
};

}  // namespace medcbr

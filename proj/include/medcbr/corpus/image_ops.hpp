#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "medcbr/util/error.hpp"

namespace medcbr {

inline constexpr int kImageSize = 224;

// Lesion region of interest in pixel coordinates (x, y, width, height).
struct Roi {
  int x = 0, y = 0, width = 0, height = 0;
};

// Grayscale 8-bit load; color sources are converted.
inline cv::Mat load_image(const std::filesystem::path& path) {
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (img.empty()) throw ValidationError("cannot decode image " + path.string());
  return img;
}

inline void save_image(const cv::Mat& img, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), img)) throw ValidationError("cannot write image " + path.string());
}

// Crops to the ROI (strict bounds, no clamping) and resizes to 224x224.
inline cv::Mat crop_and_resize(const cv::Mat& image, const std::optional<Roi>& roi = std::nullopt) {
  if (image.empty()) throw ValidationError("crop_and_resize: empty image");
  cv::Mat region = image;
  if (roi) {
    const auto& r = *roi;
    if (r.x < 0 || r.y < 0 || r.width <= 0 || r.height <= 0 || r.x + r.width > image.cols ||
        r.y + r.height > image.rows)
      throw ValidationError("ROI (" + std::to_string(r.x) + "," + std::to_string(r.y) + "," +
                            std::to_string(r.width) + "," + std::to_string(r.height) +
                            ") outside image bounds " + std::to_string(image.cols) + "x" +
                            std::to_string(image.rows));
    region = image(cv::Rect(r.x, r.y, r.width, r.height));
  }
  if (region.cols == kImageSize && region.rows == kImageSize) return region.clone();
  cv::Mat out;
  const bool shrink = region.cols > kImageSize || region.rows > kImageSize;
  cv::resize(region, out, cv::Size(kImageSize, kImageSize), 0, 0, shrink ? cv::INTER_AREA : cv::INTER_LINEAR);
  return out;
}

// Ranges are symmetric: translation in [-t, t] * size, rotation in [-r, r].
struct AugmentConfig {
  double max_translate_frac = 0.10;
  double max_rotate_deg = 15.0;
  double hflip_prob = 0.5;

  static AugmentConfig none() { return {0.0, 0.0, 0.0}; }
};

struct AugmentDraw {
  double tx = 0, ty = 0, angle_deg = 0;
  bool hflip = false;
};

inline AugmentDraw draw_augment(const AugmentConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  AugmentDraw d;
  d.tx = unit(rng) * cfg.max_translate_frac * kImageSize;
  d.ty = unit(rng) * cfg.max_translate_frac * kImageSize;
  d.angle_deg = unit(rng) * cfg.max_rotate_deg;
  d.hflip = coin(rng) < cfg.hflip_prob;
  return d;
}

inline cv::Mat hflip(const cv::Mat& image) {
  cv::Mat out;
  cv::flip(image, out, 1);
  return out;
}

// Flip, then rotation about the center plus translation. Deterministic per seed.
inline cv::Mat augment(const cv::Mat& image, std::uint64_t seed, const AugmentConfig& cfg = {}) {
  if (image.cols != kImageSize || image.rows != kImageSize)
    throw ValidationError("augment expects a 224x224 image");
  const auto d = draw_augment(cfg, seed);
  cv::Mat out = d.hflip ? hflip(image) : image.clone();
  if (d.angle_deg == 0.0 && d.tx == 0.0 && d.ty == 0.0) return out;
  cv::Mat m = cv::getRotationMatrix2D(cv::Point2f(kImageSize / 2.0f, kImageSize / 2.0f), d.angle_deg, 1.0);
  m.at<double>(0, 2) += d.tx;
  m.at<double>(1, 2) += d.ty;
  cv::Mat warped;
  cv::warpAffine(out, warped, m, out.size(), cv::INTER_LINEAR, cv::BORDER_REFLECT_101);
  return warped;
}

}  // namespace medcbr

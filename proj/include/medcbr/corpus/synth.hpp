#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "medcbr/corpus/concept_bank.hpp"
#include "medcbr/corpus/image_ops.hpp"
#include "medcbr/corpus/manifest.hpp"
#include "medcbr/util/digest.hpp"
#include "medcbr/util/error.hpp"

namespace medcbr::synth {

// Visual attribute driven by each concept index:
//   0  lesion echogenicity (dark vs bright lesion)
//   1  spiculated boundary (radial spikes)
//   2  posterior acoustic shadow below the lesion
//   3  internal checker texture
//   4+ mirrored bright marker pair at a concept-specific slot
// The label is malignant iff at least two of concepts 0..2 are present.
inline int label_of(const std::vector<std::uint8_t>& concepts) {
  int votes = 0;
  for (std::size_t i = 0; i < 3 && i < concepts.size(); ++i) votes += concepts[i] ? 1 : 0;
  return votes >= 2 ? kMalignant : kBenign;
}

struct SampleParams {
  std::string sample_id;
  std::vector<std::uint8_t> concepts;
  int label = 0;
  double center_x = 112, center_y = 100;
  double radius_x = 45, radius_y = 34;
  double lesion_intensity = 165;
  int spike_count = 0;
  double spike_amp = 0, spike_phase = 0;
  double shadow_factor = 1.0;
  double texture_amp = 0;
  double noise_sigma = 14;
  std::uint64_t noise_seed = 0;
};

inline nlohmann::json to_json(const SampleParams& p) {
  return {{"sample_id", p.sample_id},
          {"concepts", concepts_to_string(p.concepts)},
          {"label", p.label},
          {"center_x", p.center_x},
          {"center_y", p.center_y},
          {"radius_x", p.radius_x},
          {"radius_y", p.radius_y},
          {"lesion_intensity", p.lesion_intensity},
          {"spike_count", p.spike_count},
          {"spike_amp", p.spike_amp},
          {"spike_phase", p.spike_phase},
          {"shadow_factor", p.shadow_factor},
          {"texture_amp", p.texture_amp},
          {"noise_sigma", p.noise_sigma},
          {"noise_seed", p.noise_seed}};
}

inline SampleParams params_from_json(const nlohmann::json& j) {
  SampleParams p;
  p.sample_id = j.at("sample_id");
  for (char c : j.at("concepts").get<std::string>()) p.concepts.push_back(c == '1');
  p.label = j.at("label");
  p.center_x = j.at("center_x");
  p.center_y = j.at("center_y");
  p.radius_x = j.at("radius_x");
  p.radius_y = j.at("radius_y");
  p.lesion_intensity = j.at("lesion_intensity");
  p.spike_count = j.at("spike_count");
  p.spike_amp = j.at("spike_amp");
  p.spike_phase = j.at("spike_phase");
  p.shadow_factor = j.at("shadow_factor");
  p.texture_amp = j.at("texture_amp");
  p.noise_sigma = j.at("noise_sigma");
  p.noise_seed = j.at("noise_seed");
  return p;
}

struct MarkerSlot {
  int x, y, size;
};

// Left-edge slot for marker concept index (>= 4); the renderer mirrors it.
inline MarkerSlot marker_slot(std::size_t concept_index) {
  const int s = static_cast<int>(concept_index) - 4;
  if (s < 6) return {34, 36 + 30 * s, 12};
  const int t = s - 6;
  return {58 + 14 * (t / 2), (t % 2) ? 200 : 14, 9};
}

inline cv::Mat render(const SampleParams& p) {
  std::vector<double> px(static_cast<std::size_t>(kImageSize * kImageSize), 110.0);
  auto at = [&](int x, int y) -> double& { return px[static_cast<std::size_t>(y * kImageSize + x)]; };

  for (int y = 0; y < kImageSize; ++y) {
    for (int x = 0; x < kImageSize; ++x) {
      const double dx = x - p.center_x, dy = y - p.center_y;
      const double theta = std::atan2(dy / p.radius_y, dx / p.radius_x);
      double reach = 1.0;
      if (p.spike_count > 0) reach += p.spike_amp * std::pow(std::max(0.0, std::cos(p.spike_count * theta + p.spike_phase)), 2);
      const double rho = std::hypot(dx / p.radius_x, dy / p.radius_y);
      if (rho <= reach) {
        double v = p.lesion_intensity;
        if (p.texture_amp > 0) {
          const int cx = static_cast<int>(std::floor((dx + 600) / 6.0)), cy = static_cast<int>(std::floor((dy + 600) / 6.0));
          v += ((cx + cy) % 2 ? 1.0 : -1.0) * p.texture_amp;
        }
        at(x, y) = v;
      } else if (p.shadow_factor < 1.0 && dy > 0.8 * p.radius_y && std::abs(dx) < 0.9 * p.radius_x) {
        at(x, y) *= p.shadow_factor;
      }
    }
  }
  for (std::size_t i = 4; i < p.concepts.size(); ++i) {
    if (!p.concepts[i]) continue;
    const auto slot = marker_slot(i);
    for (int y = slot.y; y < slot.y + slot.size; ++y) {
      for (int x = slot.x; x < slot.x + slot.size; ++x) {
        if (x < 0 || y < 0 || x >= kImageSize || y >= kImageSize) continue;
        at(x, y) = 235.0;
        at(kImageSize - 1 - x, y) = 235.0;
      }
    }
  }
  std::mt19937_64 noise(p.noise_seed);
  std::normal_distribution<double> gauss(0.0, p.noise_sigma);
  cv::Mat img(kImageSize, kImageSize, CV_8UC1);
  for (int y = 0; y < kImageSize; ++y)
    for (int x = 0; x < kImageSize; ++x)
      img.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(std::clamp(std::lround(at(x, y) + gauss(noise)), 0L, 255L));
  return img;
}

inline constexpr const char* kManifestFile = "manifest.csv";
inline constexpr const char* kSidecarFile = "synthetic_params.jsonl";

inline std::string sample_name(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%05zu", prefix, i);
  return buf;
}

// Draws one sample's generative parameters from the shared stream.
inline SampleParams draw_params(std::mt19937_64& rng, std::size_t n_concepts, std::string sample_id) {
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SampleParams p;
  p.sample_id = std::move(sample_id);
  for (std::size_t c = 0; c < n_concepts; ++c) p.concepts.push_back(coin(rng) ? 1 : 0);
  p.label = label_of(p.concepts);
  p.center_x = 112 + (u(rng) - 0.5) * 16;
  p.center_y = 100 + (u(rng) - 0.5) * 16;
  p.radius_x = 38 + u(rng) * 14;
  p.radius_y = 28 + u(rng) * 12;
  const double spike_draw = u(rng), phase_draw = u(rng), count_draw = u(rng);
  p.lesion_intensity = p.concepts[0] ? 45 + u(rng) * 15 : 160 + u(rng) * 15;
  if (p.concepts[1]) {
    p.spike_count = 5 + static_cast<int>(count_draw * 4);
    p.spike_amp = 0.65 + 0.25 * spike_draw;
    p.spike_phase = phase_draw * 2 * std::numbers::pi;
  }
  p.shadow_factor = p.concepts[2] ? 0.30 + 0.1 * u(rng) : 1.0;
  p.texture_amp = p.concepts[3] ? 35 + 10 * u(rng) : 0.0;
  p.noise_seed = rng();
  return p;
}

// Writes images/, manifest.csv, the bank file and the generative sidecar under
// out_dir. Patients own 1-3 images each. Byte-identical for a fixed seed.
inline DatasetManifest generate(std::size_t n, const ConceptBank& bank, std::uint64_t seed,
                                const std::filesystem::path& out_dir) {
  if (bank.size() < 4) throw ValidationError("synthetic generator needs a bank with >= 4 concepts");
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "images");

  DatasetManifest m;
  m.corpus_name = "synthetic";
  m.bank_id = bank.id();
  m.base_dir = out_dir;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> images_per_patient(1, 3);
  std::ofstream sidecar(out_dir / kSidecarFile, std::ios::binary | std::ios::trunc);
  std::size_t patient = 0;
  int left_for_patient = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (left_for_patient == 0) {
      ++patient;
      left_for_patient = images_per_patient(rng);
    }
    --left_for_patient;
    auto p = draw_params(rng, bank.size(), sample_name("S", i));
    const auto rel = fs::path("images") / (p.sample_id + ".png");
    save_image(render(p), out_dir / rel);
    SampleRecord r;
    r.sample_id = p.sample_id;
    r.patient_id = sample_name("P", patient);
    r.image_path = rel.generic_string();
    r.concepts = p.concepts;
    r.label = p.label;
    m.records.push_back(std::move(r));
    sidecar << to_json(p).dump() << '\n';
  }
  save_manifest(m, out_dir / kManifestFile);
  save_concept_bank(bank, out_dir / (bank.id() + ".csv"));
  return m;
}

inline std::vector<SampleParams> load_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open sidecar " + path.string());
  std::vector<SampleParams> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(params_from_json(nlohmann::json::parse(line)));
  return out;
}

}  // namespace medcbr::synth

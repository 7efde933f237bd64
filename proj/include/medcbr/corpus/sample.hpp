#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "medcbr/util/error.hpp"

namespace medcbr {

enum class Birads { k2, k3, k4A, k4B, k4C, k5 };

inline constexpr std::array<std::string_view, 6> kBiradsTokens = {"2", "3", "4A", "4B", "4C", "5"};

inline std::string_view to_string(Birads b) { return kBiradsTokens[static_cast<std::size_t>(b)]; }

inline std::optional<Birads> parse_birads(std::string_view token) {
  for (std::size_t i = 0; i < kBiradsTokens.size(); ++i) {
    if (token.size() != kBiradsTokens[i].size()) continue;
    bool eq = true;
    for (std::size_t j = 0; j < token.size(); ++j)
      if (std::toupper(static_cast<unsigned char>(token[j])) != kBiradsTokens[i][j]) eq = false;
    if (eq) return static_cast<Birads>(i);
  }
  return std::nullopt;
}

// Class names for a corpus. Medical corpora are binary benign/malignant.
struct LabelSet {
  std::vector<std::string> names;

  static LabelSet binary() { return {{"benign", "malignant"}}; }

  std::size_t size() const noexcept { return names.size(); }
  bool is_binary() const noexcept { return names.size() == 2; }

  const std::string& name(int label) const {
    if (label < 0 || static_cast<std::size_t>(label) >= names.size())
      throw ValidationError("label index " + std::to_string(label) + " outside label set");
    return names[static_cast<std::size_t>(label)];
  }
};

inline constexpr int kBenign = 0;
inline constexpr int kMalignant = 1;

// Tag for auxiliary records that join every training split and never a test split.
inline constexpr std::string_view kTrainOnlyTag = "train_only";

struct SampleRecord {
  std::string sample_id;
  std::string patient_id;
  std::string image_path;             // as written in the manifest (relative to it, or absolute)
  std::vector<std::uint8_t> concepts;  // 0/1 per concept, bank order
  int label = 0;                       // index into the corpus LabelSet
  std::optional<Birads> birads;
  std::optional<std::string> split_tag;

  bool train_only() const { return split_tag && *split_tag == kTrainOnlyTag; }

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

}  // namespace medcbr

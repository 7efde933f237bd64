#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "medcbr/corpus/concept_bank.hpp"

namespace medcbr {

// Breast ultrasound lexicon, 15 concepts, radiologist-annotated order.
inline ConceptBank ultrasound_bank() {
  return ConceptBank::from_keys("busbra_us15", {
      {"shadowing", "posterior_features"},
      {"enhancement", "posterior_features"},
      {"halo", "other_findings"},
      {"skin_thickening", "other_findings"},
      {"calcifications", "other_findings"},
      {"circumscribed", "margins"},
      {"indistinct", "margins"},
      {"angular", "margins"},
      {"microlobulated", "margins"},
      {"spiculated", "margins"},
      {"regular_shape", "shape"},
      {"hypoechoic", "echogenicity"},
      {"hyperechoic", "echogenicity"},
      {"heterogeneous", "echogenicity"},
      {"cystic", "echogenicity"},
  });
}

// Mammography ROI concepts, 31 entries.
inline ConceptBank mammography_bank() {
  return ConceptBank::from_keys("cbis_ddsm_mg31", {
      {"regular_round_oval", "mass_shape"},
      {"irregular", "mass_shape"},
      {"lobulated", "mass_shape"},
      {"circumscribed", "mass_margins"},
      {"ill_defined", "mass_margins"},
      {"spiculated", "mass_margins"},
      {"obscured", "mass_margins"},
      {"microlobulated", "mass_margins"},
      {"pleomorphic", "calcification"},
      {"amorphous", "calcification"},
      {"fine_linear", "calcification"},
      {"branching", "calcification"},
      {"vascular", "calcification"},
      {"coarse", "calcification"},
      {"punctate", "calcification"},
      {"lucent_centered", "calcification"},
      {"eggshell", "calcification"},
      {"round", "calcification"},
      {"regular", "calcification"},
      {"dystrophic", "calcification"},
      {"clustered", "calcification_distribution"},
      {"segmental", "calcification_distribution"},
      {"linear", "calcification_distribution"},
      {"scattered", "calcification_distribution"},
      {"regional", "calcification_distribution"},
      {"low_density", "breast_density"},
      {"moderate_density", "breast_density"},
      {"high_density", "breast_density"},
      {"architectural_distortion", "other_findings"},
      {"asymmetry", "other_findings"},
      {"lymph_node", "other_findings"},
  });
}

// Concept bank for the synthetic corpus. The first three concepts drive the
// label; the remaining ones are label-irrelevant.
inline ConceptBank synthetic_bank(std::size_t n_concepts) {
  static const std::pair<const char*, const char*> kNames[] = {
      {"hypoechoic", "echogenicity"},   {"spiculated", "margins"},
      {"shadowing", "posterior_features"}, {"heterogeneous", "echogenicity"},
      {"calcifications", "other_findings"}, {"halo", "other_findings"},
      {"skin_thickening", "other_findings"}, {"enhancement", "posterior_features"},
      {"angular", "margins"},           {"microlobulated", "margins"},
      {"indistinct", "margins"},        {"cystic", "echogenicity"},
  };
  std::vector<std::pair<std::string, std::string>> keys;
  for (std::size_t i = 0; i < n_concepts; ++i) {
    if (i < std::size(kNames))
      keys.emplace_back(kNames[i].first, kNames[i].second);
    else
      keys.emplace_back("marker_" + std::to_string(i), "synthetic");
  }
  return ConceptBank::from_keys("synthetic_" + std::to_string(n_concepts), keys);
}

// 0-based indices into CUB attributes.txt of the 112 attributes kept by the
// concept-bottleneck literature.
inline constexpr int kCubSelectedAttributes[112] = {
    1,   4,   6,   7,   10,  14,  15,  20,  21,  23,  25,  29,  30,  35,  36,  38,
    40,  44,  45,  50,  51,  53,  54,  56,  57,  59,  63,  64,  69,  70,  72,  75,
    80,  84,  90,  91,  93,  99,  101, 106, 110, 111, 116, 117, 119, 125, 126, 131,
    132, 134, 145, 149, 151, 152, 153, 157, 158, 163, 164, 168, 172, 178, 179, 181,
    183, 187, 188, 193, 194, 196, 198, 202, 203, 208, 209, 211, 212, 213, 218, 220,
    221, 225, 235, 236, 238, 239, 240, 242, 243, 244, 249, 253, 254, 259, 260, 262,
    268, 274, 277, 283, 289, 292, 293, 294, 298, 299, 304, 305, 308, 309, 310, 311};

// "has_bill_shape::hooked_seabird" -> "bill_shape_hooked_seabird".
inline std::string cub_attribute_key(std::string_view raw) {
  if (str::starts_with(raw, "has_")) raw.remove_prefix(4);
  std::string out;
  for (unsigned char c : raw) {
    if (std::isalnum(c)) {
      out.push_back(static_cast<char>(std::tolower(c)));
    } else if (!out.empty() && out.back() != '_') {
      out.push_back('_');
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

// Builds the 112-concept bank from the dataset's attributes.txt
// ("<1-based id> <name>" per line).
inline ConceptBank cub_bank_from_attributes(const std::filesystem::path& attributes_txt) {
  std::ifstream in(attributes_txt);
  if (!in) throw ValidationError("cannot open " + attributes_txt.string());
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    auto t = str::trim(line);
    if (t.empty()) continue;
    auto sp = t.find(' ');
    if (sp == std::string_view::npos) throw ValidationError("attributes.txt: malformed line '" + line + "'");
    names.emplace_back(str::trim(t.substr(sp + 1)));
  }
  std::vector<std::pair<std::string, std::string>> keys;
  for (int idx : kCubSelectedAttributes) {
    if (static_cast<std::size_t>(idx) >= names.size())
      throw ValidationError("attributes.txt has fewer than " + std::to_string(idx + 1) + " entries");
    const auto& raw = names[static_cast<std::size_t>(idx)];
    auto group = cub_attribute_key(raw.substr(0, raw.find("::")));
    keys.emplace_back(cub_attribute_key(raw), group);
  }
  return ConceptBank::from_keys("cub_112", keys);
}

inline std::filesystem::path default_asset_dir() {
#ifdef MEDCBR_ASSET_DIR
  return MEDCBR_ASSET_DIR;
#else
  return "assets";
#endif
}

// Resolves "us15", "mg31", "cub112", "synthetic:<n>" or a bank file path.
inline ConceptBank resolve_bank(std::string_view spec,
                                const std::filesystem::path& asset_dir = default_asset_dir()) {
  if (spec == "us15" || spec == "busbra_us15") return ultrasound_bank();
  if (spec == "mg31" || spec == "cbis_ddsm_mg31") return mammography_bank();
  if (spec == "cub112" || spec == "cub_112") return load_concept_bank(asset_dir / "banks" / "cub_112.csv");
  if (str::starts_with(spec, "synthetic:")) {
    auto n = std::stoul(std::string(spec.substr(10)));
    return synthetic_bank(n);
  }
  if (str::starts_with(spec, "synthetic_")) return synthetic_bank(std::stoul(std::string(spec.substr(10))));
  return load_concept_bank(std::filesystem::path(spec));
}

}  // namespace medcbr

#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "medcbr/encoder/model.hpp"
#include "medcbr/util/error.hpp"

namespace medcbr {

enum class VariantKind {
  kCbmSequential,  // image -> concepts -> label, no text branch
  kClipCbl,        // dual encoder, label read from concept probabilities only
  kClipMtl,        // dual encoder, label and concepts as parallel heads on h_v
};

inline const char* to_string(VariantKind k) {
  switch (k) {
    case VariantKind::kCbmSequential: return "CBM_SEQUENTIAL";
    case VariantKind::kClipCbl: return "CLIP_CBL";
    case VariantKind::kClipMtl: return "CLIP_MTL";
  }
  return "?";
}

inline VariantKind parse_variant_kind(const std::string& s) {
  if (s == "CBM_SEQUENTIAL") return VariantKind::kCbmSequential;
  if (s == "CLIP_CBL") return VariantKind::kClipCbl;
  if (s == "CLIP_MTL") return VariantKind::kClipMtl;
  throw ValidationError("unknown variant kind '" + s + "' (expected CBM_SEQUENTIAL, CLIP_CBL or CLIP_MTL)");
}

struct VariantSpec {
  VariantKind kind = VariantKind::kClipMtl;
  bool use_guideline_text = true;
  LossWeights loss_weights{1.0, 1.0, 1.0};

  static VariantSpec full() { return {}; }
  static VariantSpec cbm_baseline() { return {VariantKind::kCbmSequential, false, {0.0, 1.0, 0.8}}; }
  static VariantSpec clip_cbm_baseline() { return {VariantKind::kClipCbl, false, {1.0, 1.0, 1.0}}; }

  // The bottleneck ablation without guideline text drops the text branch; only
  // the multi-task variant falls back to label captions.
  bool uses_text() const {
    if (kind == VariantKind::kCbmSequential) return false;
    if (kind == VariantKind::kClipCbl) return use_guideline_text;
    return true;
  }

  void validate() const {
    loss_weights.validate();
    if (kind == VariantKind::kCbmSequential && loss_weights.lambda > 0)
      throw ValidationError("variant CBM_SEQUENTIAL has no text branch; loss_weights.lambda must be 0");
    if (kind == VariantKind::kCbmSequential && use_guideline_text)
      throw ValidationError("variant CBM_SEQUENTIAL has no text branch; use_guideline_text must be false");
  }
};

inline nlohmann::json to_json(const VariantSpec& v) {
  return {{"kind", to_string(v.kind)},
          {"use_guideline_text", v.use_guideline_text},
          {"loss_weights", {{"lambda", v.loss_weights.lambda}, {"mu", v.loss_weights.mu}, {"nu", v.loss_weights.nu}}}};
}

inline VariantSpec variant_from_json(const nlohmann::json& j) {
  VariantSpec v;
  v.kind = parse_variant_kind(j.value("kind", std::string(to_string(v.kind))));
  v.use_guideline_text = j.value("use_guideline_text", v.use_guideline_text);
  if (j.contains("loss_weights")) {
    const auto& w = j.at("loss_weights");
    v.loss_weights.lambda = w.value("lambda", v.loss_weights.lambda);
    v.loss_weights.mu = w.value("mu", v.loss_weights.mu);
    v.loss_weights.nu = w.value("nu", v.loss_weights.nu);
  }
  return v;
}

inline ModelAssembly build_variant(const VariantSpec& spec, const EncoderConfig& enc) {
  spec.validate();
  enc.validate();
  ModelAssembly a;
  a.weights = spec.loss_weights;
  a.use_text = spec.uses_text();
  a.head = spec.kind == VariantKind::kClipMtl ? HeadKind::kEmbedding : HeadKind::kConceptBottleneck;
  return a;
}

// Contrastive target when guideline-enriched reports are switched off: a
// fixed sentence naming only the class label.
inline std::string label_caption(const std::string& label_name) {
  return "An image of a " + label_name + " lesion.";
}

}  // namespace medcbr

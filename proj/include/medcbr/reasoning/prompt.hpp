#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "medcbr/corpus/concept_bank.hpp"
#include "medcbr/corpus/sample.hpp"
#include "medcbr/encoder/model.hpp"
#include "medcbr/guidelines.hpp"
#include "medcbr/util/digest.hpp"
#include "medcbr/util/error.hpp"
#include "medcbr/util/strings.hpp"

namespace medcbr {

inline constexpr const char* kReasoningIntro =
    "You are given the final diagnostic prediction of an AI system, which is {diagnosis}. The system also detected "
    "the following concepts:\n";
inline constexpr const char* kReasoningInstruction =
    "Assuming the diagnosis is correct, explain the implications of these concepts according to the {guide} "
    "provided. Interpret each concept, assess agreement with the predicted diagnosis, infer the most likely BI-RADS "
    "category, and provide a recommended follow-up.\n";

struct ReasoningOptions {
  double concept_threshold = 0.5;
  double diagnosis_threshold = 0.5;
};

struct ReasoningPrompt {
  std::string introduction;
  std::string task_instruction;
  std::string diagnosis_text;
  std::vector<std::string> concept_lines;  // each ends in '\n'
  const Guideline* guideline = nullptr;
  std::string rendered;
  std::string prompt_hash;
};

// Corpora whose bank carries regular_shape and whose prompt reports it
// inverted as "Irregular shape" when below threshold.
inline bool is_breast_ultrasound(const std::string& corpus_name) {
  const auto c = str::lower(corpus_name);
  return c == "breast_us" || c == "busbra" || c == "bus-bra" || c == "bus_bra";
}

inline std::string format_score(double probability) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", probability * 100.0);
  return buf;
}

inline std::string diagnosis_text(double y_hat, const LabelSet& labels, double threshold = 0.5) {
  return labels.name(y_hat >= threshold ? 1 : 0);
}

inline ReasoningPrompt build_reasoning_prompt(const Predictions& pred, const ConceptBank& bank, const Guideline& guideline,
                                              const std::string& corpus_name, const LabelSet& labels = LabelSet::binary(),
                                              const ReasoningOptions& opts = {}) {
  if (guideline.kind != GuidelineKind::kDiagnostic)
    throw ValidationError("reasoning requires a diagnostic guideline, got " + guideline.guideline_id);
  if (pred.c_hat.size() != bank.size())
    throw ValidationError("prediction has " + std::to_string(pred.c_hat.size()) + " concept scores, bank '" + bank.id() +
                          "' has " + std::to_string(bank.size()));
  ReasoningPrompt p;
  p.guideline = &guideline;
  p.diagnosis_text = diagnosis_text(pred.y_hat, labels, opts.diagnosis_threshold);
  p.introduction = str::replace_all(kReasoningIntro, "{diagnosis}", p.diagnosis_text);
  const bool ultrasound = is_breast_ultrasound(corpus_name);
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const double c = pred.c_hat[i];
    const std::string score = format_score(c);
    if (c >= opts.concept_threshold) {
      p.concept_lines.push_back(str::capitalize(str::replace_all(bank[i].key, "_", " ")) + " (" + score + "%)\n");
    } else if (ultrasound && bank[i].key == "regular_shape") {
      p.concept_lines.push_back("Irregular shape (" + score + "%)\n");
    }
  }
  const char* guide = guideline.modality == Modality::kFieldGuide ? "field guide" : "BI-RADS clinical guideline";
  p.task_instruction = str::replace_all(kReasoningInstruction, "{guide}", guide);
  std::string concept_data;
  for (const auto& l : p.concept_lines) concept_data += l;
  p.rendered = p.introduction + "\n" + concept_data + "\n" + p.task_instruction + "\n" + guideline.text + "\n";
  p.prompt_hash = sha256_hex(p.rendered);
  return p;
}

}  // namespace medcbr

#pragma once

#include <string>
#include <vector>

#include "medcbr/corpus/concept_bank.hpp"
#include "medcbr/corpus/sample.hpp"
#include "medcbr/guidelines.hpp"
#include "medcbr/util/digest.hpp"
#include "medcbr/util/error.hpp"
#include "medcbr/util/strings.hpp"

namespace medcbr {

// Free-text slots of the report prompt, rendered from configuration.
struct ReportPromptSlots {
  std::string modality_text = "breast ultrasound";
  std::string type_of_guideline = "BI-RADS reporting";
  // "{label}" is replaced with the sample's label text.
  std::string auxiliary_template = "The pathology of this lesion is {label}.";

  static ReportPromptSlots for_modality(Modality m) {
    switch (m) {
      case Modality::kUltrasound: return {};
      case Modality::kMammography: return {"mammography", "BI-RADS reporting", "The pathology of this lesion is {label}."};
      case Modality::kFieldGuide: return {"bird", "field guide", "The species is {label}."};
    }
    return {};
  }
};

struct EnrichmentRequest {
  const SampleRecord* sample = nullptr;
  const ConceptBank* bank = nullptr;
  const Guideline* guideline = nullptr;
  std::string label_text;
  ReportPromptSlots slots;
  std::filesystem::path image_file;
};

inline std::vector<std::string> extract_positive_concepts(const std::vector<std::uint8_t>& concepts,
                                                          const ConceptBank& bank) {
  if (concepts.size() != bank.size())
    throw ValidationError("concept vector length " + std::to_string(concepts.size()) +
                          " does not match bank size " + std::to_string(bank.size()));
  std::vector<std::string> out;
  for (std::size_t i = 0; i < concepts.size(); ++i)
    if (concepts[i] == 1) out.push_back(bank[i].display_name);
  return out;
}

inline constexpr const char* kReportConceptHeader =
    "Finally, you are given the following 'concepts' that are present in the image.\n";
inline constexpr const char* kReportClosing =
    "Write a report based on the image, the guideline provided, and the concepts present in the image.";

inline std::string build_lvlm_prompt(const EnrichmentRequest& req) {
  if (!req.sample || !req.bank || !req.guideline) throw ValidationError("incomplete enrichment request");
  if (req.guideline->kind != GuidelineKind::kReporting)
    throw ValidationError("enrichment requires a reporting guideline, got " + req.guideline->guideline_id);
  std::string concept_data = kReportConceptHeader;
  for (const auto& name : extract_positive_concepts(req.sample->concepts, *req.bank)) concept_data += name + ": 1\n";
  const auto auxiliary = str::replace_all(req.slots.auxiliary_template, "{label}", req.label_text);
  std::string p;
  p += "\nYou are given the following " + req.slots.modality_text + " <image>. " + auxiliary + "\n";
  p += "You are also given the following " + req.slots.type_of_guideline + " guideline:\n\n";
  p += req.guideline->text + "\n\n";
  p += concept_data + "\n\n";
  p += std::string(kReportClosing) + "\n";
  return p;
}

inline std::string prompt_hash(const std::string& prompt) { return sha256_hex(prompt); }

}  // namespace medcbr

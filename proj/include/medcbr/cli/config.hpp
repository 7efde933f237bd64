#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "medcbr/enrichment/http_client.hpp"
#include "medcbr/enrichment/lvlm_prompt.hpp"
#include "medcbr/guidelines.hpp"
#include "medcbr/reasoning/prompt.hpp"
#include "medcbr/training/fit.hpp"
#include "medcbr/util/digest.hpp"
#include "medcbr/util/error.hpp"

namespace medcbr {

struct CorpusSection {
  std::string manifest = "data/synthetic/manifest.csv";
  std::string bank = "synthetic:6";
  int folds = 5;
  std::uint64_t seed = 0;
  bool check_images = true;
};

struct EnrichmentSection {
  std::string client = "stub-lvlm-v1";  // or "http"
  std::string guideline = "ultrasound_reporting";
  std::string guideline_dir;  // empty: bundled assets
  std::string cache_dir = "cache/reports";
  unsigned threads = 1;
  ReportPromptSlots slots;
  HttpClientConfig http;
};

struct ReasoningSection {
  std::string client = "stub-lrm-v1";  // or "http"
  std::string guideline = "ultrasound_diagnostic";
  ReasoningOptions options;
  HttpClientConfig http;
};

struct RunConfig {
  CorpusSection corpus;
  EnrichmentSection enrichment;
  EncoderConfig encoder;
  VariantSpec variant;
  TrainConfig train;
  ReasoningSection reasoning;
  double eval_threshold = 0.5;
  std::string output_dir = "runs/synthetic";
};

// Defaults tuned for the synthetic corpus: tiny encoders train from scratch,
// so the learning rate and schedule are shorter than for pretrained weights.
inline RunConfig default_run_config() {
  RunConfig c;
  c.encoder.n_concepts = 6;
  c.train.lr = 3e-3;
  c.train.epochs = 30;
  c.train.warmup_epochs = 2;
  c.train.early_stop.patience = 0;
  return c;
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["corpus"] = {{"manifest", c.corpus.manifest},
                 {"bank", c.corpus.bank},
                 {"folds", c.corpus.folds},
                 {"seed", c.corpus.seed},
                 {"check_images", c.corpus.check_images}};
  j["enrichment"] = {{"client", c.enrichment.client},
                     {"guideline", c.enrichment.guideline},
                     {"guideline_dir", c.enrichment.guideline_dir},
                     {"cache_dir", c.enrichment.cache_dir},
                     {"threads", c.enrichment.threads},
                     {"slots",
                      {{"modality_text", c.enrichment.slots.modality_text},
                       {"type_of_guideline", c.enrichment.slots.type_of_guideline},
                       {"auxiliary_template", c.enrichment.slots.auxiliary_template}}},
                     {"http", to_json(c.enrichment.http)}};
  j["model"] = {{"encoder", to_json(c.encoder)}, {"variant", to_json(c.variant)}, {"train", to_json(c.train)}};
  j["reasoning"] = {{"client", c.reasoning.client},
                    {"guideline", c.reasoning.guideline},
                    {"concept_threshold", c.reasoning.options.concept_threshold},
                    {"diagnosis_threshold", c.reasoning.options.diagnosis_threshold},
                    {"http", to_json(c.reasoning.http)}};
  j["eval"] = {{"threshold", c.eval_threshold}};
  j["output_dir"] = c.output_dir;
  return j;
}

namespace detail {
// Copies `user` over `base`, rejecting keys the base does not define.
inline void merge_strict(nlohmann::json& base, const nlohmann::json& user, const std::string& path) {
  if (!user.is_object()) throw ValidationError("config field '" + path + "' must be an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string p = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw ValidationError("unknown config field '" + p + "'");
    auto& slot = base[it.key()];
    if (slot.is_object()) merge_strict(slot, it.value(), p);
    else slot = it.value();
  }
}
}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& user) {
  nlohmann::json j = to_json(default_run_config());
  detail::merge_strict(j, user, "");
  RunConfig c;
  auto field = [](const char* name, auto&& fn) {
    try {
      fn();
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("config field '") + name + "': " + e.what());
    }
  };
  field("corpus", [&] {
    const auto& s = j.at("corpus");
    c.corpus.manifest = s.at("manifest");
    c.corpus.bank = s.at("bank");
    c.corpus.folds = s.at("folds");
    c.corpus.seed = s.at("seed");
    c.corpus.check_images = s.at("check_images");
  });
  field("enrichment", [&] {
    const auto& s = j.at("enrichment");
    c.enrichment.client = s.at("client");
    c.enrichment.guideline = s.at("guideline");
    c.enrichment.guideline_dir = s.at("guideline_dir");
    c.enrichment.cache_dir = s.at("cache_dir");
    c.enrichment.threads = s.at("threads");
    c.enrichment.slots.modality_text = s.at("slots").at("modality_text");
    c.enrichment.slots.type_of_guideline = s.at("slots").at("type_of_guideline");
    c.enrichment.slots.auxiliary_template = s.at("slots").at("auxiliary_template");
    c.enrichment.http = http_client_config_from_json(s.at("http"));
  });
  field("model.encoder", [&] { c.encoder = encoder_config_from_json(j.at("model").at("encoder")); });
  field("model.variant", [&] { c.variant = variant_from_json(j.at("model").at("variant")); });
  field("model.train", [&] { c.train = train_config_from_json(j.at("model").at("train")); });
  field("reasoning", [&] {
    const auto& s = j.at("reasoning");
    c.reasoning.client = s.at("client");
    c.reasoning.guideline = s.at("guideline");
    c.reasoning.options.concept_threshold = s.at("concept_threshold");
    c.reasoning.options.diagnosis_threshold = s.at("diagnosis_threshold");
    c.reasoning.http = http_client_config_from_json(s.at("http"));
  });
  field("eval", [&] { c.eval_threshold = j.at("eval").at("threshold"); });
  field("output_dir", [&] { c.output_dir = j.at("output_dir"); });
  return c;
}

// "a.b.c=value"; value parsed as JSON when possible, else taken as a string.
inline void apply_override(nlohmann::json& user, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError("override '" + assignment + "' must look like key.path=value");
  const std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  nlohmann::json* node = &user;
  const auto parts = str::split(key, '.');
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i]) || !(*node)[parts[i]].is_object()) (*node)[parts[i]] = nlohmann::json::object();
    node = &(*node)[parts[i]];
  }
  (*node)[parts.back()] = value;
}

inline RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  nlohmann::json user = nlohmann::json::object();
  if (!path.empty()) {
    try {
      user = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(user, o);
  auto c = run_config_from_json(user);
  c.train.validate();
  c.variant.validate();
  if (c.corpus.folds < 2) throw ValidationError("config field 'corpus.folds' must be >= 2");
  if (!(c.eval_threshold > 0 && c.eval_threshold < 1)) throw ValidationError("config field 'eval.threshold' must be in (0,1)");
  return c;
}

// "<modality>_<kind>", e.g. ultrasound_diagnostic or field_guide_reporting.
inline std::pair<GuidelineKind, Modality> parse_guideline_id(const std::string& id) {
  const auto us = id.rfind('_');
  if (us == std::string::npos) throw ValidationError("guideline id '" + id + "' must look like <modality>_<kind>");
  return {parse_guideline_kind(id.substr(us + 1)), parse_modality(id.substr(0, us))};
}

}  // namespace medcbr

#pragma once

#include <algorithm>
#include <atomic>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "medcbr/corpus/concept_bank.hpp"
#include "medcbr/corpus/sample.hpp"
#include "medcbr/enrichment/client.hpp"
#include "medcbr/reasoning/prompt.hpp"
#include "medcbr/util/error.hpp"
#include "medcbr/util/strings.hpp"

namespace medcbr {

enum class Grounding { kGrounded, kUngrounded };

inline const char* to_string(Grounding g) { return g == Grounding::kGrounded ? "grounded" : "ungrounded"; }

struct GroundingEntry {
  std::string term;
  Grounding status = Grounding::kGrounded;
};

struct Explanation {
  std::string raw_text;
  std::optional<Birads> inferred_birads;
  std::optional<std::string> follow_up;
  std::vector<GroundingEntry> grounding_report;

  std::vector<std::string> ungrounded_terms() const {
    std::vector<std::string> out;
    for (const auto& g : grounding_report)
      if (g.status == Grounding::kUngrounded) out.push_back(g.term);
    return out;
  }
};

// Last "BI-RADS <category>" occurrence wins.
inline std::optional<Birads> extract_birads(const std::string& text) {
  static const std::regex re(R"(BI-?RADS(?:\s*[:\-]?\s*(?:category\s*)?)(4[ABC]|[235])(?![0-9A-Za-z]))",
                             std::regex::icase);
  std::optional<Birads> last;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it)
    last = parse_birads((*it)[1].str());
  return last;
}

inline const std::vector<std::string>& default_follow_up_keywords() {
  static const std::vector<std::string> k{"follow-up", "biopsy", "routine screening"};
  return k;
}

// The sentence holding the earliest keyword occurrence.
inline std::optional<std::string> extract_follow_up(const std::string& text,
                                                    const std::vector<std::string>& keywords = default_follow_up_keywords()) {
  const std::string low = str::lower(text);
  std::size_t best = std::string::npos;
  for (const auto& k : keywords) {
    auto pos = low.find(str::lower(k));
    if (pos < best) best = pos;
  }
  if (best == std::string::npos) return std::nullopt;
  auto is_end = [&](std::size_t i) {
    const char c = text[i];
    if (c == '\n') return true;
    return (c == '.' || c == '!' || c == '?') && (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])));
  };
  std::size_t start = best;
  while (start > 0 && !is_end(start - 1)) --start;
  std::size_t end = best;
  while (end < text.size() && !is_end(end)) ++end;
  if (end < text.size() && text[end] != '\n') ++end;
  return std::string(str::trim(std::string_view(text).substr(start, end - start)));
}

namespace detail {
inline bool contains_words(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > hay.size()) return false;
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}
}  // namespace detail

// Bank display names mentioned in the explanation, each classified against the
// prompt's concept lines and guideline text. Matching is case-insensitive on
// whole-word sequences.
inline std::vector<GroundingEntry> validate_grounding(const std::string& raw_text, const ReasoningPrompt& prompt,
                                                      const ConceptBank& bank) {
  const auto text_words = str::words(raw_text);
  std::string concept_block;
  for (const auto& l : prompt.concept_lines) concept_block += l;
  const auto concept_words = str::words(concept_block);
  const auto guideline_words = str::words(prompt.guideline ? prompt.guideline->text : std::string());
  std::vector<GroundingEntry> out;
  for (const auto& e : bank.entries()) {
    const auto w = str::words(e.display_name);
    if (!detail::contains_words(text_words, w)) continue;
    const bool grounded = detail::contains_words(concept_words, w) || detail::contains_words(guideline_words, w);
    out.push_back({e.display_name, grounded ? Grounding::kGrounded : Grounding::kUngrounded});
  }
  return out;
}

inline Explanation parse_explanation(std::string raw_text, const ReasoningPrompt& prompt, const ConceptBank& bank) {
  Explanation e;
  e.raw_text = std::move(raw_text);
  e.inferred_birads = extract_birads(e.raw_text);
  e.follow_up = extract_follow_up(e.raw_text);
  e.grounding_report = validate_grounding(e.raw_text, prompt, bank);
  return e;
}

inline Explanation generate_explanation(GenerationClient& client, const ReasoningPrompt& prompt, const ConceptBank& bank) {
  std::string text;
  try {
    text = client.generate(prompt.rendered, nullptr);
  } catch (const ClientFailure& f) {
    if (f.retryable()) throw RetryableError("", std::string("reasoning client failed: ") + f.what());
    throw;
  }
  if (str::trim(text).empty()) throw RetryableError("", "reasoning client returned an empty explanation");
  return parse_explanation(std::move(text), prompt, bank);
}

// Deterministic reasoning stand-in: restates the prompted diagnosis and
// concepts and assigns a category from the diagnosis word.
class StubReasoningClient final : public GenerationClient {
 public:
  std::string id() const override { return "stub-lrm-v1"; }

  std::string generate(const std::string& prompt, const Attachment*) override {
    ++calls_;
    static constexpr std::string_view kLead = "which is ";
    std::string diagnosis = "unknown";
    if (auto pos = prompt.find(kLead); pos != std::string::npos) {
      auto end = prompt.find(". ", pos);
      diagnosis = prompt.substr(pos + kLead.size(), end - pos - kLead.size());
    }
    std::vector<std::string> lines;
    std::istringstream in(prompt);
    std::string line;
    std::getline(in, line);  // introduction
    std::getline(in, line);  // blank separator
    while (std::getline(in, line) && !line.empty()) lines.push_back(line);

    std::ostringstream out;
    out << "The predicted diagnosis is " << diagnosis << ".";
    for (const auto& l : lines) {
      auto paren = l.rfind(" (");
      out << " " << l.substr(0, paren) << " was detected with a score of " << l.substr(paren + 2, l.size() - paren - 3)
          << ".";
    }
    if (lines.empty()) out << " No concepts were detected above threshold.";
    const bool malignant = str::lower(diagnosis) == "malignant";
    out << "\nThese findings are interpreted as " << (malignant ? "suspicious" : "probably benign")
        << " under the provided guideline.\n";
    out << "The most likely category is BI-RADS " << (malignant ? "4C" : "3") << ".\n";
    out << (malignant ? "Recommended follow-up: tissue biopsy is advised."
                      : "Recommended follow-up: short-interval follow-up imaging in 6 months.")
        << "\n";
    return out.str();
  }

  std::size_t calls() const noexcept { return calls_; }

 private:
  std::atomic<std::size_t> calls_{0};
};

// One line of the explanation transcript file.
struct Transcript {
  std::string sample_id;
  std::string client_id;
  std::string prompt_hash;
  std::string prompt;
  Explanation explanation;
  std::string created_at;
};

inline nlohmann::json to_json(const Transcript& t) {
  nlohmann::json g = nlohmann::json::array();
  for (const auto& e : t.explanation.grounding_report) g.push_back({{"term", e.term}, {"status", to_string(e.status)}});
  nlohmann::json j = {{"sample_id", t.sample_id},
                      {"client_id", t.client_id},
                      {"prompt_hash", t.prompt_hash},
                      {"prompt", t.prompt},
                      {"raw_text", t.explanation.raw_text},
                      {"grounding", g},
                      {"created_at", t.created_at}};
  j["inferred_birads"] = t.explanation.inferred_birads ? nlohmann::json(std::string(to_string(*t.explanation.inferred_birads)))
                                                       : nlohmann::json(nullptr);
  j["follow_up"] = t.explanation.follow_up ? nlohmann::json(*t.explanation.follow_up) : nlohmann::json(nullptr);
  return j;
}

inline Transcript transcript_from_json(const nlohmann::json& j) {
  Transcript t;
  t.sample_id = j.at("sample_id");
  t.client_id = j.at("client_id");
  t.prompt_hash = j.at("prompt_hash");
  t.prompt = j.at("prompt");
  t.explanation.raw_text = j.at("raw_text");
  if (!j.at("inferred_birads").is_null()) t.explanation.inferred_birads = parse_birads(j.at("inferred_birads").get<std::string>());
  if (!j.at("follow_up").is_null()) t.explanation.follow_up = j.at("follow_up").get<std::string>();
  for (const auto& g : j.at("grounding"))
    t.explanation.grounding_report.push_back(
        {g.at("term"), g.at("status").get<std::string>() == "grounded" ? Grounding::kGrounded : Grounding::kUngrounded});
  t.created_at = j.value("created_at", "");
  return t;
}

inline std::vector<Transcript> load_transcripts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LookupError("cannot open transcripts " + path.string());
  std::vector<Transcript> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (str::trim(line).empty()) continue;
    try {
      out.push_back(transcript_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace medcbr

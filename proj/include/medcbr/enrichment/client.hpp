#pragma once

#include <atomic>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "medcbr/util/error.hpp"
#include "medcbr/util/strings.hpp"

namespace medcbr {

// Opaque image attachment; clients decide whether and how to transmit it.
struct Attachment {
  std::filesystem::path image_path;
};

// Raised by clients. Retryable failures (timeouts, 5xx, 429) are distinguished
// from permanent ones (bad request, auth).
class ClientFailure : public Error {
 public:
  ClientFailure(const std::string& what, bool retryable) : Error(what), retryable_(retryable) {}
  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

class GenerationClient {
 public:
  virtual ~GenerationClient() = default;
  virtual std::string id() const = 0;
  virtual std::string generate(const std::string& prompt, const Attachment* attachment) = 0;
};

// Lines following the enrichment concept header, "<Display name>: 1".
inline std::vector<std::string> parse_enrichment_concepts(std::string_view prompt) {
  static constexpr std::string_view kHeader = "Finally, you are given the following 'concepts'";
  std::vector<std::string> names;
  auto pos = prompt.find(kHeader);
  if (pos == std::string_view::npos) return names;
  std::istringstream in(std::string(prompt.substr(pos)));
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) break;
    static constexpr std::string_view kSuffix = ": 1";
    if (line.size() > kSuffix.size() && line.substr(line.size() - kSuffix.size()) == kSuffix)
      names.push_back(line.substr(0, line.size() - kSuffix.size()));
  }
  return names;
}

// Fixed sentence frame around the positive concept names.
inline std::string stub_report_text(const std::vector<std::string>& concept_names) {
  std::string findings;
  if (concept_names.empty()) {
    findings = "no lexicon findings";
  } else {
    for (std::size_t i = 0; i < concept_names.size(); ++i) {
      if (i) findings += (i + 1 == concept_names.size()) ? " and " : ", ";
      findings += str::lower(concept_names[i]);
    }
  }
  return "FINDINGS: The image demonstrates " + findings +
         ". IMPRESSION: Findings are described according to the provided guideline.";
}

// Deterministic offline report generator. Ignores the attachment.
class StubReportClient final : public GenerationClient {
 public:
  std::string id() const override { return "stub-lvlm-v1"; }
  std::string generate(const std::string& prompt, const Attachment*) override {
    ++calls_;
    return stub_report_text(parse_enrichment_concepts(prompt));
  }
  std::size_t calls() const noexcept { return calls_; }

 private:
  std::atomic<std::size_t> calls_{0};
};

}  // namespace medcbr

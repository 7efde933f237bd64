#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "medcbr/util/digest.hpp"
#include "medcbr/util/error.hpp"
#include "medcbr/util/strings.hpp"

namespace medcbr {

enum class GuidelineKind { kReporting, kDiagnostic };
enum class Modality { kUltrasound, kMammography, kFieldGuide };

inline std::string_view to_string(GuidelineKind k) {
  return k == GuidelineKind::kReporting ? "reporting" : "diagnostic";
}

inline std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::kUltrasound: return "ultrasound";
    case Modality::kMammography: return "mammography";
    case Modality::kFieldGuide: return "field_guide";
  }
  return "?";
}

inline GuidelineKind parse_guideline_kind(std::string_view s) {
  if (s == "reporting") return GuidelineKind::kReporting;
  if (s == "diagnostic") return GuidelineKind::kDiagnostic;
  throw ValidationError("unknown guideline kind '" + std::string(s) + "'");
}

inline Modality parse_modality(std::string_view s) {
  if (s == "ultrasound") return Modality::kUltrasound;
  if (s == "mammography") return Modality::kMammography;
  if (s == "field_guide") return Modality::kFieldGuide;
  throw ValidationError("unknown modality '" + std::string(s) + "'");
}

struct Guideline {
  std::string guideline_id;  // "<modality>_<kind>"
  GuidelineKind kind = GuidelineKind::kReporting;
  Modality modality = Modality::kUltrasound;
  std::string text;
  std::string version_hash;  // sha256 of text

  static Guideline make(GuidelineKind kind, Modality modality, std::string text) {
    if (str::trim(text).empty())
      throw ValidationError("guideline " + std::string(to_string(modality)) + "_" +
                            std::string(to_string(kind)) + " has empty text");
    Guideline g;
    g.kind = kind;
    g.modality = modality;
    g.guideline_id = std::string(to_string(modality)) + "_" + std::string(to_string(kind));
    g.version_hash = sha256_hex(text);
    g.text = std::move(text);
    return g;
  }
};

// Asset files may open with "%%" header lines (provenance notes). They are not
// part of the guideline text and do not enter the digest.
inline std::string strip_asset_header(std::string_view raw) {
  std::size_t pos = 0;
  while (pos < raw.size() && raw.substr(pos, 2) == "%%") {
    auto nl = raw.find('\n', pos);
    if (nl == std::string_view::npos) return {};
    pos = nl + 1;
  }
  std::string text(raw.substr(pos));
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}

// Immutable after load: one guideline per (kind, modality).
class GuidelineRegistry {
 public:
  GuidelineRegistry() = default;

  // Directory layout: <modality>_<kind>.txt; field_guide.txt serves both kinds.
  static GuidelineRegistry load(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw ValidationError("guideline directory not found: " + dir.string());
    GuidelineRegistry reg;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      auto stem = f.stem().string();
      auto text = strip_asset_header(read_file(f));
      if (stem == "field_guide") {
        reg.add(Guideline::make(GuidelineKind::kReporting, Modality::kFieldGuide, text));
        reg.add(Guideline::make(GuidelineKind::kDiagnostic, Modality::kFieldGuide, text));
        continue;
      }
      auto us = stem.rfind('_');
      if (us == std::string::npos) throw ValidationError("guideline file '" + f.filename().string() + "' does not follow <modality>_<kind>.txt");
      reg.add(Guideline::make(parse_guideline_kind(stem.substr(us + 1)), parse_modality(stem.substr(0, us)), text));
    }
    return reg;
  }

  void add(Guideline g) {
    auto key = std::make_pair(g.kind, g.modality);
    if (entries_.count(key)) throw ValidationError("duplicate guideline " + g.guideline_id);
    entries_.emplace(key, std::move(g));
  }

  const Guideline& get(GuidelineKind kind, Modality modality) const {
    auto it = entries_.find({kind, modality});
    if (it != entries_.end()) return it->second;
    std::string avail;
    for (const auto& [k, g] : entries_) avail += (avail.empty() ? "" : ", ") + g.guideline_id;
    throw LookupError("no guideline for (" + std::string(to_string(kind)) + ", " +
                      std::string(to_string(modality)) + "); available: [" + avail + "]");
  }

  std::size_t size() const noexcept { return entries_.size(); }

  std::vector<const Guideline*> all() const {
    std::vector<const Guideline*> out;
    for (const auto& [k, g] : entries_) out.push_back(&g);
    return out;
  }

 private:
  std::map<std::pair<GuidelineKind, Modality>, Guideline> entries_;
};

inline const Guideline& get_guideline(const GuidelineRegistry& reg, GuidelineKind kind, Modality modality) {
  return reg.get(kind, modality);
}

// Field guides hold "[[Species]]" sections; returns one species' entry.
inline std::map<std::string, std::string> field_guide_entries(const Guideline& g) {
  std::map<std::string, std::string> out;
  std::istringstream in(g.text);
  std::string line, current, body;
  auto flush = [&] {
    if (!current.empty()) out[current] = std::string(str::trim(body));
    body.clear();
  };
  while (std::getline(in, line)) {
    auto t = str::trim(line);
    if (t.size() > 4 && str::starts_with(t, "[[") && t.substr(t.size() - 2) == "]]") {
      flush();
      current = std::string(t.substr(2, t.size() - 4));
    } else {
      body += line + "\n";
    }
  }
  flush();
  return out;
}

inline std::string field_guide_entry(const Guideline& g, const std::string& species) {
  auto entries = field_guide_entries(g);
  auto it = entries.find(species);
  if (it == entries.end()) throw LookupError("field guide has no entry for '" + species + "'");
  return it->second;
}

}  // namespace medcbr

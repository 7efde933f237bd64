#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "medcbr/util/csv.hpp"
#include "medcbr/util/error.hpp"
#include "medcbr/util/strings.hpp"

namespace medcbr {

struct ConceptEntry {
  std::string key;           // snake_case identity
  std::string display_name;  // derived from key
  std::string category;
};

// Display rule used by every prompt: underscores become spaces, first letter
// upper-cased, the rest lower-cased ("skin_thickening" -> "Skin thickening").
inline std::string display_name_for(std::string_view key) {
  return str::capitalize(str::replace_all(std::string(key), "_", " "));
}

inline bool is_snake_case(std::string_view key) {
  if (key.empty() || key.front() == '_' || key.back() == '_') return false;
  for (unsigned char c : key)
    if (!(std::islower(c) || std::isdigit(c) || c == '_')) return false;
  return true;
}

// Ordered, named concept vocabulary. Index i is the identity of concept c_i.
class ConceptBank {
 public:
  ConceptBank() = default;

  ConceptBank(std::string bank_id, std::vector<ConceptEntry> entries)
      : bank_id_(std::move(bank_id)), entries_(std::move(entries)) {
    std::unordered_set<std::string> seen;
    for (auto& e : entries_) {
      if (!is_snake_case(e.key)) throw ValidationError("concept key '" + e.key + "' is not snake_case");
      if (!seen.insert(e.key).second) throw ValidationError("duplicate concept key '" + e.key + "'");
      auto derived = display_name_for(e.key);
      if (e.display_name.empty()) e.display_name = derived;
      if (e.display_name != derived)
        throw ValidationError("concept '" + e.key + "': display name '" + e.display_name +
                              "' does not match derived '" + derived + "'");
    }
  }

  // Convenience: (key, category) pairs, display names derived.
  static ConceptBank from_keys(std::string bank_id,
                               const std::vector<std::pair<std::string, std::string>>& keys) {
    std::vector<ConceptEntry> entries;
    entries.reserve(keys.size());
    for (const auto& [k, cat] : keys) entries.push_back({k, display_name_for(k), cat});
    return ConceptBank(std::move(bank_id), std::move(entries));
  }

  const std::string& id() const noexcept { return bank_id_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<ConceptEntry>& entries() const noexcept { return entries_; }
  const ConceptEntry& operator[](std::size_t i) const { return entries_.at(i); }

  std::optional<std::size_t> index_of(std::string_view key) const {
    for (std::size_t i = 0; i < entries_.size(); ++i)
      if (entries_[i].key == key) return i;
    return std::nullopt;
  }

  std::vector<std::string> display_names() const {
    std::vector<std::string> out;
    for (const auto& e : entries_) out.push_back(e.display_name);
    return out;
  }

  friend bool operator==(const ConceptBank& a, const ConceptBank& b) {
    if (a.bank_id_ != b.bank_id_ || a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
      const auto &x = a.entries_[i], &y = b.entries_[i];
      if (x.key != y.key || x.display_name != y.display_name || x.category != y.category) return false;
    }
    return true;
  }

 private:
  std::string bank_id_;
  std::vector<ConceptEntry> entries_;
};

// Bank file: "key,display_name,category" rows. The bank id is the file stem.
inline ConceptBank load_concept_bank(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open concept bank " + path.string());
  auto table = csv::read(in);
  auto ck = table.column("key"), cd = table.column("display_name"), cc = table.column("category");
  std::vector<ConceptEntry> entries;
  for (auto& [line, row] : table.rows) entries.push_back({row[ck], row[cd], row[cc]});
  return ConceptBank(path.stem().string(), std::move(entries));
}

inline void save_concept_bank(const ConceptBank& bank, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write concept bank " + path.string());
  csv::write_row(out, {"key", "display_name", "category"});
  for (const auto& e : bank.entries()) csv::write_row(out, {e.key, e.display_name, e.category});
}

}  // namespace medcbr

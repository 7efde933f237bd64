#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "medcbr/corpus/concept_bank.hpp"
#include "medcbr/corpus/sample.hpp"
#include "medcbr/util/csv.hpp"
#include "medcbr/util/error.hpp"
#include "medcbr/util/strings.hpp"

namespace medcbr {

struct DatasetManifest {
  std::string corpus_name;
  std::string bank_id;
  LabelSet labels = LabelSet::binary();
  std::vector<SampleRecord> records;
  std::filesystem::path base_dir;  // image paths resolve against this

  std::filesystem::path image_file(const SampleRecord& r) const {
    std::filesystem::path p(r.image_path);
    return p.is_absolute() ? p : base_dir / p;
  }

  std::size_t patient_count() const {
    std::unordered_set<std::string> ids;
    for (const auto& r : records) ids.insert(r.patient_id);
    return ids.size();
  }

  const SampleRecord& by_id(const std::string& sample_id) const {
    for (const auto& r : records)
      if (r.sample_id == sample_id) return r;
    throw LookupError("no sample '" + sample_id + "' in manifest");
  }
};

inline std::string concepts_to_string(const std::vector<std::uint8_t>& c) {
  std::string s;
  s.reserve(c.size());
  for (auto v : c) s.push_back(v ? '1' : '0');
  return s;
}

struct ManifestLoadOptions {
  bool check_images = true;
};

namespace detail {

[[noreturn]] inline void row_error(std::size_t row, std::string_view field, const std::string& what) {
  throw ValidationError("manifest row " + std::to_string(row) + ", field '" + std::string(field) +
                        "': " + what);
}

inline int parse_label(const LabelSet& labels, const std::string& token, std::size_t row) {
  for (std::size_t i = 0; i < labels.names.size(); ++i)
    if (str::lower(token) == labels.names[i]) return static_cast<int>(i);
  if (!token.empty() && token.find_first_not_of("0123456789") == std::string::npos) {
    auto v = std::stoll(token);
    if (v >= 0 && static_cast<std::size_t>(v) < labels.size()) return static_cast<int>(v);
  }
  row_error(row, "label", "'" + token + "' is not in the label set");
}

}  // namespace detail

// Manifest layout:
//   #corpus_name=<name>          optional metadata comments
//   #labels=benign|malignant     optional, defaults to binary
//   sample_id,patient_id,image_path,label,birads,concepts[,split_tag]
//   rows...
inline DatasetManifest load_manifest(const std::filesystem::path& path, const ConceptBank& bank,
                                     const ManifestLoadOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest " + path.string());

  DatasetManifest m;
  m.bank_id = bank.id();
  m.base_dir = path.parent_path();
  m.corpus_name = path.stem().string();

  // Leading "#key=value" lines carry metadata; the CSV reader skips them too.
  std::stringstream body;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') {
      auto eq = line.find('=');
      if (eq != std::string::npos) {
        auto key = str::trim(std::string_view(line).substr(1, eq - 1));
        auto val = std::string(str::trim(std::string_view(line).substr(eq + 1)));
        if (key == "corpus_name") m.corpus_name = val;
        else if (key == "labels") m.labels.names = str::split(val, '|');
        else if (key == "bank_id" && val != bank.id())
          throw ValidationError("manifest declares bank '" + val + "' but bank '" + bank.id() + "' was given");
      }
    }
    body << line << '\n';
  }

  auto table = csv::read(body);
  const auto c_id = table.column("sample_id"), c_pat = table.column("patient_id"),
             c_img = table.column("image_path"), c_lab = table.column("label"),
             c_bir = table.column("birads"), c_con = table.column("concepts");
  std::optional<std::size_t> c_tag;
  for (std::size_t i = 0; i < table.header.size(); ++i)
    if (table.header[i] == "split_tag") c_tag = i;

  std::unordered_set<std::string> seen;
  std::size_t row_no = 0;
  for (auto& [line_no, row] : table.rows) {
    ++row_no;
    SampleRecord r;
    r.sample_id = row[c_id];
    if (r.sample_id.empty()) detail::row_error(row_no, "sample_id", "empty");
    if (!seen.insert(r.sample_id).second) detail::row_error(row_no, "sample_id", "duplicate '" + r.sample_id + "'");
    r.patient_id = row[c_pat];
    if (r.patient_id.empty()) detail::row_error(row_no, "patient_id", "empty");
    r.image_path = row[c_img];
    if (r.image_path.empty()) detail::row_error(row_no, "image_path", "empty");
    r.label = detail::parse_label(m.labels, row[c_lab], row_no);
    if (!row[c_bir].empty()) {
      r.birads = parse_birads(row[c_bir]);
      if (!r.birads) detail::row_error(row_no, "birads", "'" + row[c_bir] + "' is not a BI-RADS category");
    }
    const auto& cs = row[c_con];
    if (cs.find_first_not_of("01") != std::string::npos)
      detail::row_error(row_no, "concepts", "must be a contiguous 0/1 string");
    if (cs.size() != bank.size())
      throw ValidationError("sample '" + r.sample_id + "': concept vector has length " +
                            std::to_string(cs.size()) + ", bank '" + bank.id() + "' has " +
                            std::to_string(bank.size()));
    for (char ch : cs) r.concepts.push_back(ch == '1');
    if (c_tag && !row[*c_tag].empty()) r.split_tag = row[*c_tag];
    if (opts.check_images && !std::filesystem::exists(m.image_file(r)))
      detail::row_error(row_no, "image_path", "file not found: " + m.image_file(r).string());
    m.records.push_back(std::move(r));
  }
  return m;
}

inline void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write manifest " + path.string());
  out << "#corpus_name=" << m.corpus_name << '\n';
  out << "#bank_id=" << m.bank_id << '\n';
  out << "#labels=";
  for (std::size_t i = 0; i < m.labels.names.size(); ++i) out << (i ? "|" : "") << m.labels.names[i];
  out << '\n';
  bool any_tag = false;
  for (const auto& r : m.records) any_tag |= r.split_tag.has_value();
  std::vector<std::string> header = {"sample_id", "patient_id", "image_path", "label", "birads", "concepts"};
  if (any_tag) header.emplace_back("split_tag");
  csv::write_row(out, header);
  for (const auto& r : m.records) {
    std::vector<std::string> row = {r.sample_id, r.patient_id, r.image_path, m.labels.name(r.label),
                                    r.birads ? std::string(to_string(*r.birads)) : "",
                                    concepts_to_string(r.concepts)};
    if (any_tag) row.push_back(r.split_tag.value_or(""));
    csv::write_row(out, row);
  }
}

}  // namespace medcbr

#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "medcbr/corpus/image_ops.hpp"
#include "medcbr/metrics/rubric.hpp"
#include "medcbr/util/clock.hpp"
#include "medcbr/util/csv.hpp"
#include "medcbr/util/digest.hpp"
#include "medcbr/util/error.hpp"
#include "medcbr/util/strings.hpp"

namespace medcbr {

// Everything needed to assemble one review case. y_true only ever reaches the
// sealed key.
struct ReviewCandidate {
  std::string sample_id;
  int y_true = 0;
  std::filesystem::path image;
  std::string prompt;
  std::string prompt_hash;
  std::string explanation;
};

struct SealedCase {
  std::string case_id;
  std::string sample_id;
  int y_true = 0;
};

struct ExportResult {
  std::vector<std::string> case_ids;
  std::filesystem::path bundle_dir, sealed_key;
};

inline constexpr const char* kBundleManifest = "manifest.json";
inline constexpr const char* kSealedKeyFile = "sealed_key.json";
inline constexpr const char* kImportMarker = "import.json";
inline constexpr const char* kImportedScores = "imported_scores.csv";

// Sorted by sample_id, shuffled with the seed, first n taken.
inline std::vector<std::size_t> select_cases(const std::vector<ReviewCandidate>& cands, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ValidationError("review export: n must be > 0");
  if (n > cands.size())
    throw ValidationError("review export: requested " + std::to_string(n) + " cases but only " +
                          std::to_string(cands.size()) + " are available");
  std::vector<std::size_t> idx(cands.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return cands[a].sample_id < cands[b].sample_id; });
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(n);
  return idx;
}

namespace detail {
inline bool is_within(const std::filesystem::path& child, const std::filesystem::path& parent) {
  const auto c = std::filesystem::weakly_canonical(child), p = std::filesystem::weakly_canonical(parent);
  auto [pe, ce] = std::mismatch(p.begin(), p.end(), c.begin(), c.end());
  return pe == p.end();
}
}  // namespace detail

inline ExportResult export_case_bundles(const std::vector<ReviewCandidate>& cands, std::size_t n, std::uint64_t seed,
                                        const std::filesystem::path& bundle_dir, const std::filesystem::path& sealed_dir) {
  namespace fs = std::filesystem;
  if (detail::is_within(sealed_dir, bundle_dir) || detail::is_within(bundle_dir, sealed_dir))
    throw ValidationError("sealed key directory must be separate from the bundle directory");
  if (fs::exists(bundle_dir) && !fs::is_empty(bundle_dir))
    throw ValidationError("bundle directory " + bundle_dir.string() + " already exists and is not empty");
  const auto picked = select_cases(cands, n, seed);

  std::mt19937_64 id_rng(seed ^ 0x5eedcafe0ddba11ULL);
  std::set<std::string> used;
  std::vector<SealedCase> key;
  ExportResult res;
  res.bundle_dir = bundle_dir;
  for (auto i : picked) {
    const auto& c = cands[i];
    std::string case_id;
    do {
      char buf[24];
      std::snprintf(buf, sizeof buf, "case-%012llx", static_cast<unsigned long long>(id_rng() & 0xffffffffffffULL));
      case_id = buf;
    } while (!used.insert(case_id).second);
    const fs::path dir = bundle_dir / case_id;
    fs::create_directories(dir);
    // Re-encoded so the original file name and metadata do not travel.
    save_image(load_image(c.image), dir / "image.png");
    write_file(dir / "prompt.txt", c.prompt);
    write_file(dir / "explanation.txt", c.explanation);
    nlohmann::json cj = {{"case_id", case_id},
                         {"image", "image.png"},
                         {"prompt", "prompt.txt"},
                         {"explanation", "explanation.txt"},
                         {"prompt_hash", c.prompt_hash}};
    write_file(dir / "case.json", cj.dump(2) + "\n");
    key.push_back({case_id, c.sample_id, c.y_true});
    res.case_ids.push_back(case_id);
  }
  std::vector<std::string> sorted_ids = res.case_ids;
  std::sort(sorted_ids.begin(), sorted_ids.end());
  nlohmann::json manifest = {{"format", "medcbr-review-bundle/1"},
                             {"cases", sorted_ids},
                             {"score_columns", {"case_id", "reviewer_id", "cints", "cigs", "bas"}},
                             {"cints", "correctly interpreted concepts / concepts interpreted, e.g. 6/7"},
                             {"cigs_levels", {0.0, 0.25, 0.75, 1.0}},
                             {"bas_levels", {0.0, 0.8, 1.0}}};
  const std::string manifest_text = manifest.dump(2) + "\n";
  write_file(bundle_dir / kBundleManifest, manifest_text);
  {
    std::ofstream t(bundle_dir / "scores_template.csv");
    csv::write_row(t, {"case_id", "reviewer_id", "cints", "cigs", "bas"});
    for (const auto& id : sorted_ids) csv::write_row(t, {id, "", "", "", ""});
  }

  nlohmann::json sealed = {{"bundle_manifest_sha256", sha256_hex(manifest_text)},
                           {"seed", seed},
                           {"cases", nlohmann::json::array()}};
  for (const auto& k : key)
    sealed["cases"].push_back({{"case_id", k.case_id}, {"sample_id", k.sample_id}, {"y_true", k.y_true}});
  fs::create_directories(sealed_dir);
  res.sealed_key = sealed_dir / kSealedKeyFile;
  write_file(res.sealed_key, sealed.dump(2) + "\n");
  return res;
}

struct SealedKey {
  std::string bundle_manifest_sha256;
  std::vector<SealedCase> cases;
};

inline SealedKey load_sealed_key(const std::filesystem::path& sealed_dir) {
  const auto j = nlohmann::json::parse(read_file(sealed_dir / kSealedKeyFile));
  SealedKey k;
  k.bundle_manifest_sha256 = j.at("bundle_manifest_sha256");
  for (const auto& c : j.at("cases")) k.cases.push_back({c.at("case_id"), c.at("sample_id"), c.at("y_true")});
  return k;
}

inline std::vector<std::string> bundle_case_ids(const std::filesystem::path& bundle_dir) {
  const auto j = nlohmann::json::parse(read_file(bundle_dir / kBundleManifest));
  return j.at("cases").get<std::vector<std::string>>();
}

struct BlindingLeak {
  std::filesystem::path file;
  std::string token;
};

// Field names that would carry ground truth or cohort composition.
inline const std::vector<std::string>& blinding_tokens() {
  static const std::vector<std::string> t{"y_true",    "ground_truth", "ground truth", "true_label", "true label",
                                          "gt_label",  "pathology_label", "cohort",    "n_benign",   "n_malignant",
                                          "prevalence", "class_balance",  "num_cases", "n_cases",    "case_count"};
  return t;
}

// Byte scan of every file under the bundle. extra_tokens typically holds the
// exported sample ids, which must not appear either.
inline std::vector<BlindingLeak> scan_bundle_for_leaks(const std::filesystem::path& bundle_dir,
                                                       const std::vector<std::string>& extra_tokens = {}) {
  std::vector<BlindingLeak> leaks;
  for (const auto& e : std::filesystem::recursive_directory_iterator(bundle_dir)) {
    if (!e.is_regular_file()) continue;
    const std::string low = str::lower(read_file(e.path()));
    for (const auto* list : {&blinding_tokens(), &extra_tokens})
      for (const auto& tok : *list)
        if (!tok.empty() && low.find(str::lower(tok)) != std::string::npos) leaks.push_back({e.path(), tok});
  }
  return leaks;
}

// Validates reviewer scores against the bundle and records the import. The
// sealed key stays locked until this has happened.
inline std::vector<RubricScore> import_review(const std::filesystem::path& bundle_dir,
                                              const std::filesystem::path& scores_csv) {
  auto scores = import_rubric_scores(scores_csv);
  const auto ids = bundle_case_ids(bundle_dir);
  const std::set<std::string> known(ids.begin(), ids.end());
  std::set<std::string> covered;
  for (const auto& s : scores) {
    if (!known.count(s.case_id)) throw ValidationError("rubric score for unknown case '" + s.case_id + "'");
    covered.insert(s.case_id);
  }
  const std::string raw = read_file(scores_csv);
  write_file(bundle_dir / kImportedScores, raw);
  nlohmann::json marker = {{"scores_sha256", sha256_hex(raw)},
                           {"rows", scores.size()},
                           {"cases_scored", covered.size()},
                           {"imported_at", utc_timestamp()}};
  write_file(bundle_dir / kImportMarker, marker.dump(2) + "\n");
  return scores;
}

struct UnsealedCase {
  SealedCase key;
  RubricScore score;
};

struct UnsealResult {
  std::vector<UnsealedCase> rows;
  RubricSummary summary;
  std::size_t cases_joined = 0;
};

inline UnsealResult unseal_review(const std::filesystem::path& bundle_dir, const std::filesystem::path& sealed_dir) {
  if (!std::filesystem::exists(bundle_dir / kImportMarker))
    throw ProtocolError("review-unseal refused: no rubric scores have been imported for " + bundle_dir.string());
  const auto key = load_sealed_key(sealed_dir);
  if (sha256_hex(read_file(bundle_dir / kBundleManifest)) != key.bundle_manifest_sha256)
    throw ProtocolError("sealed key does not belong to bundle " + bundle_dir.string());
  const auto marker = nlohmann::json::parse(read_file(bundle_dir / kImportMarker));
  const std::string raw = read_file(bundle_dir / kImportedScores);
  if (sha256_hex(raw) != marker.at("scores_sha256").get<std::string>())
    throw ProtocolError("imported scores changed after import");
  const auto scores = import_rubric_scores(bundle_dir / kImportedScores);
  std::map<std::string, SealedCase> by_case;
  for (const auto& c : key.cases) by_case[c.case_id] = c;
  UnsealResult r;
  std::set<std::string> joined;
  for (const auto& s : scores) {
    auto it = by_case.find(s.case_id);
    if (it == by_case.end()) throw ProtocolError("scored case '" + s.case_id + "' missing from sealed key");
    r.rows.push_back({it->second, s});
    joined.insert(s.case_id);
  }
  r.cases_joined = joined.size();
  r.summary = aggregate_rubric(scores);
  return r;
}

}  // namespace medcbr

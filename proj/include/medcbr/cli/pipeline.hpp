#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "medcbr/cli/config.hpp"
#include "medcbr/corpus/builtin_banks.hpp"
#include "medcbr/corpus/manifest.hpp"
#include "medcbr/corpus/splits.hpp"
#include "medcbr/corpus/synth.hpp"
#include "medcbr/encoder/checkpoint.hpp"
#include "medcbr/enrichment/cache.hpp"
#include "medcbr/enrichment/client.hpp"
#include "medcbr/enrichment/enrich.hpp"
#include "medcbr/enrichment/http_client.hpp"
#include "medcbr/metrics/report.hpp"
#include "medcbr/metrics/review.hpp"
#include "medcbr/reasoning/explanation.hpp"
#include "medcbr/training/fit.hpp"
#include "medcbr/util/clock.hpp"
#include "medcbr/util/log.hpp"

namespace medcbr {

namespace fs = std::filesystem;

// Everything a run needs, loaded and validated once.
struct Workspace {
  RunConfig cfg;
  fs::path out;
  ConceptBank bank;
  DatasetManifest manifest;
  GuidelineRegistry guidelines;

  static Workspace open(const RunConfig& cfg) {
    Workspace w{cfg, cfg.output_dir, resolve_bank(cfg.corpus.bank), {}, {}};
    ManifestLoadOptions opts;
    opts.check_images = cfg.corpus.check_images;
    w.manifest = load_manifest(cfg.corpus.manifest, w.bank, opts);
    if (static_cast<std::size_t>(cfg.encoder.n_concepts) != w.bank.size())
      throw ValidationError("config field 'model.encoder.n_concepts' is " + std::to_string(cfg.encoder.n_concepts) +
                            " but bank '" + w.bank.id() + "' has " + std::to_string(w.bank.size()) + " concepts");
    w.guidelines = GuidelineRegistry::load(cfg.enrichment.guideline_dir.empty() ? default_asset_dir() / "guidelines"
                                                                                : fs::path(cfg.enrichment.guideline_dir));
    return w;
  }

  const Guideline& guideline(const std::string& id) const {
    auto [kind, modality] = parse_guideline_id(id);
    return guidelines.get(kind, modality);
  }

  fs::path fold_dir(int f) const { return out / ("fold_" + std::to_string(f)); }
};

// Config snapshot plus digests of every input the run read.
inline void write_run_snapshot(const Workspace& w) {
  fs::create_directories(w.out);
  write_file(w.out / "config.json", to_json(w.cfg).dump(2) + "\n");
  nlohmann::json assets = {{"manifest", {{"path", w.cfg.corpus.manifest}, {"sha256", file_sha256(w.cfg.corpus.manifest)}}},
                           {"bank", {{"id", w.bank.id()}, {"size", w.bank.size()}}},
                           {"guidelines", nlohmann::json::object()}};
  for (const auto* g : w.guidelines.all()) assets["guidelines"][g->guideline_id] = g->version_hash;
  write_file(w.out / "assets.json", assets.dump(2) + "\n");
}

inline std::unique_ptr<GenerationClient> make_client(const std::string& name, const HttpClientConfig& http) {
  if (name == "stub-lvlm-v1") return std::make_unique<StubReportClient>();
  if (name == "stub-lrm-v1") return std::make_unique<StubReasoningClient>();
  if (name == "http") return std::make_unique<HttpChatClient>(http);
  throw ValidationError("unknown client '" + name + "' (expected stub-lvlm-v1, stub-lrm-v1 or http)");
}

inline std::string client_id_for(const std::string& name, const HttpClientConfig& http) {
  return name == "http" ? http.client_id : name;
}

// ---- synth / prepare ----

inline DatasetManifest run_synth(std::size_t n, std::size_t n_concepts, std::uint64_t seed, const fs::path& out) {
  auto m = synth::generate(n, synthetic_bank(n_concepts), seed, out);
  log::info("synth: wrote " + std::to_string(m.records.size()) + " samples from " + std::to_string(m.patient_count()) +
            " patients to " + out.string());
  return m;
}

inline SplitPlan load_or_make_plan(const Workspace& w) {
  const auto path = w.out / "folds.json";
  if (fs::exists(path)) {
    auto plan = load_split_plan(path);
    if (plan.k != w.cfg.corpus.folds || plan.seed != w.cfg.corpus.seed)
      throw ValidationError(path.string() + " was made with k=" + std::to_string(plan.k) + ", seed=" +
                            std::to_string(plan.seed) + "; config asks for k=" + std::to_string(w.cfg.corpus.folds) +
                            ", seed=" + std::to_string(w.cfg.corpus.seed));
    return plan;
  }
  auto plan = make_patient_folds(w.manifest, w.cfg.corpus.folds, w.cfg.corpus.seed);
  fs::create_directories(w.out);
  save_split_plan(plan, path);
  return plan;
}

inline SplitPlan run_prepare(const Workspace& w) {
  write_run_snapshot(w);
  const auto plan = load_or_make_plan(w);
  std::ostringstream msg;
  msg << "prepare: " << w.manifest.records.size() << " samples, " << w.manifest.patient_count() << " patients; patients per fold:";
  for (auto s : plan.fold_sizes()) msg << " " << s;
  log::info(msg.str());
  return plan;
}

// ---- enrich ----

inline std::vector<EnrichmentRequest> enrichment_requests(const Workspace& w) {
  const Guideline& g = w.guideline(w.cfg.enrichment.guideline);
  std::vector<EnrichmentRequest> reqs;
  for (const auto& r : w.manifest.records)
    reqs.push_back({&r, &w.bank, &g, w.manifest.labels.name(r.label), w.cfg.enrichment.slots, w.manifest.image_file(r)});
  return reqs;
}

struct EnrichSummary {
  std::size_t total = 0, hits = 0, misses = 0, failures = 0;
  std::vector<EnrichFailure> failed;
  double hit_rate() const { return total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0; }
};

inline EnrichSummary run_enrich(const Workspace& w, GenerationClient& client) {
  ReportCache cache(w.cfg.enrichment.cache_dir);
  EnrichStats stats;
  const auto reqs = enrichment_requests(w);
  EnrichSummary s;
  s.failed = enrich_all(client, reqs, cache, stats, w.cfg.enrichment.threads);
  s.total = reqs.size();
  s.hits = stats.hits;
  s.misses = stats.misses;
  s.failures = s.failed.size();
  fs::create_directories(w.out);
  nlohmann::json j = {{"client_id", client.id()}, {"total", s.total},     {"hits", s.hits},
                      {"misses", s.misses},       {"failures", s.failures}, {"hit_rate", s.hit_rate()}};
  for (const auto& f : s.failed) j["failed"].push_back({{"sample_id", f.sample_id}, {"message", f.message}, {"retryable", f.retryable}});
  write_file(w.out / "enrich_stats.json", j.dump(2) + "\n");
  char buf[160];
  std::snprintf(buf, sizeof buf, "enrich: %zu requests, %zu cache hits (%.1f%%), %zu generated, %zu failed", s.total, s.hits,
                100.0 * s.hit_rate(), s.misses - s.failures, s.failures);
  log::info(buf);
  return s;
}

// Reports for every record that has one in the cache. Missing ones are left
// out; training names the first missing training sample.
inline ReportMap cached_reports(const Workspace& w) {
  ReportMap out;
  if (!w.cfg.variant.uses_text() || !w.cfg.variant.use_guideline_text) return out;
  ReportCache cache(w.cfg.enrichment.cache_dir);
  const auto id = client_id_for(w.cfg.enrichment.client, w.cfg.enrichment.http);
  for (const auto& req : enrichment_requests(w)) {
    try {
      out[req.sample->sample_id] = cached_report(req, id, cache).text;
    } catch (const LookupError&) {
    }
  }
  return out;
}

// ---- train / eval ----

inline std::vector<int> resolve_folds(const std::vector<int>& requested, int k) {
  std::vector<int> folds = requested;
  if (folds.empty())
    for (int f = 0; f < k; ++f) folds.push_back(f);
  for (int f : folds)
    if (f < 0 || f >= k) throw ValidationError("fold " + std::to_string(f) + " out of range for k=" + std::to_string(k));
  return folds;
}

inline FitResult run_train(const Workspace& w, const std::vector<int>& folds) {
  write_run_snapshot(w);
  const auto plan = load_or_make_plan(w);
  const auto reports = cached_reports(w);
  return fit(w.cfg.variant, w.cfg.encoder, w.cfg.train, w.manifest, w.bank, &reports, plan, w.out,
             resolve_folds(folds, plan.k));
}

struct EvalResult {
  std::vector<std::pair<int, MetricsReport>> folds;
  PredictionSet pooled;
  MetricsReport pooled_report;
};

inline nlohmann::json mean_sd(const std::vector<double>& v) {
  if (v.empty()) return nullptr;
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  s = v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0;
  return {{"mean", m}, {"sd", s}, {"n", v.size()}};
}

inline EvalResult run_eval(const Workspace& w, const std::vector<int>& folds_req) {
  const auto plan = load_or_make_plan(w);
  const auto folds = resolve_folds(folds_req, plan.k);
  std::optional<PreparedCorpus> pc;
  EvalResult res;
  res.pooled.concept_keys.clear();
  for (const auto& e : w.bank.entries()) res.pooled.concept_keys.push_back(e.key);
  nlohmann::json per_fold = nlohmann::json::array();
  std::vector<double> aurocs, bal, caucs;
  for (int f : folds) {
    const auto ck_path = w.fold_dir(f) / "checkpoint.bin";
    if (!fs::exists(ck_path)) throw LookupError("no checkpoint for fold " + std::to_string(f) + " at " + ck_path.string());
    const auto ck = load_checkpoint(ck_path);
    if (!pc) pc = prepare_corpus(w.manifest, ck.encoder);
    const auto split = split_for_fold(w.manifest, plan, f);
    const auto ps = predict_indices(ck.params, ck.assembly.head, *pc, split.test, w.bank);
    save_predictions(ps, w.fold_dir(f) / "predictions_test.csv");
    const auto rep = compute_report(ps, w.cfg.eval_threshold);
    write_file(w.fold_dir(f) / "metrics_test.json", to_json(rep).dump(2) + "\n");
    write_file(w.fold_dir(f) / "metrics_test.txt", to_text(rep));
    if (rep.auroc) aurocs.push_back(*rep.auroc);
    if (rep.balanced_accuracy) bal.push_back(*rep.balanced_accuracy);
    if (rep.mean_concept_auroc) caucs.push_back(*rep.mean_concept_auroc);
    nlohmann::json fj = to_json(rep);
    fj["fold"] = f;
    fj["variant"] = ck.variant;
    per_fold.push_back(fj);
    for (const auto& r : ps.records) res.pooled.records.push_back(r);
    res.folds.emplace_back(f, rep);
    log::info("eval fold " + std::to_string(f) + ": auroc=" + (rep.auroc ? std::to_string(*rep.auroc) : "absent") +
              " mean_concept_auroc=" + (rep.mean_concept_auroc ? std::to_string(*rep.mean_concept_auroc) : "absent"));
  }
  res.pooled_report = compute_report(res.pooled, w.cfg.eval_threshold);
  const auto dir = w.out / "eval";
  save_predictions(res.pooled, dir / "predictions.csv");
  write_file(dir / "metrics.txt", to_text(res.pooled_report));
  nlohmann::json summary = {{"variant", to_json(w.cfg.variant)},
                            {"pooled", to_json(res.pooled_report)},
                            {"folds", per_fold},
                            {"across_folds",
                             {{"auroc", mean_sd(aurocs)},
                              {"balanced_accuracy", mean_sd(bal)},
                              {"mean_concept_auroc", mean_sd(caucs)}}}};
  write_file(dir / "metrics.json", summary.dump(2) + "\n");
  return res;
}

// ---- reason ----

inline PredictionSet fold_predictions(const Workspace& w, int fold) {
  const auto path = w.fold_dir(fold) / "predictions_test.csv";
  if (!fs::exists(path)) throw LookupError("no predictions for fold " + std::to_string(fold) + "; run eval first");
  auto ps = load_predictions(path);
  std::vector<std::string> keys;
  for (const auto& e : w.bank.entries()) keys.push_back(e.key);
  if (ps.concept_keys != keys) throw ValidationError(path.string() + " does not match bank '" + w.bank.id() + "'");
  return ps;
}

struct ReasonSummary {
  std::size_t explanations = 0, ungrounded_mentions = 0, with_birads = 0;
  fs::path transcripts;
};

inline ReasonSummary run_reason(const Workspace& w, GenerationClient& client, int fold) {
  const auto ps = fold_predictions(w, fold);
  const Guideline& g = w.guideline(w.cfg.reasoning.guideline);
  ReasonSummary s;
  s.transcripts = w.fold_dir(fold) / "transcripts.jsonl";
  std::ofstream out(s.transcripts, std::ios::trunc);
  for (const auto& r : ps.records) {
    Predictions pred;
    pred.y_hat = r.y_score;
    pred.c_hat = r.c_score;
    const auto prompt = build_reasoning_prompt(pred, w.bank, g, w.manifest.corpus_name, w.manifest.labels, w.cfg.reasoning.options);
    Transcript t;
    t.sample_id = r.sample_id;
    t.client_id = client.id();
    t.prompt_hash = prompt.prompt_hash;
    t.prompt = prompt.rendered;
    try {
      t.explanation = generate_explanation(client, prompt, w.bank);
    } catch (const RetryableError& e) {
      throw RetryableError(r.sample_id, "reason " + r.sample_id + ": " + e.what());
    }
    t.created_at = utc_timestamp();
    out << to_json(t).dump() << '\n';
    ++s.explanations;
    s.ungrounded_mentions += t.explanation.ungrounded_terms().size();
    s.with_birads += t.explanation.inferred_birads.has_value();
  }
  log::info("reason fold " + std::to_string(fold) + ": " + std::to_string(s.explanations) + " explanations, " +
            std::to_string(s.with_birads) + " with a BI-RADS category, " + std::to_string(s.ungrounded_mentions) +
            " ungrounded concept mentions");
  return s;
}

// ---- review ----

inline std::vector<ReviewCandidate> review_candidates(const Workspace& w, int fold) {
  const auto path = w.fold_dir(fold) / "transcripts.jsonl";
  std::vector<ReviewCandidate> out;
  for (const auto& t : load_transcripts(path)) {
    const auto& r = w.manifest.by_id(t.sample_id);
    out.push_back({t.sample_id, r.label, w.manifest.image_file(r), t.prompt, t.prompt_hash, t.explanation.raw_text});
  }
  return out;
}

inline ExportResult run_review_export(const Workspace& w, int fold, std::size_t n, std::uint64_t seed,
                                      const fs::path& bundle_dir, const fs::path& sealed_dir) {
  const auto cands = review_candidates(w, fold);
  auto res = export_case_bundles(cands, n, seed, bundle_dir, sealed_dir);
  std::vector<std::string> ids;
  for (const auto& c : load_sealed_key(sealed_dir).cases) ids.push_back(c.sample_id);
  const auto leaks = scan_bundle_for_leaks(bundle_dir, ids);
  if (!leaks.empty())
    throw ProtocolError("blinding violated: '" + leaks.front().token + "' found in " + leaks.front().file.string());
  log::info("review-export: " + std::to_string(res.case_ids.size()) + " bundles in " + bundle_dir.string() +
            ", sealed key in " + sealed_dir.string());
  return res;
}

inline UnsealResult run_review_unseal(const fs::path& bundle_dir, const fs::path& sealed_dir, const fs::path& out_path) {
  auto r = unseal_review(bundle_dir, sealed_dir);
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& u : r.rows)
    rows.push_back({{"case_id", u.key.case_id},
                    {"sample_id", u.key.sample_id},
                    {"y_true", u.key.y_true},
                    {"reviewer_id", u.score.reviewer_id},
                    {"cints", u.score.cints},
                    {"cigs", u.score.cigs},
                    {"bas", u.score.bas}});
  nlohmann::json j = {{"cases_joined", r.cases_joined},
                      {"rubric",
                       {{"cints", r.summary.mean_cints}, {"cigs", r.summary.mean_cigs}, {"bas", r.summary.mean_bas}, {"n", r.summary.n}}},
                      {"rows", rows}};
  write_file(out_path, j.dump(2) + "\n");
  return r;
}

// ---- report ----

namespace detail {
inline std::string pct_cell(const nlohmann::json& ms) {
  if (ms.is_null()) return "n/a";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.1f ± %.1f", 100.0 * ms.at("mean").get<double>(), 100.0 * ms.at("sd").get<double>());
  return buf;
}
inline std::string pct1(const nlohmann::json& v) {
  if (v.is_null()) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v.get<double>());
  return buf;
}
inline nlohmann::json metric_value(const nlohmann::json& report, const std::string& name) {
  for (const auto& m : report.at("metrics"))
    if (m.at("metric") == name && m.at("scope") == "diagnosis") return m.at("value");
  return nullptr;
}
}  // namespace detail

// Tables in the layout of the classification, ablation and clinical-utility
// tables, over one or more evaluated run directories.
inline std::string run_report(const std::vector<fs::path>& runs, const fs::path& out_dir) {
  std::ostringstream t1, t2, t3;
  t1 << "## Classification (mean ± sd over folds, %)\n\n| Run | Variant | AUROC | Bal. Accuracy | Concept AUROC |\n|---|---|---|---|---|\n";
  t2 << "## Ablation (AUROC, %)\n\n| Variant | Guideline text | AUROC |\n|---|---|---|\n";
  t3 << "## Clinical utility and reasoning (%)\n\n| Run | Sens. | Spec. | F1 | CIntS | CIgS | BAS |\n|---|---|---|---|---|---|---|\n";
  nlohmann::json all = nlohmann::json::array();
  for (const auto& run : runs) {
    const auto mpath = run / "eval" / "metrics.json";
    if (!fs::exists(mpath)) throw LookupError("no evaluation in " + run.string() + "; run eval first");
    const auto m = nlohmann::json::parse(read_file(mpath));
    const auto& v = m.at("variant");
    const std::string kind = v.at("kind");
    const bool guide = v.at("use_guideline_text");
    const auto& af = m.at("across_folds");
    t1 << "| " << run.filename().string() << " | " << kind << (guide ? "+Guideline" : "") << " | "
       << detail::pct_cell(af.at("auroc")) << " | " << detail::pct_cell(af.at("balanced_accuracy")) << " | "
       << detail::pct_cell(af.at("mean_concept_auroc")) << " |\n";
    t2 << "| " << kind << " | " << (guide ? "yes" : "no") << " | " << detail::pct_cell(af.at("auroc")) << " |\n";
    nlohmann::json rubric = nullptr;
    if (fs::exists(run / "review" / "unsealed.json"))
      rubric = nlohmann::json::parse(read_file(run / "review" / "unsealed.json")).at("rubric");
    auto rub = [&](const char* k) {
      if (rubric.is_null()) return std::string("n/a");
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.1f", rubric.at(k).get<double>());
      return std::string(buf);
    };
    const auto& pooled = m.at("pooled");
    t3 << "| " << run.filename().string() << " | " << detail::pct1(detail::metric_value(pooled, "sensitivity")) << " | "
       << detail::pct1(detail::metric_value(pooled, "specificity")) << " | "
       << detail::pct1(detail::metric_value(pooled, "f1")) << " | " << rub("cints") << " | " << rub("cigs") << " | "
       << rub("bas") << " |\n";
    all.push_back({{"run", run.string()}, {"variant", v}, {"across_folds", af}, {"pooled", pooled}, {"rubric", rubric}});
  }
  const std::string text = t1.str() + "\n" + t2.str() + "\n" + t3.str();
  fs::create_directories(out_dir);
  write_file(out_dir / "report.md", "# Run report\n\n" + text);
  write_file(out_dir / "report.json", nlohmann::json{{"runs", all}}.dump(2) + "\n");
  return text;
}

}  // namespace medcbr

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "medcbr/cli/pipeline.hpp"
#include "medcbr/corpus/concept_bank.hpp"

using namespace medcbr;

namespace {

struct Globals {
  std::string config;
  std::vector<std::string> overrides;
  bool quiet = false;
};

RunConfig load(const Globals& g) { return load_run_config(g.config, g.overrides); }

std::string summary_line(const nlohmann::json& j) { return j.dump() + "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"medcbr: concept-bottleneck training, reasoning prompts and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "run config JSON (defaults apply when omitted)");
  app.add_option("--set", g.overrides, "override a config field, e.g. model.train.epochs=5");
  app.add_flag("--quiet", g.quiet, "suppress progress logging");

  std::size_t synth_n = 400, synth_concepts = 6;
  std::uint64_t synth_seed = 0;
  std::string synth_out = "data/synthetic";
  auto* synth = app.add_subcommand("synth", "generate the synthetic concept-encoded corpus");
  synth->add_option("--out", synth_out);
  synth->add_option("--n", synth_n)->check(CLI::PositiveNumber);
  synth->add_option("--concepts", synth_concepts)->check(CLI::Range(3, 64));
  synth->add_option("--seed", synth_seed);

  auto* prepare = app.add_subcommand("prepare", "validate the manifest and write patient-level folds");
  auto* enrich = app.add_subcommand("enrich", "generate guideline-conditioned reports (cached)");

  std::vector<int> folds;
  auto* train = app.add_subcommand("train", "fit one model per fold");
  train->add_option("--fold", folds, "fold index (repeatable; default all)");
  auto* eval = app.add_subcommand("eval", "score held-out folds and write metrics");
  eval->add_option("--fold", folds, "fold index (repeatable; default all)");

  int reason_fold = 0;
  auto* reason = app.add_subcommand("reason", "build reasoning prompts and collect explanations for a test fold");
  reason->add_option("--fold", reason_fold);

  std::size_t review_n = 20;
  std::uint64_t review_seed = 0;
  int review_fold = 0;
  std::string bundle_dir, sealed_dir, scores_csv, unseal_out;
  auto* rexport = app.add_subcommand("review-export", "draw a seeded case sample and write blinded bundles");
  rexport->add_option("--fold", review_fold);
  rexport->add_option("--n", review_n);
  rexport->add_option("--seed", review_seed);
  rexport->add_option("--bundles", bundle_dir)->required();
  rexport->add_option("--sealed", sealed_dir)->required();
  auto* rimport = app.add_subcommand("review-import", "validate and record reviewer rubric scores");
  rimport->add_option("--bundles", bundle_dir)->required();
  rimport->add_option("--scores", scores_csv)->required();
  auto* runseal = app.add_subcommand("review-unseal", "join imported scores with the sealed key");
  runseal->add_option("--bundles", bundle_dir)->required();
  runseal->add_option("--sealed", sealed_dir)->required();
  runseal->add_option("--out", unseal_out, "output JSON (default <output_dir>/review/unsealed.json)");

  std::vector<std::string> report_runs;
  std::string report_out;
  auto* report = app.add_subcommand("report", "aggregate evaluated runs into result tables");
  report->add_option("--run", report_runs, "run directory (repeatable; default output_dir)");
  report->add_option("--out", report_out, "directory for report.md/json (default output_dir)");

  std::string cub_attrs, cub_out = "cub_112.csv";
  auto* cub = app.add_subcommand("bank-from-cub", "rebuild the 112-attribute bank from CUB attributes.txt");
  cub->add_option("attributes", cub_attrs)->required();
  cub->add_option("--out", cub_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }
  log::set_quiet(g.quiet);

  try {
    if (*synth) {
      const auto m = run_synth(synth_n, synth_concepts, synth_seed, synth_out);
      std::cout << summary_line({{"command", "synth"}, {"samples", m.records.size()}, {"out", synth_out}});
      return 0;
    }
    if (*cub) {
      const auto bank = cub_bank_from_attributes(cub_attrs);
      save_concept_bank(bank, cub_out);
      std::cout << summary_line({{"command", "bank-from-cub"}, {"concepts", bank.size()}, {"out", cub_out}});
      return 0;
    }
    if (*rimport) {
      const auto scores = import_review(bundle_dir, scores_csv);
      std::cout << summary_line({{"command", "review-import"}, {"rows", scores.size()}});
      return 0;
    }

    const RunConfig cfg = load(g);
    if (*runseal) {
      const fs::path out = unseal_out.empty() ? fs::path(cfg.output_dir) / "review" / "unsealed.json" : fs::path(unseal_out);
      fs::create_directories(out.parent_path());
      const auto r = run_review_unseal(bundle_dir, sealed_dir, out);
      std::cout << summary_line({{"command", "review-unseal"},
                                 {"cases", r.cases_joined},
                                 {"cints", r.summary.mean_cints},
                                 {"cigs", r.summary.mean_cigs},
                                 {"bas", r.summary.mean_bas},
                                 {"out", out.string()}});
      return 0;
    }
    if (*report) {
      std::vector<fs::path> runs(report_runs.begin(), report_runs.end());
      if (runs.empty()) runs.push_back(cfg.output_dir);
      std::cout << run_report(runs, report_out.empty() ? fs::path(cfg.output_dir) : fs::path(report_out));
      return 0;
    }

    const auto w = Workspace::open(cfg);
    if (*prepare) {
      const auto plan = run_prepare(w);
      std::cout << summary_line({{"command", "prepare"}, {"folds", plan.fold_sizes()}, {"out", (w.out / "folds.json").string()}});
      return 0;
    }
    if (*enrich) {
      auto client = make_client(cfg.enrichment.client, cfg.enrichment.http);
      const auto s = run_enrich(w, *client);
      std::cout << summary_line({{"command", "enrich"},
                                 {"total", s.total},
                                 {"hits", s.hits},
                                 {"hit_rate", s.hit_rate()},
                                 {"failures", s.failures}});
      return s.failures == 0 ? 0 : 1;
    }
    if (*train) {
      const auto r = run_train(w, folds);
      nlohmann::json j = {{"command", "train"}, {"folds", nlohmann::json::array()}};
      for (const auto& f : r.folds) j["folds"].push_back({{"fold", f.fold}, {"best_epoch", f.best_epoch}, {"best_val_loss", f.best_val_loss}});
      std::cout << summary_line(j);
      return 0;
    }
    if (*eval) {
      const auto r = run_eval(w, folds);
      std::cout << to_text(r.pooled_report);
      return 0;
    }
    if (*reason) {
      auto client = make_client(cfg.reasoning.client, cfg.reasoning.http);
      const auto s = run_reason(w, *client, reason_fold);
      std::cout << summary_line({{"command", "reason"},
                                 {"explanations", s.explanations},
                                 {"ungrounded_mentions", s.ungrounded_mentions},
                                 {"out", s.transcripts.string()}});
      return 0;
    }
    if (*rexport) {
      const auto r = run_review_export(w, review_fold, review_n, review_seed, bundle_dir, sealed_dir);
      std::cout << summary_line({{"command", "review-export"}, {"cases", r.case_ids.size()}, {"bundles", bundle_dir}});
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << app.help();
  return 2;
}

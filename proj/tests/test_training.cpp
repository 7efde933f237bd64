#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "medcbr/corpus/builtin_banks.hpp"
#include "medcbr/corpus/synth.hpp"
#include "medcbr/training/fit.hpp"
#include "medcbr/training/optim.hpp"
#include "medcbr/training/variant.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace medcbr;

TEST(Schedule, WarmupAndCosineIdentities) {
  const double lr0 = 1e-3;
  EXPECT_EQ(lr_schedule(0, 100, 10, lr0), 0.0);
  EXPECT_DOUBLE_EQ(lr_schedule(5, 100, 10, lr0), 0.5 * lr0);
  EXPECT_DOUBLE_EQ(lr_schedule(10, 100, 10, lr0), lr0);
  EXPECT_NEAR(lr_schedule(55, 100, 10, lr0), 0.5 * lr0, 1e-15);
  EXPECT_NEAR(lr_schedule(100, 100, 10, lr0), 0.0, 1e-18);
  for (long s = 10; s < 100; ++s) EXPECT_GE(lr_schedule(s, 100, 10, lr0), lr_schedule(s + 1, 100, 10, lr0));
  EXPECT_DOUBLE_EQ(lr_schedule(0, 10, 0, lr0), lr0);
  EXPECT_THROW(lr_schedule(101, 100, 10, lr0), ValidationError);
}

TEST(EarlyStop, StopsAfterPatienceOnFlatLoss) {
  EarlyStopper s(3);
  EXPECT_FALSE(s.update(0, 1.0));
  EXPECT_FALSE(s.update(1, 1.0));
  EXPECT_FALSE(s.update(2, 1.0));
  EXPECT_TRUE(s.update(3, 1.0));
  EXPECT_EQ(s.best_epoch(), 0);
  EarlyStopper off(0);
  for (int e = 0; e < 50; ++e) EXPECT_FALSE(off.update(e, 1.0));
  EarlyStopper reset(2);
  reset.update(0, 1.0);
  reset.update(1, 1.0);
  EXPECT_FALSE(reset.update(2, 0.5));
  EXPECT_TRUE(reset.improved_at(2));
}

TEST(AdamW, FirstStepMovesBySignTimesLr) {
  EncoderConfig c;
  c.embed_dim = 4;
  c.vision_hidden = 4;
  c.n_concepts = 2;
  c.image_grid = 2;
  c.text_buckets = 8;
  ModelParams p = init_params(c, HeadKind::kEmbedding);
  ModelParams g = zeros_like(p);
  g.diag.b << 2.0, -3.0;
  g.diag.W(0, 0) = 0.5;
  const ModelParams before = p;
  AdamW opt(AdamWConfig{0.9, 0.999, 1e-8, 0.0});
  opt.step(p, g, 0.01, {"log_tau"});
  EXPECT_NEAR(p.diag.b(0), before.diag.b(0) - 0.01, 1e-9);
  EXPECT_NEAR(p.diag.b(1), before.diag.b(1) + 0.01, 1e-9);
  EXPECT_NEAR(p.diag.W(0, 0), before.diag.W(0, 0) - 0.01, 1e-9);
  EXPECT_EQ(p.diag.W(1, 1), before.diag.W(1, 1));
  EXPECT_EQ(p.log_tau, before.log_tau);
  AdamW decay(AdamWConfig{0.9, 0.999, 1e-8, 0.1});
  ModelParams q = before;
  ModelParams zero = zeros_like(q);
  decay.step(q, zero, 0.5);
  EXPECT_NEAR(q.diag.W(1, 1), before.diag.W(1, 1) * 0.95, 1e-15);
  EXPECT_EQ(q.diag.b(1), before.diag.b(1));
}

TEST(Variants, PresetsAndValidation) {
  EncoderConfig enc;
  enc.n_concepts = 6;
  auto cbm = VariantSpec::cbm_baseline();
  auto a = build_variant(cbm, enc);
  EXPECT_EQ(a.head, HeadKind::kConceptBottleneck);
  EXPECT_FALSE(a.use_text);
  auto bad = cbm;
  bad.loss_weights.lambda = 0.5;
  EXPECT_THROW(build_variant(bad, enc), ValidationError);
  EXPECT_EQ(build_variant(VariantSpec::full(), enc).head, HeadKind::kEmbedding);
  EXPECT_FALSE(build_variant(VariantSpec::clip_cbm_baseline(), enc).use_text);
  auto cbl_g = VariantSpec::clip_cbm_baseline();
  cbl_g.use_guideline_text = true;
  EXPECT_TRUE(build_variant(cbl_g, enc).use_text);
  EXPECT_THROW(parse_variant_kind("CLIP"), ValidationError);
  const auto back = variant_from_json(to_json(cbl_g));
  EXPECT_EQ(back.kind, VariantKind::kClipCbl);
  EXPECT_TRUE(back.use_guideline_text);
}

TEST(Variants, SequentialLossIsDiagPlusWeightedConcepts) {
  EncoderConfig enc;
  enc.embed_dim = 8;
  enc.vision_hidden = 6;
  enc.n_concepts = 3;
  enc.image_grid = 2;
  enc.text_buckets = 16;
  const auto a = build_variant(VariantSpec::cbm_baseline(), enc);
  std::mt19937_64 rng(3);
  Batch b;
  b.image_features = test::random_matrix(rng, 5, enc.image_stem().dim());
  b.text_features = test::random_matrix(rng, 5, 16).cwiseAbs();
  b.labels = {0, 1, 1, 0, 1};
  b.concepts = Matrix::Zero(5, 3);
  b.concepts(1, 2) = b.concepts(2, 0) = 1;
  const auto p = init_params(enc, a.head);
  const auto l = loss_and_grad(p, a, b, true, nullptr);
  EXPECT_EQ(l.clip, 0.0);
  EXPECT_NEAR(l.total, l.diag + 0.8 * l.concepts, 1e-12);
}

TEST(ContrastiveText, CaptionsAndMissingReports) {
  auto m = test::random_manifest(3, 6, 1);
  const auto& r = m.records[0];
  auto mtl = VariantSpec::full();
  mtl.use_guideline_text = false;
  EXPECT_EQ(contrastive_text(mtl, m, r, nullptr), "An image of a " + m.labels.name(r.label) + " lesion.");
  ReportMap reports{{r.sample_id, "Irregular shape."}};
  EXPECT_EQ(contrastive_text(VariantSpec::full(), m, r, &reports), "Irregular shape.");
  try {
    contrastive_text(VariantSpec::full(), m, m.records[1], &reports);
    FAIL() << "expected LookupError";
  } catch (const LookupError& e) {
    EXPECT_NE(std::string(e.what()).find(m.records[1].sample_id), std::string::npos);
  }
}

namespace {

struct SmallRun {
  test::TempDir dir;
  ConceptBank bank = synthetic_bank(6);
  DatasetManifest m;
  SplitPlan plan;
  EncoderConfig enc;
  TrainConfig cfg;
  ReportMap reports;

  SmallRun() {
    m = synth::generate(90, bank, 11, dir / "corpus");
    plan = make_patient_folds(m, 3, 0);
    enc.n_concepts = 6;
    enc.embed_dim = 16;
    enc.vision_hidden = 32;
    enc.text_buckets = 128;
    cfg.lr = 3e-3;
    cfg.epochs = 6;
    cfg.warmup_epochs = 1;
    cfg.batch_size = 16;
    cfg.early_stop.patience = 0;
    cfg.augment = false;
    for (const auto& r : m.records) {
      std::string text;
      for (std::size_t k = 0; k < r.concepts.size(); ++k)
        if (r.concepts[k]) text += bank[k].display_name + ". ";
      reports[r.sample_id] = text.empty() ? "No salient findings." : text;
    }
  }
};

}  // namespace

TEST(Fit, TrainsAuditsAndReloads) {
  SmallRun run;
  test::TempDir out;
  const auto res = fit(VariantSpec::full(), run.enc, run.cfg, run.m, run.bank, &run.reports, run.plan, out.path(), {0});
  ASSERT_EQ(res.folds.size(), 1u);
  const auto& f = res.folds[0];
  EXPECT_EQ(f.epochs_run, 6);
  EXPECT_GT(f.batches_audited, 0u);
  EXPECT_LT(f.history.back().train_loss, f.history.front().train_loss);
  EXPECT_TRUE(std::filesystem::exists(out / "fold_0" / "metrics.jsonl"));
  EXPECT_TRUE(std::filesystem::exists(out / "summary.json"));

  // The saved weights reproduce the validation metrics recorded at the best epoch.
  auto ck = load_checkpoint(f.checkpoint);
  const auto pc = prepare_corpus(run.m, run.enc);
  const auto split = split_for_fold(run.m, run.plan, 0);
  const auto ev = evaluate_indices(ck.params, ck.assembly, pc, split.val, nullptr, run.bank, 16);
  ASSERT_TRUE(f.val_auroc && ev.auroc);
  EXPECT_EQ(*ev.auroc, *f.val_auroc);
  EXPECT_EQ(*ev.concept_auroc, *f.val_concept_auroc);

  // Same seed, same bytes.
  test::TempDir again;
  const auto res2 = fit(VariantSpec::full(), run.enc, run.cfg, run.m, run.bank, &run.reports, run.plan, again.path(), {0});
  EXPECT_EQ(read_file(res2.folds[0].checkpoint), read_file(f.checkpoint));
}

TEST(Fit, TestSampleInTrainingBatchIsRejected) {
  SmallRun run;
  test::TempDir out;
  const auto pc = prepare_corpus(run.m, run.enc);
  auto split = split_for_fold(run.m, run.plan, 0);
  split.train.push_back(split.test.front());
  EXPECT_THROW(fit_fold(VariantSpec::cbm_baseline(), run.enc, run.cfg, pc, run.bank, nullptr, split, out.path()),
               ProtocolError);
}

TEST(Fit, MissingReportNamesSample) {
  SmallRun run;
  test::TempDir out;
  const auto victim = run.m.records[5].sample_id;
  run.reports.erase(victim);
  try {
    fit(VariantSpec::full(), run.enc, run.cfg, run.m, run.bank, &run.reports, run.plan, out.path(), {0, 1, 2});
    FAIL() << "expected LookupError";
  } catch (const LookupError& e) {
    EXPECT_NE(std::string(e.what()).find(victim), std::string::npos);
  }
}

TEST(Fit, ConfigValidation) {
  TrainConfig c;
  c.warmup_epochs = c.epochs;
  EXPECT_THROW(c.validate(), ValidationError);
  c = TrainConfig{};
  c.schedule = "linear";
  EXPECT_THROW(c.validate(), ValidationError);
  const auto back = train_config_from_json(to_json(TrainConfig{}));
  EXPECT_EQ(back.lr, 1e-5);
  EXPECT_EQ(back.epochs, 150);
}

#include <cstdlib>

#include <gtest/gtest.h>

#include "medcbr/cli/config.hpp"
#include "support.hpp"

using namespace medcbr;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + MEDCBR_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, DefaultsValidate) {
  const auto c = load_run_config({}, {});
  EXPECT_EQ(c.encoder.n_concepts, 6);
  EXPECT_EQ(c.train.epochs, 30);
  EXPECT_EQ(c.variant.kind, VariantKind::kClipMtl);
}

TEST(Config, UnknownFieldIsNamed) {
  test::TempDir dir;
  write_file(dir / "c.json", R"({"model": {"encoder": {"embed_dim": 16, "bogus": 1}}})");
  try {
    load_run_config(dir / "c.json", {});
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("model.encoder.bogus"), std::string::npos) << e.what();
  }
  write_file(dir / "bad.json", "{not json");
  EXPECT_THROW(load_run_config(dir / "bad.json", {}), ValidationError);
}

TEST(Config, OverridesApplyOnTopOfFile) {
  test::TempDir dir;
  write_file(dir / "c.json", R"({"model": {"train": {"epochs": 7}}, "output_dir": "a"})");
  const auto c = load_run_config(dir / "c.json", {"model.train.epochs=9", "output_dir=runs/b",
                                                  "model.variant.kind=CLIP_CBL", "corpus.check_images=false"});
  EXPECT_EQ(c.train.epochs, 9);
  EXPECT_EQ(c.output_dir, "runs/b");
  EXPECT_EQ(c.variant.kind, VariantKind::kClipCbl);
  EXPECT_FALSE(c.corpus.check_images);
  EXPECT_THROW(load_run_config({}, {"model.train.epochz=3"}), ValidationError);
  EXPECT_THROW(load_run_config({}, {"noequals"}), ValidationError);
  EXPECT_THROW(load_run_config({}, {"model.train.epochs=\"ten\""}), ValidationError);
  EXPECT_THROW(load_run_config({}, {"corpus.folds=1"}), ValidationError);
}

TEST(Config, GuidelineIds) {
  EXPECT_EQ(parse_guideline_id("ultrasound_diagnostic"), std::make_pair(GuidelineKind::kDiagnostic, Modality::kUltrasound));
  EXPECT_EQ(parse_guideline_id("field_guide_reporting").second, Modality::kFieldGuide);
  EXPECT_THROW(parse_guideline_id("ultrasound"), ValidationError);
}

TEST(Cli, UnknownCommandFails) {
  EXPECT_NE(run_cli("frobnicate"), 0);
  EXPECT_NE(run_cli(""), 0);
  EXPECT_EQ(run_cli("--help"), 0);
}

TEST(Cli, SynthPrepareEnrichTwiceHitsCache) {
  test::TempDir dir;
  const auto root = dir.path().string();
  const std::string sets = " --set corpus.manifest=" + root + "/corpus/manifest.csv --set output_dir=" + root +
                           "/run --set enrichment.cache_dir=" + root + "/cache --quiet";
  ASSERT_EQ(run_cli("synth --out " + root + "/corpus --n 30 --concepts 6 --seed 1 --quiet"), 0);
  ASSERT_EQ(run_cli("prepare" + sets), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "run" / "folds.json"));
  ASSERT_EQ(run_cli("enrich" + sets), 0);
  auto first = nlohmann::json::parse(read_file(dir / "run" / "enrich_stats.json"));
  EXPECT_EQ(first.at("total").get<int>(), 30);
  EXPECT_EQ(first.at("hits").get<int>(), 0);
  ASSERT_EQ(run_cli("enrich" + sets), 0);
  auto second = nlohmann::json::parse(read_file(dir / "run" / "enrich_stats.json"));
  EXPECT_EQ(second.at("hits").get<int>(), 30);
  EXPECT_EQ(second.at("hit_rate").get<double>(), 1.0);
  EXPECT_NE(run_cli("train --set model.encoder.bogus=1" + sets), 0);
}

TEST(Config, ShippedExamplesLoad) {
  const std::filesystem::path dir = std::filesystem::path(MEDCBR_ASSET_DIR).parent_path() / "configs";
  const auto full = load_run_config(dir / "synthetic.json", {});
  EXPECT_EQ(full.enrichment.threads, 4u);
  const auto cbl = load_run_config(dir / "ablation_cbl.json", {});
  EXPECT_EQ(cbl.variant.kind, VariantKind::kClipCbl);
  EXPECT_FALSE(cbl.variant.uses_text());
}

#include <gtest/gtest.h>

#include "medcbr/corpus/builtin_banks.hpp"
#include "medcbr/guidelines.hpp"
#include "support.hpp"

using namespace medcbr;

namespace {
GuidelineRegistry shipped() { return GuidelineRegistry::load(default_asset_dir() / "guidelines"); }
}  // namespace

TEST(Guidelines, ShippedSnippetsResolve) {
  const auto reg = shipped();
  EXPECT_NE(reg.get(GuidelineKind::kReporting, Modality::kUltrasound)
                .text.find("SUCCINCT DESCRIPTION OF THE OVERALL BREAST COMPOSITION"),
            std::string::npos);
  EXPECT_NE(reg.get(GuidelineKind::kDiagnostic, Modality::kUltrasound).text.find("BI-RADS Ultrasound Diagnostic"),
            std::string::npos);
  EXPECT_NO_THROW(reg.get(GuidelineKind::kDiagnostic, Modality::kMammography));
  EXPECT_NO_THROW(reg.get(GuidelineKind::kDiagnostic, Modality::kFieldGuide));
}

TEST(Guidelines, HeaderLinesAreNotText) {
  const auto reg = shipped();
  const auto& g = reg.get(GuidelineKind::kReporting, Modality::kUltrasound);
  EXPECT_NE(g.text.substr(0, 2), "%%");
  EXPECT_EQ(g.version_hash, sha256_hex(g.text));
}

TEST(Guidelines, MissingPairListsAvailable) {
  GuidelineRegistry empty;
  EXPECT_THROW(empty.get(GuidelineKind::kDiagnostic, Modality::kFieldGuide), LookupError);
  GuidelineRegistry one;
  one.add(Guideline::make(GuidelineKind::kReporting, Modality::kUltrasound, "text"));
  try {
    one.get(GuidelineKind::kDiagnostic, Modality::kUltrasound);
    FAIL();
  } catch (const LookupError& e) {
    EXPECT_NE(std::string(e.what()).find(one.all().front()->guideline_id), std::string::npos) << e.what();
  }
}

TEST(Guidelines, OnePerPairAndNonEmpty) {
  GuidelineRegistry reg;
  reg.add(Guideline::make(GuidelineKind::kReporting, Modality::kUltrasound, "a"));
  EXPECT_THROW(reg.add(Guideline::make(GuidelineKind::kReporting, Modality::kUltrasound, "b")), ValidationError);
  EXPECT_THROW(Guideline::make(GuidelineKind::kReporting, Modality::kMammography, "  \n"), ValidationError);
}

TEST(Guidelines, LoadIsIdempotentAndHashTracksText) {
  test::TempDir dir;
  write_file(dir / "ultrasound_reporting.txt", "%% note\nRule one.\n");
  const auto a = GuidelineRegistry::load(dir.path());
  const auto b = GuidelineRegistry::load(dir.path());
  const auto h = a.get(GuidelineKind::kReporting, Modality::kUltrasound).version_hash;
  EXPECT_EQ(h, b.get(GuidelineKind::kReporting, Modality::kUltrasound).version_hash);
  write_file(dir / "ultrasound_reporting.txt", "%% a different note\nRule one.\n");
  EXPECT_EQ(h, GuidelineRegistry::load(dir.path()).get(GuidelineKind::kReporting, Modality::kUltrasound).version_hash);
  write_file(dir / "ultrasound_reporting.txt", "Rule two.\n");
  EXPECT_NE(h, GuidelineRegistry::load(dir.path()).get(GuidelineKind::kReporting, Modality::kUltrasound).version_hash);
}

TEST(Guidelines, FieldGuideEntries) {
  const auto reg = shipped();
  const auto& g = reg.get(GuidelineKind::kDiagnostic, Modality::kFieldGuide);
  const auto entry = field_guide_entry(g, "Pomarine Jaeger");
  EXPECT_NE(entry.find("twisted"), std::string::npos);
  EXPECT_THROW(field_guide_entry(g, "Dodo"), LookupError);
}

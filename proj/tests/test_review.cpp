#include <gtest/gtest.h>

#include <opencv2/core.hpp>

#include "medcbr/corpus/image_ops.hpp"
#include "medcbr/metrics/review.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace medcbr;

namespace {

struct ReviewFixture {
  test::TempDir dir;
  std::vector<ReviewCandidate> cands;

  ReviewFixture() {
    std::filesystem::create_directories(dir / "img");
    for (int i = 0; i < 30; ++i) {
      char id[16];
      std::snprintf(id, sizeof id, "S%05d", i);
      cv::Mat img(16, 16, CV_8UC1, cv::Scalar(static_cast<double>(i * 8)));
      const auto path = dir / "img" / (std::string(id) + "_label" + std::to_string(i % 2) + ".png");
      save_image(img, path);
      ReviewCandidate c;
      c.sample_id = id;
      c.y_true = i % 2;
      c.image = path;
      c.prompt = "You are given the final diagnostic prediction of an AI system, which is malignant.\n";
      c.prompt_hash = sha256_hex(c.prompt + id);
      c.explanation = "The predicted diagnosis is malignant. BI-RADS 4C.\n";
      cands.push_back(std::move(c));
    }
  }

  std::vector<std::string> sample_ids() const {
    std::vector<std::string> v;
    for (const auto& c : cands) v.push_back(c.sample_id);
    return v;
  }

  // Scores every case once.
  std::filesystem::path scores_for(const ExportResult& r, const std::string& name) const {
    std::string csv = "case_id,reviewer_id,cints,cigs,bas\n";
    for (const auto& id : r.case_ids) csv += id + ",rev1,6/7,0.75,0.8\n";
    write_file(dir / name, csv);
    return dir / name;
  }
};

std::string tree_digest(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) all += std::filesystem::relative(f, root).string() + ":" + sha256_hex(read_file(f)) + "\n";
  return sha256_hex(all);
}

}  // namespace

TEST(Review, ExportIsDeterministic) {
  ReviewFixture f;
  const auto a = export_case_bundles(f.cands, 20, 7, f.dir / "b1", f.dir / "k1");
  const auto b = export_case_bundles(f.cands, 20, 7, f.dir / "b2", f.dir / "k2");
  EXPECT_EQ(a.case_ids.size(), 20u);
  EXPECT_EQ(a.case_ids, b.case_ids);
  EXPECT_EQ(tree_digest(f.dir / "b1"), tree_digest(f.dir / "b2"));
  EXPECT_EQ(read_file(a.sealed_key), read_file(b.sealed_key));
  const auto c = export_case_bundles(f.cands, 20, 8, f.dir / "b3", f.dir / "k3");
  EXPECT_NE(c.case_ids, a.case_ids);
}

TEST(Review, BundlesAreBlinded) {
  ReviewFixture f;
  export_case_bundles(f.cands, 20, 7, f.dir / "b", f.dir / "k");
  EXPECT_TRUE(scan_bundle_for_leaks(f.dir / "b", f.sample_ids()).empty());
  // The scanner itself fires on a planted leak.
  write_file(f.dir / "b" / "note.txt", "y_true=1 for S00003");
  EXPECT_EQ(scan_bundle_for_leaks(f.dir / "b", f.sample_ids()).size(), 2u);
}

TEST(Review, ImportThenUnsealJoinsEveryCase) {
  ReviewFixture f;
  const auto r = export_case_bundles(f.cands, 20, 7, f.dir / "b", f.dir / "k");
  EXPECT_THROW(unseal_review(f.dir / "b", f.dir / "k"), ProtocolError);
  const auto scores = import_review(f.dir / "b", f.scores_for(r, "scores.csv"));
  EXPECT_EQ(scores.size(), 20u);
  const auto u = unseal_review(f.dir / "b", f.dir / "k");
  EXPECT_EQ(u.cases_joined, 20u);
  ASSERT_EQ(u.rows.size(), 20u);
  for (const auto& row : u.rows) {
    const auto it = std::find_if(f.cands.begin(), f.cands.end(), [&](const auto& c) { return c.sample_id == row.key.sample_id; });
    ASSERT_NE(it, f.cands.end());
    EXPECT_EQ(row.key.y_true, it->y_true);
  }
  EXPECT_NEAR(u.summary.mean_cints, 85.714, 1e-3);
  EXPECT_DOUBLE_EQ(u.summary.mean_cigs, 75.0);
  EXPECT_DOUBLE_EQ(u.summary.mean_bas, 80.0);
}

TEST(Review, RejectsBadRequestsAndTampering) {
  ReviewFixture f;
  EXPECT_THROW(export_case_bundles(f.cands, 31, 7, f.dir / "b0", f.dir / "k0"), ValidationError);
  EXPECT_THROW(export_case_bundles(f.cands, 5, 7, f.dir / "b0", f.dir / "b0" / "key"), ValidationError);
  const auto r = export_case_bundles(f.cands, 20, 7, f.dir / "b", f.dir / "k");
  EXPECT_THROW(export_case_bundles(f.cands, 20, 7, f.dir / "b", f.dir / "k9"), ValidationError);

  write_file(f.dir / "unknown.csv", "case_id,reviewer_id,cints,cigs,bas\ncase-nope,r,1,1,1\n");
  EXPECT_THROW(import_review(f.dir / "b", f.dir / "unknown.csv"), ValidationError);

  import_review(f.dir / "b", f.scores_for(r, "scores.csv"));
  write_file(f.dir / "b" / kImportedScores, "case_id,reviewer_id,cints,cigs,bas\n");
  EXPECT_THROW(unseal_review(f.dir / "b", f.dir / "k"), ProtocolError);

  import_review(f.dir / "b", f.scores_for(r, "scores.csv"));
  const auto other = export_case_bundles(f.cands, 20, 9, f.dir / "b2", f.dir / "k2");
  (void)other;
  EXPECT_THROW(unseal_review(f.dir / "b", f.dir / "k2"), ProtocolError);
  EXPECT_NO_THROW(unseal_review(f.dir / "b", f.dir / "k"));
}

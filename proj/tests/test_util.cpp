#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "medcbr/util/csv.hpp"
#include "medcbr/util/digest.hpp"
#include "medcbr/util/seed.hpp"
#include "medcbr/util/strings.hpp"
#include "support.hpp"

using namespace medcbr;

TEST(Digest, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Digest, FileRoundTrip) {
  test::TempDir dir;
  write_file(dir / "a" / "b.txt", "payload");
  EXPECT_EQ(read_file(dir / "a" / "b.txt"), "payload");
  EXPECT_EQ(file_sha256(dir / "a" / "b.txt"), sha256_hex("payload"));
  EXPECT_THROW(read_file(dir / "missing.txt"), Error);
}

TEST(Csv, QuotedFieldsRoundTrip) {
  const std::vector<std::string> row{"plain", "with,comma", "with \"quote\"", ""};
  std::ostringstream os;
  csv::write_row(os, {"a", "b", "c", "d"});
  csv::write_row(os, row);
  std::istringstream is(os.str());
  const auto t = csv::read(is);
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0].second, row);
  EXPECT_EQ(t.rows[0].first, 2u);
  EXPECT_EQ(t.column("c"), 2u);
  EXPECT_THROW(t.column("zzz"), ValidationError);
}

TEST(Csv, RaggedRowNamesLine) {
  std::istringstream is("a,b\n1,2\n3\n");
  try {
    csv::read(is);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos);
  }
}

TEST(Strings, WordsAndCapitalize) {
  EXPECT_EQ(str::words("Spiculated, HYPO-echoic  mass!"),
            (std::vector<std::string>{"spiculated", "hypo", "echoic", "mass"}));
  EXPECT_EQ(str::capitalize("skin THICKENING"), "Skin thickening");
  EXPECT_EQ(str::replace_all("a_b_c", "_", " "), "a b c");
}

TEST(Strings, FormatDoubleRoundTrips) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng);
    EXPECT_EQ(std::strtod(str::format_double(v).c_str(), nullptr), v);
  }
  EXPECT_EQ(str::format_double(0.5), "0.5");
}

TEST(Seed, DerivedSeedsAreStableAndDistinct) {
  EXPECT_EQ(derive_seed(7, {1, 2}), derive_seed(7, {1, 2}));
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 20; ++a)
    for (std::uint64_t b = 0; b < 20; ++b) seen.insert(derive_seed(0, {a, b}));
  EXPECT_EQ(seen.size(), 400u);
  EXPECT_NE(derive_seed(0, {1, 2}), derive_seed(0, {2, 1}));
}

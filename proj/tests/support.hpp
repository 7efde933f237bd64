#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <random>
#include <string>

#include "medcbr/corpus/builtin_banks.hpp"
#include "medcbr/corpus/manifest.hpp"
#include "medcbr/util/digest.hpp"

namespace medcbr::test {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("medcbr_test_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

// In-memory manifest with `patients` patients holding 1..max_images records
// each; images are not materialized.
inline DatasetManifest random_manifest(std::size_t patients, std::size_t n_concepts, std::uint64_t seed,
                                       int max_images = 4) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count(1, max_images), bit(0, 1);
  DatasetManifest m;
  m.corpus_name = "fixture";
  m.bank_id = "synthetic_" + std::to_string(n_concepts);
  for (std::size_t p = 0; p < patients; ++p) {
    const int k = count(rng);
    for (int i = 0; i < k; ++i) {
      SampleRecord r;
      r.sample_id = "p" + std::to_string(p) + "_i" + std::to_string(i);
      r.patient_id = "p" + std::to_string(p);
      r.image_path = r.sample_id + ".png";
      r.label = bit(rng);
      r.concepts.resize(n_concepts);
      for (auto& c : r.concepts) c = static_cast<std::uint8_t>(bit(rng));
      m.records.push_back(std::move(r));
    }
  }
  return m;
}

}  // namespace medcbr::test

#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <system_error>
#include <thread>

#include <nlohmann/json.hpp>

#include "medcbr/util/clock.hpp"
#include "medcbr/util/digest.hpp"
#include "medcbr/util/error.hpp"

namespace medcbr {

struct EnrichedReport {
  std::string sample_id;
  std::string text;
  std::string prompt_hash;
  std::string client_id;
  std::string created_at;  // ISO-8601 UTC
};

struct CacheKey {
  std::string sample_id;
  std::string prompt_hash;
  std::string client_id;
};

// One "<stem>.txt" report plus a "<stem>.json" metadata record per key.
// Writers publish the text with an exclusive hard link, so the first writer
// for a key wins and later writers observe a hit.
class ReportCache {
 public:
  explicit ReportCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  const std::filesystem::path& dir() const noexcept { return dir_; }

  std::filesystem::path stem_for(const CacheKey& key) const {
    return dir_ / (sanitize(key.sample_id) + "__" + sanitize(key.client_id) + "__" + key.prompt_hash.substr(0, 24));
  }

  std::optional<EnrichedReport> lookup(const CacheKey& key) const {
    const auto stem = stem_for(key);
    auto txt = path_with(stem, ".txt"), meta = path_with(stem, ".json");
    if (!std::filesystem::exists(txt)) {
      if (std::filesystem::exists(meta)) throw CorruptionError("cache entry " + meta.string() + " has no report text");
      return std::nullopt;
    }
    // The winning writer links the text before the metadata; give it a moment.
    for (int i = 0; i < 200 && !std::filesystem::exists(meta); ++i)
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    if (!std::filesystem::exists(meta)) throw CorruptionError("cache entry " + txt.string() + " has no metadata record");

    EnrichedReport r;
    try {
      auto j = nlohmann::json::parse(read_file(meta));
      r.sample_id = j.at("sample_id").get<std::string>();
      r.client_id = j.at("client_id").get<std::string>();
      r.prompt_hash = j.at("prompt_hash").get<std::string>();
      r.created_at = j.at("created_at").get<std::string>();
      r.text = read_file(txt);
      if (j.at("text_sha256").get<std::string>() != sha256_hex(r.text))
        throw CorruptionError("text digest mismatch");
    } catch (const CorruptionError& e) {
      throw CorruptionError("cache entry " + stem.string() + ": " + e.what());
    } catch (const std::exception& e) {
      throw CorruptionError("cache entry " + stem.string() + ": unreadable metadata (" + e.what() + ")");
    }
    if (r.sample_id != key.sample_id || r.client_id != key.client_id || r.prompt_hash != key.prompt_hash)
      throw CorruptionError("cache entry " + stem.string() + ": metadata does not match its key");
    if (r.text.empty()) throw CorruptionError("cache entry " + stem.string() + ": empty report");
    return r;
  }

  // Returns the stored report: `report` if this call won, otherwise the winner's.
  EnrichedReport store(const EnrichedReport& report) {
    std::lock_guard lock(mu_);
    const CacheKey key{report.sample_id, report.prompt_hash, report.client_id};
    const auto stem = stem_for(key);
    auto txt = path_with(stem, ".txt"), meta = path_with(stem, ".json");
    const auto token = std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) + "." +
                       std::to_string(std::chrono::steady_clock::now().time_since_epoch().count());
    auto tmp_txt = path_with(stem, ".txt.tmp" + token), tmp_meta = path_with(stem, ".json.tmp" + token);
    write_file(tmp_txt, report.text);
    nlohmann::json j = {{"sample_id", report.sample_id},   {"client_id", report.client_id},
                        {"prompt_hash", report.prompt_hash}, {"created_at", report.created_at},
                        {"text_sha256", sha256_hex(report.text)}};
    write_file(tmp_meta, j.dump(2) + "\n");
    std::error_code ec;
    std::filesystem::create_hard_link(tmp_txt, txt, ec);
    std::filesystem::remove(tmp_txt);
    if (ec) {
      std::filesystem::remove(tmp_meta);
      if (auto existing = lookup(key)) return *existing;
      throw CorruptionError("cache entry " + stem.string() + ": lost write race but entry is unreadable");
    }
    std::filesystem::rename(tmp_meta, meta);
    return report;
  }

 private:
  static std::filesystem::path path_with(const std::filesystem::path& stem, const std::string& ext) {
    return std::filesystem::path(stem.string() + ext);
  }

  static std::string sanitize(const std::string& s) {
    std::string out;
    for (unsigned char c : s) out.push_back((std::isalnum(c) || c == '-' || c == '.') ? static_cast<char>(c) : '_');
    return out;
  }

  std::filesystem::path dir_;
  std::mutex mu_;
};

}  // namespace medcbr

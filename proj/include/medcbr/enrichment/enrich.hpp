#pragma once

#include <atomic>
#include <mutex>
#include <thread>
#include <vector>

#include "medcbr/enrichment/cache.hpp"
#include "medcbr/enrichment/client.hpp"
#include "medcbr/enrichment/lvlm_prompt.hpp"
#include "medcbr/util/log.hpp"

namespace medcbr {

struct EnrichStats {
  std::atomic<std::size_t> hits{0};
  std::atomic<std::size_t> misses{0};
  std::atomic<std::size_t> failures{0};
};

// Cache hit on (sample_id, prompt_hash, client_id) skips the client entirely.
inline EnrichedReport enrich(GenerationClient& client, const EnrichmentRequest& request, ReportCache& cache,
                             EnrichStats* stats = nullptr) {
  const auto prompt = build_lvlm_prompt(request);
  const CacheKey key{request.sample->sample_id, prompt_hash(prompt), client.id()};
  if (auto hit = cache.lookup(key)) {
    if (stats) ++stats->hits;
    return *hit;
  }
  if (stats) ++stats->misses;
  std::string text;
  try {
    Attachment image{request.image_file};
    text = client.generate(prompt, &image);
  } catch (const ClientFailure& e) {
    if (stats) ++stats->failures;
    if (e.retryable()) throw RetryableError(key.sample_id, "enrich " + key.sample_id + ": " + e.what());
    throw Error("enrich " + key.sample_id + ": " + e.what());
  }
  if (text.empty()) {
    if (stats) ++stats->failures;
    throw RetryableError(key.sample_id, "enrich " + key.sample_id + ": client returned an empty report");
  }
  return cache.store({key.sample_id, std::move(text), key.prompt_hash, key.client_id, utc_timestamp()});
}

// Looks a report up without calling any client.
inline EnrichedReport cached_report(const EnrichmentRequest& request, const std::string& client_id,
                                    const ReportCache& cache) {
  const CacheKey key{request.sample->sample_id, prompt_hash(build_lvlm_prompt(request)), client_id};
  auto hit = cache.lookup(key);
  if (!hit) throw LookupError("no cached report for sample '" + key.sample_id + "' (client " + client_id + ")");
  return *hit;
}

struct EnrichFailure {
  std::string sample_id;
  std::string message;
  bool retryable = false;
};

// Fans requests out over worker threads. Failures are collected, not thrown.
inline std::vector<EnrichFailure> enrich_all(GenerationClient& client, const std::vector<EnrichmentRequest>& requests,
                                             ReportCache& cache, EnrichStats& stats, unsigned threads = 1) {
  std::vector<EnrichFailure> failures;
  std::mutex fail_mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      auto i = next++;
      if (i >= requests.size()) return;
      try {
        enrich(client, requests[i], cache, &stats);
      } catch (const RetryableError& e) {
        std::lock_guard lock(fail_mu);
        failures.push_back({e.sample_id(), e.what(), true});
      } catch (const std::exception& e) {
        std::lock_guard lock(fail_mu);
        failures.push_back({requests[i].sample->sample_id, e.what(), false});
      }
    }
  };
  threads = std::max(1u, threads);
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return failures;
}

}  // namespace medcbr

#pragma once

// Chat-completions client for OpenAI-compatible generation services.
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#ifdef _res
#undef _res
#endif
#include <openssl/evp.h>

#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "medcbr/enrichment/client.hpp"
#include "medcbr/util/digest.hpp"
#include "medcbr/util/log.hpp"

namespace medcbr {

// Client configuration block. Credentials come only from the environment.
struct HttpClientConfig {
  std::string client_id = "http-chat";
  std::string base_url = "http://127.0.0.1:8000";  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string model;
  double timeout_s = 120.0;
  int max_retries = 3;
  double backoff_s = 1.0;
  bool send_image = true;
  std::string api_key_env = "MEDCBR_API_KEY";
  double temperature = 0.0;
};

inline nlohmann::json to_json(const HttpClientConfig& c) {
  return {{"client_id", c.client_id}, {"base_url", c.base_url},   {"path", c.path},
          {"model", c.model},         {"timeout_s", c.timeout_s}, {"max_retries", c.max_retries},
          {"backoff_s", c.backoff_s}, {"send_image", c.send_image}, {"api_key_env", c.api_key_env},
          {"temperature", c.temperature}};
}

inline HttpClientConfig http_client_config_from_json(const nlohmann::json& j) {
  HttpClientConfig c;
  c.client_id = j.value("client_id", c.client_id);
  c.base_url = j.value("base_url", c.base_url);
  c.path = j.value("path", c.path);
  c.model = j.value("model", c.model);
  c.timeout_s = j.value("timeout_s", c.timeout_s);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.backoff_s = j.value("backoff_s", c.backoff_s);
  c.send_image = j.value("send_image", c.send_image);
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  c.temperature = j.value("temperature", c.temperature);
  return c;
}

inline std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                          reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

class HttpChatClient final : public GenerationClient {
 public:
  explicit HttpChatClient(HttpClientConfig cfg) : cfg_(std::move(cfg)) {}

  std::string id() const override { return cfg_.client_id; }

  nlohmann::json request_body(const std::string& prompt, const Attachment* attachment) const {
    nlohmann::json content = nlohmann::json::array();
    if (cfg_.send_image && attachment && !attachment->image_path.empty() &&
        std::filesystem::exists(attachment->image_path)) {
      auto ext = attachment->image_path.extension().string();
      std::string mime = (ext == ".jpg" || ext == ".jpeg") ? "image/jpeg" : "image/png";
      content.push_back({{"type", "image_url"},
                         {"image_url", {{"url", "data:" + mime + ";base64," + base64_encode(read_file(attachment->image_path))}}}});
    }
    content.push_back({{"type", "text"}, {"text", prompt}});
    nlohmann::json body = {{"messages", {{{"role", "user"}, {"content", content}}}},
                           {"temperature", cfg_.temperature}};
    if (!cfg_.model.empty()) body["model"] = cfg_.model;
    return body;
  }

  std::string generate(const std::string& prompt, const Attachment* attachment) override {
    const auto body = request_body(prompt, attachment).dump();
    httplib::Headers headers;
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key)
      headers.emplace("Authorization", std::string("Bearer ") + key);

    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      if (attempt > 0)
        std::this_thread::sleep_for(std::chrono::duration<double>(cfg_.backoff_s * attempt));
      httplib::Client cli(cfg_.base_url);
      const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::duration<double>(cfg_.timeout_s));
      cli.set_connection_timeout(timeout);
      cli.set_read_timeout(timeout);
      auto res = cli.Post(cfg_.path, headers, body, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) throw ClientFailure(id() + ": HTTP " + std::to_string(res->status) + ": " + res->body, false);
      try {
        auto j = nlohmann::json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const std::exception& e) {
        throw ClientFailure(id() + ": malformed response (" + e.what() + ")", false);
      }
    }
    throw ClientFailure(id() + ": giving up after " + std::to_string(cfg_.max_retries + 1) + " attempts: " + last_error, true);
  }

 private:
  HttpClientConfig cfg_;
};

}  // namespace medcbr

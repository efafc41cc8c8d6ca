#pragma once

// OpenAI-compatible completions client over cpp-httplib. Retries transport
// errors and retryable statuses with exponential backoff, honoring
// Retry-After when the server sends one.

#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "ossc/backend.hpp"
#include "ossc/util.hpp"

namespace ossc {

struct HttpBackendOptions {
  std::string base_url = "http://127.0.0.1:8000";  // scheme://host[:port]
  std::string completions_path = "/v1/completions";
  std::string token_env = "OSSC_API_TOKEN";  // bearer token variable; optional
  int retries = 3;                           // retries after the first attempt
  int backoff_ms = 250;                      // doubled per retry, capped at 8s
  int timeout_s = 60;
  bool send_seed = false;  // include "seed" for servers that support it
};

class HttpBackend : public CompletionBackend {
 public:
  explicit HttpBackend(HttpBackendOptions options) : options_(std::move(options)) {}

  Completion complete(const CompletionRequest& request) override {
    nlohmann::json body{{"model", request.model},
                        {"prompt", request.prompt},
                        {"max_tokens", request.max_tokens},
                        {"temperature", request.temperature}};
    if (!request.stop.empty()) body["stop"] = request.stop;
    if (options_.send_seed) body["seed"] = request.seed;
    const std::string payload = body.dump();

    std::string last_error;
    int retry_after_ms = 0;
    for (int attempt = 0; attempt <= options_.retries; ++attempt) {
      if (attempt > 0) {
        int wait_ms = options_.backoff_ms << (attempt - 1);
        if (wait_ms > 8000) wait_ms = 8000;
        if (retry_after_ms > 0) wait_ms = retry_after_ms;
        std::this_thread::sleep_for(std::chrono::milliseconds(wait_ms));
      }
      retry_after_ms = 0;

      httplib::Client client(options_.base_url);
      client.set_connection_timeout(options_.timeout_s, 0);
      client.set_read_timeout(options_.timeout_s, 0);
      httplib::Headers headers;
      if (const char* token = std::getenv(options_.token_env.c_str());
          token != nullptr && token[0] != '\0') {
        headers.emplace("Authorization", std::string("Bearer ") + token);
      }
      auto res = client.Post(options_.completions_path, headers, payload, "application/json");

      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 200) return parse_response(res->body);
      if (res->status == 429 || res->status == 503 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        if (auto it = res->headers.find("Retry-After"); it != res->headers.end()) {
          char* end = nullptr;
          double secs = std::strtod(it->second.c_str(), &end);
          if (end != it->second.c_str() && secs >= 0.0) {
            retry_after_ms = static_cast<int>(secs * 1000.0);
          }
        }
        continue;
      }
      fail("completion request failed: HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    fail("completion request failed after " + std::to_string(options_.retries + 1) +
         " attempts (" + last_error + ")");
  }

  std::string fingerprint() const override {
    return "http|" + options_.base_url + options_.completions_path;
  }

 private:
  static Completion parse_response(const std::string& body) {
    nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) fail("completion response is not valid JSON");
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
      fail("completion response has no choices");
    }
    Completion c;
    c.text = j["choices"][0].value("text", "");
    if (j.contains("usage")) {
      c.prompt_tokens = j["usage"].value("prompt_tokens", 0);
      c.completion_tokens = j["usage"].value("completion_tokens", 0);
    }
    return c;
  }

  HttpBackendOptions options_;
};

}  // namespace ossc

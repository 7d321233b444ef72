#pragma once

// Shared JSON-over-HTTP client plumbing for the embedding service and the LLM endpoint.

#include <chrono>
#include <semaphore>
#include <string>
#include <thread>

#include <httplib.h>
// <resolv.h> defines _res, which collides with Eigen parameter names.
#ifdef _res
#undef _res
#endif
#include <json.hpp>

#include "trendlens/common.hpp"

namespace trendlens::http {

struct Url {
  std::string scheme_host_port;  // e.g. "http://localhost:8080"
  std::string path;              // e.g. "/embed", "/" if absent
};

inline Url parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("URL '" + url + "' lacks a scheme");
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ConfigError("unsupported URL scheme '" + scheme + "'");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

struct RetryPolicy {
  int max_retries = 3;
  int backoff_ms = 100;
  int timeout_s = 30;
};

/// POSTs a JSON body, retrying transport failures and 5xx/429 responses
/// with exponential backoff. Other HTTP errors fail immediately.
inline nlohmann::json post_json(const Url& url, const nlohmann::json& body, const RetryPolicy& policy,
                                const httplib::Headers& headers = {}) {
  std::string last_error;
  const std::string payload = body.dump();
  for (int attempt = 0; attempt <= policy.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(policy.backoff_ms << (attempt - 1)));
    httplib::Client client(url.scheme_host_port);
    client.set_connection_timeout(policy.timeout_s, 0);
    client.set_read_timeout(policy.timeout_s, 0);
    client.set_write_timeout(policy.timeout_s, 0);
    auto res = client.Post(url.path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300)
      throw UpstreamError(url.scheme_host_port + url.path + " returned HTTP " + std::to_string(res->status), false);
    auto parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded())
      throw UpstreamError(url.scheme_host_port + url.path + " returned a non-JSON body", false);
    return parsed;
  }
  throw UpstreamError(url.scheme_host_port + url.path + " failed after " + std::to_string(policy.max_retries + 1) +
                          " attempts (" + last_error + ")",
                      false);
}

/// Caps concurrent requests. Acquire/release via the RAII guard.
class InFlightLimit {
 public:
  explicit InFlightLimit(std::ptrdiff_t limit) : slots_(limit < 1 ? 1 : limit) {}

  class Guard {
   public:
    explicit Guard(InFlightLimit& l) : limit_(l) { limit_.slots_.acquire(); }
    ~Guard() { limit_.slots_.release(); }
    Guard(const Guard&) = delete;
    Guard& operator=(const Guard&) = delete;

   private:
    InFlightLimit& limit_;
  };

 private:
  std::counting_semaphore<1024> slots_;
};

}  // namespace trendlens::http

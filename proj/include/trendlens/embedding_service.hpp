#pragma once

#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include "trendlens/embeddings.hpp"
#include "trendlens/http_client.hpp"

namespace trendlens {

inline constexpr const char* kEmbeddingUrlEnv = "TRENDLENS_EMBEDDING_URL";

/// Client for an embedding service speaking
/// `POST /embed {"texts": [...]}` -> `{"vectors": [[...], ...]}`.
class HttpEmbeddingService final : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingService(const EmbeddingProviderConfig& cfg)
      : url_(http::parse_url(cfg.location)),
        policy_{cfg.max_retries, cfg.backoff_ms, cfg.timeout_s},
        batch_size_(cfg.batch_size == 0 ? 1 : cfg.batch_size),
        limit_(static_cast<std::ptrdiff_t>(cfg.max_in_flight)) {
    if (url_.path == "/") url_.path = "/embed";
  }

  std::vector<EmbeddingVector> embed(std::span<const EmbeddingRequest> requests) override {
    std::vector<EmbeddingVector> out;
    out.reserve(requests.size());
    for (std::size_t begin = 0; begin < requests.size(); begin += batch_size_) {
      const auto batch = requests.subspan(begin, std::min(batch_size_, requests.size() - begin));
      nlohmann::json body{{"texts", nlohmann::json::array()}};
      for (const auto& r : batch) body["texts"].push_back(r.text);
      nlohmann::json reply;
      {
        http::InFlightLimit::Guard guard(limit_);
        reply = http::post_json(url_, body, policy_);
      }
      if (!reply.contains("vectors") || !reply["vectors"].is_array() || reply["vectors"].size() != batch.size())
        throw UpstreamError("embedding service reply lacks a 'vectors' array of the batch size", false);
      for (const auto& row : reply["vectors"]) {
        EmbeddingVector v;
        for (const auto& x : row) {
          if (!x.is_number()) throw UpstreamError("embedding service returned a non-numeric value", false);
          v.values.push_back(x.get<double>());
        }
        out.push_back(std::move(v));
      }
    }
    return out;
  }

 private:
  http::Url url_;
  http::RetryPolicy policy_;
  std::size_t batch_size_;
  http::InFlightLimit limit_;
};

/// Builds the configured provider. An empty http location falls back to
/// the TRENDLENS_EMBEDDING_URL environment variable.
inline std::unique_ptr<EmbeddingProvider> make_provider(EmbeddingProviderConfig cfg) {
  switch (cfg.kind) {
    case ProviderKind::precomputed_file:
      if (cfg.location.empty()) throw ConfigError("precomputed embedding provider needs a file location");
      return std::make_unique<PrecomputedStore>(PrecomputedStore::load(cfg.location));
    case ProviderKind::http_service:
      if (cfg.location.empty()) {
        const char* env = std::getenv(kEmbeddingUrlEnv);
        if (env == nullptr || *env == '\0')
          throw ConfigError(std::string("http embedding provider needs a URL (config or ") + kEmbeddingUrlEnv + ")");
        cfg.location = env;
      }
      return std::make_unique<HttpEmbeddingService>(cfg);
  }
  throw ConfigError("unknown embedding provider kind");
}

}  // namespace trendlens

#pragma once

// Dense embedding vectors and the provider boundary.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "trendlens/common.hpp"

namespace trendlens {

struct EmbeddingVector {
  std::vector<double> values;

  EmbeddingVector() = default;
  explicit EmbeddingVector(std::vector<double> v) : values(std::move(v)) {}
  EmbeddingVector(std::initializer_list<double> v) : values(v) {}

  std::size_t dim() const noexcept { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

/// Scales to unit L2 norm. A zero vector is returned unchanged.
inline EmbeddingVector normalized(EmbeddingVector v) {
  const double n = l2_norm(v.values);
  if (n > 0.0)
    for (auto& x : v.values) x /= n;
  return v;
}

/// Cosine similarity clamped to [-1, 1].
/// Throws DataError on dimension mismatch or a zero vector.
inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim())
    throw DataError("cosine: dimension mismatch (" + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()) + ")");
  const double na = dot(a.values, a.values);
  const double nb = dot(b.values, b.values);
  if (na == 0.0 || nb == 0.0) throw DataError("cosine: similarity undefined for a zero vector");
  const double c = dot(a.values, b.values) / std::sqrt(na * nb);
  return std::clamp(c, -1.0, 1.0);
}

enum class ProviderKind { precomputed_file, http_service };

struct EmbeddingProviderConfig {
  ProviderKind kind = ProviderKind::precomputed_file;
  std::string location;  // file path or base URL
  std::size_t expected_dim = 0;
  bool normalize = true;
  std::size_t batch_size = 64;
  std::size_t max_in_flight = 4;
  int max_retries = 3;
  int backoff_ms = 100;
  int timeout_s = 30;
};

/// One text to embed. Precomputed stores resolve by id; services embed the text.
struct EmbeddingRequest {
  std::string id;
  std::string text;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<EmbeddingVector> embed(std::span<const EmbeddingRequest> requests) = 0;
};

/// Read-only id -> vector store loaded from JSON Lines `{"id": str, "vector": [float]}`.
class PrecomputedStore final : public EmbeddingProvider {
 public:
  PrecomputedStore() = default;

  static PrecomputedStore load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open embedding store '" + path + "'");
    PrecomputedStore store;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto j = nlohmann::json::parse(line, nullptr, false);
      if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("vector") || !j["vector"].is_array())
        throw DataError("embedding store '" + path + "' line " + std::to_string(line_no) + ": malformed record");
      EmbeddingVector v;
      v.values.reserve(j["vector"].size());
      for (const auto& x : j["vector"]) {
        if (!x.is_number()) throw DataError("embedding store line " + std::to_string(line_no) + ": non-numeric value");
        const double d = x.get<double>();
        if (!std::isfinite(d)) throw DataError("embedding store line " + std::to_string(line_no) + ": non-finite value");
        v.values.push_back(d);
      }
      store.insert(j["id"].get<std::string>(), std::move(v));
    }
    return store;
  }

  void insert(std::string id, EmbeddingVector v) { vectors_.insert_or_assign(std::move(id), std::move(v)); }

  bool contains(const std::string& id) const { return vectors_.contains(id); }
  std::size_t size() const noexcept { return vectors_.size(); }

  const EmbeddingVector& at(const std::string& id) const {
    const auto it = vectors_.find(id);
    if (it == vectors_.end()) throw DataError("embedding store: missing vector for id '" + id + "'");
    return it->second;
  }

  std::vector<EmbeddingVector> embed(std::span<const EmbeddingRequest> requests) override {
    std::vector<std::string> missing;
    std::vector<EmbeddingVector> out;
    out.reserve(requests.size());
    for (const auto& r : requests) {
      const auto it = vectors_.find(r.id);
      if (it == vectors_.end()) {
        missing.push_back(r.id);
        continue;
      }
      out.push_back(it->second);
    }
    if (!missing.empty()) {
      std::string msg = "embedding store: missing vectors for ids:";
      for (const auto& id : missing) msg += " " + id;
      throw DataError(msg);
    }
    return out;
  }

  /// Writes the store as JSON Lines, ids sorted.
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write embedding store '" + path + "'");
    std::map<std::string, const EmbeddingVector*> sorted;
    for (const auto& [id, v] : vectors_) sorted.emplace(id, &v);
    for (const auto& [id, v] : sorted) out << nlohmann::json{{"id", id}, {"vector", v->values}}.dump() << '\n';
  }

 private:
  std::unordered_map<std::string, EmbeddingVector> vectors_;
};

/// Embeds through `provider`, then enforces the dimension contract and
/// optional normalization. Output order follows `requests`.
inline std::vector<EmbeddingVector> embed_batch(EmbeddingProvider& provider, std::span<const EmbeddingRequest> requests,
                                                const EmbeddingProviderConfig& cfg) {
  if (cfg.expected_dim == 0) throw ConfigError("embedding expected_dim must be positive");
  auto vectors = provider.embed(requests);
  if (vectors.size() != requests.size())
    throw UpstreamError("embedding provider returned " + std::to_string(vectors.size()) + " vectors for " +
                            std::to_string(requests.size()) + " texts",
                        false);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].dim() != cfg.expected_dim)
      throw ConfigError("embedding for '" + requests[i].id + "' has dimension " + std::to_string(vectors[i].dim()) +
                        ", expected " + std::to_string(cfg.expected_dim));
    for (double x : vectors[i].values)
      if (!std::isfinite(x)) throw DataError("embedding for '" + requests[i].id + "' has a non-finite value");
    if (cfg.normalize) vectors[i] = normalized(std::move(vectors[i]));
  }
  return vectors;
}

}  // namespace trendlens

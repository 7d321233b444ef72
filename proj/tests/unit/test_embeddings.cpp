#include <catch_amalgamated.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "trendlens/embedding_service.hpp"

using namespace trendlens;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("trendlens_test_" + name);
}

/// Local embedding service on an ephemeral port.
class MockEmbeddingServer {
 public:
  explicit MockEmbeddingServer(int fail_first = 0) : fail_remaining_(fail_first) {
    server_.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests_;
      if (fail_remaining_ > 0) {
        --fail_remaining_;
        res.status = 503;
        return;
      }
      const auto body = nlohmann::json::parse(req.body);
      nlohmann::json vectors = nlohmann::json::array();
      for (const auto& t : body.at("texts")) {
        const auto s = t.get<std::string>();
        vectors.push_back({static_cast<double>(s.size()), 1.0, 2.0});
      }
      res.set_content(nlohmann::json{{"vectors", vectors}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockEmbeddingServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/embed"; }
  int requests() const { return requests_; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> fail_remaining_;
  std::atomic<int> requests_{0};
};

}  // namespace

TEST_CASE("cosine similarity", "[embeddings][cosine]") {
  const EmbeddingVector v{0.3, -1.2, 4.0};
  CHECK(cosine(v, v) == 1.0);
  CHECK(cosine(EmbeddingVector{1, 0}, EmbeddingVector{0, 1}) == 0.0);
  // 32 / (sqrt(14) * sqrt(77)), evaluated in high precision.
  CHECK_THAT(cosine(EmbeddingVector{1, 2, 3}, EmbeddingVector{4, 5, 6}), WithinAbs(0.9746318461970762, 1e-12));
  CHECK(cosine(EmbeddingVector{1, 0}, EmbeddingVector{-1, 0}) == -1.0);
  CHECK_THROWS_AS(cosine(EmbeddingVector{0, 0}, EmbeddingVector{1, 0}), DataError);
  CHECK_THROWS_AS(cosine(EmbeddingVector{1, 0}, EmbeddingVector{1, 0, 0}), DataError);
}

TEST_CASE("cosine symmetry and scale invariance", "[embeddings][cosine][property]") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t dim = 1 + static_cast<std::size_t>(trial % 40);
    EmbeddingVector a, b;
    for (std::size_t i = 0; i < dim; ++i) {
      a.values.push_back(gauss(rng));
      b.values.push_back(gauss(rng));
    }
    const double c = cosine(a, b);
    CHECK(c == cosine(b, a));
    CHECK(c >= -1.0);
    CHECK(c <= 1.0);
    EmbeddingVector scaled = a;
    const double alpha = scale(rng);
    for (auto& x : scaled.values) x *= alpha;
    CHECK_THAT(cosine(scaled, b), WithinAbs(c, 1e-12));
  }
}

TEST_CASE("precomputed store lookup", "[embeddings][store]") {
  const auto path = temp_file("store.jsonl");
  {
    std::ofstream out(path);
    out << R"({"id":"u1","vector":[3.0,4.0,0.0]})" << "\n";
    out << R"({"id":"u2","vector":[0.0,0.0,2.0]})" << "\n";
  }
  auto store = PrecomputedStore::load(path.string());
  EmbeddingProviderConfig cfg;
  cfg.expected_dim = 3;

  SECTION("both ids present, order preserved, normalized") {
    const std::vector<EmbeddingRequest> req{{"u2", ""}, {"u1", ""}};
    const auto out = embed_batch(store, req, cfg);
    REQUIRE(out.size() == 2);
    CHECK(out[0].values == std::vector<double>{0.0, 0.0, 1.0});
    CHECK_THAT(out[1].values[0], WithinAbs(0.6, 1e-15));
    for (const auto& v : out) CHECK_THAT(l2_norm(v.values), WithinAbs(1.0, 1e-9));
  }
  SECTION("normalize=false keeps raw values") {
    cfg.normalize = false;
    const std::vector<EmbeddingRequest> req{{"u1", ""}};
    CHECK(embed_batch(store, req, cfg)[0].values == std::vector<double>{3.0, 4.0, 0.0});
  }
  SECTION("missing id is named in the error") {
    const std::vector<EmbeddingRequest> req{{"u1", ""}, {"ghost", ""}};
    CHECK_THROWS_WITH(embed_batch(store, req, cfg), ContainsSubstring("ghost"));
  }
  SECTION("dimension mismatch is a configuration error") {
    cfg.expected_dim = 4;
    const std::vector<EmbeddingRequest> req{{"u1", ""}};
    CHECK_THROWS_AS(embed_batch(store, req, cfg), ConfigError);
  }
  SECTION("save and reload") {
    const auto copy = temp_file("store_copy.jsonl");
    store.save(copy.string());
    auto again = PrecomputedStore::load(copy.string());
    CHECK(again.size() == 2);
    CHECK(again.at("u1") == store.at("u1"));
    std::filesystem::remove(copy);
  }
  std::filesystem::remove(path);
}

TEST_CASE("http embedding provider", "[embeddings][http]") {
  SECTION("batches and preserves order") {
    MockEmbeddingServer server;
    EmbeddingProviderConfig cfg;
    cfg.kind = ProviderKind::http_service;
    cfg.location = server.url();
    cfg.expected_dim = 3;
    cfg.normalize = false;
    cfg.batch_size = 2;
    auto provider = make_provider(cfg);
    const std::vector<EmbeddingRequest> req{{"a", "x"}, {"b", "xyz"}, {"c", "xy"}};
    const auto out = embed_batch(*provider, req, cfg);
    REQUIRE(out.size() == 3);
    CHECK(out[0].values[0] == 1.0);
    CHECK(out[1].values[0] == 3.0);
    CHECK(out[2].values[0] == 2.0);
    CHECK(server.requests() == 2);
  }
  SECTION("transient failures are retried") {
    MockEmbeddingServer server(2);
    EmbeddingProviderConfig cfg;
    cfg.kind = ProviderKind::http_service;
    cfg.location = server.url();
    cfg.expected_dim = 3;
    cfg.backoff_ms = 1;
    auto provider = make_provider(cfg);
    const std::vector<EmbeddingRequest> req{{"a", "hello"}};
    CHECK(embed_batch(*provider, req, cfg).size() == 1);
    CHECK(server.requests() == 3);
  }
  SECTION("unreachable service fails after bounded retries") {
    EmbeddingProviderConfig cfg;
    cfg.kind = ProviderKind::http_service;
    cfg.location = "http://127.0.0.1:1/embed";
    cfg.expected_dim = 3;
    cfg.max_retries = 2;
    cfg.backoff_ms = 1;
    cfg.timeout_s = 1;
    auto provider = make_provider(cfg);
    const std::vector<EmbeddingRequest> req{{"a", "hello"}};
    try {
      embed_batch(*provider, req, cfg);
      FAIL("expected UpstreamError");
    } catch (const UpstreamError& e) {
      CHECK_THAT(e.what(), ContainsSubstring("3 attempts"));
      CHECK(e.exit_code() == 4);
    }
  }
}

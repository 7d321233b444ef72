#pragma once

// JSON API over a snapshot directory.

#include <charconv>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>

#include <httplib.h>

#include "trendlens/pipeline.hpp"

namespace trendlens::api {

struct Response {
  int status = 200;
  json body;
};

inline Response error_response(int status, const std::string& message) {
  return Response{status, json{{"error", message}}};
}

/// Request handlers, independent of the transport. Reads only immutable
/// files written by the pipeline; the manifest decides what is visible.
class Service {
 public:
  explicit Service(RunConfig cfg, EmbeddingProvider* provider = nullptr)
      : cfg_(std::move(cfg)), store_(cfg_.snapshot_dir), provider_(provider) {
    if (!store_.has_manifest())
      throw DataError("no snapshot found in '" + cfg_.snapshot_dir.string() + "'; run the pipeline first");
    llm_cfg_ = cfg_.llm.with_env();
  }

  Response slices() {
    const auto m = store_.manifest();
    json rows = json::array();
    for (SliceIndex s = 0; s <= m.last_completed; ++s) {
      const auto r = report(s);
      rows.push_back(json{{"slice", s},
                          {"start", format_iso8601(r->start)},
                          {"end", format_iso8601(r->end)},
                          {"unit_count", r->unit_count},
                          {"active_topics", r->labels.size()},
                          {"new_topics", r->new_topics.size()},
                          {"thresholds", detail::optional_to_json(r->thresholds)}});
    }
    return {200, json{{"origin", format_iso8601(m.origin)},
                      {"granularity_days", m.granularity_days},
                      {"current_slice", m.last_completed},
                      {"slices", rows}}};
  }

  Response signals(const std::optional<std::string>& slice_param) {
    const auto s = resolve_slice(slice_param);
    if (!s.ok) return s.error;
    const auto r = report(s.value);
    const auto snap = snapshot(s.value);
    json rows = json::array();
    for (const auto& l : r->labels) {
      const auto& t = snap->engine.topic(l.topic_id);
      json words = json::array();
      for (auto it = t.word_history.rbegin(); it != t.word_history.rend(); ++it) {
        if (it->slice_index > s.value) continue;
        for (const auto& w : it->words) words.push_back(w.term);
        break;
      }
      rows.push_back(json{{"topic_id", l.topic_id},
                          {"label", to_string(l.label)},
                          {"popularity", l.popularity},
                          {"slope", detail::optional_to_json(l.slope)},
                          {"words", words}});
    }
    return {200, json{{"slice", s.value},
                      {"start", format_iso8601(r->start)},
                      {"end", format_iso8601(r->end)},
                      {"thresholds", detail::optional_to_json(r->thresholds)},
                      {"signals", rows},
                      {"zeroshot", r->zeroshot}}};
  }

  Response thresholds(const std::optional<std::string>& slice_param) {
    const auto s = resolve_slice(slice_param);
    if (!s.ok) return s.error;
    const auto r = report(s.value);
    json body{{"slice", s.value}, {"p10", nullptr}, {"p50", nullptr}, {"pool_size", 0}};
    if (r->thresholds) {
      body["p10"] = r->thresholds->p10;
      body["p50"] = r->thresholds->p50;
      body["pool_size"] = r->thresholds->pool_size;
    }
    return {200, body};
  }

  Response topic(const std::string& id_text) {
    TopicId id = 0;
    if (!parse_int(id_text, id)) return error_response(400, "topic id must be an integer");
    const auto m = store_.manifest();
    if (m.last_completed < 0) return error_response(404, "no slices processed yet");
    const auto snap = snapshot(m.last_completed);
    if (id < 0 || static_cast<std::size_t>(id) >= snap->engine.topics().size())
      return error_response(404, "unknown topic " + id_text);
    const auto& t = snap->engine.topic(id);
    json words = json::array();
    for (const auto& w : t.word_history) words.push_back(json{{"slice", w.slice_index}, {"words", w.words}});
    json labels = json::array();
    for (SliceIndex s = t.first_seen; s <= m.last_completed; ++s) {
      const auto r = report(s);
      std::optional<std::string> label;
      for (const auto& l : r->labels)
        if (l.topic_id == id) label = std::string(to_string(l.label));
      labels.push_back(label ? json(*label) : json(nullptr));
    }
    return {200, json{{"topic_id", id},
                      {"first_seen", t.first_seen},
                      {"last_updated", t.last_updated},
                      {"current_slice", m.last_completed},
                      {"series", json{{"first_slice", t.series.first_slice}, {"values", t.series.values}}},
                      {"labels", labels},
                      {"words", words},
                      {"docs", slice_map_to_json(t.parent_docs_by_slice)}}};
  }

  /// Queues a zero-shot topic for the next pipeline step.
  Response add_zeroshot(const std::string& body_text) {
    const auto body = json::parse(body_text, nullptr, false);
    if (!body.is_object() || !body.contains("name") || !body["name"].is_string() || !body.contains("description") ||
        !body["description"].is_string())
      return error_response(400, "body must be a JSON object with string fields name and description");
    PendingZeroShot p;
    p.name = body["name"].get<std::string>();
    p.description = body["description"].get<std::string>();
    if (p.name.empty()) return error_response(400, "name must not be empty");
    p.beta = body.value("beta", cfg_.zeroshot.default_beta);
    try {
      validate_beta(p.beta);
    } catch (const ConfigError& e) {
      return error_response(400, e.what());
    }
    std::lock_guard lock(zeroshot_mu_);
    const auto m = store_.manifest();
    const auto snap = m.last_completed < 0 ? std::make_shared<Snapshot>(store_.latest_snapshot()) : snapshot(m.last_completed);
    for (const auto& z : snap->engine.zeroshot_topics())
      if (z.name == p.name) return error_response(409, "zero-shot topic '" + p.name + "' already exists");
    for (const auto& q : list_pending(store_))
      if (q.name == p.name) return error_response(409, "zero-shot topic '" + p.name + "' is already queued");
    try {
      if (body.contains("embedding")) {
        p.embedding = body["embedding"].get<EmbeddingVector>();
        if (p.embedding.dim() != cfg_.embeddings.expected_dim)
          return error_response(400, "embedding dimension does not match the configured dimension");
        if (cfg_.embeddings.normalize) p.embedding = normalized(p.embedding);
      } else {
        p.embedding = embed_descriptions(provider(), cfg_.embeddings, {{p.name, p.description, p.beta}}).front();
      }
    } catch (const UpstreamError& e) {
      return error_response(502, e.what());
    } catch (const Error& e) {
      return error_response(400, e.what());
    } catch (const json::exception& e) {
      return error_response(400, e.what());
    }
    enqueue_pending(store_, p);
    return {201, json{{"name", p.name}, {"beta", p.beta}, {"effective_from_slice", m.last_completed + 1}}};
  }

  Response analyze(const std::string& id_text, const std::string& body_text) {
    if (!llm_cfg_.configured())
      return error_response(501, "LLM endpoint is not configured; set [llm] endpoint or " +
                                     std::string(interpretation::kLlmUrlEnv));
    TopicId id = 0;
    if (!parse_int(id_text, id)) return error_response(400, "topic id must be an integer");
    const auto m = store_.manifest();
    if (m.last_completed < 0) return error_response(404, "no slices processed yet");
    const auto snap = snapshot(m.last_completed);
    if (id < 0 || static_cast<std::size_t>(id) >= snap->engine.topics().size())
      return error_response(404, "unknown topic " + id_text);
    interpretation::DossierOptions opt;
    opt.max_excerpts_per_slice = cfg_.dossier.excerpts_per_slice;
    opt.max_excerpt_chars = cfg_.dossier.excerpt_chars;
    if (!body_text.empty()) {
      const auto body = json::parse(body_text, nullptr, false);
      if (!body.is_object()) return error_response(400, "body must be a JSON object");
      try {
        if (body.contains("up_to")) opt.up_to = parse_iso8601(body["up_to"].get<std::string>());
      } catch (const std::exception& e) {
        return error_response(400, std::string("up_to: ") + e.what());
      }
    }
    try {
      const auto catalog = build_catalog(snap->engine.topic(id));
      const auto dossier = interpretation::build_dossier(snap->engine, snap->origin, id, &catalog, opt);
      const auto a = interpreter().analyze(dossier);
      return {200, json{{"topic_id", id},
                        {"last_slice", a.last_slice},
                        {"evolution", a.evolution},
                        {"analysis", a.analysis},
                        {"markdown", interpretation::to_markdown(a)},
                        {"warnings", a.warnings}}};
    } catch (const UpstreamError& e) {
      return error_response(502, e.what());
    }
  }

  /// Text and embeddings for the units a topic captured.
  interpretation::UnitCatalog build_catalog(const GlobalTopic& t) {
    interpretation::UnitCatalog catalog;
    std::set<std::string> wanted;
    for (const auto& [s, ids] : t.units_by_slice) wanted.insert(ids.begin(), ids.end());
    std::vector<EmbeddingRequest> req;
    for (const auto& u : corpus_units()) {
      if (!wanted.contains(u.unit_id)) continue;
      catalog.units.emplace(u.unit_id, u);
      req.push_back({u.unit_id, u.text});
    }
    if (!req.empty()) {
      auto vectors = embed_batch(provider(), req, cfg_.embeddings);
      for (std::size_t i = 0; i < req.size(); ++i) catalog.embeddings.emplace(req[i].id, std::move(vectors[i]));
    }
    return catalog;
  }

 private:
  struct SliceParam {
    bool ok = false;
    SliceIndex value = 0;
    Response error;
  };

  static bool parse_int(const std::string& s, std::int64_t& out) {
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size() && !s.empty();
  }

  SliceParam resolve_slice(const std::optional<std::string>& param) {
    const auto m = store_.manifest();
    SliceParam r;
    if (m.last_completed < 0) {
      r.error = error_response(404, "no slices processed yet");
      return r;
    }
    r.value = m.last_completed;
    if (param && !parse_int(*param, r.value)) {
      r.error = error_response(400, "slice must be an integer");
      return r;
    }
    if (r.value < 0 || r.value > m.last_completed) {
      r.error = error_response(404, "unknown slice " + std::to_string(r.value));
      return r;
    }
    r.ok = true;
    return r;
  }

  std::shared_ptr<const SliceReport> report(SliceIndex s) {
    std::lock_guard lock(cache_mu_);
    auto& slot = reports_[s];
    if (!slot) slot = std::make_shared<SliceReport>(store_.report(s));
    return slot;
  }

  std::shared_ptr<const Snapshot> snapshot(SliceIndex s) {
    std::lock_guard lock(cache_mu_);
    if (!snapshot_ || snapshot_slice_ != s) {
      snapshot_ = std::make_shared<Snapshot>(store_.snapshot_at(s));
      snapshot_slice_ = s;
    }
    return snapshot_;
  }

  const std::vector<corpus::TextUnit>& corpus_units() {
    std::lock_guard lock(cache_mu_);
    if (!units_) units_ = std::make_unique<std::vector<corpus::TextUnit>>(load_corpus(cfg_.corpus).units);
    return *units_;
  }

  EmbeddingProvider& provider() {
    std::lock_guard lock(cache_mu_);
    if (provider_) return *provider_;
    if (!owned_provider_) owned_provider_ = make_provider(cfg_.embeddings);
    return *owned_provider_;
  }

  interpretation::Interpreter& interpreter() {
    std::lock_guard lock(cache_mu_);
    if (!interpreter_) interpreter_ = std::make_unique<interpretation::Interpreter>(llm_cfg_);
    return *interpreter_;
  }

  RunConfig cfg_;
  SnapshotStore store_;
  EmbeddingProvider* provider_;
  interpretation::LlmConfig llm_cfg_;
  std::mutex cache_mu_;
  std::mutex zeroshot_mu_;
  std::map<SliceIndex, std::shared_ptr<const SliceReport>> reports_;
  std::shared_ptr<const Snapshot> snapshot_;
  SliceIndex snapshot_slice_ = -1;
  std::unique_ptr<std::vector<corpus::TextUnit>> units_;
  std::unique_ptr<EmbeddingProvider> owned_provider_;
  std::unique_ptr<interpretation::Interpreter> interpreter_;
};

/// Binds `service` to HTTP routes.
inline void install_routes(httplib::Server& server, Service& service) {
  auto reply = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto param = [](const httplib::Request& req, const char* name) -> std::optional<std::string> {
    if (!req.has_param(name)) return std::nullopt;
    return req.get_param_value(name);
  };
  auto guarded = [reply](auto fn) {
    return [reply, fn](const httplib::Request& req, httplib::Response& res) {
      try {
        reply(res, fn(req));
      } catch (const NotFoundError& e) {
        reply(res, error_response(404, e.what()));
      } catch (const std::exception& e) {
        reply(res, error_response(500, e.what()));
      }
    };
  };
  server.Get("/health", guarded([](const httplib::Request&) { return Response{200, json{{"status", "ok"}}}; }));
  server.Get("/slices", guarded([&service](const httplib::Request&) { return service.slices(); }));
  server.Get("/signals", guarded([&service, param](const httplib::Request& req) { return service.signals(param(req, "slice")); }));
  server.Get("/thresholds",
             guarded([&service, param](const httplib::Request& req) { return service.thresholds(param(req, "slice")); }));
  server.Get(R"(/topics/([^/]+))",
             guarded([&service](const httplib::Request& req) { return service.topic(req.matches[1].str()); }));
  server.Post("/zeroshot", guarded([&service](const httplib::Request& req) { return service.add_zeroshot(req.body); }));
  server.Post(R"(/analyze/([^/]+))",
              guarded([&service](const httplib::Request& req) { return service.analyze(req.matches[1].str(), req.body); }));
}

}  // namespace trendlens::api

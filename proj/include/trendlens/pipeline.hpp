#pragma once

// Slice-by-slice orchestration with per-slice snapshots and resume.
//
// Layout of the snapshot directory:
//   manifest.json                 origin, slice count, last completed slice
//   snapshots/initial.json        engine state before the first slice
//   snapshots/slice_NNNNNN.json   engine state after each slice
//   reports/slice_NNNNNN.json     SliceReport of each slice
//   pending_zeroshot/*.json       zero-shot topics queued for the next step

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <spdlog/spdlog.h>

#include "trendlens/config.hpp"
#include "trendlens/embedding_service.hpp"

namespace trendlens {

inline constexpr int kManifestVersion = 1;
inline constexpr const char* kZeroShotEmbeddingPrefix = "zeroshot:";

struct Manifest {
  Instant origin;
  int granularity_days = 1;
  SliceIndex slice_count = 0;
  SliceIndex last_completed = -1;
};

inline json manifest_to_json(const Manifest& m) {
  return json{{"version", kManifestVersion},
              {"origin", format_iso8601(m.origin)},
              {"granularity_days", m.granularity_days},
              {"slice_count", m.slice_count},
              {"last_completed", m.last_completed}};
}

inline Manifest manifest_from_json(const json& j) {
  if (j.at("version").get<int>() != kManifestVersion) throw DataError("unsupported manifest version");
  return Manifest{parse_iso8601(j.at("origin").get<std::string>()), j.at("granularity_days").get<int>(),
                  j.at("slice_count").get<SliceIndex>(), j.at("last_completed").get<SliceIndex>()};
}

/// Paths inside a snapshot directory.
class SnapshotStore {
 public:
  explicit SnapshotStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const noexcept { return dir_; }
  std::filesystem::path manifest_path() const { return dir_ / "manifest.json"; }
  std::filesystem::path initial_snapshot_path() const { return dir_ / "snapshots" / "initial.json"; }
  std::filesystem::path snapshot_path(SliceIndex s) const { return dir_ / "snapshots" / numbered(s); }
  std::filesystem::path report_path(SliceIndex s) const { return dir_ / "reports" / numbered(s); }
  std::filesystem::path pending_dir() const { return dir_ / "pending_zeroshot"; }

  void ensure_layout() const {
    std::filesystem::create_directories(dir_ / "snapshots");
    std::filesystem::create_directories(dir_ / "reports");
    std::filesystem::create_directories(pending_dir());
  }

  bool has_manifest() const { return std::filesystem::exists(manifest_path()); }

  Manifest manifest() const { return manifest_from_json(json::parse(read_text_file(manifest_path()))); }

  Snapshot latest_snapshot() const {
    const auto m = manifest();
    const auto path = m.last_completed < 0 ? initial_snapshot_path() : snapshot_path(m.last_completed);
    return snapshot_from_json(json::parse(read_text_file(path)));
  }

  Snapshot snapshot_at(SliceIndex s) const { return snapshot_from_json(json::parse(read_text_file(snapshot_path(s)))); }

  SliceReport report(SliceIndex s) const { return json::parse(read_text_file(report_path(s))).get<SliceReport>(); }

 private:
  static std::string numbered(SliceIndex s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "slice_%06lld.json", static_cast<long long>(s));
    return buf;
  }

  std::filesystem::path dir_;
};

/// A zero-shot topic waiting to be registered at the next step.
struct PendingZeroShot {
  std::string name;
  std::string description;
  double beta = kDefaultZeroShotBeta;
  EmbeddingVector embedding;
};

inline void to_json(json& j, const PendingZeroShot& p) {
  j = json{{"name", p.name}, {"description", p.description}, {"beta", p.beta}, {"embedding", p.embedding}};
}
inline void from_json(const json& j, PendingZeroShot& p) {
  p.name = j.at("name").get<std::string>();
  p.description = j.at("description").get<std::string>();
  p.beta = j.at("beta").get<double>();
  p.embedding = j.at("embedding").get<EmbeddingVector>();
}

inline std::vector<PendingZeroShot> list_pending(const SnapshotStore& store) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::exists(store.pending_dir()))
    for (const auto& e : std::filesystem::directory_iterator(store.pending_dir()))
      if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<PendingZeroShot> out;
  for (const auto& f : files) out.push_back(json::parse(read_text_file(f)).get<PendingZeroShot>());
  return out;
}

/// Queues a topic. Files are named by arrival order so draining is FIFO.
inline void enqueue_pending(const SnapshotStore& store, const PendingZeroShot& p) {
  std::filesystem::create_directories(store.pending_dir());
  const auto stamp = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::system_clock::now().time_since_epoch()).count();
  char buf[64];
  std::snprintf(buf, sizeof buf, "%020lld_", static_cast<long long>(stamp));
  std::string safe;
  for (const char c : p.name) safe += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  write_text_file(store.pending_dir() / (buf + safe + ".json"), dump_canonical(json(p)));
}

/// Reads `{name, description, beta?}` definitions.
inline std::vector<ZeroShotDefinition> load_zeroshot_definitions(const std::filesystem::path& path, double default_beta) {
  const auto j = json::parse(read_text_file(path), nullptr, false);
  if (!j.is_array()) throw ConfigError("zero-shot topics file '" + path.string() + "' must hold a JSON array");
  std::vector<ZeroShotDefinition> out;
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("name") || !e.contains("description"))
      throw ConfigError("zero-shot topics file: every entry needs name and description");
    ZeroShotDefinition d{e.at("name").get<std::string>(), e.at("description").get<std::string>(),
                         e.value("beta", default_beta)};
    validate_beta(d.beta);
    out.push_back(std::move(d));
  }
  return out;
}

/// Embeds zero-shot descriptions. Precomputed stores look them up under
/// "zeroshot:<name>"; services embed the description text.
inline std::vector<EmbeddingVector> embed_descriptions(EmbeddingProvider& provider, const EmbeddingProviderConfig& cfg,
                                                       const std::vector<ZeroShotDefinition>& defs) {
  std::vector<EmbeddingRequest> req;
  for (const auto& d : defs) req.push_back({kZeroShotEmbeddingPrefix + d.name, d.description});
  if (req.empty()) return {};
  return embed_batch(provider, req, cfg);
}

struct LoadedCorpus {
  std::vector<corpus::TextUnit> units;
  std::size_t documents = 0;
  std::size_t skipped = 0;
};

inline LoadedCorpus load_corpus(const CorpusConfig& cfg) {
  LoadedCorpus out;
  std::vector<corpus::RawDocument> docs;
  std::unordered_set<std::string> seen;
  for (const auto& path : cfg.paths) {
    auto r = corpus::ingest_file(path.string());
    out.skipped += r.skipped_malformed + r.rejected_duplicates;
    for (auto& d : r.documents) {
      if (!seen.insert(d.id).second) {
        spdlog::warn("document id '{}' in '{}' repeats an earlier file; rejected", d.id, path.string());
        ++out.skipped;
        continue;
      }
      docs.push_back(std::move(d));
    }
  }
  out.documents = docs.size();
  out.units = corpus::preprocess_all(docs, cfg.max_unit_chars);
  return out;
}

struct PipelineOptions {
  std::optional<SliceIndex> stop_after_slice;  // stop once this slice is persisted
};

struct PipelineResult {
  SliceIndex slice_count = 0;
  SliceIndex first_processed = 0;
  SliceIndex processed = 0;
  bool resumed = false;
  Snapshot final_snapshot;
};

namespace detail {

/// Registers queued zero-shot topics on `engine` and returns the files
/// consumed. The caller removes them once the slice is persisted.
inline std::vector<std::filesystem::path> drain_pending(const SnapshotStore& store, TrendEngine& engine) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(store.pending_dir()))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const auto p = json::parse(read_text_file(f)).get<PendingZeroShot>();
    try {
      engine.add_zeroshot(ZeroShotTopic{p.name, p.description, p.embedding, p.beta});
      spdlog::info("zero-shot topic '{}' registered from slice {}", p.name, engine.current_slice() + 1);
    } catch (const Error& e) {
      spdlog::warn("dropping queued zero-shot topic '{}': {}", p.name, e.what());
    }
  }
  return files;
}

}  // namespace detail

/// Runs every slice not yet in the snapshot directory. Each completed slice
/// writes its report, then its snapshot, then the manifest, so an
/// interrupted run resumes from the last manifest entry.
inline PipelineResult run_pipeline(const RunConfig& cfg, const PipelineOptions& opt = {},
                                   EmbeddingProvider* provider_override = nullptr) {
  cfg.validate();
  std::unique_ptr<EmbeddingProvider> owned;
  EmbeddingProvider* provider = provider_override;
  if (!provider) {
    owned = make_provider(cfg.embeddings);
    provider = owned.get();
  }
  std::vector<ZeroShotDefinition> defs;
  if (cfg.zeroshot.topics_file) defs = load_zeroshot_definitions(*cfg.zeroshot.topics_file, cfg.zeroshot.default_beta);

  const auto loaded = load_corpus(cfg.corpus);
  spdlog::info("corpus: {} documents, {} units, {} records skipped", loaded.documents, loaded.units.size(), loaded.skipped);

  const corpus::Granularity granularity{cfg.engine.granularity_days};
  std::optional<Instant> start = cfg.corpus.start, end = cfg.corpus.end;
  if (!loaded.units.empty()) {
    const auto [lo, hi] = std::minmax_element(loaded.units.begin(), loaded.units.end(),
                                              [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
    if (!start) start = lo->timestamp;
    if (!end) end = hi->timestamp + std::chrono::seconds{1};
  }
  std::vector<corpus::DocumentSlice> slices;
  if (start && end && *start < *end) slices = corpus::slice(loaded.units, granularity, *start, *end);
  const Instant origin = start ? floor_to_day(*start) : Instant{};

  SnapshotStore store(cfg.snapshot_dir);
  store.ensure_layout();
  PipelineResult result;
  result.slice_count = static_cast<SliceIndex>(slices.size());

  Snapshot snap;
  Manifest manifest{origin, cfg.engine.granularity_days, result.slice_count, -1};
  if (store.has_manifest()) {
    const auto previous = store.manifest();
    snap = store.latest_snapshot();
    if (!(snap.engine.params() == cfg.engine) || previous.granularity_days != cfg.engine.granularity_days)
      throw ConfigError("snapshot directory '" + cfg.snapshot_dir.string() + "' was produced with different engine parameters");
    if (previous.last_completed >= 0 && previous.origin != origin)
      throw ConfigError("snapshot directory '" + cfg.snapshot_dir.string() + "' was produced for a different time origin");
    manifest.last_completed = previous.last_completed;
    result.resumed = previous.last_completed >= 0;
    snap.origin = origin;
  } else {
    snap = Snapshot{origin, TrendEngine(cfg.engine)};
  }

  // Configured zero-shot topics not yet tracked join at the next slice.
  {
    std::vector<ZeroShotDefinition> fresh;
    for (const auto& d : defs) {
      const auto& known = snap.engine.zeroshot_topics();
      if (std::none_of(known.begin(), known.end(), [&](const ZeroShotTopic& z) { return z.name == d.name; }))
        fresh.push_back(d);
    }
    const auto vectors = embed_descriptions(*provider, cfg.embeddings, fresh);
    for (std::size_t i = 0; i < fresh.size(); ++i)
      snap.engine.add_zeroshot(ZeroShotTopic{fresh[i].name, fresh[i].description, vectors[i], fresh[i].beta});
  }
  if (!store.has_manifest()) {
    write_text_file(store.initial_snapshot_path(), dump_canonical(snapshot_to_json(snap)));
    write_text_file(store.manifest_path(), dump_canonical(manifest_to_json(manifest)));
  }

  result.first_processed = manifest.last_completed + 1;
  for (SliceIndex s = manifest.last_completed + 1; s < result.slice_count; ++s) {
    const auto& slice = slices[static_cast<std::size_t>(s)];
    // Work on a copy so a failure leaves the persisted state untouched.
    TrendEngine next = snap.engine;
    const auto consumed = detail::drain_pending(store, next);

    std::unordered_map<std::string, EmbeddingVector> embeddings;
    if (!slice.units.empty()) {
      std::vector<EmbeddingRequest> requests;
      requests.reserve(slice.units.size());
      for (const auto& u : slice.units) requests.push_back({u.unit_id, u.text});
      auto vectors = embed_batch(*provider, requests, cfg.embeddings);
      for (std::size_t i = 0; i < vectors.size(); ++i) embeddings.emplace(requests[i].id, std::move(vectors[i]));
    }
    const auto topics = extract(slice, embeddings, cfg.extraction);
    const auto captures = match_slice(next.zeroshot_topics(), slice, embeddings);
    const auto report = next.step(slice, topics, captures);
    snap.engine = std::move(next);

    write_text_file(store.report_path(s), dump_canonical(json(report)));
    write_text_file(store.snapshot_path(s), dump_canonical(snapshot_to_json(snap)));
    manifest.last_completed = s;
    write_text_file(store.manifest_path(), dump_canonical(manifest_to_json(manifest)));
    for (const auto& f : consumed) std::filesystem::remove(f);
    ++result.processed;
    spdlog::info("slice {} [{} .. {}): {} units, {} topics in slice, {} global topics", s, format_date(slice.start),
                 format_date(slice.end), slice.units.size(), topics.size(), snap.engine.topics().size());
    if (opt.stop_after_slice && s >= *opt.stop_after_slice) break;
  }
  result.final_snapshot = snap;
  return result;
}

}  // namespace trendlens

#pragma once

// JSON encoding of engine state snapshots and slice reports.

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "trendlens/trend_engine.hpp"

namespace trendlens {

using nlohmann::json;

inline constexpr int kSnapshotVersion = 1;

namespace detail {

template <typename T>
json optional_to_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> optional_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<T>();
}

}  // namespace detail

inline void to_json(json& j, const EmbeddingVector& v) { j = v.values; }
inline void from_json(const json& j, EmbeddingVector& v) { v.values = j.get<std::vector<double>>(); }

namespace text {
inline void to_json(json& j, const TermScore& t) { j = json::array({t.term, t.score}); }
inline void from_json(const json& j, TermScore& t) {
  t.term = j.at(0).get<std::string>();
  t.score = j.at(1).get<double>();
}
}  // namespace text

inline void to_json(json& j, const PopularitySeries& s) {
  j = json{{"first_slice", s.first_slice}, {"values", s.values}, {"last_update_slice", s.last_update_slice}};
}
inline void from_json(const json& j, PopularitySeries& s) {
  s.first_slice = j.at("first_slice").get<SliceIndex>();
  s.values = j.at("values").get<std::vector<double>>();
  s.last_update_slice = j.at("last_update_slice").get<SliceIndex>();
}

inline std::string_view to_string(DecayMode m) { return m == DecayMode::elapsed_gap ? "elapsed_gap" : "fixed_step"; }
inline DecayMode decay_mode_from_string(std::string_view s) {
  if (s == "elapsed_gap") return DecayMode::elapsed_gap;
  if (s == "fixed_step") return DecayMode::fixed_step;
  throw ConfigError("unknown decay mode '" + std::string(s) + "'");
}

inline void to_json(json& j, const EngineParams& p) {
  j = json{{"merge_threshold", p.merge_threshold}, {"decay", p.decay},
           {"window", p.window},                   {"granularity_days", p.granularity_days},
           {"slope_min_points", p.slope_min_points}, {"decay_mode", to_string(p.decay_mode)},
           {"archive_floor", p.archive_floor}};
}
inline void from_json(const json& j, EngineParams& p) {
  p.merge_threshold = j.at("merge_threshold").get<double>();
  p.decay = j.at("decay").get<double>();
  p.window = j.at("window").get<SliceIndex>();
  p.granularity_days = j.at("granularity_days").get<int>();
  p.slope_min_points = j.at("slope_min_points").get<std::size_t>();
  p.decay_mode = decay_mode_from_string(j.at("decay_mode").get<std::string>());
  p.archive_floor = j.at("archive_floor").get<double>();
}

inline json slice_map_to_json(const std::map<SliceIndex, std::vector<std::string>>& m) {
  json out = json::array();
  for (const auto& [s, ids] : m) out.push_back(json{{"slice", s}, {"ids", ids}});
  return out;
}
inline std::map<SliceIndex, std::vector<std::string>> slice_map_from_json(const json& j) {
  std::map<SliceIndex, std::vector<std::string>> m;
  for (const auto& e : j) m.emplace(e.at("slice").get<SliceIndex>(), e.at("ids").get<std::vector<std::string>>());
  return m;
}

inline void to_json(json& j, const GlobalTopic& t) {
  json words = json::array();
  for (const auto& w : t.word_history) words.push_back(json{{"slice", w.slice_index}, {"words", w.words}});
  j = json{{"topic_id", t.topic_id},
           {"anchor_centroid", t.anchor_centroid},
           {"word_history", words},
           {"parent_docs_by_slice", slice_map_to_json(t.parent_docs_by_slice)},
           {"units_by_slice", slice_map_to_json(t.units_by_slice)},
           {"first_seen", t.first_seen},
           {"last_updated", t.last_updated},
           {"series", t.series}};
}
inline void from_json(const json& j, GlobalTopic& t) {
  t.topic_id = j.at("topic_id").get<TopicId>();
  t.anchor_centroid = j.at("anchor_centroid").get<EmbeddingVector>();
  t.word_history.clear();
  for (const auto& w : j.at("word_history"))
    t.word_history.push_back({w.at("slice").get<SliceIndex>(), w.at("words").get<std::vector<text::TermScore>>()});
  t.parent_docs_by_slice = slice_map_from_json(j.at("parent_docs_by_slice"));
  t.units_by_slice = slice_map_from_json(j.at("units_by_slice"));
  t.first_seen = j.at("first_seen").get<SliceIndex>();
  t.last_updated = j.at("last_updated").get<SliceIndex>();
  t.series = j.at("series").get<PopularitySeries>();
}

inline void to_json(json& j, const ZeroShotTopic& z) {
  j = json{{"name", z.name},         {"description", z.description},
           {"embedding", z.embedding}, {"beta", z.beta},
           {"added_at", z.added_at}, {"series", z.series},
           {"captured", slice_map_to_json(z.captured)}};
}
inline void from_json(const json& j, ZeroShotTopic& z) {
  z.name = j.at("name").get<std::string>();
  z.description = j.at("description").get<std::string>();
  z.embedding = j.at("embedding").get<EmbeddingVector>();
  z.beta = j.at("beta").get<double>();
  z.added_at = j.at("added_at").get<SliceIndex>();
  z.series = j.at("series").get<PopularitySeries>();
  z.captured = slice_map_from_json(j.at("captured"));
}

inline void to_json(json& j, const Thresholds& t) {
  j = json{{"p10", t.p10}, {"p50", t.p50}, {"pool_size", t.pool_size}};
}
inline void from_json(const json& j, Thresholds& t) {
  t.p10 = j.at("p10").get<double>();
  t.p50 = j.at("p50").get<double>();
  t.pool_size = j.at("pool_size").get<std::size_t>();
}

inline void to_json(json& j, const MergeEvent& e) {
  j = json{{"incoming_index", e.incoming_index}, {"topic_id", e.topic_id}, {"created", e.created},
           {"similarity", detail::optional_to_json(e.similarity)}, {"increment", e.increment}};
}
inline void from_json(const json& j, MergeEvent& e) {
  e.incoming_index = j.at("incoming_index").get<std::size_t>();
  e.topic_id = j.at("topic_id").get<TopicId>();
  e.created = j.at("created").get<bool>();
  e.similarity = detail::optional_from_json<double>(j.at("similarity"));
  e.increment = j.at("increment").get<std::size_t>();
}

inline void to_json(json& j, const SignalLabel& l) {
  j = json{{"topic_id", l.topic_id}, {"slice", l.slice_index}, {"label", to_string(l.label)},
           {"popularity", l.popularity}, {"p10", l.p10}, {"p50", l.p50},
           {"slope", detail::optional_to_json(l.slope)}};
}
inline void from_json(const json& j, SignalLabel& l) {
  l.topic_id = j.at("topic_id").get<TopicId>();
  l.slice_index = j.at("slice").get<SliceIndex>();
  l.label = signal_class_from_string(j.at("label").get<std::string>());
  l.popularity = j.at("popularity").get<double>();
  l.p10 = j.at("p10").get<double>();
  l.p50 = j.at("p50").get<double>();
  l.slope = detail::optional_from_json<double>(j.at("slope"));
}

inline void to_json(json& j, const ZeroShotLabel& l) {
  j = json{{"name", l.name},         {"slice", l.slice_index},
           {"label", to_string(l.label)}, {"popularity", l.popularity},
           {"slope", detail::optional_to_json(l.slope)}, {"captured_docs", l.captured_docs}};
}
inline void from_json(const json& j, ZeroShotLabel& l) {
  l.name = j.at("name").get<std::string>();
  l.slice_index = j.at("slice").get<SliceIndex>();
  l.label = signal_class_from_string(j.at("label").get<std::string>());
  l.popularity = j.at("popularity").get<double>();
  l.slope = detail::optional_from_json<double>(j.at("slope"));
  l.captured_docs = j.at("captured_docs").get<std::size_t>();
}

inline void to_json(json& j, const SliceReport& r) {
  j = json{{"slice", r.slice_index},
           {"start", format_iso8601(r.start)},
           {"end", format_iso8601(r.end)},
           {"unit_count", r.unit_count},
           {"merges", r.merges},
           {"new_topics", r.new_topics},
           {"thresholds", detail::optional_to_json(r.thresholds)},
           {"labels", r.labels},
           {"archived", r.archived},
           {"zeroshot", r.zeroshot}};
}
inline void from_json(const json& j, SliceReport& r) {
  r.slice_index = j.at("slice").get<SliceIndex>();
  r.start = parse_iso8601(j.at("start").get<std::string>());
  r.end = parse_iso8601(j.at("end").get<std::string>());
  r.unit_count = j.at("unit_count").get<std::size_t>();
  r.merges = j.at("merges").get<std::vector<MergeEvent>>();
  r.new_topics = j.at("new_topics").get<std::vector<TopicId>>();
  r.thresholds = detail::optional_from_json<Thresholds>(j.at("thresholds"));
  r.labels = j.at("labels").get<std::vector<SignalLabel>>();
  r.archived = j.at("archived").get<std::vector<TopicId>>();
  r.zeroshot = j.at("zeroshot").get<std::vector<ZeroShotLabel>>();
}

/// Engine state plus the calendar anchor needed to date slices.
struct Snapshot {
  Instant origin;
  TrendEngine engine;
};

inline json snapshot_to_json(const Snapshot& s) {
  return json{{"version", kSnapshotVersion},
              {"origin", format_iso8601(s.origin)},
              {"current_slice", s.engine.current_slice()},
              {"params", s.engine.params()},
              {"topics", s.engine.topics()},
              {"zeroshot", s.engine.zeroshot_topics()}};
}

inline Snapshot snapshot_from_json(const json& j) {
  const int version = j.at("version").get<int>();
  if (version != kSnapshotVersion)
    throw DataError("unsupported snapshot version " + std::to_string(version));
  Snapshot s;
  s.origin = parse_iso8601(j.at("origin").get<std::string>());
  s.engine = TrendEngine::restore(j.at("params").get<EngineParams>(), j.at("current_slice").get<SliceIndex>(),
                                  j.at("topics").get<std::vector<GlobalTopic>>(),
                                  j.at("zeroshot").get<std::vector<ZeroShotTopic>>());
  return s;
}

/// Canonical text form used for all persisted JSON files.
inline std::string dump_canonical(const json& j) { return j.dump(1) + "\n"; }

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp + "'");
    out << content;
    if (!out) throw DataError("write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace trendlens

#pragma once

// Cumulative topic set, popularity dynamics and signal classification.
//
// Each slice runs merge -> decay -> thresholds -> classify. Incoming topics
// are compared against the frozen anchor centroid of every known topic,
// including topics created earlier in the same slice.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "trendlens/corpus.hpp"
#include "trendlens/popularity.hpp"
#include "trendlens/topic_extraction.hpp"
#include "trendlens/zeroshot.hpp"

namespace trendlens {

struct EngineParams {
  double merge_threshold = 0.7;
  double decay = 0.01;
  SliceIndex window = 7;
  int granularity_days = 1;
  std::size_t slope_min_points = 3;
  DecayMode decay_mode = DecayMode::elapsed_gap;
  double archive_floor = 1e-6;

  /// Checks the ranges accepted from configuration. The engine itself runs
  /// with any merge threshold, so extreme values can be exercised directly.
  void validate() const {
    if (!(merge_threshold > 0.0 && merge_threshold <= 1.0)) throw ConfigError("merge_threshold must lie in (0, 1]");
    if (!(decay > 0.0)) throw ConfigError("decay must be positive");
    if (window < 2) throw ConfigError("window must be at least 2 slices");
    if (granularity_days < 1) throw ConfigError("granularity_days must be at least 1");
    if (slope_min_points < 2) throw ConfigError("slope_min_points must be at least 2");
    if (!(archive_floor >= 0.0)) throw ConfigError("archive_floor must be non-negative");
  }

  bool operator==(const EngineParams&) const = default;
};

struct WordsAtSlice {
  SliceIndex slice_index = 0;
  std::vector<text::TermScore> words;

  bool operator==(const WordsAtSlice&) const = default;
};

struct GlobalTopic {
  TopicId topic_id = 0;
  EmbeddingVector anchor_centroid;  // frozen at creation
  std::vector<WordsAtSlice> word_history;
  std::map<SliceIndex, std::vector<std::string>> parent_docs_by_slice;
  std::map<SliceIndex, std::vector<std::string>> units_by_slice;
  SliceIndex first_seen = 0;
  SliceIndex last_updated = 0;
  PopularitySeries series;

  bool operator==(const GlobalTopic&) const = default;
};

struct MergeEvent {
  std::size_t incoming_index = 0;
  TopicId topic_id = 0;
  bool created = false;
  std::optional<double> similarity;  // best cosine against existing anchors
  std::size_t increment = 0;         // new parent documents credited
};

struct SignalLabel {
  TopicId topic_id = 0;
  SliceIndex slice_index = 0;
  SignalClass label = SignalClass::noise;
  double popularity = 0.0;
  double p10 = 0.0;
  double p50 = 0.0;
  std::optional<double> slope;
};

struct SliceReport {
  SliceIndex slice_index = 0;
  Instant start;
  Instant end;
  std::size_t unit_count = 0;
  std::vector<MergeEvent> merges;
  std::vector<TopicId> new_topics;
  std::optional<Thresholds> thresholds;
  std::vector<SignalLabel> labels;
  std::vector<TopicId> archived;  // topics that fell below the floor this slice
  std::vector<ZeroShotLabel> zeroshot;
};

class TrendEngine {
 public:
  TrendEngine() = default;
  explicit TrendEngine(EngineParams params) : params_(params) {}

  const EngineParams& params() const noexcept { return params_; }
  SliceIndex current_slice() const noexcept { return current_slice_; }
  const std::vector<GlobalTopic>& topics() const noexcept { return topics_; }
  const std::vector<ZeroShotTopic>& zeroshot_topics() const noexcept { return zeroshot_; }

  const GlobalTopic& topic(TopicId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= topics_.size())
      throw NotFoundError("unknown topic id " + std::to_string(id));
    return topics_[static_cast<std::size_t>(id)];
  }

  /// A topic is active at a slice when it has a value there at or above the archive floor.
  bool is_active(const GlobalTopic& t, SliceIndex slice) const {
    return t.series.has(slice) && t.series.at(slice) >= params_.archive_floor;
  }

  /// Registers a zero-shot topic tracked from the next processed slice on.
  void add_zeroshot(ZeroShotTopic topic) {
    validate_beta(topic.beta);
    for (const auto& z : zeroshot_)
      if (z.name == topic.name) throw ConfigError("zero-shot topic '" + topic.name + "' already exists");
    if (!zeroshot_.empty() && !topic.embedding.values.empty() && zeroshot_.front().embedding.dim() != topic.embedding.dim())
      throw DataError("zero-shot topic '" + topic.name + "' embedding dimension differs from existing topics");
    topic.added_at = current_slice_ + 1;
    topic.series = {};
    topic.captured.clear();
    zeroshot_.push_back(std::move(topic));
  }

  /// Merges the slice's topics into the cumulative set and credits popularity.
  std::vector<MergeEvent> merge_slice(std::span<const SliceTopic> incoming, SliceIndex slice) {
    if (slice != current_slice_ + 1)
      throw OrderingError("expected slice " + std::to_string(current_slice_ + 1) + ", got " + std::to_string(slice));
    current_slice_ = slice;
    std::vector<MergeEvent> events;
    events.reserve(incoming.size());
    for (std::size_t i = 0; i < incoming.size(); ++i) {
      const auto& in = incoming[i];
      MergeEvent ev;
      ev.incoming_index = i;
      std::optional<std::size_t> best;
      double best_sim = 0.0;
      for (std::size_t k = 0; k < topics_.size(); ++k) {
        if (topics_[k].anchor_centroid.dim() != in.cluster.centroid.dim())
          throw DataError("merge: centroid dimension " + std::to_string(in.cluster.centroid.dim()) +
                          " does not match anchor dimension " + std::to_string(topics_[k].anchor_centroid.dim()));
        const double sim = cosine(in.cluster.centroid, topics_[k].anchor_centroid);
        if (!best || sim > best_sim) {
          best = k;
          best_sim = sim;
        }
      }
      if (best) ev.similarity = best_sim;
      if (best && best_sim >= params_.merge_threshold) {
        auto& t = topics_[*best];
        ev.topic_id = t.topic_id;
        ev.increment = credit(t, in, slice);
      } else {
        GlobalTopic t;
        t.topic_id = static_cast<TopicId>(topics_.size());
        t.anchor_centroid = in.cluster.centroid;
        t.first_seen = slice;
        t.series.first_slice = slice;
        ev.topic_id = t.topic_id;
        ev.created = true;
        topics_.push_back(std::move(t));
        ev.increment = credit(topics_.back(), in, slice);
      }
      events.push_back(ev);
    }
    return events;
  }

  /// Decays every topic that received nothing in `slice`.
  void apply_decay(SliceIndex slice) {
    require_current(slice);
    for (auto& t : topics_) {
      if (t.series.has(slice) || t.series.empty()) continue;
      const double dt = silent_gap_days(params_.decay_mode, slice, t.last_updated, params_.granularity_days);
      t.series.set(slice, *t.series.latest() * decay_factor(params_.decay, dt));
    }
  }

  /// Percentiles over the window values of every active topic.
  std::optional<Thresholds> compute_thresholds(SliceIndex slice) const {
    require_current(slice);
    std::vector<double> pool;
    for (const auto& t : topics_) {
      if (!is_active(t, slice)) continue;
      for (const auto& [s, v] : t.series.window(slice, params_.window)) pool.push_back(v);
    }
    auto th = percentile_thresholds(std::move(pool));
    if (!th) spdlog::debug("slice {}: empty popularity pool, all topics fall back to noise", slice);
    return th;
  }

  std::optional<double> slope(const PopularitySeries& series, SliceIndex slice) const {
    return ols_slope(series.window(slice, params_.window), params_.slope_min_points);
  }

  std::vector<SignalLabel> classify(SliceIndex slice, const std::optional<Thresholds>& thresholds) const {
    require_current(slice);
    std::vector<SignalLabel> labels;
    for (const auto& t : topics_) {
      if (!is_active(t, slice)) continue;
      SignalLabel l;
      l.topic_id = t.topic_id;
      l.slice_index = slice;
      l.popularity = t.series.at(slice);
      l.slope = slope(t.series, slice);
      if (thresholds) {
        l.p10 = thresholds->p10;
        l.p50 = thresholds->p50;
      }
      l.label = classify_popularity(l.popularity, thresholds, l.slope);
      labels.push_back(l);
    }
    return labels;
  }

  /// Processes one slice end to end. `captures` holds zero-shot matches for the slice.
  SliceReport step(const corpus::DocumentSlice& slice, std::span<const SliceTopic> incoming,
                   std::span<const ZeroShotCapture> captures = {}) {
    SliceReport report;
    report.slice_index = slice.slice_index;
    report.start = slice.start;
    report.end = slice.end;
    report.unit_count = slice.units.size();
    report.merges = merge_slice(incoming, slice.slice_index);
    for (const auto& ev : report.merges)
      if (ev.created) report.new_topics.push_back(ev.topic_id);
    apply_decay(slice.slice_index);
    report.thresholds = compute_thresholds(slice.slice_index);
    report.labels = classify(slice.slice_index, report.thresholds);
    for (const auto& t : topics_) {
      if (t.series.has(slice.slice_index) && !is_active(t, slice.slice_index) &&
          (slice.slice_index == t.first_seen || is_active(t, slice.slice_index - 1)))
        report.archived.push_back(t.topic_id);
    }
    for (auto& z : zeroshot_) {
      const ZeroShotCapture* cap = nullptr;
      for (const auto& c : captures)
        if (c.name == z.name) cap = &c;
      update_zeroshot(z, cap, slice.slice_index, params_.decay, params_.decay_mode, params_.granularity_days);
      report.zeroshot.push_back(
          classify_zeroshot(z, slice.slice_index, report.thresholds, params_.window, params_.slope_min_points));
    }
    return report;
  }

  /// Restores a previously serialized state.
  static TrendEngine restore(EngineParams params, SliceIndex current_slice, std::vector<GlobalTopic> topics,
                             std::vector<ZeroShotTopic> zeroshot) {
    TrendEngine e(params);
    e.current_slice_ = current_slice;
    e.topics_ = std::move(topics);
    e.zeroshot_ = std::move(zeroshot);
    return e;
  }

 private:
  void require_current(SliceIndex slice) const {
    if (slice != current_slice_)
      throw OrderingError("slice " + std::to_string(slice) + " is not the slice being processed (" +
                          std::to_string(current_slice_) + ")");
  }

  /// Attaches an incoming topic's documents and returns the popularity increment.
  std::size_t credit(GlobalTopic& t, const SliceTopic& in, SliceIndex slice) {
    auto& parents = t.parent_docs_by_slice[slice];
    std::set<std::string> known(parents.begin(), parents.end());
    std::size_t added = 0;
    for (const auto& p : in.parent_doc_ids)
      if (known.insert(p).second) ++added;
    parents.assign(known.begin(), known.end());
    auto& units = t.units_by_slice[slice];
    units.insert(units.end(), in.cluster.member_unit_ids.begin(), in.cluster.member_unit_ids.end());
    t.word_history.push_back({slice, in.words});

    const double base = t.series.has(slice) ? t.series.at(slice) : t.series.latest().value_or(0.0);
    t.series.set(slice, base + static_cast<double>(added));
    t.series.last_update_slice = slice;
    t.last_updated = slice;
    return added;
  }

  EngineParams params_;
  SliceIndex current_slice_ = -1;
  std::vector<GlobalTopic> topics_;
  std::vector<ZeroShotTopic> zeroshot_;
};

}  // namespace trendlens

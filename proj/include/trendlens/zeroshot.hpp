#pragma once

// Expert-defined topics matched against every text unit of a slice.

#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "trendlens/corpus.hpp"
#include "trendlens/embeddings.hpp"
#include "trendlens/popularity.hpp"

namespace trendlens {

inline constexpr double kDefaultZeroShotBeta = 0.45;

struct ZeroShotDefinition {
  std::string name;
  std::string description;
  double beta = kDefaultZeroShotBeta;
};

struct ZeroShotTopic {
  std::string name;
  std::string description;
  EmbeddingVector embedding;
  double beta = kDefaultZeroShotBeta;
  SliceIndex added_at = 0;  // first slice the topic is tracked for
  PopularitySeries series;
  std::map<SliceIndex, std::vector<std::string>> captured;  // parent doc ids, sorted

  bool operator==(const ZeroShotTopic&) const = default;
};

/// Captures of one zero-shot topic in one slice.
struct ZeroShotCapture {
  std::string name;
  std::vector<std::string> unit_ids;
  std::vector<std::string> parent_doc_ids;  // sorted, unique
};

struct ZeroShotLabel {
  std::string name;
  SliceIndex slice_index = 0;
  SignalClass label = SignalClass::noise;
  double popularity = 0.0;
  std::optional<double> slope;
  std::size_t captured_docs = 0;
};

inline void validate_beta(double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("zero-shot beta must lie in (0, 1)");
}

/// A unit is captured by every topic whose cosine to it reaches that topic's beta.
inline std::vector<ZeroShotCapture> match_slice(std::span<const ZeroShotTopic> topics,
                                                const corpus::DocumentSlice& slice,
                                                const std::unordered_map<std::string, EmbeddingVector>& embeddings) {
  std::vector<ZeroShotCapture> out;
  out.reserve(topics.size());
  for (const auto& topic : topics) {
    ZeroShotCapture cap;
    cap.name = topic.name;
    std::set<std::string> parents;
    for (const auto& unit : slice.units) {
      const auto it = embeddings.find(unit.unit_id);
      if (it == embeddings.end()) throw DataError("zero-shot: missing embedding for unit '" + unit.unit_id + "'");
      if (it->second.dim() != topic.embedding.dim())
        throw DataError("zero-shot topic '" + topic.name + "' embedding dimension does not match documents");
      if (cosine(it->second, topic.embedding) >= topic.beta) {
        cap.unit_ids.push_back(unit.unit_id);
        parents.insert(unit.parent_id);
      }
    }
    cap.parent_doc_ids.assign(parents.begin(), parents.end());
    out.push_back(std::move(cap));
  }
  return out;
}

/// Applies one slice of captures: increment by captured parent documents,
/// or decay when nothing was captured.
inline void update_zeroshot(ZeroShotTopic& topic, const ZeroShotCapture* capture, SliceIndex slice, double lambda,
                            DecayMode mode, int granularity_days) {
  if (slice < topic.added_at) return;
  const std::size_t count = capture ? capture->parent_doc_ids.size() : 0;
  const double previous = topic.series.latest().value_or(0.0);
  if (count > 0) {
    topic.series.set(slice, previous + static_cast<double>(count));
    topic.series.last_update_slice = slice;
    topic.captured[slice] = capture->parent_doc_ids;
  } else if (topic.series.empty()) {
    topic.series.set(slice, 0.0);
    topic.series.last_update_slice = slice;
  } else {
    const double dt = silent_gap_days(mode, slice, topic.series.last_update_slice, granularity_days);
    topic.series.set(slice, previous * decay_factor(lambda, dt));
  }
}

/// Labels with the automatic topics' thresholds and the topic's own slope.
inline ZeroShotLabel classify_zeroshot(const ZeroShotTopic& topic, SliceIndex slice,
                                       const std::optional<Thresholds>& thresholds, SliceIndex window,
                                       std::size_t slope_min_points) {
  ZeroShotLabel label;
  label.name = topic.name;
  label.slice_index = slice;
  label.popularity = topic.series.has(slice) ? topic.series.at(slice) : 0.0;
  label.slope = ols_slope(topic.series.window(slice, window), slope_min_points);
  label.label = classify_popularity(label.popularity, thresholds, label.slope);
  const auto it = topic.captured.find(slice);
  label.captured_docs = it == topic.captured.end() ? 0 : it->second.size();
  return label;
}

}  // namespace trendlens

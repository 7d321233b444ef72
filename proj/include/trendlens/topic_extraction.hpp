#pragma once

// Per-slice topic extraction: reduce -> cluster -> centroid -> c-TF-IDF label.

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "trendlens/corpus.hpp"
#include "trendlens/ctfidf.hpp"
#include "trendlens/embeddings.hpp"
#include "trendlens/hdbscan.hpp"
#include "trendlens/pca.hpp"

namespace trendlens {

struct ExtractionParams {
  std::size_t reduced_dim = 5;
  std::size_t n_neighbors = 15;  // kept for a neighborhood-based reducer; PCA ignores it
  std::size_t min_cluster_size = 2;
  std::size_t min_samples = 1;
  bool allow_single_cluster = true;
  std::size_t top_n_words = 10;
  int max_ngram = 2;
  std::uint64_t seed = 42;

  void validate() const {
    if (min_cluster_size < 2) throw ConfigError("min_cluster_size must be at least 2");
    if (reduced_dim < 2) throw ConfigError("reduced_dim must be at least 2");
    if (min_samples < 1) throw ConfigError("min_samples must be at least 1");
    if (max_ngram < 1) throw ConfigError("max_ngram must be at least 1");
  }
};

struct ReducedVector {
  std::vector<double> values;
  std::size_t dim() const noexcept { return values.size(); }
};

struct Cluster {
  int local_id = -1;
  std::vector<std::string> member_unit_ids;
  EmbeddingVector centroid;  // normalized mean of the members' full embeddings
};

struct Clustering {
  std::vector<Cluster> clusters;
  std::vector<std::string> outlier_unit_ids;
};

struct SliceTopic {
  Cluster cluster;
  std::vector<text::TermScore> words;
  std::vector<std::string> parent_doc_ids;  // sorted, unique
};

/// Projects onto the top principal components of the centered batch.
/// Throws DataError for fewer than two vectors or inconsistent dimensions.
inline std::vector<ReducedVector> reduce(std::span<const EmbeddingVector> vectors, const ExtractionParams& params) {
  if (vectors.size() < 2) throw DataError("reduce: degenerate slice with fewer than two vectors");
  const std::size_t h = vectors.front().dim();
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(vectors.size()), static_cast<Eigen::Index>(h));
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].dim() != h) throw DataError("reduce: inconsistent embedding dimensions");
    for (std::size_t j = 0; j < h; ++j) rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = vectors[i].values[j];
  }
  const auto projection = pca::fit(rows, params.reduced_dim);
  const Eigen::MatrixXd reduced = pca::transform(projection, rows);
  std::vector<ReducedVector> out(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    out[i].values.resize(static_cast<std::size_t>(reduced.cols()));
    for (Eigen::Index j = 0; j < reduced.cols(); ++j) out[i].values[static_cast<std::size_t>(j)] = reduced(static_cast<Eigen::Index>(i), j);
  }
  return out;
}

inline double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

/// HDBSCAN labels over reduced vectors (-1 = outlier).
inline std::vector<int> cluster_labels(std::span<const ReducedVector> reduced, const ExtractionParams& params) {
  hdbscan::Params hp{params.min_cluster_size, params.min_samples, params.allow_single_cluster};
  auto dist = [&](std::size_t i, std::size_t j) { return euclidean(reduced[i].values, reduced[j].values); };
  return hdbscan::cluster(reduced.size(), dist, hp).labels;
}

inline EmbeddingVector centroid_of(std::span<const EmbeddingVector* const> members) {
  EmbeddingVector mean;
  if (members.empty()) return mean;
  mean.values.assign(members.front()->dim(), 0.0);
  for (const auto* m : members)
    for (std::size_t j = 0; j < mean.values.size(); ++j) mean.values[j] += m->values[j];
  for (auto& x : mean.values) x /= static_cast<double>(members.size());
  return normalized(std::move(mean));
}

/// Clusters `reduced` and builds Cluster records with full-space centroids.
/// `unit_ids[i]` and `full[i]` describe the same point as `reduced[i]`.
inline Clustering cluster(std::span<const ReducedVector> reduced, std::span<const std::string> unit_ids,
                          std::span<const EmbeddingVector> full, const ExtractionParams& params) {
  Clustering out;
  if (reduced.size() < params.min_cluster_size) {
    out.outlier_unit_ids.assign(unit_ids.begin(), unit_ids.end());
    return out;
  }
  const auto labels = cluster_labels(reduced, params);
  int count = 0;
  for (const int l : labels) count = std::max(count, l + 1);
  out.clusters.resize(static_cast<std::size_t>(count));
  std::vector<std::vector<const EmbeddingVector*>> members(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) {
      out.outlier_unit_ids.push_back(unit_ids[i]);
      continue;
    }
    auto& c = out.clusters[static_cast<std::size_t>(labels[i])];
    c.local_id = labels[i];
    c.member_unit_ids.push_back(unit_ids[i]);
    members[static_cast<std::size_t>(labels[i])].push_back(&full[i]);
  }
  for (std::size_t c = 0; c < out.clusters.size(); ++c) out.clusters[c].centroid = centroid_of(members[c]);
  return out;
}

/// c-TF-IDF words for each cluster; cluster text is its members' texts joined by a space.
inline std::vector<std::vector<text::TermScore>> label_ctfidf(
    std::span<const Cluster> clusters, const std::unordered_map<std::string, std::string>& unit_texts,
    const ExtractionParams& params) {
  std::vector<text::TermCounts> counts;
  counts.reserve(clusters.size());
  for (const auto& c : clusters) {
    std::string joined;
    for (const auto& id : c.member_unit_ids) {
      const auto it = unit_texts.find(id);
      if (it == unit_texts.end()) throw DataError("label_ctfidf: no text for unit '" + id + "'");
      if (!joined.empty()) joined += ' ';
      joined += it->second;
    }
    counts.push_back(text::count_terms(joined, params.max_ngram));
  }
  const auto scores = text::ctfidf_scores(counts);
  std::vector<std::vector<text::TermScore>> words;
  words.reserve(scores.size());
  for (const auto& s : scores) words.push_back(text::top_terms(s, params.top_n_words));
  return words;
}

/// Topics for one slice. Outlier units belong to no topic. Returns an empty
/// list when the slice has fewer than min_cluster_size units.
inline std::vector<SliceTopic> extract(const corpus::DocumentSlice& slice,
                                       const std::unordered_map<std::string, EmbeddingVector>& embeddings,
                                       const ExtractionParams& params) {
  params.validate();
  std::vector<SliceTopic> topics;
  if (slice.units.size() < params.min_cluster_size || slice.units.size() < 2) return topics;

  std::vector<std::string> ids;
  std::vector<EmbeddingVector> full;
  std::unordered_map<std::string, std::string> texts;
  std::unordered_map<std::string, std::string> parents;
  for (const auto& u : slice.units) {
    const auto it = embeddings.find(u.unit_id);
    if (it == embeddings.end()) throw DataError("extract: missing embedding for unit '" + u.unit_id + "'");
    ids.push_back(u.unit_id);
    full.push_back(it->second);
    texts.emplace(u.unit_id, u.text);
    parents.emplace(u.unit_id, u.parent_id);
  }
  const auto reduced = reduce(full, params);
  auto clustering = cluster(reduced, ids, full, params);
  auto words = label_ctfidf(clustering.clusters, texts, params);
  for (std::size_t i = 0; i < clustering.clusters.size(); ++i) {
    SliceTopic t;
    std::set<std::string> parent_set;
    for (const auto& id : clustering.clusters[i].member_unit_ids) parent_set.insert(parents.at(id));
    t.parent_doc_ids.assign(parent_set.begin(), parent_set.end());
    t.cluster = std::move(clustering.clusters[i]);
    t.words = std::move(words[i]);
    topics.push_back(std::move(t));
  }
  return topics;
}

}  // namespace trendlens

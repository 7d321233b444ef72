#pragma once

// HDBSCAN over an arbitrary metric:
//   core distances -> mutual reachability -> minimum spanning tree ->
//   single-linkage hierarchy -> condensed tree -> excess-of-mass selection.
//
// Edges of equal weight merge simultaneously, so exact duplicates form one
// node instead of an arbitrary binary cascade.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

namespace trendlens::hdbscan {

struct Params {
  std::size_t min_cluster_size = 2;
  std::size_t min_samples = 1;
  /// Lets the root of the condensed tree be selected when it is the most
  /// stable cluster (a slice that is one cluster yields one cluster).
  bool allow_single_cluster = true;
};

struct Edge {
  std::size_t a = 0;
  std::size_t b = 0;
  double weight = 0.0;
};

/// Condensed-tree cluster. `fallen` lists points leaving this cluster
/// (point, lambda); children are clusters split off at `birth_lambda` of the child.
struct CondensedCluster {
  double birth_lambda = 0.0;
  std::optional<std::size_t> parent;
  std::vector<std::size_t> children;
  std::vector<std::pair<std::size_t, double>> fallen;
  std::size_t size = 0;
  double stability = 0.0;
};

struct Result {
  std::vector<int> labels;  // -1 = outlier, otherwise 0..k-1 ordered by lowest member index
  std::vector<double> core_distances;
  std::vector<Edge> mst;
  std::vector<CondensedCluster> condensed;
  std::vector<std::size_t> selected;  // condensed ids
  int cluster_count = 0;
};

namespace detail {

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n), rank_(n, 0) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  std::size_t unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return a;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    return a;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<unsigned> rank_;
};

struct HierarchyNode {
  double height = 0.0;
  std::vector<std::size_t> children;  // empty for leaves
  std::size_t size = 1;
};

inline double lambda_of(double distance) {
  return distance > 0.0 ? 1.0 / distance : std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// Distance to the k-th nearest other point, k = min(min_samples, n - 1).
template <typename Distance>
std::vector<double> core_distances(std::size_t n, Distance&& dist, std::size_t min_samples) {
  std::vector<double> core(n, 0.0);
  if (n < 2) return core;
  const std::size_t k = std::max<std::size_t>(1, std::min(min_samples, n - 1));
  std::vector<double> row;
  row.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) row.push_back(dist(i, j));
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k - 1), row.end());
    core[i] = row[k - 1];
  }
  return core;
}

/// Prim's algorithm on the dense mutual-reachability graph. Ties pick the
/// lowest vertex index. O(n^2) time, O(n) memory.
template <typename Distance>
std::vector<Edge> mutual_reachability_mst(std::size_t n, Distance&& dist, const std::vector<double>& core) {
  std::vector<Edge> edges;
  if (n < 2) return edges;
  edges.reserve(n - 1);
  std::vector<bool> in_tree(n, false);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> from(n, 0);
  std::size_t current = 0;
  in_tree[0] = true;
  for (std::size_t step = 1; step < n; ++step) {
    for (std::size_t j = 0; j < n; ++j) {
      if (in_tree[j]) continue;
      const double mr = std::max({core[current], core[j], dist(current, j)});
      if (mr < best[j]) {
        best[j] = mr;
        from[j] = current;
      }
    }
    std::size_t next = n;
    for (std::size_t j = 0; j < n; ++j)
      if (!in_tree[j] && (next == n || best[j] < best[next])) next = j;
    in_tree[next] = true;
    edges.push_back({std::min(from[next], next), std::max(from[next], next), best[next]});
    current = next;
  }
  return edges;
}

/// Runs the clustering given point count and a symmetric distance functor.
template <typename Distance>
Result cluster(std::size_t n, Distance&& dist, const Params& params) {
  Result result;
  result.labels.assign(n, -1);
  if (n < 2 || n < params.min_cluster_size) return result;
  const std::size_t min_size = std::max<std::size_t>(2, params.min_cluster_size);

  result.core_distances = core_distances(n, dist, params.min_samples);
  result.mst = mutual_reachability_mst(n, dist, result.core_distances);

  auto edges = result.mst;
  std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
    if (x.weight != y.weight) return x.weight < y.weight;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });

  // Single-linkage hierarchy with simultaneous merges for equal weights.
  std::vector<detail::HierarchyNode> nodes(n);
  std::vector<std::size_t> component_node(n);
  std::iota(component_node.begin(), component_node.end(), 0);
  detail::DisjointSet dsu(n);
  for (std::size_t g = 0; g < edges.size();) {
    std::size_t end = g;
    while (end < edges.size() && edges[end].weight == edges[g].weight) ++end;
    std::vector<std::pair<std::size_t, std::vector<std::size_t>>> pending;  // root -> prior nodes
    auto pending_of = [&](std::size_t root) -> std::vector<std::size_t>* {
      for (auto& [r, list] : pending)
        if (r == root) return &list;
      return nullptr;
    };
    for (std::size_t e = g; e < end; ++e) {
      const std::size_t ra = dsu.find(edges[e].a);
      const std::size_t rb = dsu.find(edges[e].b);
      if (ra == rb) continue;
      std::vector<std::size_t> merged;
      for (const std::size_t r : {ra, rb}) {
        if (auto* list = pending_of(r)) {
          merged.insert(merged.end(), list->begin(), list->end());
          std::erase_if(pending, [r](const auto& p) { return p.first == r; });
        } else {
          merged.push_back(component_node[r]);
        }
      }
      const std::size_t root = dsu.unite(ra, rb);
      pending.emplace_back(root, std::move(merged));
    }
    for (auto& [root, children] : pending) {
      detail::HierarchyNode node;
      node.height = edges[g].weight;
      std::sort(children.begin(), children.end());
      node.size = 0;
      for (const auto c : children) node.size += nodes[c].size;
      node.children = std::move(children);
      component_node[root] = nodes.size();
      nodes.push_back(std::move(node));
    }
    g = end;
  }
  const std::size_t root_node = nodes.size() - 1;

  auto collect_leaves = [&](std::size_t start, std::vector<std::size_t>& out) {
    std::vector<std::size_t> stack{start};
    while (!stack.empty()) {
      const std::size_t x = stack.back();
      stack.pop_back();
      if (x < n)
        out.push_back(x);
      else
        for (const auto c : nodes[x].children) stack.push_back(c);
    }
  };

  // Condensed tree.
  auto& condensed = result.condensed;
  condensed.push_back(CondensedCluster{0.0, std::nullopt, {}, {}, n, 0.0});
  std::vector<std::pair<std::size_t, std::size_t>> work{{root_node, 0}};
  std::vector<std::size_t> leaves;
  while (!work.empty()) {
    const auto [node_id, cid] = work.back();
    work.pop_back();
    const auto& node = nodes[node_id];
    const double lambda = detail::lambda_of(node.height);
    std::size_t big = 0;
    for (const auto c : node.children)
      if (nodes[c].size >= min_size) ++big;
    for (const auto c : node.children) {
      if (nodes[c].size >= min_size) {
        if (big >= 2) {
          const std::size_t child_id = condensed.size();
          condensed.push_back(CondensedCluster{lambda, cid, {}, {}, nodes[c].size, 0.0});
          condensed[cid].children.push_back(child_id);
          work.emplace_back(c, child_id);
        } else {
          work.emplace_back(c, cid);
        }
      } else {
        leaves.clear();
        collect_leaves(c, leaves);
        for (const auto p : leaves) condensed[cid].fallen.emplace_back(p, lambda);
      }
    }
  }

  for (auto& c : condensed) {
    double s = 0.0;
    for (const auto& [p, lambda] : c.fallen) s += lambda - c.birth_lambda;
    c.stability = s;
  }
  for (auto& c : condensed)
    for (const auto k : c.children) c.stability += (condensed[k].birth_lambda - c.birth_lambda) * static_cast<double>(condensed[k].size);

  // Excess-of-mass selection; children always carry larger ids than parents.
  std::vector<bool> is_selected(condensed.size(), false);
  std::vector<double> subtree(condensed.size(), 0.0);
  auto deselect_descendants = [&](std::size_t c) {
    std::vector<std::size_t> stack(condensed[c].children.begin(), condensed[c].children.end());
    while (!stack.empty()) {
      const auto x = stack.back();
      stack.pop_back();
      is_selected[x] = false;
      stack.insert(stack.end(), condensed[x].children.begin(), condensed[x].children.end());
    }
  };
  for (std::size_t i = condensed.size(); i-- > 0;) {
    const bool is_root = (i == 0);
    if (condensed[i].children.empty()) {
      is_selected[i] = !is_root || params.allow_single_cluster;
      subtree[i] = condensed[i].stability;
      continue;
    }
    double child_sum = 0.0;
    for (const auto k : condensed[i].children) child_sum += subtree[k];
    if (is_root && !params.allow_single_cluster) break;
    if (child_sum > condensed[i].stability) {
      subtree[i] = child_sum;
    } else {
      is_selected[i] = true;
      subtree[i] = condensed[i].stability;
      deselect_descendants(i);
    }
  }

  // Label points through the subtree of each selected cluster.
  std::vector<int> raw(n, -1);
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < condensed.size(); ++i) {
    if (!is_selected[i]) continue;
    result.selected.push_back(i);
    const int label = static_cast<int>(result.selected.size() - 1);
    if (i == 0) {
      // Root: only points that persist to the densest level of the root count.
      double max_lambda = 0.0;
      for (const auto& [p, lambda] : condensed[0].fallen) max_lambda = std::max(max_lambda, lambda);
      for (const auto k : condensed[0].children) max_lambda = std::max(max_lambda, condensed[k].birth_lambda);
      stack.assign(1, 0);
      while (!stack.empty()) {
        const auto x = stack.back();
        stack.pop_back();
        for (const auto& [p, lambda] : condensed[x].fallen)
          if (lambda >= max_lambda) raw[p] = label;
        stack.insert(stack.end(), condensed[x].children.begin(), condensed[x].children.end());
      }
      continue;
    }
    stack.assign(1, i);
    while (!stack.empty()) {
      const auto x = stack.back();
      stack.pop_back();
      for (const auto& [p, lambda] : condensed[x].fallen) raw[p] = label;
      stack.insert(stack.end(), condensed[x].children.begin(), condensed[x].children.end());
    }
  }

  // Renumber by lowest member index.
  std::vector<int> remap(result.selected.size(), -1);
  int next = 0;
  for (std::size_t p = 0; p < n; ++p) {
    if (raw[p] < 0) continue;
    if (remap[static_cast<std::size_t>(raw[p])] < 0) remap[static_cast<std::size_t>(raw[p])] = next++;
    result.labels[p] = remap[static_cast<std::size_t>(raw[p])];
  }
  result.cluster_count = next;
  return result;
}

}  // namespace trendlens::hdbscan

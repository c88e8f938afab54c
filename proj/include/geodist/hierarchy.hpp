// Copyright 2026-present the geodist authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "geodist/common.hpp"
#include "geodist/graph.hpp"
#include "geodist/kmeans.hpp"
#include "geodist/matrix.hpp"
#include "geodist/metrics.hpp"
#include "geodist/rng.hpp"

namespace geodist {

enum class CenterMode : std::uint8_t {
  Mean,    // re-normalized cluster mean
  Medoid,  // member closest to the mean
};

inline constexpr std::size_t kMaxLayers = 16;

struct HierarchyConfig {
  std::size_t layers = 2;
  std::size_t clusters_per_node = 256;
  std::size_t kmeans_iters = 5;
  std::size_t neighbors = 8;
  MetricKind metric = MetricKind::Cosine;
  std::optional<std::size_t> leaf_size_threshold;  // defaults to 2 * neighbors + 1
  CenterMode center_mode = CenterMode::Mean;

  std::size_t leaf_threshold() const noexcept { return leaf_size_threshold.value_or(2 * neighbors + 1); }

  void validate() const {
    if (layers < 1 || layers > kMaxLayers) {
      throw std::invalid_argument("HierarchyConfig: layers must be in [1, " + std::to_string(kMaxLayers) + "]");
    }
    if (clusters_per_node < 1) throw std::invalid_argument("HierarchyConfig: clusters_per_node must be >= 1");
    if (kmeans_iters < 1) throw std::invalid_argument("HierarchyConfig: kmeans_iters must be >= 1");
    if (neighbors < 1) throw std::invalid_argument("HierarchyConfig: neighbors must be >= 1");
    if (leaf_size_threshold && *leaf_size_threshold < 1) {
      throw std::invalid_argument("HierarchyConfig: leaf_size_threshold must be >= 1");
    }
  }

  friend bool operator==(const HierarchyConfig&, const HierarchyConfig&) = default;
};

// One connected family of sibling centers: all children of a single parent
// (or every top-layer center).
struct CenterGraph {
  std::vector<std::uint32_t> members;  // layer-wide center ids, ascending
  KnnGraph graph;                      // nodes are positions in `members`
  ApspMatrix apsp;

  friend bool operator==(const CenterGraph&, const CenterGraph&) = default;
};

struct Layer {
  PointSet centers;
  std::vector<std::uint32_t> assignment;    // point -> center on this layer
  std::vector<std::uint32_t> parent;        // center -> center one layer up (0 on top)
  std::vector<std::uint32_t> graph_of;      // center -> index into graphs
  std::vector<std::uint32_t> local_index;   // center -> node id inside its graph
  std::vector<CenterGraph> graphs;
  std::vector<std::uint32_t> anchor_child;  // center -> its child nearest to it (empty on bottom)
  std::vector<double> anchor_dist;          // trivial distance center -> anchor child
  std::vector<double> point_climb;          // point -> path length to its center on this layer

  // Shortest path between two centers of the same graph.
  double graph_distance(std::uint32_t a, std::uint32_t b) const noexcept {
    const auto& g = graphs[graph_of[a]];
    return g.apsp(local_index[a], local_index[b]);
  }

  friend bool operator==(const Layer&, const Layer&) = default;
};

struct GeodesicResult {
  double angle_sum = 0.0;  // accumulated path length in trivial-metric units
  bool reachable = true;

  static GeodesicResult of(double length) noexcept { return {length, length != kInfinity}; }
};

struct QueryStats {
  std::size_t queries = 0;
  std::size_t fallbacks = 0;  // disconnected sub-graph, answered one layer up
};

struct NearestCenter {
  std::uint32_t center;
  double distance;
};

// Layered cluster hierarchy over a fixed point set. Layer 0 is the top.
struct HierarchicalIndex {
  HierarchyConfig config;
  std::size_t dim = 0;
  std::size_t point_count = 0;
  std::vector<Layer> layers;
  std::vector<std::uint32_t> bottom_center_index;  // K
  std::vector<double> bottom_distance;             // d(x, C_n(x))
  DistanceMatrix bottom_apsp;                      // bottom center <-> bottom center
  std::vector<double> d_o;                         // point x bottom center, row-major
  std::vector<std::string> warnings;

  std::size_t layer_count() const noexcept { return layers.size(); }
  const Layer& bottom() const noexcept { return layers.back(); }
  std::size_t bottom_count() const noexcept { return layers.empty() ? 0 : bottom().centers.size(); }

  std::span<const double> d_o_row(std::size_t i) const noexcept {
    return {d_o.data() + i * bottom_count(), bottom_count()};
  }

  friend bool operator==(const HierarchicalIndex&, const HierarchicalIndex&) = default;
};

namespace detail {

// Cost of moving from child center `child` up to its parent `parent`: through
// the sibling graph to the anchor child, then across. If the sibling graph
// does not reach the anchor, step across directly.
inline double climb_step(const Layer& layer, const Layer& below, std::uint32_t parent, std::uint32_t child,
                         MetricKind metric) {
  const double via = below.graph_distance(child, layer.anchor_child[parent]);
  if (via != kInfinity) return via + layer.anchor_dist[parent];
  return distance_unchecked(below.centers[child], layer.centers[parent], metric);
}

struct ChildClusters {
  PointSet centers;
  std::vector<std::uint32_t> local_assignment;
  bool clamped = false;
};

inline void apply_center_mode(const PointSet& points, KMeansResult& km, const HierarchyConfig& cfg) {
  if (cfg.center_mode != CenterMode::Medoid) return;
  std::vector<double> best(km.centers.size(), kInfinity);
  std::vector<std::uint32_t> arg(km.centers.size(), 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto c = km.assignment[i];
    const double d = distance_unchecked(points[i], km.centers[c], cfg.metric);
    if (d < best[c]) {
      best[c] = d;
      arg[c] = static_cast<std::uint32_t>(i);
    }
  }
  for (std::size_t c = 0; c < km.centers.size(); ++c) {
    std::copy(points[arg[c]].begin(), points[arg[c]].end(), km.centers[c].begin());
  }
}

inline ChildClusters cluster_children(const PointSet& members, std::span<const double> parent_center,
                                      const HierarchyConfig& cfg, std::uint64_t seed) {
  ChildClusters out;
  const std::size_t m = members.size();
  if (m <= cfg.leaf_threshold() || m <= 1) {
    // Small enough for the trivial metric: a single pass-through child.
    out.centers = PointSet(members.dim());
    out.centers.push_back(parent_center);
    out.local_assignment.assign(m, 0);
    return out;
  }
  std::size_t k = cfg.clusters_per_node;
  if (k > m - 1) {
    k = m - 1;
    out.clamped = true;
  }
  auto km = kmeans(members, k, cfg.kmeans_iters, seed, cfg.metric);
  apply_center_mode(members, km, cfg);
  out.centers = std::move(km.centers);
  out.local_assignment = std::move(km.assignment);
  return out;
}

inline CenterGraph make_center_graph(const PointSet& centers, std::vector<std::uint32_t> members,
                                     const HierarchyConfig& cfg) {
  CenterGraph g;
  const PointSet sub = centers.subset(members);
  const std::size_t k = std::min(cfg.neighbors, sub.size() - 1);
  g.graph = build_knn_graph(sub, k, cfg.metric);
  g.apsp = floyd_apsp(g.graph);
  g.members = std::move(members);
  return g;
}

// Deepest layer whose graph holds both centers, falling back one layer up
// while that graph leaves them disconnected. Climbs are summed first so the
// result is exactly symmetric in its two arguments.
inline double combine_through_layers(const std::vector<Layer>& layers, std::span<const std::uint32_t> anc_a,
                                     std::span<const double> climb_a, std::span<const std::uint32_t> anc_b,
                                     std::span<const double> climb_b, QueryStats* stats) {
  std::size_t s = layers.size() - 1;
  while (s > 0 && anc_a[s - 1] != anc_b[s - 1]) --s;
  for (;;) {
    const double dg = layers[s].graph_distance(anc_a[s], anc_b[s]);
    if (dg != kInfinity || s == 0) return dg + (climb_a[s] + climb_b[s]);
    if (stats) ++stats->fallbacks;
    --s;
  }
}

}  // namespace detail

inline HierarchicalIndex build_index(const PointSet& points, const HierarchyConfig& config, std::uint64_t seed) {
  config.validate();
  const std::size_t n = points.size();
  if (n == 0) throw std::invalid_argument("build_index: empty point set");
  validate_points(points, config.metric);

  HierarchicalIndex idx;
  idx.config = config;
  idx.dim = points.dim();
  idx.point_count = n;

  // Top layer clusters everything.
  std::size_t top_k = config.clusters_per_node;
  if (top_k > n) {
    idx.warnings.push_back("top layer: clusters_per_node " + std::to_string(top_k) + " clamped to point count " +
                           std::to_string(n));
    top_k = n;
  }
  {
    auto km = kmeans(points, top_k, config.kmeans_iters, CounterRng::derive(seed, 0, 0), config.metric);
    detail::apply_center_mode(points, km, config);
    Layer top;
    top.centers = std::move(km.centers);
    top.assignment = std::move(km.assignment);
    top.parent.assign(top_k, 0);
    top.graph_of.assign(top_k, 0);
    top.local_index.resize(top_k);
    std::iota(top.local_index.begin(), top.local_index.end(), 0u);
    idx.layers.push_back(std::move(top));
  }

  // Deeper layers re-cluster inside each parent cluster.
  for (std::size_t depth = 1; depth < config.layers; ++depth) {
    Layer& prev = idx.layers[depth - 1];
    const std::size_t parents = prev.centers.size();
    std::vector<std::vector<std::uint32_t>> members(parents);
    for (std::size_t i = 0; i < n; ++i) members[prev.assignment[i]].push_back(static_cast<std::uint32_t>(i));

    std::vector<detail::ChildClusters> children(parents);
    const auto np = static_cast<std::int64_t>(parents);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t pc = 0; pc < np; ++pc) {
      const auto c = static_cast<std::size_t>(pc);
      children[c] = detail::cluster_children(points.subset(members[c]), prev.centers[c], config,
                                             CounterRng::derive(seed, depth, c));
    }

    Layer next;
    next.centers = PointSet(points.dim());
    next.assignment.assign(n, 0);
    prev.anchor_child.assign(parents, 0);
    prev.anchor_dist.assign(parents, 0.0);
    std::size_t clamped = 0;
    for (std::size_t c = 0; c < parents; ++c) {
      const auto& ch = children[c];
      clamped += ch.clamped ? 1 : 0;
      const auto base = static_cast<std::uint32_t>(next.centers.size());
      for (std::size_t j = 0; j < ch.centers.size(); ++j) {
        next.centers.push_back(ch.centers[j]);
        next.parent.push_back(static_cast<std::uint32_t>(c));
        next.graph_of.push_back(static_cast<std::uint32_t>(c));
        next.local_index.push_back(static_cast<std::uint32_t>(j));
      }
      for (std::size_t m = 0; m < members[c].size(); ++m) {
        next.assignment[members[c][m]] = base + ch.local_assignment[m];
      }
      double d = 0.0;
      const auto local = detail::nearest_center(prev.centers[c], ch.centers, config.metric, &d);
      prev.anchor_child[c] = base + local;
      prev.anchor_dist[c] = d;
    }
    if (clamped > 0) {
      idx.warnings.push_back("layer " + std::to_string(depth) + ": per-cluster k clamped to population-1 in " +
                             std::to_string(clamped) + " of " + std::to_string(parents) + " clusters");
    }
    idx.layers.push_back(std::move(next));
  }

  // Center graphs and their shortest paths.
  for (std::size_t depth = 0; depth < idx.layers.size(); ++depth) {
    Layer& layer = idx.layers[depth];
    const std::size_t graph_count = depth == 0 ? 1 : idx.layers[depth - 1].centers.size();
    std::vector<std::vector<std::uint32_t>> members(graph_count);
    for (std::size_t c = 0; c < layer.centers.size(); ++c) {
      members[layer.graph_of[c]].push_back(static_cast<std::uint32_t>(c));
    }
    layer.graphs.resize(graph_count);
    const auto ng = static_cast<std::int64_t>(graph_count);
#pragma omp parallel for schedule(dynamic, 1) if (graph_count > 1)
    for (std::int64_t g = 0; g < ng; ++g) {
      const auto gi = static_cast<std::size_t>(g);
      layer.graphs[gi] = detail::make_center_graph(layer.centers, std::move(members[gi]), config);
    }
  }

  // Point climbs, bottom up: d(x, C_k) = d(x, C_{k+1}) + d_g(C_{k+1}(x), anchor) + d_t(anchor, C_k).
  const std::size_t depth_count = idx.layers.size();
  {
    Layer& bottom = idx.layers.back();
    bottom.point_climb.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      bottom.point_climb[i] = detail::distance_unchecked(points[i], bottom.centers[bottom.assignment[i]], config.metric);
    }
  }
  for (std::size_t depth = depth_count - 1; depth-- > 0;) {
    Layer& layer = idx.layers[depth];
    const Layer& below = idx.layers[depth + 1];
    layer.point_climb.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      layer.point_climb[i] = below.point_climb[i] +
                             detail::climb_step(layer, below, layer.assignment[i], below.assignment[i], config.metric);
    }
  }

  // Same recursion for the bottom centers themselves, then their pairwise distances.
  const std::size_t nb = idx.bottom_count();
  std::vector<std::uint32_t> anc(nb * depth_count);
  std::vector<double> climb(nb * depth_count);
  for (std::size_t b = 0; b < nb; ++b) {
    std::uint32_t* a = anc.data() + b * depth_count;
    double* cl = climb.data() + b * depth_count;
    a[depth_count - 1] = static_cast<std::uint32_t>(b);
    cl[depth_count - 1] = 0.0;
    for (std::size_t depth = depth_count - 1; depth-- > 0;) {
      const Layer& layer = idx.layers[depth];
      const Layer& below = idx.layers[depth + 1];
      a[depth] = below.parent[a[depth + 1]];
      cl[depth] = cl[depth + 1] + detail::climb_step(layer, below, a[depth], a[depth + 1], config.metric);
    }
  }
  idx.bottom_apsp = DistanceMatrix(nb, 0.0);
  const auto nbi = static_cast<std::int64_t>(nb);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t bi = 0; bi < nbi; ++bi) {
    const auto b1 = static_cast<std::size_t>(bi);
    std::span<const std::uint32_t> a1(anc.data() + b1 * depth_count, depth_count);
    std::span<const double> c1(climb.data() + b1 * depth_count, depth_count);
    for (std::size_t b2 = 0; b2 < nb; ++b2) {
      if (b1 == b2) continue;
      std::span<const std::uint32_t> a2(anc.data() + b2 * depth_count, depth_count);
      std::span<const double> c2(climb.data() + b2 * depth_count, depth_count);
      idx.bottom_apsp(b1, b2) = detail::combine_through_layers(idx.layers, a1, c1, a2, c2, nullptr);
    }
  }

  // Index queue K, bottom distances and D_o.
  idx.bottom_center_index = idx.layers.back().assignment;
  idx.bottom_distance = idx.layers.back().point_climb;
  idx.d_o.resize(n * nb);
  const auto ni = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t ii = 0; ii < ni; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const double base = idx.bottom_distance[i];
    const auto apsp_row = idx.bottom_apsp.row(idx.bottom_center_index[i]);
    double* out = idx.d_o.data() + i * nb;
    for (std::size_t b = 0; b < nb; ++b) out[b] = base + apsp_row[b];
  }
  return idx;
}

// In-pool distance between indexed points i and j.
inline GeodesicResult query_in_pool(const HierarchicalIndex& idx, std::size_t i, std::size_t j,
                                    QueryStats* stats = nullptr) {
  if (i >= idx.point_count || j >= idx.point_count) {
    throw BadQuery("query_in_pool: index out of range (" + std::to_string(i) + ", " + std::to_string(j) +
                   ") for " + std::to_string(idx.point_count) + " points");
  }
  if (stats) ++stats->queries;
  if (i == j) return {0.0, true};
  const std::size_t depth_count = idx.layers.size();
  std::array<std::uint32_t, kMaxLayers> anc_i{};
  std::array<std::uint32_t, kMaxLayers> anc_j{};
  std::array<double, kMaxLayers> climb_i{};
  std::array<double, kMaxLayers> climb_j{};
  std::span<std::uint32_t> ai(anc_i.data(), depth_count);
  std::span<std::uint32_t> aj(anc_j.data(), depth_count);
  std::span<double> ci(climb_i.data(), depth_count);
  std::span<double> cj(climb_j.data(), depth_count);
  for (std::size_t d = 0; d < depth_count; ++d) {
    const Layer& layer = idx.layers[d];
    ai[d] = layer.assignment[i];
    aj[d] = layer.assignment[j];
    ci[d] = layer.point_climb[i];
    cj[d] = layer.point_climb[j];
  }
  return GeodesicResult::of(detail::combine_through_layers(idx.layers, ai, ci, aj, cj, stats));
}

inline NearestCenter nearest_bottom_center(const HierarchicalIndex& idx, std::span<const double> x) {
  if (x.size() != idx.dim) {
    throw std::invalid_argument("nearest_bottom_center: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                                std::to_string(idx.dim) + ")");
  }
  if (!detail::all_finite(x)) throw std::invalid_argument("nearest_bottom_center: non-finite query");
  double d = 0.0;
  const auto c = detail::nearest_center(x, idx.bottom().centers, idx.config.metric, &d);
  return {c, d};
}

// Distance from an arbitrary vector to pool point i through its nearest
// bottom center: d(x, C_near) + D_o[i][C_near].
inline GeodesicResult query_out_of_graph(const HierarchicalIndex& idx, std::span<const double> x, std::size_t i) {
  if (i >= idx.point_count) {
    throw BadQuery("query_out_of_graph: point " + std::to_string(i) + " out of range");
  }
  if (idx.config.metric == MetricKind::Cosine && !is_unit(x)) {
    throw std::invalid_argument("query_out_of_graph: query must be unit-normalized");
  }
  const auto near = nearest_bottom_center(idx, x);
  return GeodesicResult::of(near.distance + idx.d_o_row(i)[near.center]);
}

struct LayerSummary {
  std::size_t centers = 0;
  std::size_t graphs = 0;
  std::size_t components = 0;
  std::size_t edges = 0;
  std::size_t largest_graph = 0;
};

inline std::vector<LayerSummary> summarize(const HierarchicalIndex& idx) {
  std::vector<LayerSummary> out;
  for (const auto& layer : idx.layers) {
    LayerSummary s;
    s.centers = layer.centers.size();
    s.graphs = layer.graphs.size();
    for (const auto& g : layer.graphs) {
      s.components += connected_components(g.graph).component_count;
      s.edges += g.graph.edge_count();
      s.largest_graph = std::max(s.largest_graph, g.graph.node_count());
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace geodist

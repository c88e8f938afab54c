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
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "geodist/common.hpp"
#include "geodist/matrix.hpp"
#include "geodist/metrics.hpp"
#include "geodist/union_find.hpp"

namespace geodist {

struct Edge {
  std::uint32_t i;
  std::uint32_t j;
  double weight;

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct Neighbor {
  std::uint32_t node;
  double weight;
};

// Undirected weighted graph. Each pair is stored once with i < j; the CSR
// adjacency lists both directions.
class KnnGraph {
 public:
  KnnGraph() = default;

  KnnGraph(std::size_t node_count, std::vector<Edge> edges, std::size_t neighbor_count = 0)
      : node_count_(node_count), neighbor_count_(neighbor_count), edges_(std::move(edges)) {
    for (auto& e : edges_) {
      if (e.i > e.j) std::swap(e.i, e.j);
      if (e.i == e.j) throw std::invalid_argument("KnnGraph: self-loop on node " + std::to_string(e.i));
      if (e.j >= node_count_) throw std::invalid_argument("KnnGraph: edge endpoint out of range");
      if (!std::isfinite(e.weight) || e.weight < 0.0) {
        throw std::invalid_argument("KnnGraph: edge weight must be finite and non-negative");
      }
    }
    std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
      return a.i != b.i ? a.i < b.i : a.j < b.j;
    });
    const auto dup = std::adjacent_find(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
      return a.i == b.i && a.j == b.j;
    });
    if (dup != edges_.end()) throw std::invalid_argument("KnnGraph: duplicate edge");
    build_adjacency();
  }

  std::size_t node_count() const noexcept { return node_count_; }
  std::size_t neighbor_count() const noexcept { return neighbor_count_; }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  std::span<const Neighbor> neighbors(std::size_t node) const noexcept {
    return {adjacency_.data() + offsets_[node], offsets_[node + 1] - offsets_[node]};
  }

  std::size_t degree(std::size_t node) const noexcept { return offsets_[node + 1] - offsets_[node]; }

  std::size_t min_degree() const noexcept {
    std::size_t m = node_count_ == 0 ? 0 : degree(0);
    for (std::size_t v = 1; v < node_count_; ++v) m = std::min(m, degree(v));
    return m;
  }

  friend bool operator==(const KnnGraph& a, const KnnGraph& b) {
    return a.node_count_ == b.node_count_ && a.neighbor_count_ == b.neighbor_count_ && a.edges_ == b.edges_;
  }

 private:
  void build_adjacency() {
    offsets_.assign(node_count_ + 1, 0);
    for (const auto& e : edges_) {
      ++offsets_[e.i + 1];
      ++offsets_[e.j + 1];
    }
    for (std::size_t v = 0; v < node_count_; ++v) offsets_[v + 1] += offsets_[v];
    adjacency_.resize(offsets_.back());
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (const auto& e : edges_) {
      adjacency_[fill[e.i]++] = {e.j, e.weight};
      adjacency_[fill[e.j]++] = {e.i, e.weight};
    }
  }

  std::size_t node_count_ = 0;
  std::size_t neighbor_count_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_{0};
  std::vector<Neighbor> adjacency_;
};

// Union of every node's k nearest neighbours (ties to the lower index).
inline KnnGraph build_knn_graph(const PointSet& points, std::size_t k, MetricKind kind) {
  const std::size_t n = points.size();
  if (n > 0 && k >= n) {
    throw std::invalid_argument("build_knn_graph: k=" + std::to_string(k) + " must be < node count " +
                                std::to_string(n));
  }
  if (n == 0) return KnnGraph(0, {}, k);
  validate_points(points, kind);

  std::vector<std::vector<Edge>> per_row(n);
  const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    std::vector<std::pair<double, std::uint32_t>> cand;
    cand.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      cand.emplace_back(detail::distance_unchecked(points[i], points[j], kind), static_cast<std::uint32_t>(j));
    }
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    auto& out = per_row[i];
    out.reserve(k);
    for (std::size_t r = 0; r < k; ++r) {
      const auto j = cand[r].second;
      const auto lo = static_cast<std::uint32_t>(std::min<std::size_t>(i, j));
      const auto hi = static_cast<std::uint32_t>(std::max<std::size_t>(i, j));
      out.push_back({lo, hi, cand[r].first});
    }
  }

  std::vector<Edge> edges;
  edges.reserve(n * k);
  for (auto& row : per_row) edges.insert(edges.end(), row.begin(), row.end());
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [](const Edge& a, const Edge& b) { return a.i == b.i && a.j == b.j; }),
              edges.end());
  return KnnGraph(n, std::move(edges), k);
}

// Alternative adjacency: connect every pair within distance epsilon.
inline KnnGraph build_epsilon_graph(const PointSet& points, double epsilon, MetricKind kind) {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("build_epsilon_graph: epsilon must be >= 0");
  validate_points(points, kind);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      const double d = detail::distance_unchecked(points[i], points[j], kind);
      if (d <= epsilon) edges.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), d});
    }
  }
  return KnnGraph(points.size(), std::move(edges), 0);
}

namespace detail {

inline constexpr std::size_t kFloydBlock = 64;

// Relax block (ib, jb) through the pivots of block kb.
inline bool floyd_block(DistanceMatrix& d, std::size_t ib, std::size_t jb, std::size_t kb) {
  const std::size_t n = d.size();
  const std::size_t i_end = std::min(n, ib + kFloydBlock);
  const std::size_t j_end = std::min(n, jb + kFloydBlock);
  const std::size_t k_end = std::min(n, kb + kFloydBlock);
  bool changed = false;
  for (std::size_t k = kb; k < k_end; ++k) {
    const double* row_k = d.row(k).data();
    for (std::size_t i = ib; i < i_end; ++i) {
      double* row_i = d.row(i).data();
      const double dik = row_i[k];
      if (dik == kInfinity) continue;
      for (std::size_t j = jb; j < j_end; ++j) {
        const double cand = dik + row_k[j];
        if (cand < row_i[j]) {
          row_i[j] = cand;
          changed = true;
        }
      }
    }
  }
  return changed;
}

// One blocked pass over all pivots; true if any entry dropped.
inline bool floyd_sweep(DistanceMatrix& d) {
  const std::size_t n = d.size();
  const std::size_t bs = kFloydBlock;
  const std::size_t nb = (n + bs - 1) / bs;
  bool changed = false;
  for (std::size_t kb = 0; kb < nb; ++kb) {
    const std::size_t k0 = kb * bs;
    changed |= floyd_block(d, k0, k0, k0);
    for (std::size_t b = 0; b < nb; ++b) {
      if (b == kb) continue;
      changed |= floyd_block(d, k0, b * bs, k0);
      changed |= floyd_block(d, b * bs, k0, k0);
    }
    const auto blocks = static_cast<std::int64_t>(nb * nb);
    bool any = false;
#pragma omp parallel for schedule(static) reduction(|| : any) if (nb > 2)
    for (std::int64_t t = 0; t < blocks; ++t) {
      const std::size_t ib = static_cast<std::size_t>(t) / nb;
      const std::size_t jb = static_cast<std::size_t>(t) % nb;
      if (ib == kb || jb == kb) continue;
      any = floyd_block(d, ib * bs, jb * bs, k0) || any;
    }
    changed |= any;
  }
  // Mirror rounding differences so the result is exactly symmetric.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double m = std::min(d(i, j), d(j, i));
      d(i, j) = m;
      d(j, i) = m;
    }
  }
  return changed;
}

}  // namespace detail

// All-pairs shortest paths by cache-blocked Floyd-Warshall.
inline ApspMatrix floyd_apsp(const KnnGraph& g) {
  const std::size_t n = g.node_count();
  ApspMatrix d(n, kInfinity);
  for (std::size_t v = 0; v < n; ++v) d(v, v) = 0.0;
  for (const auto& e : g.edges()) {
    d(e.i, e.j) = std::min(d(e.i, e.j), e.weight);
    d(e.j, e.i) = d(e.i, e.j);
  }
  detail::floyd_sweep(d);
  return d;
}

// Single-source shortest paths with a binary heap.
inline std::vector<double> dijkstra(const KnnGraph& g, std::size_t source) {
  std::vector<double> dist(g.node_count(), kInfinity);
  using Item = std::pair<double, std::uint32_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[source] = 0.0;
  heap.emplace(0.0, static_cast<std::uint32_t>(source));
  while (!heap.empty()) {
    const auto [du, u] = heap.top();
    heap.pop();
    if (du > dist[u]) continue;
    for (const auto& nb : g.neighbors(u)) {
      const double cand = du + nb.weight;
      if (cand < dist[nb.node]) {
        dist[nb.node] = cand;
        heap.emplace(cand, nb.node);
      }
    }
  }
  return dist;
}

inline ApspMatrix dijkstra_apsp(const KnnGraph& g) {
  const std::size_t n = g.node_count();
  ApspMatrix d(n);
  const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t s = 0; s < rows; ++s) {
    const auto row = dijkstra(g, static_cast<std::size_t>(s));
    std::copy(row.begin(), row.end(), d.row(static_cast<std::size_t>(s)).begin());
  }
  return d;
}

struct ComponentReport {
  std::size_t component_count = 0;
  std::vector<std::size_t> component_sizes;  // ordered by each component's lowest node
  std::size_t edge_count = 0;
  std::vector<std::uint32_t> labels;         // node -> component id
};

inline ComponentReport connected_components(const KnnGraph& g) {
  const std::size_t n = g.node_count();
  UnionFind uf(n);
  for (const auto& e : g.edges()) uf.unite(e.i, e.j);
  ComponentReport rep;
  rep.edge_count = g.edge_count();
  rep.labels.resize(n);
  std::vector<std::int64_t> root_label(n, -1);
  for (std::size_t v = 0; v < n; ++v) {
    const auto r = uf.find(v);
    if (root_label[r] < 0) {
      root_label[r] = static_cast<std::int64_t>(rep.component_sizes.size());
      rep.component_sizes.push_back(0);
    }
    rep.labels[v] = static_cast<std::uint32_t>(root_label[r]);
    ++rep.component_sizes[rep.labels[v]];
  }
  rep.component_count = rep.component_sizes.size();
  return rep;
}

// Upper bound on the component count of a graph whose nodes each have at
// least sigma neighbours: N (1 + ln(1 + sigma)) / (1 + sigma).
inline double theorem1_bound(std::size_t node_count, std::size_t sigma) {
  if (sigma < 1) throw std::invalid_argument("theorem1_bound: sigma must be >= 1");
  const double s = static_cast<double>(sigma);
  return static_cast<double>(node_count) * (1.0 + std::log1p(s)) / (1.0 + s);
}

struct EdgeCountBounds {
  double lower;
  double upper;
  double upper_concise;
};

// Edge-count window for a graph whose components all have sizes in (b, a).
inline EdgeCountBounds theorem2_bounds(std::size_t node_count, std::size_t a, std::size_t b) {
  if (a <= 1) throw std::invalid_argument("theorem2_bounds: a must be > 1");
  if (b < 1 || a <= b) throw std::invalid_argument("theorem2_bounds: requires a > b >= 1");
  if (node_count == 0) return {0.0, 0.0, 0.0};
  const double n = static_cast<double>(node_count);
  const double ad = static_cast<double>(a);
  const double bd = static_cast<double>(b);
  EdgeCountBounds out{};
  out.lower = bd * bd * std::floor(n / bd) - n;
  out.upper = std::pow(ad - 1.0, 1.0 / ad) * std::pow(n, 2.0 - 1.0 / ad) + (ad - 1.0) * n;
  out.upper_concise = (1.0 - 1.0 / (ad - 1.0)) * n * n / 2.0;
  return out;
}

struct BoundsReport {
  std::size_t node_count = 0;
  std::size_t sigma = 0;
  std::size_t min_degree = 0;
  std::size_t edge_count = 0;
  ComponentReport components;

  bool theorem1_applicable = false;  // min degree >= sigma >= 1
  double theorem1_bound = 0.0;
  bool theorem1_pass = false;

  std::optional<std::pair<std::size_t, std::size_t>> size_window;  // (a, b)
  bool theorem2_applicable = false;  // every component size in (b, a)
  EdgeCountBounds theorem2{};
  bool theorem2_lower_pass = false;
  bool theorem2_upper_pass = false;
  bool theorem2_concise_pass = false;

  std::string detail;

  bool passed() const noexcept {
    const bool t1 = !theorem1_applicable || theorem1_pass;
    const bool t2 = !theorem2_applicable || (theorem2_lower_pass && theorem2_upper_pass && theorem2_concise_pass);
    return t1 && t2;
  }
};

// Checks the component-count and edge-count bounds empirically; failures
// are reported, never thrown.
inline BoundsReport validate_bounds(const KnnGraph& g,
                                    std::optional<std::pair<std::size_t, std::size_t>> size_window = {}) {
  BoundsReport rep;
  rep.node_count = g.node_count();
  rep.sigma = g.neighbor_count();
  rep.min_degree = g.min_degree();
  rep.edge_count = g.edge_count();
  rep.components = connected_components(g);

  if (rep.sigma >= 1) {
    rep.theorem1_bound = theorem1_bound(rep.node_count, rep.sigma);
    rep.theorem1_pass = static_cast<double>(rep.components.component_count) <= rep.theorem1_bound;
  }
  rep.theorem1_applicable = rep.sigma >= 1 && rep.min_degree >= rep.sigma;
  if (!rep.theorem1_applicable) {
    rep.detail += "component bound not applicable (min degree " + std::to_string(rep.min_degree) +
                  " < sigma " + std::to_string(rep.sigma) + "); ";
  } else if (!rep.theorem1_pass) {
    rep.detail += "component count exceeds bound; ";
  }

  rep.size_window = size_window;
  if (size_window) {
    const auto [a, b] = *size_window;
    rep.theorem2 = theorem2_bounds(rep.node_count, a, b);
    rep.theorem2_applicable = std::all_of(rep.components.component_sizes.begin(), rep.components.component_sizes.end(),
                                          [&](std::size_t s) { return s > b && s < a; });
    const double e = static_cast<double>(rep.edge_count);
    rep.theorem2_lower_pass = rep.theorem2.lower < e;
    rep.theorem2_upper_pass = e <= rep.theorem2.upper;
    rep.theorem2_concise_pass = e <= rep.theorem2.upper_concise;
    if (!rep.theorem2_applicable) {
      rep.detail += "edge-count bounds not applicable (component sizes outside window); ";
    } else if (!(rep.theorem2_lower_pass && rep.theorem2_upper_pass && rep.theorem2_concise_pass)) {
      rep.detail += "edge count outside bound window; ";
    }
  }
  return rep;
}

}  // namespace geodist

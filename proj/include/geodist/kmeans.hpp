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
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "geodist/common.hpp"
#include "geodist/metrics.hpp"
#include "geodist/rng.hpp"

namespace geodist {

struct KMeansResult {
  PointSet centers;
  std::vector<std::uint32_t> assignment;  // point -> center
  std::vector<std::uint32_t> sizes;
};

namespace detail {

inline std::uint32_t nearest_center(std::span<const double> x, const PointSet& centers, MetricKind kind,
                                    double* out_dist = nullptr) {
  double best = kInfinity;
  std::uint32_t arg = 0;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const double d = distance_unchecked(x, centers[c], kind);
    if (d < best) {
      best = d;
      arg = static_cast<std::uint32_t>(c);
    }
  }
  if (out_dist) *out_dist = best;
  return arg;
}

inline void assign_all(const PointSet& points, const PointSet& centers, MetricKind kind,
                       std::vector<std::uint32_t>& assignment) {
  const auto n = static_cast<std::int64_t>(points.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    assignment[static_cast<std::size_t>(i)] = nearest_center(points[static_cast<std::size_t>(i)], centers, kind);
  }
}

inline std::vector<std::uint32_t> cluster_sizes(const std::vector<std::uint32_t>& assignment, std::size_t k) {
  std::vector<std::uint32_t> sizes(k, 0);
  for (auto a : assignment) ++sizes[a];
  return sizes;
}

// k-means++: first center uniform, then proportional to squared distance.
inline PointSet seed_plus_plus(const PointSet& points, std::size_t k, MetricKind kind, CounterRng& rng) {
  const std::size_t n = points.size();
  PointSet centers(points.dim());
  std::vector<char> chosen(n, 0);
  std::vector<double> d2(n, kInfinity);

  auto take = [&](std::size_t idx) {
    chosen[idx] = 1;
    centers.push_back(points[idx]);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = distance_unchecked(points[i], points[idx], kind);
      d2[i] = std::min(d2[i], d * d);
    }
  };

  take(rng.below(n));
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!chosen[i]) total += d2[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i] || d2[i] <= 0.0) continue;
        acc += d2[i];
        pick = i;
        if (acc > target) break;
      }
    } else {
      rng.next_u64();
    }
    if (pick == n) {
      pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), 0) - chosen.begin());
    }
    take(pick);
  }
  return centers;
}

// Moves the farthest member of the largest cluster into each empty one.
inline bool reseed_empty(const PointSet& points, PointSet& centers, MetricKind kind,
                         std::vector<std::uint32_t>& assignment) {
  bool changed = false;
  auto sizes = cluster_sizes(assignment, centers.size());
  for (std::size_t c = 0; c < centers.size(); ++c) {
    if (sizes[c] != 0) continue;
    const auto largest = static_cast<std::size_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    if (sizes[largest] < 2) break;
    double far = -1.0;
    std::size_t far_idx = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (assignment[i] != largest) continue;
      const double d = distance_unchecked(points[i], centers[largest], kind);
      if (d > far) {
        far = d;
        far_idx = i;
      }
    }
    std::copy(points[far_idx].begin(), points[far_idx].end(), centers[c].begin());
    assignment[far_idx] = static_cast<std::uint32_t>(c);
    --sizes[largest];
    ++sizes[c];
    changed = true;
  }
  return changed;
}

}  // namespace detail

// Lloyd's algorithm with k-means++ seeding and exactly `iters` update
// rounds, followed by a final assignment pass. Centers are means of their
// members (re-normalized under the cosine metric; singleton clusters copy
// their point verbatim). Clusters are relabelled in order of their lowest
// member index, so k == n yields the identity assignment.
inline KMeansResult kmeans(const PointSet& points, std::size_t k, std::size_t iters, std::uint64_t seed,
                           MetricKind kind) {
  const std::size_t n = points.size();
  if (n == 0) throw std::invalid_argument("kmeans: empty input");
  if (k == 0 || k > n) {
    throw std::invalid_argument("kmeans: k=" + std::to_string(k) + " must be in [1, " + std::to_string(n) + "]");
  }
  validate_points(points, kind);
  const std::size_t dim = points.dim();

  CounterRng rng(seed, 0x6b6d);
  PointSet centers = detail::seed_plus_plus(points, k, kind, rng);
  std::vector<std::uint32_t> assignment(n, 0);

  for (std::size_t it = 0; it < iters; ++it) {
    detail::assign_all(points, centers, kind, assignment);
    detail::reseed_empty(points, centers, kind, assignment);

    std::vector<double> sums(k * dim, 0.0);
    auto sizes = detail::cluster_sizes(assignment, k);
    std::vector<std::uint32_t> single(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = assignment[i];
      single[c] = static_cast<std::uint32_t>(i);
      auto row = points[i];
      for (std::size_t d = 0; d < dim; ++d) sums[c * dim + d] += row[d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] == 0) continue;
      auto center = centers[c];
      if (sizes[c] == 1) {
        std::copy(points[single[c]].begin(), points[single[c]].end(), center.begin());
        continue;
      }
      std::span<const double> mean_sum(sums.data() + c * dim, dim);
      if (kind == MetricKind::Cosine) {
        if (detail::squared_norm(mean_sum) == 0.0) continue;
        const auto unit = normalize(mean_sum);
        std::copy(unit.begin(), unit.end(), center.begin());
      } else {
        for (std::size_t d = 0; d < dim; ++d) center[d] = mean_sum[d] / static_cast<double>(sizes[c]);
      }
    }
  }

  detail::assign_all(points, centers, kind, assignment);
  while (detail::reseed_empty(points, centers, kind, assignment)) {
  }

  // Canonical labels: cluster order follows the lowest member index.
  std::vector<std::int64_t> relabel(k, -1);
  std::uint32_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (relabel[assignment[i]] < 0) relabel[assignment[i]] = next++;
  }
  KMeansResult out;
  out.centers = PointSet(k, dim);
  for (std::size_t c = 0; c < k; ++c) {
    const auto dst = static_cast<std::size_t>(relabel[c]);
    std::copy(centers[c].begin(), centers[c].end(), out.centers[dst].begin());
  }
  out.assignment.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.assignment[i] = static_cast<std::uint32_t>(relabel[assignment[i]]);
  out.sizes = detail::cluster_sizes(out.assignment, k);
  return out;
}

}  // namespace geodist

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
#include <cstddef>
#include <string>
#include <vector>

#include "geodist/common.hpp"
#include "geodist/graph.hpp"
#include "geodist/hierarchy.hpp"
#include "geodist/matrix.hpp"
#include "geodist/metrics.hpp"
#include "geodist/stats.hpp"

namespace geodist {

inline constexpr std::size_t kOracleMaxPoints = 4096;
inline constexpr double kOracleCrossCheckTolerance = 1e-12;

struct ExactGeodesicTable {
  ApspMatrix dist;
  KnnGraph source_graph;
  double cross_check_max_diff = 0.0;
};

// Full k-NN graph over every point, APSP by Floyd, confirmed against
// Dijkstra from every source.
inline ExactGeodesicTable exact_geodesic(const PointSet& points, std::size_t k, MetricKind kind) {
  if (points.size() > kOracleMaxPoints) {
    throw SizeLimit("exact_geodesic: " + std::to_string(points.size()) + " points exceeds the oracle limit of " +
                    std::to_string(kOracleMaxPoints) + "; use a hierarchical index instead");
  }
  validate_points(points, kind, "exact_geodesic");
  ExactGeodesicTable t{DistanceMatrix(0), build_knn_graph(points, k, kind), 0.0};
  t.dist = floyd_apsp(t.source_graph);
  const auto check = dijkstra_apsp(t.source_graph);
  double worst = 0.0;
  for (std::size_t i = 0; i < t.dist.data().size(); ++i) {
    const double a = t.dist.data()[i];
    const double b = check.data()[i];
    if (a == b) continue;
    if (std::isinf(a) || std::isinf(b)) {
      throw std::logic_error("exact_geodesic: Floyd and Dijkstra disagree on reachability");
    }
    worst = std::max(worst, std::abs(a - b));
  }
  if (worst > kOracleCrossCheckTolerance) {
    throw std::logic_error("exact_geodesic: Floyd and Dijkstra differ by " + std::to_string(worst));
  }
  t.cross_check_max_diff = worst;
  return t;
}

struct ApproximationReport {
  std::size_t pairs = 0;
  std::size_t both_finite = 0;
  std::size_t reachability_disagreements = 0;
  std::size_t hier_only_reachable = 0;
  std::size_t exact_only_reachable = 0;
  std::size_t fallbacks = 0;
  double abs_err_max = 0.0;
  double abs_err_median = 0.0;
  double rel_err_median = 0.0;
  double rel_err_p90 = 0.0;
  double rel_err_p99 = 0.0;
  double rel_err_max = 0.0;
  double signed_err_mean = 0.0;  // hierarchical minus exact
  double spearman = 0.0;
};

inline ApproximationReport approximation_report(const HierarchicalIndex& idx, const ExactGeodesicTable& table) {
  const std::size_t n = idx.point_count;
  if (table.dist.size() != n) throw std::invalid_argument("approximation_report: point count mismatch");
  ApproximationReport r;
  QueryStats stats;
  std::vector<double> abs_err, rel_err, signed_err, hv, ev;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      ++r.pairs;
      const double h = query_in_pool(idx, i, j, &stats).angle_sum;
      const double e = table.dist(i, j);
      const bool hf = std::isfinite(h);
      const bool ef = std::isfinite(e);
      if (hf != ef) {
        ++r.reachability_disagreements;
        (hf ? r.hier_only_reachable : r.exact_only_reachable) += 1;
        continue;
      }
      if (!hf) continue;
      ++r.both_finite;
      const double d = h - e;
      signed_err.push_back(d);
      abs_err.push_back(std::abs(d));
      rel_err.push_back(e > 0.0 ? std::abs(d) / e : (d == 0.0 ? 0.0 : kInfinity));
      hv.push_back(h);
      ev.push_back(e);
    }
  }
  r.fallbacks = stats.fallbacks;
  if (!abs_err.empty()) {
    r.abs_err_max = *std::max_element(abs_err.begin(), abs_err.end());
    r.abs_err_median = quantile(abs_err, 0.5);
    r.rel_err_median = quantile(rel_err, 0.5);
    r.rel_err_p90 = quantile(rel_err, 0.9);
    r.rel_err_p99 = quantile(rel_err, 0.99);
    r.rel_err_max = *std::max_element(rel_err.begin(), rel_err.end());
    r.signed_err_mean = mean(signed_err);
    r.spearman = spearman(hv, ev);
  }
  return r;
}

}  // namespace geodist

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

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "geodist/hierarchy.hpp"
#include "geodist/synth.hpp"
#include "test_support.hpp"

using namespace geodist;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

HierarchyConfig flat_config(std::size_t n, std::size_t k, MetricKind metric = MetricKind::Cosine) {
  HierarchyConfig cfg;
  cfg.layers = 1;
  cfg.clusters_per_node = n;
  cfg.neighbors = k;
  cfg.metric = metric;
  return cfg;
}

ref::Rows circle(std::size_t n) {
  ref::Rows rows;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    rows.push_back({std::cos(t), std::sin(t), 0.0});
  }
  return rows;
}

}  // namespace

TEST_CASE("flat index reproduces the plain graph geodesic", "[hierarchy][property]") {
  for (std::uint32_t seed = 0; seed < 6; ++seed) {
    const std::size_t n = 64 + seed * 38;
    const std::size_t k = 3 + seed;
    const auto rows = ref::random_unit_rows(n, 5, seed + 900);
    const auto idx = build_index(PointSet::from_rows(rows), flat_config(n, k), seed);
    const auto exact = ref::apsp(ref::knn_dense(rows, k, ref::angle));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const auto r = query_in_pool(idx, i, j);
        if (std::isinf(exact[i][j])) {
          REQUIRE_FALSE(r.reachable);
        } else {
          REQUIRE(r.reachable);
          REQUIRE_THAT(r.angle_sum, WithinRel(exact[i][j], 1e-9) || WithinAbs(exact[i][j], 1e-12));
        }
      }
    }
  }
}

TEST_CASE("antipodal points on a flat ring", "[hierarchy]") {
  const auto idx = build_index(PointSet::from_rows(circle(100)), flat_config(100, 2), 1);
  const auto r = query_in_pool(idx, 0, 50);
  REQUIRE(r.reachable);
  REQUIRE_THAT(r.angle_sum, WithinAbs(50.0 * (2.0 * std::numbers::pi / 100.0), 1e-9));
}

TEST_CASE("identical indices short-circuit to zero", "[hierarchy]") {
  HierarchyConfig cfg;
  cfg.clusters_per_node = 16;
  cfg.neighbors = 4;
  const auto idx = build_index(PointSet::from_rows(ref::random_unit_rows(300, 4, 2)), cfg, 3);
  for (std::size_t i = 0; i < 300; i += 17) {
    const auto r = query_in_pool(idx, i, i);
    REQUIRE(r.angle_sum == 0.0);
    REQUIRE(r.reachable);
  }
  REQUIRE_THROWS_AS(query_in_pool(idx, 0, 300), BadQuery);
}

TEST_CASE("two-layer queries: symmetry, sign and the trivial lower bound", "[hierarchy][property]") {
  for (std::uint32_t seed = 0; seed < 4; ++seed) {
    HierarchyConfig cfg;
    cfg.layers = 2 + seed % 2;
    cfg.clusters_per_node = 8 + seed * 4;
    cfg.neighbors = 4;
    const auto rows = ref::random_unit_rows(600, 3 + seed, seed + 40);
    const auto idx = build_index(PointSet::from_rows(rows), cfg, seed);
    for (std::size_t i = 0; i < 600; i += 7) {
      for (std::size_t j = 0; j < 600; j += 5) {
        const auto a = query_in_pool(idx, i, j);
        const auto b = query_in_pool(idx, j, i);
        REQUIRE(a.angle_sum == b.angle_sum);
        REQUIRE(a.reachable == b.reachable);
        REQUIRE(a.angle_sum >= 0.0);
        REQUIRE(a.reachable == !std::isinf(a.angle_sum));
        REQUIRE(a.angle_sum >= trivial_distance(rows[i], rows[j], MetricKind::Cosine) - 1e-9);
      }
    }
  }
}

TEST_CASE("D_o decomposition on the swiss roll", "[hierarchy]") {
  const auto ds = gen_swiss_roll(2048, 0.0, 5);
  HierarchyConfig cfg;
  cfg.layers = 2;
  cfg.clusters_per_node = 64;
  cfg.metric = MetricKind::Euclidean;
  const auto idx = build_index(ds.points, cfg, 9);
  const std::size_t nb = idx.bottom_count();
  REQUIRE(idx.d_o.size() == 2048 * nb);
  REQUIRE(idx.layers[0].centers.size() == 64);
  for (std::size_t i = 0; i < 2048; ++i) {
    const auto row = idx.d_o_row(i);
    REQUIRE(row[idx.bottom_center_index[i]] == idx.bottom_distance[i]);
    REQUIRE_THAT(idx.bottom_distance[i],
                 WithinAbs(ref::euclid(ds.points.row_vector(i),
                                       idx.bottom().centers.row_vector(idx.bottom_center_index[i])),
                           1e-12));
    for (std::size_t b = 0; b < nb; ++b) {
      REQUIRE(row[b] == idx.bottom_distance[i] + idx.bottom_apsp(idx.bottom_center_index[i], b));
      REQUIRE(row[b] >= 0.0);
    }
  }
  for (std::size_t a = 0; a < nb; ++a) {
    REQUIRE(idx.bottom_apsp(a, a) == 0.0);
    for (std::size_t b = 0; b < nb; ++b) REQUIRE(idx.bottom_apsp(a, b) == idx.bottom_apsp(b, a));
  }
}

TEST_CASE("flat center graph equals the raw knn graph", "[hierarchy]") {
  const auto pts = PointSet::from_rows(ref::random_unit_rows(256, 6, 31));
  const auto idx = build_index(pts, flat_config(256, 8), 4);
  REQUIRE(idx.layers.size() == 1);
  REQUIRE(idx.layers[0].graphs.size() == 1);
  REQUIRE(idx.layers[0].centers == pts);
  REQUIRE(idx.layers[0].graphs[0].graph == build_knn_graph(pts, 8, MetricKind::Cosine));
}

TEST_CASE("index build is deterministic", "[hierarchy]") {
  HierarchyConfig cfg;
  cfg.layers = 3;
  cfg.clusters_per_node = 6;
  cfg.neighbors = 3;
  const auto pts = PointSet::from_rows(ref::random_unit_rows(500, 4, 12));
  REQUIRE(build_index(pts, cfg, 77) == build_index(pts, cfg, 77));
}

TEST_CASE("nearest bottom center", "[hierarchy]") {
  SECTION("exact center and tie-break") {
    const auto pts = PointSet::from_rows({{100.0, 0.0}, {0.0, 100.0}, {1.0, 0.0}, {-100.0, 0.0}, {0.0, -100.0}, {-1.0, 0.0}});
    const auto idx = build_index(pts, flat_config(6, 2, MetricKind::Euclidean), 0);
    const auto tie = nearest_bottom_center(idx, std::vector<double>{0.0, 0.0});
    REQUIRE(tie.center == 2);
    REQUIRE(tie.distance == 1.0);
    const auto hit = nearest_bottom_center(idx, std::vector<double>{-1.0, 0.0});
    REQUIRE(hit.center == 5);
    REQUIRE(hit.distance == 0.0);
  }
  SECTION("random queries against a linear scan") {
    HierarchyConfig cfg;
    cfg.clusters_per_node = 12;
    cfg.neighbors = 4;
    const auto idx = build_index(PointSet::from_rows(ref::random_unit_rows(800, 5, 6)), cfg, 1);
    ref::Rows centers;
    for (std::size_t c = 0; c < idx.bottom_count(); ++c) centers.push_back(idx.bottom().centers.row_vector(c));
    const auto queries = ref::random_unit_rows(1000, 5, 7);
    for (const auto& q : queries) {
      const auto got = nearest_bottom_center(idx, q);
      const auto [want, dist] = ref::nearest(centers, q, ref::angle);
      REQUIRE(got.center == want);
      REQUIRE_THAT(got.distance, WithinAbs(dist, 1e-12));
    }
  }
}

TEST_CASE("out-of-graph queries", "[hierarchy]") {
  SECTION("query equal to a pool point that is its own center") {
    const auto rows = ref::random_unit_rows(64, 4, 15);
    const auto idx = build_index(PointSet::from_rows(rows), flat_config(64, 4), 2);
    for (std::size_t i = 0; i < 64; ++i) {
      const auto r = query_out_of_graph(idx, rows[i], i);
      REQUIRE(r.angle_sum == 0.0);
      REQUIRE(idx.d_o_row(i)[idx.bottom_center_index[i]] == 0.0);
    }
  }
  SECTION("query equal to a bottom center") {
    HierarchyConfig cfg;
    cfg.clusters_per_node = 10;
    cfg.neighbors = 3;
    const auto idx = build_index(PointSet::from_rows(ref::random_unit_rows(400, 4, 16)), cfg, 2);
    for (std::size_t c = 0; c < idx.bottom_count(); c += 3) {
      const auto x = idx.bottom().centers.row_vector(c);
      if (nearest_bottom_center(idx, x).center != c) continue;
      for (std::size_t i = 0; i < 400; i += 11) REQUIRE(query_out_of_graph(idx, x, i).angle_sum == idx.d_o_row(i)[c]);
    }
  }
  SECTION("validation") {
    const auto idx = build_index(PointSet::from_rows(circle(20)), flat_config(20, 2), 1);
    REQUIRE_THROWS_AS(query_out_of_graph(idx, std::vector<double>{2.0, 0.0, 0.0}, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(query_out_of_graph(idx, std::vector<double>{1.0, 0.0}, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(query_out_of_graph(idx, std::vector<double>{1.0, 0.0, 0.0}, 20), BadQuery);
  }
}

TEST_CASE("disconnected graphs", "[hierarchy]") {
  SECTION("separate components on the top layer are unreachable") {
    const auto pts = PointSet::from_rows({{0.0}, {1.0}, {2.0}, {50.0}, {51.0}, {52.0}});
    const auto idx = build_index(pts, flat_config(6, 1, MetricKind::Euclidean), 0);
    const auto r = query_in_pool(idx, 0, 4);
    REQUIRE_FALSE(r.reachable);
    REQUIRE(std::isinf(r.angle_sum));
    REQUIRE(query_in_pool(idx, 0, 2).angle_sum == 2.0);
  }
  SECTION("disconnected sibling graph falls back one layer up") {
    // Four groups along a line, each made of two far-apart pairs of tight blobs.
    ref::Rows rows;
    const double group_x[] = {0.0, 100.0, 250.0, 450.0};
    const double blob_x[] = {0.0, 1.0, 10.0, 11.0};
    for (double gx : group_x) {
      for (double bx : blob_x) {
        for (int p = 0; p < 10; ++p) rows.push_back({gx + bx + 0.001 * p, 0.001 * (p % 3)});
      }
    }
    HierarchyConfig cfg;
    cfg.layers = 2;
    cfg.clusters_per_node = 4;
    cfg.neighbors = 1;
    cfg.kmeans_iters = 10;
    cfg.metric = MetricKind::Euclidean;
    const auto idx = build_index(PointSet::from_rows(rows), cfg, 3);
    REQUIRE(idx.layers[1].centers.size() == 16);
    QueryStats stats;
    const auto near = query_in_pool(idx, 0, 10, &stats);  // neighbouring blobs
    REQUIRE(stats.fallbacks == 0);
    REQUIRE(near.reachable);
    const auto far = query_in_pool(idx, 0, 25, &stats);  // other pair, same group
    REQUIRE(stats.fallbacks == 1);
    REQUIRE(far.reachable);
    REQUIRE(far.angle_sum >= 10.0);
    REQUIRE(stats.queries == 2);
  }
}

TEST_CASE("config validation and clamping", "[hierarchy]") {
  HierarchyConfig bad;
  bad.layers = 0;
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.layers = kMaxLayers + 1;
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);

  HierarchyConfig cfg;
  cfg.clusters_per_node = 50;
  cfg.neighbors = 3;
  const auto idx = build_index(PointSet::from_rows(ref::random_unit_rows(20, 3, 1)), cfg, 0);
  REQUIRE_FALSE(idx.warnings.empty());
  REQUIRE(idx.layers[0].centers.size() == 20);
  REQUIRE_THROWS_AS(build_index(PointSet(3), cfg, 0), std::invalid_argument);
}

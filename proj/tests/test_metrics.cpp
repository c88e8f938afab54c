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
#include <limits>
#include <numbers>
#include <random>

#include "geodist/graph.hpp"
#include "geodist/metrics.hpp"
#include "test_support.hpp"

using namespace geodist;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinULP;

TEST_CASE("identical unit vectors are at distance zero", "[metrics]") {
  for (const auto& v : ref::random_unit_rows(20, 7, 1)) {
    REQUIRE(trivial_distance(v, v, MetricKind::Cosine) == 0.0);
    REQUIRE(trivial_distance(v, v, MetricKind::Euclidean) == 0.0);
  }
}

TEST_CASE("orthogonal axes are a right angle apart", "[metrics]") {
  std::vector<double> e1(256, 0.0), e2(256, 0.0);
  e1[0] = 1.0;
  e2[1] = 1.0;
  REQUIRE_THAT(trivial_distance(e1, e2, MetricKind::Cosine), WithinULP(std::numbers::pi / 2, 1));
}

TEST_CASE("antipodal points in the plane", "[metrics]") {
  const std::vector<double> a{1.0, 0.0}, b{-1.0, 0.0};
  REQUIRE(trivial_distance(a, b, MetricKind::Euclidean) == 2.0);
  REQUIRE_THAT(trivial_distance(a, b, MetricKind::Cosine), WithinULP(std::numbers::pi, 1));
}

TEST_CASE("trivial_distance rejects bad input", "[metrics]") {
  const std::vector<double> a{1.0, 0.0}, b{1.0, 0.0, 0.0};
  REQUIRE_THROWS_AS(trivial_distance(a, b, MetricKind::Euclidean), std::invalid_argument);
  const std::vector<double> c{std::numeric_limits<double>::quiet_NaN(), 0.0};
  REQUIRE_THROWS_AS(trivial_distance(a, c, MetricKind::Cosine), std::invalid_argument);
  const std::vector<double> d{std::numeric_limits<double>::infinity(), 0.0};
  REQUIRE_THROWS_AS(trivial_distance(d, a, MetricKind::Euclidean), std::invalid_argument);
}

TEST_CASE("normalize", "[metrics]") {
  const auto a = normalize(std::vector<double>{3.0, 4.0});
  REQUIRE_THAT(a[0], WithinAbs(0.6, 1e-15));
  REQUIRE_THAT(a[1], WithinAbs(0.8, 1e-15));

  const auto b = normalize(std::vector<double>{2.0, 0.0, 0.0});
  REQUIRE(b == std::vector<double>{1.0, 0.0, 0.0});

  for (const auto& u : ref::random_unit_rows(50, 9, 2)) {
    const auto again = normalize(u);
    for (std::size_t i = 0; i < u.size(); ++i) REQUIRE_THAT(again[i], WithinAbs(u[i], 1e-12));
  }

  REQUIRE_THROWS_AS(normalize(std::vector<double>{0.0, 0.0}), std::invalid_argument);
  REQUIRE_THROWS_AS(normalize(std::vector<double>{1.0, std::nan("")}), std::invalid_argument);
}

TEST_CASE("angular distance agrees with arccos of the inner product", "[metrics]") {
  const auto pts = ref::random_unit_rows(200, 5, 3);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double got = trivial_distance(pts[i], pts[i + 1], MetricKind::Cosine);
    REQUIRE_THAT(got, WithinAbs(ref::angle(pts[i], pts[i + 1]), 1e-12));
    REQUIRE(got >= 0.0);
    REQUIRE(got <= std::numbers::pi);
  }
}

TEST_CASE("metric properties on random vectors", "[metrics][property]") {
  const auto pts = ref::random_unit_rows(300, 6, 4);
  std::mt19937 gen(5);
  std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
  for (int t = 0; t < 2000; ++t) {
    const auto& a = pts[pick(gen)];
    const auto& b = pts[pick(gen)];
    const auto& c = pts[pick(gen)];
    for (auto kind : {MetricKind::Cosine, MetricKind::Euclidean}) {
      const double ab = trivial_distance(a, b, kind);
      REQUIRE(ab == trivial_distance(b, a, kind));
      REQUIRE(trivial_distance(a, c, kind) <= ab + trivial_distance(b, c, kind) + 1e-9);
    }
  }
}

TEST_CASE("near-identical and near-antipodal inputs never produce NaN", "[metrics]") {
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> jitter(-1e-7, 1e-7);
  for (const auto& u : ref::random_unit_rows(100, 4, 7)) {
    std::vector<double> v = u, w = u;
    for (std::size_t i = 0; i < u.size(); ++i) {
      v[i] += jitter(gen);
      w[i] = -u[i] + jitter(gen);
    }
    const double near = trivial_distance(u, v, MetricKind::Cosine);
    const double far = trivial_distance(u, w, MetricKind::Cosine);
    REQUIRE_FALSE(std::isnan(near));
    REQUIRE_FALSE(std::isnan(far));
    REQUIRE(near >= 0.0);
    REQUIRE(far <= std::numbers::pi);
  }
}

TEST_CASE("simple manifold check", "[metrics]") {
  const auto two = PointSet::from_rows({{0.0, 0.0}, {1.0, 0.0}});
  const auto thr = SimpleManifoldThreshold::for_dim(2);

  SECTION("geodesic equal to trivial passes") {
    DistanceMatrix geo(2, 0.0);
    geo(0, 1) = geo(1, 0) = 1.0;
    REQUIRE(simple_manifold_check(two, geo, MetricKind::Euclidean, thr));
  }
  SECTION("a gap of exactly delta fails") {
    DistanceMatrix geo(2, 0.0);
    geo(0, 1) = geo(1, 0) = 1.0 + 0.5;
    REQUIRE_FALSE(simple_manifold_check(two, geo, MetricKind::Euclidean, SimpleManifoldThreshold(0.5)));
    REQUIRE(simple_manifold_check(two, geo, MetricKind::Euclidean, SimpleManifoldThreshold(0.5000001)));
  }
  SECTION("half circle arc is not simple at small delta") {
    ref::Rows rows;
    for (int i = 0; i < 50; ++i) {
      const double t = std::numbers::pi * i / 49.0;
      rows.push_back({std::cos(t), std::sin(t)});
    }
    const auto d = ref::apsp(ref::knn_dense(rows, 4, ref::euclid));
    DistanceMatrix geo(50);
    for (std::size_t i = 0; i < 50; ++i) {
      for (std::size_t j = 0; j < 50; ++j) geo(i, j) = d[i][j];
    }
    const auto pts = PointSet::from_rows(rows);
    REQUIRE_FALSE(simple_manifold_check(pts, geo, MetricKind::Euclidean, SimpleManifoldThreshold(0.05)));
    // End to end the path is about pi against a chord of 2.
    REQUIRE(geo(0, 49) - 2.0 > 1.0);
  }
  SECTION("threshold must be positive") {
    REQUIRE_THROWS_AS(SimpleManifoldThreshold(0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(SimpleManifoldThreshold(-1.0), std::invalid_argument);
    REQUIRE(SimpleManifoldThreshold::for_dim(256).delta == 16.0);
  }
  SECTION("matrix must cover every point") {
    REQUIRE_THROWS_AS(simple_manifold_check(two, DistanceMatrix(3, 0.0), MetricKind::Euclidean, thr),
                      std::invalid_argument);
  }
}

TEST_CASE("validate_points enforces unit norm for cosine", "[metrics]") {
  auto pts = PointSet::from_rows({{1.0, 0.0}, {0.0, 2.0}});
  REQUIRE_NOTHROW(validate_points(pts, MetricKind::Euclidean));
  REQUIRE_THROWS_AS(validate_points(pts, MetricKind::Cosine), std::invalid_argument);
  normalize_rows(pts);
  REQUIRE_NOTHROW(validate_points(pts, MetricKind::Cosine));
}

TEST_CASE("metric names round trip", "[metrics]") {
  REQUIRE(parse_metric("cosine") == MetricKind::Cosine);
  REQUIRE(parse_metric(to_string(MetricKind::Euclidean)) == MetricKind::Euclidean);
  REQUIRE_THROWS_AS(parse_metric("manhattan"), std::invalid_argument);
}

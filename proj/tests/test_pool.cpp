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

#include <deque>
#include <random>

#include "geodist/pool.hpp"
#include "test_support.hpp"

using namespace geodist;

namespace {

PoolConfig small_config(std::size_t capacity, std::size_t dim, std::size_t period = 100) {
  PoolConfig cfg;
  cfg.capacity = capacity;
  cfg.dim = dim;
  cfg.rebuild_period = period;
  cfg.seed = 5;
  cfg.hierarchy.clusters_per_node = 4;
  cfg.hierarchy.neighbors = 2;
  return cfg;
}

PointSet batch_of(const ref::Rows& rows) { return PointSet::from_rows(rows); }

}  // namespace

TEST_CASE("cursor arithmetic", "[pool]") {
  SECTION("empty pool takes the first slots") {
    FeaturePool pool(small_config(8, 3));
    const auto r = pool.insert_batch(batch_of(ref::random_unit_rows(3, 3, 1)));
    REQUIRE(r.positions == std::vector<std::size_t>{0, 1, 2});
    REQUIRE(pool.filled() == 3);
    REQUIRE(pool.cursor() == 3);
  }
  SECTION("wraparound on a full pool") {
    FeaturePool pool(small_config(8, 3));
    pool.insert_batch(batch_of(ref::random_unit_rows(8, 3, 2)));
    pool.insert_batch(batch_of(ref::random_unit_rows(6, 3, 3)));
    REQUIRE(pool.cursor() == 6);
    const auto r = pool.insert_batch(batch_of(ref::random_unit_rows(4, 3, 4)));
    REQUIRE(r.positions == std::vector<std::size_t>{6, 7, 0, 1});
    REQUIRE(pool.filled() == 8);
    REQUIRE(pool.cursor() == 2);
  }
  SECTION("argument checks") {
    FeaturePool pool(small_config(4, 3));
    REQUIRE_THROWS_AS(pool.insert_batch(batch_of(ref::random_unit_rows(2, 2, 1))), std::invalid_argument);
    REQUIRE_THROWS_AS(pool.insert_batch(batch_of(ref::random_unit_rows(5, 3, 1))), std::invalid_argument);
    REQUIRE(pool.insert_batch(PointSet(3)).positions.empty());
    REQUIRE_THROWS_AS(FeaturePool(small_config(0, 3)), std::invalid_argument);
  }
}

TEST_CASE("snapshot is oldest first", "[pool]") {
  FeaturePool pool(small_config(4, 3));
  REQUIRE(pool.snapshot().empty());
  const auto rows = ref::random_unit_rows(5, 3, 9);  // a b c d e
  for (const auto& r : rows) pool.insert_batch(batch_of({r}));
  const auto snap = pool.snapshot();
  REQUIRE(snap.size() == 4);
  for (std::size_t n = 0; n < 4; ++n) {
    for (std::size_t d = 0; d < 3; ++d) REQUIRE(snap[n].vector[d] == Catch::Approx(rows[n + 1][d]).epsilon(1e-15));
    REQUIRE(snap[n].age == 3 - n);
  }
  REQUIRE(snap[0].slot == 1);
}

TEST_CASE("snapshot ages after random batches", "[pool]") {
  FeaturePool pool(small_config(32, 4));
  std::mt19937_64 gen(4);
  for (int b = 0; b < 10; ++b) {
    const auto size = 1 + gen() % 9;
    pool.insert_batch(batch_of(ref::random_unit_rows(size, 4, static_cast<std::uint32_t>(b))));
  }
  const auto snap = pool.snapshot();
  REQUIRE(snap.size() == pool.filled());
  for (std::size_t n = 1; n < snap.size(); ++n) REQUIRE(snap[n].age < snap[n - 1].age);
  REQUIRE(snap.back().age == 0);
}

TEST_CASE("rebuild schedule", "[pool]") {
  FeaturePool pool(small_config(64, 3, 100));
  pool.insert_batch(batch_of(ref::random_unit_rows(64, 3, 1)));
  for (int t = 1; t <= 250; ++t) {
    const bool rebuilt = pool.maybe_rebuild() != nullptr;
    REQUIRE(rebuilt == (t % 100 == 0));
  }
  REQUIRE(pool.rebuild_count() == 2);
  REQUIRE(pool.epoch() == 250);
  REQUIRE(pool.aux_consistent());
}

TEST_CASE("warm-up keeps a flat index over the contents", "[pool]") {
  auto cfg = small_config(64, 3);
  cfg.hierarchy.clusters_per_node = 10;
  FeaturePool pool(cfg);
  for (int b = 0; b < 4; ++b) {
    pool.insert_batch(batch_of(ref::random_unit_rows(3, 3, 10 + b)));
    REQUIRE(pool.index()->point_count == pool.filled());
    REQUIRE(pool.aux_consistent());
  }
  REQUIRE_FALSE(pool.warming_up());
  const auto frozen = pool.index();
  pool.insert_batch(batch_of(ref::random_unit_rows(5, 3, 20)));
  REQUIRE(pool.index() == frozen);
}

TEST_CASE("inserted point queried against its own slot pays the hop twice", "[pool]") {
  FeaturePool pool(small_config(128, 4));
  pool.insert_batch(batch_of(ref::random_unit_rows(64, 4, 1)));
  REQUIRE(pool.maybe_rebuild() == nullptr);
  const auto rows = ref::random_unit_rows(8, 4, 2);
  const auto r = pool.insert_batch(batch_of(rows));
  for (std::size_t n = 0; n < rows.size(); ++n) {
    const auto x = pool.row(r.positions[n]);
    const auto near = nearest_bottom_center(*pool.index(), x);
    REQUIRE(pool.query(x, r.positions[n]).angle_sum == 2.0 * near.distance);
  }
  REQUIRE_THROWS_AS(pool.query(rows[0], 100), BadQuery);
}

TEST_CASE("random insert and rebuild sequences keep the pool aligned", "[pool][property]") {
  auto cfg = small_config(48, 3, 7);
  cfg.hierarchy.clusters_per_node = 6;
  FeaturePool pool(cfg);
  std::deque<std::vector<double>> fifo;  // replay oracle
  std::mt19937_64 gen(11);
  std::size_t written_since = 0;
  bool any_rebuild = false;
  for (int op = 0; op < 1200; ++op) {
    // One step: scheduled rebuild, then at most one batch.
    if (pool.maybe_rebuild()) {
      written_since = 0;
      any_rebuild = true;
    }
    if (gen() % 3 != 0) {
      const std::size_t size = 1 + gen() % 12;
      const auto rows = ref::random_unit_rows(size, 3, static_cast<std::uint32_t>(op));
      pool.insert_batch(batch_of(rows));
      for (const auto& r : rows) {
        fifo.push_back(r);
        if (fifo.size() > 48) fifo.pop_front();
      }
      written_since += size;
    }
    std::string why;
    REQUIRE(pool.aux_consistent(&why));
    REQUIRE(pool.filled() == fifo.size());
    if (!pool.warming_up() && any_rebuild) {
      REQUIRE(pool.slots_since_rebuild() == written_since);
      REQUIRE(pool.slots_since_rebuild() <= cfg.rebuild_period * 12);
    }
    const auto snap = pool.snapshot();
    for (std::size_t n = 0; n < snap.size(); ++n) {
      for (std::size_t d = 0; d < 3; ++d) REQUIRE(snap[n].vector[d] == Catch::Approx(fifo[n][d]).epsilon(1e-15));
    }
  }
  REQUIRE(any_rebuild);
}

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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <nlohmann/json.hpp>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "geodist/graph.hpp"
#include "geodist/hierarchy.hpp"
#include "geodist/io.hpp"
#include "geodist/oracle.hpp"
#include "geodist/pool.hpp"
#include "geodist/rng.hpp"
#include "geodist/similarity.hpp"
#include "geodist/stats.hpp"
#include "geodist/synth.hpp"

using namespace geodist;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path workdir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "geodist_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(const std::string& args) {
  const std::string cmd = "cd '" + workdir().string() + "' && '" GEODIST_CLI "' " + args;
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

PointSet random_unit(std::size_t n, std::size_t dim, std::uint64_t seed) {
  CounterRng rng(seed, 0);
  PointSet out(dim);
  FeatureVector v(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& x : v) x = rng.normal();
    out.push_back(normalize(v));
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// 1. Flat index equals the exact graph geodesic.
Outcome flat_equivalence() {
  const std::size_t sizes[] = {64, 128, 256, 128, 256};
  double worst = 0.0;
  std::size_t mismatched_reach = 0;
  for (std::size_t t = 0; t < 5; ++t) {
    const auto pts = random_unit(sizes[t], 16, 100 + t);
    HierarchyConfig cfg;
    cfg.layers = 1;
    cfg.clusters_per_node = sizes[t];
    cfg.neighbors = 8;
    const auto idx = build_index(pts, cfg, t);
    const auto exact = exact_geodesic(pts, 8, MetricKind::Cosine);
    for (std::size_t i = 0; i < sizes[t]; ++i) {
      for (std::size_t j = 0; j < sizes[t]; ++j) {
        const double h = query_in_pool(idx, i, j).angle_sum;
        const double e = exact.dist(i, j);
        if (std::isinf(h) || std::isinf(e)) {
          mismatched_reach += std::isinf(h) != std::isinf(e) ? 1 : 0;
          continue;
        }
        const double rel = e == 0.0 ? std::abs(h) : std::abs(h - e) / e;
        worst = std::max(worst, rel);
      }
    }
  }
  return {worst <= 1e-9 && mismatched_reach == 0,
          "max relative error " + fmt(worst) + ", reachability mismatches " + std::to_string(mismatched_reach)};
}

// 2. Floyd against Dijkstra.
Outcome apsp_correctness() {
  double worst = 0.0;
  std::size_t reach = 0;
  for (std::uint64_t g = 0; g < 120; ++g) {
    CounterRng rng(g, 7);
    const std::size_t n = 2 + rng.below(127);
    const std::size_t max_edges = n * (n - 1) / 2;
    const std::size_t m = std::min<std::size_t>(max_edges, rng.below(4 * n + 1));
    std::vector<std::uint8_t> used(n * n, 0);
    std::vector<Edge> edges;
    while (edges.size() < m) {
      auto i = static_cast<std::uint32_t>(rng.below(n));
      auto j = static_cast<std::uint32_t>(rng.below(n));
      if (i == j || used[i * n + j]) continue;
      used[i * n + j] = used[j * n + i] = 1;
      edges.push_back({i, j, rng.uniform(0.01, 3.0)});
    }
    const KnnGraph graph(n, std::move(edges));
    const auto f = floyd_apsp(graph);
    const auto d = dijkstra_apsp(graph);
    for (std::size_t c = 0; c < f.data().size(); ++c) {
      const double a = f.data()[c], b = d.data()[c];
      if (std::isinf(a) || std::isinf(b)) {
        reach += std::isinf(a) != std::isinf(b) ? 1 : 0;
        continue;
      }
      worst = std::max(worst, std::abs(a - b));
    }
  }
  return {worst <= 1e-12 && reach == 0,
          "120 graphs, max |floyd - dijkstra| " + fmt(worst) + ", reachability mismatches " + std::to_string(reach)};
}

// 3. Component-count bound on k-NN graphs.
Outcome component_bound() {
  std::size_t worst = 0;
  bool degree_ok = true, all_ok = true;
  for (std::uint64_t t = 0; t < 50; ++t) {
    const auto g = build_knn_graph(random_unit(256, 16, 500 + t), 8, MetricKind::Cosine);
    const auto rep = validate_bounds(g);
    degree_ok = degree_ok && rep.min_degree >= 8;
    worst = std::max(worst, rep.components.component_count);
    all_ok = all_ok && static_cast<double>(rep.components.component_count) <= 90.94 && rep.theorem1_pass;
  }
  return {all_ok && degree_ok, "50 graphs, max components " + std::to_string(worst) + " (bound " +
                                   fmt(theorem1_bound(256, 8)) + "), min degree >= 8: " + (degree_ok ? "yes" : "no")};
}

std::vector<double> upper_pairs(std::size_t n, const std::function<double(std::size_t, std::size_t)>& f) {
  std::vector<double> v;
  v.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) v.push_back(f(i, j));
  }
  return v;
}

// 4. Swiss roll: geodesics track intrinsic distance.
Outcome swiss_roll_fidelity() {
  const std::size_t n = 2000;
  const auto ds = gen_swiss_roll(n, 0.0, 2024);
  const auto exact = exact_geodesic(ds.points, 8, MetricKind::Euclidean);
  HierarchyConfig cfg;
  cfg.layers = 2;
  cfg.clusters_per_node = 64;
  cfg.neighbors = 8;
  cfg.metric = MetricKind::Euclidean;
  const auto idx = build_index(ds.points, cfg, 1);

  const auto intrinsic = upper_pairs(n, [&](auto i, auto j) { return intrinsic_distance(ds, i, j); });
  const auto geo = upper_pairs(n, [&](auto i, auto j) { return exact.dist(i, j); });
  const auto amb = upper_pairs(n, [&](auto i, auto j) {
    return trivial_distance(ds.points[i], ds.points[j], MetricKind::Euclidean);
  });
  const auto hier = upper_pairs(n, [&](auto i, auto j) { return query_in_pool(idx, i, j).angle_sum; });
  const double r_geo = spearman(geo, intrinsic);
  const double r_amb = spearman(amb, intrinsic);
  const double r_hier = spearman(hier, intrinsic);
  const bool first = r_geo - r_amb >= 0.05;
  const bool second = std::abs(r_hier - r_geo) <= 0.05;
  return {first && second, "spearman exact " + fmt(r_geo) + ", ambient " + fmt(r_amb) + ", hierarchical " +
                               fmt(r_hier) + " (exact-ambient " + (first ? "ok" : "short") +
                               ", hierarchical gap " + fmt(std::abs(r_hier - r_geo)) + ")"};
}

// 5. Queue consistency under random inserts and rebuilds.
Outcome queue_consistency() {
  PoolConfig cfg;
  cfg.capacity = 512;
  cfg.dim = 8;
  cfg.rebuild_period = 20;
  cfg.seed = 3;
  FeaturePool pool(cfg);
  std::vector<FeatureVector> replay;  // every vector ever inserted, normalized as stored
  CounterRng rng(55, 0);
  std::size_t inserts = 0, rebuilds = 0;
  std::string why;
  for (std::size_t op = 0; op < 1000; ++op) {
    if (rng.below(2) == 0) {
      if (pool.maybe_rebuild()) ++rebuilds;
    } else {
      const auto b = 1 + rng.below(48);
      const auto batch = random_unit(b, 8, 10000 + op);
      pool.insert_batch(batch);
      for (std::size_t r = 0; r < b; ++r) replay.push_back(normalize(batch[r]));
      ++inserts;
    }
    if (!pool.aux_consistent(&why)) return {false, "op " + std::to_string(op) + ": " + why};
    const auto snap = pool.snapshot();
    const std::size_t expect = std::min(replay.size(), cfg.capacity);
    if (snap.size() != expect) return {false, "op " + std::to_string(op) + ": pool size mismatch"};
    for (std::size_t k = 0; k < snap.size(); ++k) {
      if (snap[k].vector != replay[replay.size() - expect + k]) {
        return {false, "op " + std::to_string(op) + ": FIFO order differs from replay log"};
      }
    }
  }
  return {true, std::to_string(inserts) + " inserts, " + std::to_string(rebuilds) +
                    " rebuilds; every slot consistent and FIFO order matches the replay log"};
}

// 6. Angle normalization.
Outcome angle_contract() {
  const AngleNormConfig cfg;
  const double pi = std::numbers::pi;
  const bool fixed = angle_normalize(GeodesicResult::of(0.0), cfg) == 1.0 &&
                     angle_normalize(GeodesicResult::of(4.0 * pi), cfg) == -1.0 &&
                     angle_normalize(GeodesicResult::of(2.0 * pi), cfg) == 0.0 &&
                     angle_normalize(GeodesicResult::of(kInfinity), cfg) == -1.0;
  CounterRng rng(6, 0);
  std::vector<double> xs(10000);
  for (auto& x : xs) x = rng.uniform(0.0, 5.0 * pi);
  std::sort(xs.begin(), xs.end());
  std::size_t violations = 0;
  for (std::size_t k = 1; k < xs.size(); ++k) {
    const double a = angle_normalize(GeodesicResult::of(xs[k - 1]), cfg);
    const double b = angle_normalize(GeodesicResult::of(xs[k]), cfg);
    violations += (b > a || b < -1.0 || a > 1.0) ? 1 : 0;
  }
  return {fixed && violations == 0, std::string("endpoints ") + (fixed ? "exact" : "wrong") + ", " +
                                        std::to_string(violations) + " monotonicity violations in 10^4 samples"};
}

double summary_rank(const fs::path& p) { return nlohmann::json::parse(slurp(p))["mean_rank"].get<double>(); }

// 7. Geodesic mining beats cosine on the warped paired roll.
Outcome mining_ab() {
  const std::string common = "simulate --capacity 2048 --batch 32 --steps 200 --no-timings --log /dev/null";
  if (cli(common + " --metric geodesic --summary geo.json") != 0) return {false, "geodesic run failed"};
  if (cli(common + " --metric cosine --summary cos.json") != 0) return {false, "cosine run failed"};
  const double geo = summary_rank(workdir() / "geo.json");
  const double cos = summary_rank(workdir() / "cos.json");
  return {geo < cos, "mean positive rank geodesic " + fmt(geo) + " vs cosine " + fmt(cos)};
}

// 8. Index and embedding round trips.
Outcome serialization() {
  HierarchyConfig cfg;
  cfg.clusters_per_node = 32;
  const auto pts = random_unit(2048, 16, 88);
  const auto idx = build_index(pts, cfg, 5);
  const auto path = workdir() / "rt.geox";
  save_index(path, idx);
  const auto back = load_index(path);
  CounterRng rng(8, 0);
  std::size_t diff = 0;
  for (int q = 0; q < 100; ++q) {
    const auto i = rng.below(2048), j = rng.below(2048);
    const auto a = query_in_pool(idx, i, j), b = query_in_pool(back, i, j);
    diff += (a.angle_sum != b.angle_sum || a.reachable != b.reachable) ? 1 : 0;
    const auto x = random_unit(1, 16, 9000 + q);
    diff += query_out_of_graph(idx, x[0], i).angle_sum != query_out_of_graph(back, x[0], i).angle_sum ? 1 : 0;
  }
  const auto epath = workdir() / "rt.gemb";
  const auto roll = gen_swiss_roll(1000, 0.1, 4, 8);
  save_embeddings(epath, roll.points, R"({"kind":"swiss-roll"})");
  const bool emb = load_embeddings(epath).points == quantize_f32(roll.points);
  return {diff == 0 && emb && back == idx,
          std::to_string(diff) + " differing answers over 100 pairs, embeddings " + (emb ? "identical" : "differ") +
              " after f32 rounding"};
}

// 9. Byte-identical reruns.
Outcome determinism() {
  if (cli("gen swiss-roll --n 3000 --dim 8 --lift 25 --seed 9 --out d.gemb") != 0) return {false, "gen failed"};
  const std::string build = "build --in d.gemb --clusters 64 --seed 4";
  if (cli(build + " --out d1.geox > d1.json") != 0 || cli(build + " --out d2.geox > d2.json") != 0) {
    return {false, "build failed"};
  }
  const std::string sim = "simulate --n 2048 --capacity 1024 --batch 32 --steps 120 --rebuild-period 50 --seed 4 "
                          "--clusters 64 --no-timings";
  if (cli(sim + " --log s1.jsonl --summary s1.json --checkpoint c1") != 0 ||
      cli(sim + " --log s2.jsonl --summary s2.json --checkpoint c2") != 0) {
    return {false, "simulate failed"};
  }
  const auto w = workdir();
  const bool index_same = slurp(w / "d1.geox") == slurp(w / "d2.geox") && slurp(w / "d1.json") == slurp(w / "d2.json");
  const bool log_same = slurp(w / "s1.jsonl") == slurp(w / "s2.jsonl") && slurp(w / "s1.json") == slurp(w / "s2.json");
  const bool ck_same =
      slurp(w / "c1.a.geox") == slurp(w / "c2.a.geox") && slurp(w / "c1.b.geox") == slurp(w / "c2.b.geox");
  return {index_same && log_same && ck_same && !slurp(w / "s1.jsonl").empty(),
          std::string("index ") + (index_same ? "identical" : "differs") + ", log " +
              (log_same ? "identical" : "differs") + ", checkpoints " + (ck_same ? "identical" : "differ")};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  Outcome (*run)();
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {1, "flat-equivalence", 30, flat_equivalence},   {2, "apsp-correctness", 60, apsp_correctness},
      {3, "component-bound", 60, component_bound},      {4, "swiss-roll-fidelity", 300, swiss_roll_fidelity},
      {5, "queue-consistency", 120, queue_consistency}, {6, "angle-normalization", 10, angle_contract},
      {7, "mining-ab", 600, mining_ab},                 {8, "serialization", 60, serialization},
      {9, "determinism", 300, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_seconds;
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    std::printf("%s %d %s: %s; %.1fs (limit %.0fs)%s\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                c.budget_seconds, in_time ? "" : " over time");
    std::fflush(stdout);
  }
  std::printf("%d of 9 criteria passed\n", 9 - failed);
  return failed == 0 ? 0 : 1;
}

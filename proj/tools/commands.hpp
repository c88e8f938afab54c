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

#include <omp.h>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geodist/graph.hpp"
#include "geodist/harness.hpp"
#include "geodist/hierarchy.hpp"
#include "geodist/io.hpp"
#include "geodist/kmeans.hpp"
#include "geodist/oracle.hpp"
#include "geodist/pool.hpp"
#include "geodist/similarity.hpp"
#include "geodist/synth.hpp"
#include "run_config.hpp"

namespace geodist::cli {

using json = nlohmann::ordered_json;

// Shortest round-trip form: 0, 0.5, inf.
inline std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// Like fmt but integral values keep a trailing ".0" (1.0, -1.0).
inline std::string fmt_real(double v) {
  std::string s = fmt(v);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

// Output sink: a file when a path is given, stdout otherwise.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_ = std::make_unique<std::ofstream>(path, std::ios::trunc);
      if (!*file_) throw IoError("cannot open " + path + " for writing");
    }
  }
  std::ostream& out() { return file_ ? *file_ : std::cout; }
  void close() {
    out().flush();
    if (file_ && !*file_) throw IoError("write failed");
  }

 private:
  std::unique_ptr<std::ofstream> file_;
};

inline bool normalize_if_needed(PointSet& points, MetricKind kind) {
  if (kind != MetricKind::Cosine) return false;
  bool changed = false;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!is_unit(points[i])) changed = true;
  }
  if (changed) normalize_rows(points);
  return changed;
}

// ---- gen -------------------------------------------------------------------

struct GenOptions {
  std::string kind;
  std::optional<std::size_t> n;
  std::optional<std::uint64_t> seed;
  std::optional<double> noise, height, lift, warp, pair_noise;
  std::optional<std::size_t> dim;
  std::size_t blobs = 3;
  std::size_t per_blob = 100;
  double spread = 0.05;
  std::string out;
  std::string out_b;
  std::string csv;
};

inline void write_csv_points(const std::string& path, const PointSet& p) {
  if (p.size() > 10000) throw std::invalid_argument("--csv is limited to 10000 points");
  Sink s(path);
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t d = 0; d < p.dim(); ++d) s.out() << (d ? "," : "") << fmt(p[i][d]);
    s.out() << '\n';
  }
  s.close();
}

inline void write_dataset(const std::string& path, const Dataset& ds, json meta) {
  meta["lift_radius"] = ds.lift_radius;
  if (!ds.labels.empty()) meta["labels"] = ds.labels;
  save_embeddings(path, ds.points, meta.dump());
  if (ds.intrinsic) save_embeddings(path + ".intrinsic", *ds.intrinsic, R"({"columns":["arc_length","height"]})");
}

inline int cmd_gen(const GenOptions& o) {
  json meta;
  meta["kind"] = o.kind;
  if (o.kind == "swiss-roll") {
    const std::size_t n = o.n.value_or(2000);
    const std::uint64_t seed = o.seed.value_or(0);
    auto ds = gen_swiss_roll(n, o.noise.value_or(0.0), seed, o.dim.value_or(3), o.height.value_or(kRollHeight));
    if (o.lift.value_or(0.0) > 0.0) ds = lift_to_sphere(std::move(ds), *o.lift);
    meta["n"] = n;
    meta["seed"] = seed;
    meta["noise"] = o.noise.value_or(0.0);
    meta["embed_dim"] = o.dim.value_or(3);
    meta["height"] = o.height.value_or(kRollHeight);
    write_dataset(o.out, ds, meta);
    if (!o.csv.empty()) write_csv_points(o.csv, ds.points);
  } else if (o.kind == "sphere-blobs") {
    const std::uint64_t seed = o.seed.value_or(0);
    auto ds = gen_sphere_blobs(o.blobs, o.per_blob, o.spread, o.dim.value_or(16), seed);
    meta["blobs"] = o.blobs;
    meta["per_blob"] = o.per_blob;
    meta["spread"] = o.spread;
    meta["dim"] = o.dim.value_or(16);
    meta["seed"] = seed;
    write_dataset(o.out, ds, meta);
    if (!o.csv.empty()) write_csv_points(o.csv, ds.points);
  } else {  // paired
    if (o.out_b.empty()) throw std::invalid_argument("gen paired needs --out-b for the second modality");
    PairedRollParams p;
    if (o.n) p.n = *o.n;
    if (o.seed) p.seed = *o.seed;
    if (o.noise) p.noise = *o.noise;
    if (o.height) p.height = *o.height;
    if (o.lift) p.lift_radius = *o.lift;
    if (o.warp) p.warp = *o.warp;
    if (o.pair_noise) p.pair_noise = *o.pair_noise;
    if (o.dim) p.embed_dim = *o.dim;
    const auto pd = gen_paired_roll(p);
    meta["n"] = p.n;
    meta["seed"] = p.seed;
    meta["embed_dim"] = p.embed_dim;
    meta["height"] = p.height;
    meta["noise"] = p.noise;
    meta["warp"] = p.warp;
    meta["pair_noise"] = p.pair_noise;
    meta["modality"] = "a";
    write_dataset(o.out, pd.a, meta);
    meta["modality"] = "b";
    write_dataset(o.out_b, pd.b, meta);
    if (!o.csv.empty()) write_csv_points(o.csv, pd.a.points);
  }
  return 0;
}

// ---- build -----------------------------------------------------------------

inline json layer_json(const HierarchicalIndex& idx) {
  json arr = json::array();
  for (const auto& s : summarize(idx)) {
    arr.push_back({{"centers", s.centers},
                   {"graphs", s.graphs},
                   {"components", s.components},
                   {"edges", s.edges},
                   {"largest_graph", s.largest_graph}});
  }
  return arr;
}

inline json index_stats(const HierarchicalIndex& idx) {
  json j;
  j["points"] = idx.point_count;
  j["dim"] = idx.dim;
  j["layers"] = layer_json(idx);
  const auto& top = idx.layers.front().graphs.front().graph;
  const auto comps = connected_components(top);
  j["component_count"] = comps.component_count;
  j["flat_equivalent"] = idx.layer_count() == 1 && idx.layers.front().centers.size() == idx.point_count;
  if (top.neighbor_count() >= 1) {
    const auto bound = theorem1_bound(top.node_count(), top.neighbor_count());
    j["theorem1_sigma"] = top.neighbor_count();
    j["theorem1_bound"] = bound;
    j["theorem1_margin"] = bound - static_cast<double>(comps.component_count);
    j["theorem1_applicable"] = top.min_degree() >= top.neighbor_count();
  } else {
    j["theorem1_bound"] = nullptr;
  }
  j["warnings"] = idx.warnings;
  return j;
}

struct BuildOptions {
  std::string in;
  std::string out;
};

inline int cmd_build(const BuildOptions& o, const RunConfig& cfg) {
  auto emb = load_embeddings(o.in);
  const bool normalized = normalize_if_needed(emb.points, cfg.hierarchy.metric);
  const auto idx = build_index(emb.points, cfg.hierarchy, cfg.seed);
  save_index(o.out, idx);
  json j;
  j["config"] = to_json(cfg, emb.points.dim());
  j["input"] = o.in;
  j["normalized_input"] = normalized;
  j["stats"] = index_stats(idx);
  for (const auto& w : idx.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << j.dump(2) << '\n';
  return 0;
}

// ---- query -----------------------------------------------------------------

struct QueryOptions {
  std::string index;
  std::vector<std::string> pairs;
  bool all = false;
  std::string out_of_graph;
  std::optional<std::size_t> point;
  std::string dump;
  std::string out;
};

inline std::pair<std::size_t, std::size_t> parse_pair(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw std::invalid_argument("pair '" + s + "' is not of the form i,j");
  return {parse_count("pair", trim(s.substr(0, comma))), parse_count("pair", trim(s.substr(comma + 1)))};
}

inline void emit_row(std::ostream& os, std::size_t i, std::size_t j, const GeodesicResult& g,
                     const AngleNormConfig& angle) {
  os << i << ',' << j << ',' << fmt(g.angle_sum) << ',' << (g.reachable ? "true" : "false") << ','
     << fmt_real(angle_normalize(g, angle)) << '\n';
}

inline int cmd_query(const QueryOptions& o, const RunConfig& cfg) {
  if (o.pairs.empty() && !o.all && o.out_of_graph.empty() && o.dump.empty()) {
    throw std::invalid_argument("query needs --pairs, --all, --out-of-graph or --dump");
  }
  const auto idx = load_index(o.index);
  const auto pairs = [&] {
    std::vector<std::pair<std::size_t, std::size_t>> v;
    for (const auto& s : o.pairs) v.push_back(parse_pair(s));
    return v;
  }();
  Sink sink(o.out);
  auto& os = sink.out();
  os << "i,j,distance,reachable,similarity\n";
  QueryStats stats;
  for (const auto& [i, j] : pairs) emit_row(os, i, j, query_in_pool(idx, i, j, &stats), cfg.angle);
  if (o.all) {
    for (std::size_t i = 0; i < idx.point_count; ++i) {
      for (std::size_t j = 0; j < idx.point_count; ++j) emit_row(os, i, j, query_in_pool(idx, i, j, &stats), cfg.angle);
    }
  }
  if (!o.out_of_graph.empty()) {
    auto q = load_embeddings(o.out_of_graph);
    normalize_if_needed(q.points, idx.config.metric);
    for (std::size_t r = 0; r < q.points.size(); ++r) {
      if (o.point) {
        emit_row(os, r, *o.point, query_out_of_graph(idx, q.points[r], *o.point), cfg.angle);
        continue;
      }
      for (std::size_t j = 0; j < idx.point_count; ++j) {
        emit_row(os, r, j, query_out_of_graph(idx, q.points[r], j), cfg.angle);
      }
    }
  }
  sink.close();
  if (!o.dump.empty()) {
    DistanceMatrix m(idx.point_count, 0.0);
    for (std::size_t i = 0; i < idx.point_count; ++i) {
      for (std::size_t j = 0; j < idx.point_count; ++j) m(i, j) = query_in_pool(idx, i, j, &stats).angle_sum;
    }
    save_matrix(o.dump, m);
  }
  std::cerr << json{{"queries", stats.queries}, {"fallbacks", stats.fallbacks}}.dump() << '\n';
  return 0;
}

// ---- oracle / compare ------------------------------------------------------

struct OracleOptions {
  std::string in;
  std::size_t k = 8;
  std::string metric = "cosine";
  std::string dump;
};

inline int cmd_oracle(const OracleOptions& o) {
  auto emb = load_embeddings(o.in);
  if (emb.points.size() > kOracleMaxPoints) {
    throw SizeLimit("oracle: " + std::to_string(emb.points.size()) + " points exceeds the limit of " +
                    std::to_string(kOracleMaxPoints) + "; build a hierarchical index instead");
  }
  const auto kind = parse_metric(o.metric);
  const bool normalized = normalize_if_needed(emb.points, kind);
  const auto t = exact_geodesic(emb.points, o.k, kind);
  const auto comps = connected_components(t.source_graph);
  std::size_t unreachable = 0;
  double diameter = 0.0;
  for (double d : t.dist.data()) {
    if (std::isinf(d)) ++unreachable;
    else diameter = std::max(diameter, d);
  }
  if (!o.dump.empty()) save_matrix(o.dump, t.dist);
  json j;
  j["input"] = o.in;
  j["points"] = emb.points.size();
  j["k"] = o.k;
  j["metric"] = o.metric;
  j["normalized_input"] = normalized;
  j["edges"] = t.source_graph.edge_count();
  j["component_count"] = comps.component_count;
  j["unreachable_pairs"] = unreachable / 2;
  j["diameter"] = diameter;
  j["cross_check_max_diff"] = t.cross_check_max_diff;
  std::cout << j.dump(2) << '\n';
  return 0;
}

struct CompareOptions {
  std::string index;
  std::string oracle_dump;
};

inline int cmd_compare(const CompareOptions& o) {
  const auto idx = load_index(o.index);
  ExactGeodesicTable t{load_matrix(o.oracle_dump), KnnGraph{}, 0.0};
  if (t.dist.size() != idx.point_count) {
    throw CorruptInput("compare: oracle dump covers " + std::to_string(t.dist.size()) + " points, index has " +
                       std::to_string(idx.point_count));
  }
  const auto r = approximation_report(idx, t);
  json j;
  j["pairs"] = r.pairs;
  j["both_finite"] = r.both_finite;
  j["reachability_disagreements"] = r.reachability_disagreements;
  j["hierarchical_only_reachable"] = r.hier_only_reachable;
  j["exact_only_reachable"] = r.exact_only_reachable;
  j["fallbacks"] = r.fallbacks;
  j["abs_err_max"] = r.abs_err_max;
  j["abs_err_median"] = r.abs_err_median;
  j["rel_err_median"] = r.rel_err_median;
  j["rel_err_p90"] = r.rel_err_p90;
  j["rel_err_p99"] = r.rel_err_p99;
  j["rel_err_max"] = r.rel_err_max;
  j["signed_err_mean"] = r.signed_err_mean;
  j["spearman"] = r.spearman;
  std::cout << j.dump(2) << '\n';
  return 0;
}

// ---- simulate --------------------------------------------------------------

struct SimulateOptions {
  std::string a, b;
  PairedRollParams gen;
  std::size_t steps = 200;
  std::size_t batch = 32;
  std::string metric = "geodesic";
  std::string log;
  std::string summary;
  std::string checkpoint;
  bool no_timings = false;
};

inline json step_json(const StepRecord& r, bool timings) {
  json j;
  j["step"] = r.step;
  j["loss"] = r.loss;
  j["loss_ab"] = r.loss_ab;
  j["loss_ba"] = r.loss_ba;
  j["mean_rank"] = r.mean_rank;
  j["mean_rank_ab"] = r.mean_rank_ab;
  j["mean_rank_ba"] = r.mean_rank_ba;
  j["top1"] = r.top1;
  j["margin_p10"] = r.margin_p10;
  j["margin_p50"] = r.margin_p50;
  j["margin_p90"] = r.margin_p90;
  j["truncation_rate"] = r.truncation_rate;
  j["unreachable_rate"] = r.unreachable_rate;
  j["pool_filled"] = r.pool_filled;
  j["rebuilt"] = r.rebuilt;
  if (timings) {
    j["rebuild_seconds"] = r.rebuild_seconds;
    j["step_seconds"] = r.step_seconds;
  }
  return j;
}

inline int cmd_simulate(const SimulateOptions& o, const RunConfig& cfg) {
  PairedDatasets data;
  json source;
  if (!o.a.empty() || !o.b.empty()) {
    if (o.a.empty() || o.b.empty()) throw std::invalid_argument("simulate: --a and --b go together");
    data.a.points = load_embeddings(o.a).points;
    data.b.points = load_embeddings(o.b).points;
    if (data.a.points.size() != data.b.points.size()) {
      throw std::invalid_argument("simulate: modality files differ in row count");
    }
    for (std::size_t r = 0; r < data.a.points.size(); ++r) data.pairs.push_back(static_cast<std::uint32_t>(r));
    source = {{"a", o.a}, {"b", o.b}};
  } else {
    data = gen_paired_roll(o.gen);
    source = {{"generator", "paired-roll"}, {"n", o.gen.n},           {"seed", o.gen.seed},
              {"embed_dim", o.gen.embed_dim}, {"height", o.gen.height}, {"lift_radius", o.gen.lift_radius},
              {"warp", o.gen.warp},           {"pair_noise", o.gen.pair_noise}};
  }

  SimulationConfig sc;
  sc.steps = o.steps;
  sc.batch = o.batch;
  sc.capacity = cfg.capacity;
  sc.rebuild_period = cfg.rebuild_period;
  sc.seed = cfg.seed;
  sc.hierarchy = cfg.hierarchy;
  sc.angle = cfg.angle;
  sc.kind = parse_similarity_kind(o.metric);

  Sink log(o.log);
  const auto summary = run_simulation(
      data, sc, [&](const StepRecord& r) { log.out() << step_json(r, !o.no_timings).dump() << '\n'; },
      [&](const FeaturePool& pa, const FeaturePool& pb) {
        if (o.checkpoint.empty()) return;
        save_pool(o.checkpoint + ".a.geox", pa);
        save_pool(o.checkpoint + ".b.geox", pb);
      });
  log.close();

  json j;
  j["config"] = to_json(cfg, data.a.points.dim());
  j["source"] = source;
  j["steps"] = summary.steps;
  j["batch"] = o.batch;
  j["similarity"] = o.metric;
  j["rebuilds"] = summary.rebuilds;
  j["mean_rank"] = summary.mean_rank;
  j["mean_loss"] = summary.mean_loss;
  j["mean_top1"] = summary.mean_top1;
  if (o.summary.empty()) {
    std::cerr << j.dump() << '\n';
  } else {
    Sink s(o.summary);
    s.out() << j.dump(2) << '\n';
    s.close();
  }
  return 0;
}

// ---- check-bounds ----------------------------------------------------------

struct BoundsOptions {
  std::string in;
  std::vector<std::size_t> sigmas;
  std::size_t k_min = 1;
  std::size_t k_max = 16;
  std::string metric = "cosine";
  std::optional<std::size_t> clusters;
  std::optional<std::vector<std::size_t>> window;  // a, b
  std::uint64_t seed = 0;
  std::string out;
};

inline int cmd_check_bounds(const BoundsOptions& o) {
  auto emb = load_embeddings(o.in);
  const auto kind = parse_metric(o.metric);
  normalize_if_needed(emb.points, kind);
  PointSet nodes = emb.points;
  if (o.clusters) nodes = kmeans(emb.points, *o.clusters, 5, o.seed, kind).centers;
  std::vector<std::size_t> sigmas = o.sigmas;
  if (sigmas.empty()) {
    if (o.k_min > o.k_max) throw std::invalid_argument("check-bounds: --k-min exceeds --k-max");
    for (std::size_t k = o.k_min; k <= o.k_max; ++k) sigmas.push_back(k);
  }
  std::optional<std::pair<std::size_t, std::size_t>> window;
  if (o.window) {
    if (o.window->size() != 2) throw std::invalid_argument("check-bounds: --window takes a,b");
    window = std::pair{(*o.window)[0], (*o.window)[1]};
  }
  Sink sink(o.out);
  auto& os = sink.out();
  os << "sigma,nodes,min_degree,edges,components,theorem1_bound,theorem1_applicable,theorem1_pass";
  if (window) os << ",theorem2_applicable,theorem2_lower,theorem2_upper,theorem2_concise,theorem2_pass";
  os << '\n';
  for (const auto k : sigmas) {
    if (k >= nodes.size()) throw std::invalid_argument("check-bounds: sigma " + std::to_string(k) + " >= node count");
    const auto g = build_knn_graph(nodes, k, kind);
    const auto r = validate_bounds(g, window);
    os << k << ',' << r.node_count << ',' << r.min_degree << ',' << r.edge_count << ','
       << r.components.component_count << ',' << fmt(r.theorem1_bound) << ','
       << (r.theorem1_applicable ? "true" : "false") << ',' << (r.theorem1_pass ? "true" : "false");
    if (window) {
      os << ',' << (r.theorem2_applicable ? "true" : "false") << ',' << fmt(r.theorem2.lower) << ','
         << fmt(r.theorem2.upper) << ',' << fmt(r.theorem2.upper_concise) << ','
         << (r.theorem2_lower_pass && r.theorem2_upper_pass && r.theorem2_concise_pass ? "true" : "false");
    }
    os << '\n';
  }
  sink.close();
  return 0;
}

// ---- bench -----------------------------------------------------------------

struct BenchOptions {
  std::vector<std::size_t> sizes{512, 1024, 2048};
  std::size_t dim = 16;
  std::size_t queries = 100000;
  std::string out;
};

inline int cmd_bench(const BenchOptions& o, const RunConfig& cfg) {
  using clock = std::chrono::steady_clock;
  auto secs = [](clock::time_point a) { return std::chrono::duration<double>(clock::now() - a).count(); };
  Sink sink(o.out);
  auto& os = sink.out();
  os << "size,centers,build_seconds,floyd_seconds,query_pairs_per_second,insert_vectors_per_second,"
        "rebuild_seconds,oracle_seconds\n";
  for (const auto n : o.sizes) {
    if (n < 16) throw std::invalid_argument("bench: sizes must be >= 16");
    if (o.dim < 3) throw std::invalid_argument("bench: dim must be >= 3");
    auto ds = lift_to_sphere(gen_swiss_roll(n, 0.0, cfg.seed, o.dim - 1), 30.0);
    HierarchyConfig hc = cfg.hierarchy;
    hc.metric = MetricKind::Cosine;
    hc.clusters_per_node = std::min(hc.clusters_per_node, n);

    auto t = clock::now();
    const auto idx = build_index(ds.points, hc, cfg.seed);
    const double build_s = secs(t);

    const auto g = build_knn_graph(ds.points, std::min(hc.neighbors, n - 1), hc.metric);
    t = clock::now();
    const auto apsp = floyd_apsp(g);
    const double floyd_s = secs(t);

    CounterRng rng(cfg.seed, 0x62656e63);
    double sink_sum = 0.0;
    t = clock::now();
    for (std::size_t q = 0; q < o.queries; ++q) {
      sink_sum += query_in_pool(idx, rng.below(n), rng.below(n)).angle_sum;
    }
    const double query_rate = static_cast<double>(o.queries) / secs(t);

    PoolConfig pc;
    pc.capacity = n;
    pc.dim = ds.points.dim();
    pc.rebuild_period = 1;
    pc.seed = cfg.seed;
    pc.hierarchy = hc;
    FeaturePool pool(pc);
    pool.insert_batch(ds.points);
    t = clock::now();
    (void)pool.maybe_rebuild();
    const double rebuild_s = secs(t);
    std::size_t inserted = 0;
    t = clock::now();
    for (std::size_t start = 0; start + 32 <= n; start += 32) {
      std::vector<std::uint32_t> rows(32);
      for (std::size_t r = 0; r < 32; ++r) rows[r] = static_cast<std::uint32_t>(start + r);
      pool.insert_batch(ds.points.subset(rows));
      inserted += 32;
    }
    const double insert_rate = static_cast<double>(inserted) / secs(t);

    std::string oracle_s;
    if (n <= kOracleMaxPoints) {
      t = clock::now();
      (void)exact_geodesic(ds.points, std::min(hc.neighbors, n - 1), hc.metric);
      oracle_s = fmt(secs(t));
    }
    os << n << ',' << idx.layers.front().centers.size() << ',' << fmt(build_s) << ',' << fmt(floyd_s) << ','
       << fmt(query_rate) << ',' << fmt(insert_rate) << ',' << fmt(rebuild_s) << ',' << oracle_s << '\n';
    if (sink_sum < 0.0 || apsp.size() != n) std::cerr << "unexpected bench state\n";
  }
  sink.close();
  return 0;
}

inline void set_threads(std::optional<std::size_t> threads) {
  if (!threads) {
    if (const char* env = std::getenv("GEODIST_THREADS"); env && *env) threads = parse_count("GEODIST_THREADS", env);
  }
  if (threads) {
    if (*threads == 0) throw std::invalid_argument("--threads must be >= 1");
    omp_set_num_threads(static_cast<int>(*threads));
  }
}

}  // namespace geodist::cli

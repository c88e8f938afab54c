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

#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"

namespace {

using namespace geodist;
using namespace geodist::cli;

enum ExitCode : int { kOk = 0, kIo = 1, kUsage = 2, kCorrupt = 3, kBadQuery = 4, kSizeLimit = 5 };

// Hierarchy / pool / normalization flags shared by several subcommands.
void add_run_flags(CLI::App* app, RunOverrides& o, bool trivial_metric_flag = true) {
  app->add_option("--layers", o.layers, "hierarchy depth");
  app->add_option("--clusters", o.clusters, "clusters per node");
  app->add_option("--kmeans-iters", o.kmeans_iters, "Lloyd iterations");
  app->add_option("--neighbors", o.neighbors, "center graph neighbours (sigma)");
  app->add_option("--leaf-threshold", o.leaf_threshold, "clusters at or below this size are not split");
  app->add_option(trivial_metric_flag ? "--metric" : "--trivial-metric", o.metric, "trivial metric")
      ->check(CLI::IsMember({"cosine", "euclidean"}));
  app->add_option("--center-mode", o.center_mode, "cluster centers")->check(CLI::IsMember({"mean", "medoid"}));
  app->add_option("--capacity", o.capacity, "pool capacity");
  app->add_option("--rebuild-period", o.rebuild_period, "steps between index rebuilds");
  app->add_option("--max-angle", o.max_angle, "truncation angle for similarity");
  app->add_option("--temperature", o.temperature, "InfoNCE temperature");
  app->add_option("--unreachable", o.unreachable, "unreachable pool entries")->check(CLI::IsMember({"min", "exclude"}));
  app->add_option("--delta", o.delta, "simple-manifold threshold");
  app->add_option("--seed", o.seed, "random seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical geodesic distances over feature pools"};
  app.require_subcommand(1);
  std::optional<std::size_t> threads;
  std::string config_path;
  app.add_option("--threads", threads, "worker threads (default: GEODIST_THREADS or all cores)");
  app.add_option("--config", config_path, "key = value settings file");

  RunOverrides run;

  GenOptions gen;
  auto* g = app.add_subcommand("gen", "generate a synthetic dataset");
  g->add_option("kind", gen.kind, "swiss-roll | sphere-blobs | paired")
      ->required()
      ->check(CLI::IsMember({"swiss-roll", "sphere-blobs", "paired"}));
  g->add_option("--n", gen.n, "point count");
  g->add_option("--seed", gen.seed, "random seed");
  g->add_option("--noise", gen.noise, "ambient Gaussian noise");
  g->add_option("--dim", gen.dim, "embedding dimension");
  g->add_option("--height", gen.height, "roll height");
  g->add_option("--lift", gen.lift, "lift onto the unit sphere with this radius");
  g->add_option("--blobs", gen.blobs, "blob count");
  g->add_option("--per-blob", gen.per_blob, "points per blob");
  g->add_option("--spread", gen.spread, "blob spread");
  g->add_option("--warp", gen.warp, "paired: arc-length slide of the second modality");
  g->add_option("--pair-noise", gen.pair_noise, "paired: noise on the second modality");
  g->add_option("--out", gen.out, "output embedding file")->required();
  g->add_option("--out-b", gen.out_b, "paired: second modality file");
  g->add_option("--csv", gen.csv, "also write points as CSV");

  BuildOptions build;
  auto* b = app.add_subcommand("build", "build a hierarchical index");
  b->add_option("--in", build.in, "embedding file")->required();
  b->add_option("--out", build.out, "index file")->required();
  add_run_flags(b, run);

  QueryOptions query;
  auto* q = app.add_subcommand("query", "query distances from an index");
  q->add_option("--index", query.index, "index file")->required();
  q->add_option("--pairs", query.pairs, "point pairs i,j");
  q->add_flag("--all", query.all, "every ordered pair");
  q->add_option("--out-of-graph", query.out_of_graph, "embedding file of outside vectors");
  q->add_option("--point", query.point, "with --out-of-graph: only this pool point");
  q->add_option("--dump", query.dump, "write the full distance matrix (f64)");
  q->add_option("--out", query.out, "CSV output (default stdout)");
  q->add_option("--max-angle", run.max_angle, "truncation angle for similarity");

  OracleOptions oracle;
  auto* o = app.add_subcommand("oracle", "exact graph geodesics over all points");
  o->add_option("--in", oracle.in, "embedding file")->required();
  o->add_option("--k", oracle.k, "neighbours per point");
  o->add_option("--metric", oracle.metric, "trivial metric")->check(CLI::IsMember({"cosine", "euclidean"}));
  o->add_option("--dump", oracle.dump, "write the distance matrix (f64)");

  CompareOptions compare;
  auto* c = app.add_subcommand("compare", "hierarchical vs exact distances");
  c->add_option("--index", compare.index, "index file")->required();
  c->add_option("--oracle-dump", compare.oracle_dump, "matrix written by oracle --dump")->required();

  SimulateOptions sim;
  auto* s = app.add_subcommand("simulate", "contrastive mining loop over a paired dataset");
  s->add_option("--a", sim.a, "first modality embeddings");
  s->add_option("--b", sim.b, "second modality embeddings");
  s->add_option("--n", sim.gen.n, "generated pairs");
  s->add_option("--data-seed", sim.gen.seed, "generator seed");
  s->add_option("--warp", sim.gen.warp, "generator warp");
  s->add_option("--pair-noise", sim.gen.pair_noise, "generator pair noise");
  s->add_option("--steps", sim.steps, "training steps");
  s->add_option("--batch", sim.batch, "batch size");
  s->add_option("--metric", sim.metric, "similarity used for mining")->check(CLI::IsMember({"geodesic", "cosine"}));
  s->add_option("--log", sim.log, "JSONL step log (default stdout)");
  s->add_option("--summary", sim.summary, "summary JSON (default stderr)");
  s->add_option("--checkpoint", sim.checkpoint, "write final pools to PREFIX.a.geox / PREFIX.b.geox");
  s->add_flag("--no-timings", sim.no_timings, "omit wall-clock fields from the log");
  add_run_flags(s, run, false);

  BoundsOptions bounds;
  auto* k = app.add_subcommand("check-bounds", "component-count bounds over a sweep of sigma");
  k->add_option("--in", bounds.in, "embedding file")->required();
  k->add_option("--k", bounds.sigmas, "explicit sigma values");
  k->add_option("--k-min", bounds.k_min, "sweep start");
  k->add_option("--k-max", bounds.k_max, "sweep end");
  k->add_option("--metric", bounds.metric, "trivial metric")->check(CLI::IsMember({"cosine", "euclidean"}));
  k->add_option("--clusters", bounds.clusters, "sweep over k-means centers instead of raw points");
  k->add_option("--window", bounds.window, "component size window a,b")->delimiter(',')->expected(2);
  k->add_option("--seed", bounds.seed, "k-means seed");
  k->add_option("--out", bounds.out, "CSV output (default stdout)");

  BenchOptions bench;
  auto* be = app.add_subcommand("bench", "timing table across pool sizes");
  be->add_option("--sizes", bench.sizes, "pool sizes")->delimiter(',');
  be->add_option("--dim", bench.dim, "feature dimension");
  be->add_option("--queries", bench.queries, "pair queries per size");
  be->add_option("--out", bench.out, "CSV output (default stdout)");
  add_run_flags(be, run);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    set_threads(threads);
    RunConfig cfg;
    if (!config_path.empty()) load_config_file(cfg, config_path);
    apply_overrides(cfg, run);
    cfg.hierarchy.validate();
    cfg.angle.validate();

    if (*g) return cmd_gen(gen);
    if (*b) return cmd_build(build, cfg);
    if (*q) return cmd_query(query, cfg);
    if (*o) return cmd_oracle(oracle);
    if (*c) return cmd_compare(compare);
    if (*s) return cmd_simulate(sim, cfg);
    if (*k) return cmd_check_bounds(bounds);
    if (*be) return cmd_bench(bench, cfg);
  } catch (const CorruptInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kCorrupt;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const BadQuery& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadQuery;
  } catch (const SizeLimit& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSizeLimit;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  }
  return kUsage;
}

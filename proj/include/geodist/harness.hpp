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
#include <chrono>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "geodist/pool.hpp"
#include "geodist/rng.hpp"
#include "geodist/similarity.hpp"
#include "geodist/stats.hpp"
#include "geodist/synth.hpp"

namespace geodist {

struct SimulationConfig {
  std::size_t steps = 200;
  std::size_t batch = 32;
  std::size_t capacity = 2048;
  std::size_t rebuild_period = 100;
  std::uint64_t seed = 0;
  HierarchyConfig hierarchy;
  AngleNormConfig angle;
  SimilarityKind kind = SimilarityKind::Geodesic;

  void validate() const {
    if (steps == 0) throw std::invalid_argument("simulate: steps must be >= 1");
    if (batch == 0) throw std::invalid_argument("simulate: batch must be >= 1");
    if (batch > capacity) throw std::invalid_argument("simulate: batch exceeds pool capacity");
    if (rebuild_period == 0) throw std::invalid_argument("simulate: rebuild period must be >= 1");
    hierarchy.validate();
    angle.validate();
  }
};

struct StepRecord {
  std::size_t step = 0;  // 1-based training step t
  double loss = 0.0;     // mean of both directions
  double loss_ab = 0.0;
  double loss_ba = 0.0;
  double mean_rank = 0.0;
  double mean_rank_ab = 0.0;
  double mean_rank_ba = 0.0;
  double top1 = 0.0;
  double margin_p10 = 0.0;
  double margin_p50 = 0.0;
  double margin_p90 = 0.0;
  double truncation_rate = 0.0;
  double unreachable_rate = 0.0;
  std::size_t pool_filled = 0;
  bool rebuilt = false;
  double rebuild_seconds = 0.0;
  double step_seconds = 0.0;
};

struct SimulationSummary {
  std::size_t steps = 0;
  std::size_t rebuilds = 0;
  double mean_rank = 0.0;
  double mean_loss = 0.0;
  double mean_top1 = 0.0;
};

// Row order for the batches: consecutive Fisher-Yates permutations of the
// dataset, one per pass.
class BatchStream {
 public:
  BatchStream(std::size_t rows, std::uint64_t seed) : rows_(rows), seed_(seed) {
    if (rows == 0) throw std::invalid_argument("BatchStream: empty dataset");
  }

  std::vector<std::uint32_t> next(std::size_t b) {
    std::vector<std::uint32_t> out;
    out.reserve(b);
    while (out.size() < b) {
      if (pos_ == order_.size()) reshuffle();
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    order_.resize(rows_);
    std::iota(order_.begin(), order_.end(), 0u);
    CounterRng rng(CounterRng::derive(seed_, pass_++), 0);
    for (std::size_t i = rows_; i > 1; --i) std::swap(order_[i - 1], order_[rng.below(i)]);
    pos_ = 0;
  }

  std::size_t rows_;
  std::uint64_t seed_;
  std::uint64_t pass_ = 0;
  std::vector<std::uint32_t> order_;
  std::size_t pos_ = 0;
};

// Loss-evaluation loop over a paired dataset. Momentum features are the
// batch features themselves (no encoder exists to lag behind).
inline SimulationSummary run_simulation(const PairedDatasets& data, const SimulationConfig& cfg,
                                        const std::function<void(const StepRecord&)>& on_step = {},
                                        const std::function<void(const FeaturePool&, const FeaturePool&)>& on_finish = {}) {
  cfg.validate();
  const auto& a = data.a.points;
  const auto& b = data.b.points;
  if (a.size() != b.size() || a.dim() != b.dim()) throw std::invalid_argument("simulate: modalities do not align");
  if (data.pairs.size() != a.size()) throw std::invalid_argument("simulate: pair table size mismatch");

  auto pool_config = [&](std::uint64_t tag) {
    PoolConfig pc;
    pc.capacity = cfg.capacity;
    pc.dim = a.dim();
    pc.rebuild_period = cfg.rebuild_period;
    pc.seed = CounterRng::derive(cfg.seed, tag);
    pc.hierarchy = cfg.hierarchy;
    return pc;
  };
  FeaturePool pool_a(pool_config(0x61));
  FeaturePool pool_b(pool_config(0x62));
  BatchStream stream(a.size(), CounterRng::derive(cfg.seed, 0x62617463));

  using clock = std::chrono::steady_clock;
  SimulationSummary sum;
  for (std::size_t t = 1; t <= cfg.steps; ++t) {
    StepRecord rec;
    rec.step = t;
    const auto t0 = clock::now();
    const bool ra = pool_a.maybe_rebuild() != nullptr;
    const bool rb = pool_b.maybe_rebuild() != nullptr;
    const auto t1 = clock::now();
    rec.rebuilt = ra || rb;
    rec.rebuild_seconds = std::chrono::duration<double>(t1 - t0).count();
    sum.rebuilds += rec.rebuilt ? 1 : 0;

    const auto rows = stream.next(cfg.batch);
    std::vector<std::uint32_t> partner(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) partner[r] = data.pairs[rows[r]];
    const PointSet batch_a = a.subset(rows);
    const PointSet batch_b = b.subset(partner);
    const auto rep = contrastive_step(pool_a, pool_b, batch_a, batch_b, batch_a, batch_b, cfg.angle, cfg.kind);
    rec.step_seconds = std::chrono::duration<double>(clock::now() - t0).count();

    rec.loss_ab = rep.a_to_b.info_nce;
    rec.loss_ba = rep.b_to_a.info_nce;
    rec.loss = 0.5 * (rec.loss_ab + rec.loss_ba);
    rec.mean_rank_ab = rep.mining_a_to_b.mean_rank;
    rec.mean_rank_ba = rep.mining_b_to_a.mean_rank;
    rec.mean_rank = 0.5 * (rec.mean_rank_ab + rec.mean_rank_ba);
    rec.top1 = 0.5 * (rep.mining_a_to_b.top1_rate + rep.mining_b_to_a.top1_rate);
    std::vector<double> margins = rep.mining_a_to_b.margins;
    margins.insert(margins.end(), rep.mining_b_to_a.margins.begin(), rep.mining_b_to_a.margins.end());
    if (!margins.empty()) {
      rec.margin_p10 = quantile(margins, 0.1);
      rec.margin_p50 = quantile(margins, 0.5);
      rec.margin_p90 = quantile(margins, 0.9);
    }
    if (rep.compared > 0) {
      rec.truncation_rate = static_cast<double>(rep.truncated) / static_cast<double>(rep.compared);
      rec.unreachable_rate = static_cast<double>(rep.unreachable) / static_cast<double>(rep.compared);
    }
    rec.pool_filled = pool_b.filled();

    sum.mean_rank += rec.mean_rank;
    sum.mean_loss += rec.loss;
    sum.mean_top1 += rec.top1;
    ++sum.steps;
    if (on_step) on_step(rec);
  }
  if (on_finish) on_finish(pool_a, pool_b);
  const double s = static_cast<double>(sum.steps);
  sum.mean_rank /= s;
  sum.mean_loss /= s;
  sum.mean_top1 /= s;
  return sum;
}

}  // namespace geodist

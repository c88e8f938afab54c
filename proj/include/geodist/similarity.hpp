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
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "geodist/common.hpp"
#include "geodist/hierarchy.hpp"
#include "geodist/metrics.hpp"
#include "geodist/pool.hpp"

namespace geodist {

enum class UnreachablePolicy : std::uint8_t {
  MinSimilarity,  // unreachable columns score -1
  Exclude,        // unreachable negatives are dropped from the softmax
};

enum class SimilarityKind : std::uint8_t {
  Geodesic,
  Cosine,  // plain cosine baseline, ignores the index
};

inline SimilarityKind parse_similarity_kind(std::string_view s) {
  if (s == "geodesic") return SimilarityKind::Geodesic;
  if (s == "cosine") return SimilarityKind::Cosine;
  throw std::invalid_argument("unknown similarity metric '" + std::string(s) + "'");
}

struct AngleNormConfig {
  double max_angle = 4.0 * std::numbers::pi;
  double temperature = 0.07;
  UnreachablePolicy unreachable = UnreachablePolicy::MinSimilarity;

  void validate() const {
    if (!(max_angle > 0.0) || !std::isfinite(max_angle)) {
      throw std::invalid_argument("AngleNormConfig: max_angle must be positive");
    }
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
      throw std::invalid_argument("AngleNormConfig: temperature must be positive");
    }
  }
};

// cos(min(angle, max) * pi / max), evaluated as sin((1/2 - f) * pi) so the
// endpoints and the midpoint land exactly on 1, 0 and -1.
inline double angle_normalize(const GeodesicResult& g, const AngleNormConfig& cfg) {
  if (!g.reachable || g.angle_sum == kInfinity) return -1.0;
  const double f = std::min(std::max(g.angle_sum, 0.0), cfg.max_angle) / cfg.max_angle;
  return std::sin((0.5 - f) * std::numbers::pi);
}

struct SimilarityMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;        // rows x cols in [-1, 1]
  std::vector<std::uint8_t> masked;  // rows x cols, 1 = excluded column (empty when none)
  std::vector<std::uint32_t> labels;  // positive column per row
  std::size_t truncated = 0;          // finite paths clipped at max_angle
  std::size_t unreachable = 0;

  double operator()(std::size_t r, std::size_t c) const noexcept { return values[r * cols + c]; }
  bool is_masked(std::size_t r, std::size_t c) const noexcept { return !masked.empty() && masked[r * cols + c]; }
};

// Angle-normalized similarity of every batch row to every filled pool slot.
inline SimilarityMatrix batch_similarity(const FeaturePool& pool, const PointSet& batch, const AngleNormConfig& cfg) {
  cfg.validate();
  if (batch.dim() != pool.dim()) {
    throw std::invalid_argument("batch_similarity: batch dim " + std::to_string(batch.dim()) + " != pool dim " +
                                std::to_string(pool.dim()));
  }
  SimilarityMatrix sm;
  sm.rows = batch.size();
  sm.cols = pool.filled();
  sm.values.assign(sm.rows * sm.cols, -1.0);
  if (cfg.unreachable == UnreachablePolicy::Exclude) sm.masked.assign(sm.rows * sm.cols, 0);
  if (sm.cols == 0) return sm;
  const auto& idx = *pool.index();
  const bool cosine = pool.config().hierarchy.metric == MetricKind::Cosine;
  for (std::size_t r = 0; r < sm.rows; ++r) {
    const FeatureVector x = cosine ? normalize(batch[r]) : FeatureVector(batch[r].begin(), batch[r].end());
    const auto near = nearest_bottom_center(idx, x);
    for (std::size_t m = 0; m < sm.cols; ++m) {
      const auto g = GeodesicResult::of(near.distance + pool.aux().d_o_row(m)[near.center]);
      if (!g.reachable) {
        ++sm.unreachable;
        if (!sm.masked.empty()) sm.masked[r * sm.cols + m] = 1;
      } else if (g.angle_sum > cfg.max_angle) {
        ++sm.truncated;
      }
      sm.values[r * sm.cols + m] = angle_normalize(g, cfg);
    }
  }
  return sm;
}

// Plain cosine similarity between batch rows and pool slots.
inline SimilarityMatrix cosine_similarity(const FeaturePool& pool, const PointSet& batch) {
  if (batch.dim() != pool.dim()) throw std::invalid_argument("cosine_similarity: dimension mismatch");
  SimilarityMatrix sm;
  sm.rows = batch.size();
  sm.cols = pool.filled();
  sm.values.assign(sm.rows * sm.cols, 0.0);
  for (std::size_t r = 0; r < sm.rows; ++r) {
    const FeatureVector x = normalize(batch[r]);
    for (std::size_t m = 0; m < sm.cols; ++m) {
      const double angle = detail::angular_unchecked(x, pool.row(m));
      sm.values[r * sm.cols + m] = std::cos(angle);
    }
  }
  return sm;
}

struct LossReport {
  double info_nce = 0.0;
  std::vector<std::size_t> per_row_rank_of_positive;
};

// Rank of the positive: 1 + number of unmasked columns scoring strictly higher.
inline std::size_t positive_rank(const SimilarityMatrix& sm, std::size_t r) {
  const std::size_t label = sm.labels.at(r);
  const double pos = sm(r, label);
  std::size_t rank = 1;
  for (std::size_t m = 0; m < sm.cols; ++m) {
    if (m == label || sm.is_masked(r, m)) continue;
    if (sm(r, m) > pos) ++rank;
  }
  return rank;
}

// Mean over rows of -log softmax(v / tau)[label]. The positive column is
// never masked.
inline LossReport info_nce(const SimilarityMatrix& sm, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("info_nce: temperature must be positive");
  if (sm.labels.size() != sm.rows) throw std::invalid_argument("info_nce: labels missing");
  LossReport rep;
  double total = 0.0;
  for (std::size_t r = 0; r < sm.rows; ++r) {
    const std::size_t label = sm.labels[r];
    if (label >= sm.cols) throw std::out_of_range("info_nce: label outside the pool");
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < sm.cols; ++m) {
      if (m != label && sm.is_masked(r, m)) continue;
      mx = std::max(mx, sm(r, m) / temperature);
    }
    double acc = 0.0;
    for (std::size_t m = 0; m < sm.cols; ++m) {
      if (m != label && sm.is_masked(r, m)) continue;
      acc += std::exp(sm(r, m) / temperature - mx);
    }
    const double lse = mx + std::log(acc);
    total += lse - sm(r, label) / temperature;
    rep.per_row_rank_of_positive.push_back(positive_rank(sm, r));
  }
  rep.info_nce = sm.rows == 0 ? 0.0 : total / static_cast<double>(sm.rows);
  return rep;
}

struct MiningStats {
  std::vector<std::size_t> ranks;
  std::vector<double> margins;  // positive minus hardest negative; rows without negatives are skipped
  double mean_rank = 0.0;
  double top1_rate = 0.0;
};

inline MiningStats mining_quality(const SimilarityMatrix& sm) {
  if (sm.labels.size() != sm.rows) throw std::invalid_argument("mining_quality: labels missing");
  MiningStats st;
  double rank_sum = 0.0;
  std::size_t top1 = 0;
  for (std::size_t r = 0; r < sm.rows; ++r) {
    const std::size_t label = sm.labels[r];
    const auto rank = positive_rank(sm, r);
    st.ranks.push_back(rank);
    rank_sum += static_cast<double>(rank);
    top1 += rank == 1 ? 1 : 0;
    double hardest = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t m = 0; m < sm.cols; ++m) {
      if (m == label || sm.is_masked(r, m)) continue;
      hardest = std::max(hardest, sm(r, m));
      any = true;
    }
    if (any) st.margins.push_back(sm(r, label) - hardest);
  }
  if (sm.rows > 0) {
    st.mean_rank = rank_sum / static_cast<double>(sm.rows);
    st.top1_rate = static_cast<double>(top1) / static_cast<double>(sm.rows);
  }
  return st;
}

struct StepReport {
  LossReport a_to_b;
  LossReport b_to_a;
  MiningStats mining_a_to_b;
  MiningStats mining_b_to_a;
  InsertReceipt receipt_a;
  InsertReceipt receipt_b;
  std::size_t truncated = 0;
  std::size_t unreachable = 0;
  std::size_t compared = 0;
};

// One loss evaluation: momentum features enter their pools first, then each
// modality's batch is scored against the other modality's updated pool with
// labels taken from the insertion positions of the matched momentum rows.
inline StepReport contrastive_step(FeaturePool& pool_a, FeaturePool& pool_b, const PointSet& batch_a,
                                   const PointSet& batch_b, const PointSet& momentum_a, const PointSet& momentum_b,
                                   const AngleNormConfig& cfg, SimilarityKind kind = SimilarityKind::Geodesic) {
  const std::size_t b = batch_a.size();
  if (batch_b.size() != b || momentum_a.size() != b || momentum_b.size() != b) {
    throw std::invalid_argument("contrastive_step: batch size mismatch");
  }
  StepReport rep;
  rep.receipt_b = pool_b.insert_batch(momentum_b);
  rep.receipt_a = pool_a.insert_batch(momentum_a);

  auto score = [&](const FeaturePool& pool, const PointSet& batch, const InsertReceipt& receipt) {
    SimilarityMatrix sm = kind == SimilarityKind::Geodesic ? batch_similarity(pool, batch, cfg)
                                                           : cosine_similarity(pool, batch);
    sm.labels.resize(b);
    for (std::size_t r = 0; r < b; ++r) {
      sm.labels[r] = static_cast<std::uint32_t>(receipt.positions[r]);
      if (!sm.masked.empty()) sm.masked[r * sm.cols + sm.labels[r]] = 0;
    }
    rep.truncated += sm.truncated;
    rep.unreachable += sm.unreachable;
    rep.compared += sm.rows * sm.cols;
    return sm;
  };

  const auto ab = score(pool_b, batch_a, rep.receipt_b);
  const auto ba = score(pool_a, batch_b, rep.receipt_a);
  rep.a_to_b = info_nce(ab, cfg.temperature);
  rep.b_to_a = info_nce(ba, cfg.temperature);
  rep.mining_a_to_b = mining_quality(ab);
  rep.mining_b_to_a = mining_quality(ba);
  return rep;
}

}  // namespace geodist

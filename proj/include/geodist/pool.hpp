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
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "geodist/common.hpp"
#include "geodist/hierarchy.hpp"
#include "geodist/metrics.hpp"
#include "geodist/rng.hpp"

namespace geodist {

struct PoolConfig {
  std::size_t capacity = 65536;
  std::size_t dim = 0;
  std::size_t rebuild_period = 100;  // T0
  std::uint64_t seed = 0;
  HierarchyConfig hierarchy;

  void validate() const {
    if (capacity == 0) throw std::invalid_argument("PoolConfig: capacity must be >= 1");
    if (dim == 0) throw std::invalid_argument("PoolConfig: dim must be >= 1");
    if (rebuild_period == 0) throw std::invalid_argument("PoolConfig: rebuild_period must be >= 1");
    hierarchy.validate();
  }
};

// Per-slot state aligned with the pool's ring buffer.
struct AuxQueues {
  std::vector<std::uint32_t> bottom_center_index;  // K
  std::vector<double> bottom_center_dist;
  std::vector<double> d_o;                         // capacity x bottom_count
  std::size_t bottom_count = 0;

  std::span<const double> d_o_row(std::size_t slot) const noexcept {
    return {d_o.data() + slot * bottom_count, bottom_count};
  }
  std::span<double> d_o_row(std::size_t slot) noexcept { return {d_o.data() + slot * bottom_count, bottom_count}; }

  friend bool operator==(const AuxQueues&, const AuxQueues&) = default;
};

struct InsertReceipt {
  std::vector<std::size_t> positions;
};

struct PoolEntry {
  std::size_t slot;
  FeatureVector vector;
  std::uint64_t age;  // inserts since this slot was written; oldest first in snapshots
};

// Fixed-capacity FIFO of feature vectors with an attached hierarchical
// index. Between scheduled rebuilds inserted vectors only attach to their
// nearest bottom center; the index itself stays frozen. Until the pool
// holds clusters_per_node vectors every insert refreshes a flat index over
// whatever is present.
//
// Single writer: insert_batch / maybe_rebuild need exclusive access, reads
// may run concurrently between mutations.
class FeaturePool {
 public:
  explicit FeaturePool(PoolConfig config) : config_(std::move(config)) {
    config_.validate();
    storage_ = PointSet(config_.capacity, config_.dim);
    sequence_.assign(config_.capacity, 0);
    aux_.bottom_center_index.assign(config_.capacity, 0);
    aux_.bottom_center_dist.assign(config_.capacity, 0.0);
  }

  const PoolConfig& config() const noexcept { return config_; }
  std::size_t capacity() const noexcept { return config_.capacity; }
  std::size_t dim() const noexcept { return config_.dim; }
  std::size_t filled() const noexcept { return filled_; }
  std::size_t cursor() const noexcept { return cursor_; }
  std::uint64_t epoch() const noexcept { return epoch_; }
  std::uint64_t rebuild_count() const noexcept { return rebuild_count_; }
  std::uint64_t total_inserted() const noexcept { return total_inserted_; }
  std::size_t slots_since_rebuild() const noexcept { return slots_since_rebuild_; }
  bool warming_up() const noexcept { return !index_ || index_->point_count < config_.hierarchy.clusters_per_node; }

  std::span<const double> row(std::size_t slot) const noexcept { return storage_[slot]; }
  const AuxQueues& aux() const noexcept { return aux_; }
  const std::shared_ptr<const HierarchicalIndex>& index() const noexcept { return index_; }

  InsertReceipt insert_batch(const PointSet& batch) {
    if (batch.empty()) return {};
    if (batch.dim() != config_.dim) {
      throw std::invalid_argument("insert_batch: dim " + std::to_string(batch.dim()) + " != pool dim " +
                                  std::to_string(config_.dim));
    }
    if (batch.size() > config_.capacity) throw std::invalid_argument("insert_batch: batch exceeds capacity");
    const bool refresh_after = warming_up();
    InsertReceipt receipt;
    receipt.positions.reserve(batch.size());
    for (std::size_t r = 0; r < batch.size(); ++r) {
      const std::size_t slot = cursor_;
      write_slot(slot, batch[r]);
      if (!refresh_after) attach(slot);
      receipt.positions.push_back(slot);
      cursor_ = (cursor_ + 1) % config_.capacity;
      filled_ = std::min(filled_ + 1, config_.capacity);
      ++slots_since_rebuild_;
    }
    if (refresh_after) refresh(CounterRng::derive(config_.seed, 0x7761726d, total_inserted_));
    return receipt;
  }

  // Advances the step counter; every rebuild_period steps rebuilds the
  // index over the current contents and returns it.
  std::shared_ptr<const HierarchicalIndex> maybe_rebuild() {
    ++epoch_;
    if (epoch_ % config_.rebuild_period != 0 || filled_ == 0) return nullptr;
    refresh(CounterRng::derive(config_.seed, 0x72626c64, rebuild_count_));
    ++rebuild_count_;
    return index_;
  }

  std::vector<PoolEntry> snapshot() const {
    std::vector<PoolEntry> out;
    out.reserve(filled_);
    const std::size_t start = filled_ < config_.capacity ? 0 : cursor_;
    for (std::size_t n = 0; n < filled_; ++n) {
      const std::size_t slot = (start + n) % config_.capacity;
      auto r = storage_[slot];
      out.push_back({slot, FeatureVector(r.begin(), r.end()), total_inserted_ - sequence_[slot] - 1});
    }
    return out;
  }

  // d(x, C_near(x)) + D_o[slot][C_near(x)] against the current index.
  GeodesicResult query(std::span<const double> x, std::size_t slot) const {
    if (slot >= filled_) throw BadQuery("FeaturePool::query: slot " + std::to_string(slot) + " is empty");
    const auto near = nearest_bottom_center(*index_, x);
    return GeodesicResult::of(near.distance + aux_.d_o_row(slot)[near.center]);
  }

  // Every filled slot satisfies D_o[s][b] == dist[s] + bottom_apsp[K[s]][b] bit-for-bit.
  bool aux_consistent(std::string* why = nullptr) const {
    if (filled_ == 0) return true;
    if (!index_ || aux_.bottom_count != index_->bottom_count()) {
      if (why) *why = "aux queues not sized to the current index";
      return false;
    }
    for (std::size_t s = 0; s < filled_; ++s) {
      const auto k = aux_.bottom_center_index[s];
      const auto apsp = index_->bottom_apsp.row(k);
      const auto row = aux_.d_o_row(s);
      if (row[k] != aux_.bottom_center_dist[s]) {
        if (why) *why = "slot " + std::to_string(s) + ": D_o at own center differs from bottom distance";
        return false;
      }
      for (std::size_t b = 0; b < aux_.bottom_count; ++b) {
        if (row[b] != aux_.bottom_center_dist[s] + apsp[b]) {
          if (why) *why = "slot " + std::to_string(s) + ", center " + std::to_string(b) + ": decomposition mismatch";
          return false;
        }
      }
    }
    return true;
  }

  // Restores a pool from serialized state; used by the container reader.
  static FeaturePool restore(PoolConfig config, PointSet storage, std::vector<std::uint64_t> sequence,
                             AuxQueues aux, std::size_t cursor, std::size_t filled, std::uint64_t epoch,
                             std::uint64_t rebuild_count, std::uint64_t total_inserted,
                             std::size_t slots_since_rebuild, std::shared_ptr<const HierarchicalIndex> index) {
    FeaturePool pool(std::move(config));
    if (storage.size() != pool.capacity() || storage.dim() != pool.dim() || sequence.size() != pool.capacity() ||
        cursor >= pool.capacity() || filled > pool.capacity()) {
      throw CorruptInput("pool state does not match its configuration");
    }
    pool.storage_ = std::move(storage);
    pool.sequence_ = std::move(sequence);
    pool.aux_ = std::move(aux);
    pool.cursor_ = cursor;
    pool.filled_ = filled;
    pool.epoch_ = epoch;
    pool.rebuild_count_ = rebuild_count;
    pool.total_inserted_ = total_inserted;
    pool.slots_since_rebuild_ = slots_since_rebuild;
    pool.index_ = std::move(index);
    return pool;
  }

  const PointSet& storage() const noexcept { return storage_; }
  const std::vector<std::uint64_t>& sequence() const noexcept { return sequence_; }

 private:
  void write_slot(std::size_t slot, std::span<const double> v) {
    auto dst = storage_[slot];
    if (config_.hierarchy.metric == MetricKind::Cosine) {
      const auto unit = normalize(v);
      std::copy(unit.begin(), unit.end(), dst.begin());
    } else {
      if (!detail::all_finite(v)) throw std::invalid_argument("insert_batch: non-finite vector");
      std::copy(v.begin(), v.end(), dst.begin());
    }
    sequence_[slot] = total_inserted_++;
  }

  void attach(std::size_t slot) {
    const auto near = nearest_bottom_center(*index_, storage_[slot]);
    aux_.bottom_center_index[slot] = near.center;
    aux_.bottom_center_dist[slot] = near.distance;
    const auto apsp = index_->bottom_apsp.row(near.center);
    auto row = aux_.d_o_row(slot);
    for (std::size_t b = 0; b < aux_.bottom_count; ++b) row[b] = near.distance + apsp[b];
  }

  void refresh(std::uint64_t seed) {
    HierarchyConfig cfg = config_.hierarchy;
    if (filled_ < cfg.clusters_per_node) {
      cfg.layers = 1;
      cfg.clusters_per_node = filled_;
    }
    PointSet contents(config_.dim);
    for (std::size_t s = 0; s < filled_; ++s) contents.push_back(storage_[s]);
    auto idx = std::make_shared<HierarchicalIndex>(build_index(contents, cfg, seed));
    aux_.bottom_count = idx->bottom_count();
    aux_.d_o.assign(config_.capacity * aux_.bottom_count, 0.0);
    for (std::size_t s = 0; s < filled_; ++s) {
      aux_.bottom_center_index[s] = idx->bottom_center_index[s];
      aux_.bottom_center_dist[s] = idx->bottom_distance[s];
      const auto src = idx->d_o_row(s);
      std::copy(src.begin(), src.end(), aux_.d_o_row(s).begin());
    }
    index_ = std::move(idx);
    slots_since_rebuild_ = 0;
  }

  PoolConfig config_;
  PointSet storage_;
  std::vector<std::uint64_t> sequence_;  // insertion serial number per slot
  AuxQueues aux_;
  std::shared_ptr<const HierarchicalIndex> index_;
  std::size_t cursor_ = 0;
  std::size_t filled_ = 0;
  std::uint64_t epoch_ = 0;
  std::uint64_t rebuild_count_ = 0;
  std::uint64_t total_inserted_ = 0;
  std::size_t slots_since_rebuild_ = 0;
};

}  // namespace geodist

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

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "geodist/common.hpp"
#include "geodist/hierarchy.hpp"
#include "geodist/matrix.hpp"
#include "geodist/pool.hpp"

namespace geodist {

// I/O failures that are not format problems (missing file, short write).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace io {

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) buf_.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int b = 0; b < 8; ++b) buf_.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void count(std::size_t n) {
    if (n > UINT32_MAX) throw std::length_error("Writer: count does not fit in u32");
    u32(static_cast<std::uint32_t>(n));
  }
  void str(std::string_view s) {
    count(s.size());
    bytes(s);
  }
  template <class Range>
  void u32s(const Range& r) {
    for (auto v : r) u32(static_cast<std::uint32_t>(v));
  }
  template <class Range>
  void f64s(const Range& r) {
    for (double v : r) f64(v);
  }

  const std::vector<char>& buffer() const noexcept { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> data) : data_(std::move(data)) {}

  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  bool done() const noexcept { return pos_ == data_.size(); }

  void need(std::size_t n, std::size_t elem = 1) const {
    if (elem != 0 && n > remaining() / elem) throw CorruptInput("truncated input");
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_++])) << (8 * b);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_++])) << (8 * b);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(data_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::string str() { return bytes(u32()); }
  std::vector<std::uint32_t> u32s(std::size_t n) {
    need(n, 4);
    std::vector<std::uint32_t> v(n);
    for (auto& x : v) x = u32();
    return v;
  }
  std::vector<double> f64s(std::size_t n) {
    need(n, 8);
    std::vector<double> v(n);
    for (auto& x : v) x = f64();
    return v;
  }

 private:
  std::vector<char> data_;
  std::size_t pos_ = 0;
};

inline std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return data;
}

inline void write_file(const std::filesystem::path& path, const std::vector<char>& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace io

// ---- embedding file -------------------------------------------------------
//
// "GEMB", version u32, count u32, dim u32, count*dim f32 row-major, then an
// optional u64 length plus that many bytes of JSON metadata. All LE.

inline constexpr std::array<char, 4> kEmbeddingMagic = {'G', 'E', 'M', 'B'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;

struct EmbeddingFile {
  PointSet points;
  std::string metadata;  // raw JSON text, empty when absent
};

inline std::vector<char> encode_embeddings(const PointSet& points, std::string_view metadata = {}) {
  io::Writer w;
  w.bytes({kEmbeddingMagic.data(), 4});
  w.u32(kEmbeddingVersion);
  w.count(points.size());
  w.count(points.dim());
  for (double v : points.data()) w.f32(static_cast<float>(v));
  if (!metadata.empty()) {
    w.u64(metadata.size());
    w.bytes(metadata);
  }
  return w.buffer();
}

inline EmbeddingFile decode_embeddings(std::vector<char> data) {
  io::Reader r(std::move(data));
  if (r.remaining() < 16) throw CorruptInput("embedding file: header truncated");
  if (r.bytes(4) != std::string_view(kEmbeddingMagic.data(), 4)) throw CorruptInput("embedding file: bad magic");
  const auto version = r.u32();
  if (version != kEmbeddingVersion) {
    throw CorruptInput("embedding file: unsupported version " + std::to_string(version));
  }
  const std::uint64_t count = r.u32();
  const std::uint64_t dim = r.u32();
  if (dim == 0 && count != 0) throw CorruptInput("embedding file: zero dim with nonzero count");
  const std::uint64_t payload = count * dim * 4;
  if (payload > r.remaining()) throw CorruptInput("embedding file: payload shorter than count * dim");
  EmbeddingFile f;
  std::vector<double> values(count * dim);
  for (auto& v : values) v = static_cast<double>(r.f32());
  f.points = PointSet(dim == 0 ? 1 : dim, std::move(values));
  if (!r.done()) {
    if (r.remaining() < 8) throw CorruptInput("embedding file: trailing bytes after payload");
    const auto len = r.u64();
    if (len != r.remaining()) throw CorruptInput("embedding file: metadata length does not match file size");
    f.metadata = r.bytes(len);
  }
  return f;
}

inline void save_embeddings(const std::filesystem::path& path, const PointSet& points, std::string_view metadata = {}) {
  io::write_file(path, encode_embeddings(points, metadata));
}

inline EmbeddingFile load_embeddings(const std::filesystem::path& path) {
  return decode_embeddings(io::read_file(path));
}

// Round a point set through f32, as the embedding file stores it.
inline PointSet quantize_f32(const PointSet& points) {
  std::vector<double> v(points.data().size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(static_cast<float>(points.data()[i]));
  return PointSet(points.dim(), std::move(v));
}

// ---- raw matrix dump ------------------------------------------------------
//
// n*n f64 LE, row-major; +inf for unreachable pairs.

inline std::vector<char> encode_matrix(const DistanceMatrix& m) {
  io::Writer w;
  w.f64s(m.data());
  return w.buffer();
}

inline DistanceMatrix decode_matrix(std::vector<char> data) {
  if (data.size() % 8 != 0) throw CorruptInput("matrix dump: size is not a multiple of 8");
  const std::size_t cells = data.size() / 8;
  std::size_t n = 0;
  while (n * n < cells) ++n;
  if (n * n != cells) throw CorruptInput("matrix dump: cell count is not a square");
  io::Reader r(std::move(data));
  return DistanceMatrix(n, r.f64s(cells));
}

inline void save_matrix(const std::filesystem::path& path, const DistanceMatrix& m) {
  io::write_file(path, encode_matrix(m));
}

inline DistanceMatrix load_matrix(const std::filesystem::path& path) { return decode_matrix(io::read_file(path)); }

// ---- index container ------------------------------------------------------
//
// "GEOX", version u32, dim u32, layer count u32, then the index body and a
// u32 count of extra sections. A "POOL" section carries a FeaturePool whose
// index is the one stored in the container. Centers are stored as f64.

inline constexpr std::array<char, 4> kIndexMagic = {'G', 'E', 'O', 'X'};
inline constexpr std::array<char, 4> kPoolTag = {'P', 'O', 'O', 'L'};
inline constexpr std::uint32_t kIndexVersion = 1;

namespace detail {

inline void write_config(io::Writer& w, const HierarchyConfig& c) {
  w.count(c.layers);
  w.count(c.clusters_per_node);
  w.count(c.kmeans_iters);
  w.count(c.neighbors);
  w.u8(static_cast<std::uint8_t>(c.metric));
  w.u8(c.leaf_size_threshold ? 1 : 0);
  w.count(c.leaf_size_threshold.value_or(0));
  w.u8(static_cast<std::uint8_t>(c.center_mode));
}

inline HierarchyConfig read_config(io::Reader& r) {
  HierarchyConfig c;
  c.layers = r.u32();
  c.clusters_per_node = r.u32();
  c.kmeans_iters = r.u32();
  c.neighbors = r.u32();
  const auto metric = r.u8();
  if (metric > 1) throw CorruptInput("index: unknown metric tag");
  c.metric = static_cast<MetricKind>(metric);
  const auto has_leaf = r.u8();
  const auto leaf = r.u32();
  if (has_leaf) c.leaf_size_threshold = leaf;
  const auto mode = r.u8();
  if (mode > 1) throw CorruptInput("index: unknown center mode");
  c.center_mode = static_cast<CenterMode>(mode);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw CorruptInput(std::string("index: stored config invalid: ") + e.what());
  }
  return c;
}

inline void write_graph(io::Writer& w, const CenterGraph& g) {
  w.count(g.members.size());
  w.u32s(g.members);
  w.count(g.graph.neighbor_count());
  w.count(g.graph.edge_count());
  for (const auto& e : g.graph.edges()) {
    w.u32(e.i);
    w.u32(e.j);
    w.f64(e.weight);
  }
  w.f64s(g.apsp.data());
}

inline std::vector<std::uint32_t> read_ids(io::Reader& r, std::size_t n, std::size_t bound, const char* what) {
  auto v = r.u32s(n);
  for (auto x : v) {
    if (x >= bound) throw CorruptInput(std::string("index: ") + what + " id out of range");
  }
  return v;
}

inline CenterGraph read_graph(io::Reader& r, std::size_t center_count) {
  CenterGraph g;
  const auto m = r.u32();
  g.members = read_ids(r, m, center_count, "graph member");
  const auto k = r.u32();
  const auto e = r.u32();
  r.need(e, 16);
  std::vector<Edge> edges(e);
  for (auto& ed : edges) {
    ed.i = r.u32();
    ed.j = r.u32();
    ed.weight = r.f64();
  }
  try {
    g.graph = KnnGraph(m, std::move(edges), k);
  } catch (const std::invalid_argument& ex) {
    throw CorruptInput(std::string("index: bad edge list: ") + ex.what());
  }
  r.need(static_cast<std::size_t>(m) * m, 8);
  g.apsp = DistanceMatrix(m, r.f64s(static_cast<std::size_t>(m) * m));
  return g;
}

inline void write_index_body(io::Writer& w, const HierarchicalIndex& idx) {
  write_config(w, idx.config);
  w.u64(idx.point_count);
  for (const auto& layer : idx.layers) {
    w.count(layer.centers.size());
    w.f64s(layer.centers.data());
    w.u32s(layer.assignment);
    w.u32s(layer.parent);
    w.u32s(layer.graph_of);
    w.u32s(layer.local_index);
    w.count(layer.anchor_child.size());
    w.u32s(layer.anchor_child);
    w.f64s(layer.anchor_dist);
    w.f64s(layer.point_climb);
    w.count(layer.graphs.size());
    for (const auto& g : layer.graphs) write_graph(w, g);
  }
  w.u32s(idx.bottom_center_index);
  w.f64s(idx.bottom_distance);
  w.f64s(idx.bottom_apsp.data());
  w.f64s(idx.d_o);
  w.count(idx.warnings.size());
  for (const auto& s : idx.warnings) w.str(s);
}

inline HierarchicalIndex read_index_body(io::Reader& r, std::size_t dim, std::size_t layer_count) {
  HierarchicalIndex idx;
  idx.config = read_config(r);
  if (idx.config.layers < layer_count) throw CorruptInput("index: more layers stored than configured");
  idx.dim = dim;
  const auto n64 = r.u64();
  if (n64 > r.remaining()) throw CorruptInput("index: point count exceeds file size");
  const auto n = static_cast<std::size_t>(n64);
  idx.point_count = n;
  std::size_t prev_count = 1;
  for (std::size_t l = 0; l < layer_count; ++l) {
    Layer layer;
    const std::size_t c = r.u32();
    if (c == 0) throw CorruptInput("index: layer without centers");
    r.need(c * dim, 8);
    layer.centers = PointSet(dim, r.f64s(c * dim));
    layer.assignment = read_ids(r, n, c, "assignment");
    layer.parent = read_ids(r, c, prev_count, "parent");
    layer.graph_of = read_ids(r, c, c, "graph");
    layer.local_index = read_ids(r, c, c, "local");
    const std::size_t anchors = r.u32();
    if (anchors != 0 && anchors != c) throw CorruptInput("index: anchor table size mismatch");
    layer.anchor_child = r.u32s(anchors);
    layer.anchor_dist = r.f64s(anchors);
    layer.point_climb = r.f64s(n);
    const std::size_t gcount = r.u32();
    if (gcount > c) throw CorruptInput("index: more graphs than centers");
    for (std::size_t g = 0; g < gcount; ++g) layer.graphs.push_back(read_graph(r, c));
    for (std::size_t ci = 0; ci < c; ++ci) {
      if (layer.graph_of[ci] >= gcount || layer.local_index[ci] >= layer.graphs[layer.graph_of[ci]].members.size()) {
        throw CorruptInput("index: center not placed in a stored graph");
      }
    }
    prev_count = c;
    idx.layers.push_back(std::move(layer));
  }
  for (std::size_t l = 0; l + 1 < idx.layers.size(); ++l) {
    for (auto a : idx.layers[l].anchor_child) {
      if (a >= idx.layers[l + 1].centers.size()) throw CorruptInput("index: anchor child out of range");
    }
    if (idx.layers[l].anchor_child.size() != idx.layers[l].centers.size()) {
      throw CorruptInput("index: missing anchors above the bottom layer");
    }
  }
  const std::size_t nb = idx.layers.empty() ? 0 : idx.bottom_count();
  idx.bottom_center_index = read_ids(r, n, std::max<std::size_t>(nb, 1), "bottom center");
  idx.bottom_distance = r.f64s(n);
  r.need(nb * nb, 8);
  idx.bottom_apsp = DistanceMatrix(nb, r.f64s(nb * nb));
  r.need(n * nb, 8);
  idx.d_o = r.f64s(n * nb);
  const std::size_t wc = r.u32();
  for (std::size_t i = 0; i < wc; ++i) idx.warnings.push_back(r.str());
  return idx;
}

inline void write_pool_body(io::Writer& w, const FeaturePool& pool) {
  const auto& c = pool.config();
  w.u64(c.capacity);
  w.u64(c.dim);
  w.u64(c.rebuild_period);
  w.u64(c.seed);
  write_config(w, c.hierarchy);
  w.u64(pool.cursor());
  w.u64(pool.filled());
  w.u64(pool.epoch());
  w.u64(pool.rebuild_count());
  w.u64(pool.total_inserted());
  w.u64(pool.slots_since_rebuild());
  w.f64s(pool.storage().data());
  for (auto s : pool.sequence()) w.u64(s);
  const auto& aux = pool.aux();
  w.u32s(aux.bottom_center_index);
  w.f64s(aux.bottom_center_dist);
  w.u64(aux.bottom_count);
  w.f64s(aux.d_o);
  w.u8(pool.index() ? 1 : 0);
}

inline FeaturePool read_pool_body(io::Reader& r, std::shared_ptr<const HierarchicalIndex> index) {
  PoolConfig c;
  c.capacity = r.u64();
  c.dim = r.u64();
  c.rebuild_period = r.u64();
  c.seed = r.u64();
  c.hierarchy = read_config(r);
  if (c.capacity == 0 || c.dim == 0 || c.capacity > r.remaining() || c.dim > r.remaining()) {
    throw CorruptInput("pool: implausible capacity or dim");
  }
  const std::size_t cursor = r.u64();
  const std::size_t filled = r.u64();
  const std::uint64_t epoch = r.u64();
  const std::uint64_t rebuilds = r.u64();
  const std::uint64_t total = r.u64();
  const std::size_t since = r.u64();
  r.need(c.capacity * c.dim, 8);
  PointSet storage(c.dim, r.f64s(c.capacity * c.dim));
  r.need(c.capacity, 8);
  std::vector<std::uint64_t> seq(c.capacity);
  for (auto& s : seq) s = r.u64();
  AuxQueues aux;
  aux.bottom_center_index = r.u32s(c.capacity);
  aux.bottom_center_dist = r.f64s(c.capacity);
  aux.bottom_count = r.u64();
  if (aux.bottom_count > r.remaining()) throw CorruptInput("pool: implausible bottom center count");
  r.need(c.capacity * aux.bottom_count, 8);
  aux.d_o = r.f64s(c.capacity * aux.bottom_count);
  const bool has_index = r.u8() != 0;
  if (has_index != static_cast<bool>(index)) throw CorruptInput("pool: index presence flag mismatch");
  if (index && (index->dim != c.dim || index->bottom_count() != aux.bottom_count)) {
    throw CorruptInput("pool: stored index does not match pool shape");
  }
  for (std::size_t s = 0; s < filled && s < c.capacity; ++s) {
    if (aux.bottom_center_index[s] >= std::max<std::size_t>(aux.bottom_count, 1)) {
      throw CorruptInput("pool: bottom center index out of range");
    }
  }
  try {
    return FeaturePool::restore(std::move(c), std::move(storage), std::move(seq), std::move(aux), cursor, filled,
                                epoch, rebuilds, total, since, std::move(index));
  } catch (const std::invalid_argument& e) {
    throw CorruptInput(std::string("pool: ") + e.what());
  }
}

inline void write_header(io::Writer& w, std::size_t dim, std::size_t layers) {
  w.bytes({kIndexMagic.data(), 4});
  w.u32(kIndexVersion);
  w.count(dim);
  w.count(layers);
}

}  // namespace detail

struct IndexContainer {
  std::shared_ptr<const HierarchicalIndex> index;  // null only for an index-less pool checkpoint
  std::optional<FeaturePool> pool;
};

inline std::vector<char> encode_index(const HierarchicalIndex& idx) {
  io::Writer w;
  detail::write_header(w, idx.dim, idx.layer_count());
  detail::write_index_body(w, idx);
  w.u32(0);
  return w.buffer();
}

inline std::vector<char> encode_pool(const FeaturePool& pool) {
  io::Writer w;
  const auto& idx = pool.index();
  detail::write_header(w, pool.dim(), idx ? idx->layer_count() : 0);
  if (idx) {
    detail::write_index_body(w, *idx);
  }
  w.u32(1);
  w.bytes({kPoolTag.data(), 4});
  detail::write_pool_body(w, pool);
  return w.buffer();
}

inline IndexContainer decode_container(std::vector<char> data) {
  io::Reader r(std::move(data));
  if (r.remaining() < 16) throw CorruptInput("index file: header truncated");
  if (r.bytes(4) != std::string_view(kIndexMagic.data(), 4)) throw CorruptInput("index file: bad magic");
  const auto version = r.u32();
  if (version != kIndexVersion) throw CorruptInput("index file: unsupported version " + std::to_string(version));
  const std::size_t dim = r.u32();
  const std::size_t layers = r.u32();
  if (dim == 0) throw CorruptInput("index file: zero dim");
  if (layers > kMaxLayers) throw CorruptInput("index file: too many layers");
  IndexContainer out;
  if (layers > 0) out.index = std::make_shared<const HierarchicalIndex>(detail::read_index_body(r, dim, layers));
  const auto sections = r.u32();
  for (std::uint32_t s = 0; s < sections; ++s) {
    const auto tag = r.bytes(4);
    if (tag != std::string_view(kPoolTag.data(), 4) || out.pool) throw CorruptInput("index file: unknown section");
    out.pool.emplace(detail::read_pool_body(r, out.index));
  }
  if (!r.done()) throw CorruptInput("index file: trailing bytes");
  if (!out.index && !out.pool) throw CorruptInput("index file: no index and no pool");
  return out;
}

inline void save_index(const std::filesystem::path& path, const HierarchicalIndex& idx) {
  io::write_file(path, encode_index(idx));
}

inline void save_pool(const std::filesystem::path& path, const FeaturePool& pool) {
  io::write_file(path, encode_pool(pool));
}

inline IndexContainer load_container(const std::filesystem::path& path) {
  return decode_container(io::read_file(path));
}

inline HierarchicalIndex load_index(const std::filesystem::path& path) {
  auto c = load_container(path);
  if (!c.index) throw CorruptInput("index file holds no index");
  return *c.index;
}

}  // namespace geodist

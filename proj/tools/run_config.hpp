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

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "geodist/hierarchy.hpp"
#include "geodist/io.hpp"
#include "geodist/similarity.hpp"

namespace geodist::cli {

// Settings shared by build, simulate and bench. Defaults are the reference
// hyperparameters; a key=value file overrides them and flags override both.
struct RunConfig {
  HierarchyConfig hierarchy;
  AngleNormConfig angle;
  std::size_t capacity = 65536;
  std::size_t rebuild_period = 100;
  std::uint64_t seed = 0;
  std::optional<double> delta;  // simple-manifold threshold, sqrt(dim) when unset
};

// Flag values; unset members leave the config alone.
struct RunOverrides {
  std::optional<std::size_t> layers, clusters, kmeans_iters, neighbors, leaf_threshold, capacity, rebuild_period;
  std::optional<std::string> metric, center_mode, unreachable;
  std::optional<double> max_angle, temperature, delta;
  std::optional<std::uint64_t> seed;
};

inline std::size_t parse_count(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long x = 0;
  try {
    x = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty() || v[0] == '-') {
    throw std::invalid_argument("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return static_cast<std::size_t>(x);
}

inline double parse_real(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double x = 0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty()) throw std::invalid_argument("config: '" + key + "' expects a number, got '" + v + "'");
  return x;
}

inline CenterMode parse_center_mode(const std::string& v) {
  if (v == "mean") return CenterMode::Mean;
  if (v == "medoid") return CenterMode::Medoid;
  throw std::invalid_argument("unknown center mode '" + v + "'");
}

inline UnreachablePolicy parse_unreachable(const std::string& v) {
  if (v == "min") return UnreachablePolicy::MinSimilarity;
  if (v == "exclude") return UnreachablePolicy::Exclude;
  throw std::invalid_argument("unknown unreachable policy '" + v + "'");
}

inline void apply_key(RunConfig& c, const std::string& key, const std::string& v) {
  if (key == "layers") c.hierarchy.layers = parse_count(key, v);
  else if (key == "clusters") c.hierarchy.clusters_per_node = parse_count(key, v);
  else if (key == "kmeans_iters") c.hierarchy.kmeans_iters = parse_count(key, v);
  else if (key == "neighbors") c.hierarchy.neighbors = parse_count(key, v);
  else if (key == "leaf_threshold") c.hierarchy.leaf_size_threshold = parse_count(key, v);
  else if (key == "metric") c.hierarchy.metric = parse_metric(v);
  else if (key == "center_mode") c.hierarchy.center_mode = parse_center_mode(v);
  else if (key == "capacity") c.capacity = parse_count(key, v);
  else if (key == "rebuild_period") c.rebuild_period = parse_count(key, v);
  else if (key == "seed") c.seed = parse_count(key, v);
  else if (key == "max_angle") c.angle.max_angle = parse_real(key, v);
  else if (key == "temperature") c.angle.temperature = parse_real(key, v);
  else if (key == "unreachable") c.angle.unreachable = parse_unreachable(v);
  else if (key == "delta") c.delta = parse_real(key, v);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// "key = value" per line; '#' starts a comment.
inline void load_config_file(RunConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    apply_key(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

inline void apply_overrides(RunConfig& c, const RunOverrides& o) {
  if (o.layers) c.hierarchy.layers = *o.layers;
  if (o.clusters) c.hierarchy.clusters_per_node = *o.clusters;
  if (o.kmeans_iters) c.hierarchy.kmeans_iters = *o.kmeans_iters;
  if (o.neighbors) c.hierarchy.neighbors = *o.neighbors;
  if (o.leaf_threshold) c.hierarchy.leaf_size_threshold = *o.leaf_threshold;
  if (o.metric) c.hierarchy.metric = parse_metric(*o.metric);
  if (o.center_mode) c.hierarchy.center_mode = parse_center_mode(*o.center_mode);
  if (o.capacity) c.capacity = *o.capacity;
  if (o.rebuild_period) c.rebuild_period = *o.rebuild_period;
  if (o.seed) c.seed = *o.seed;
  if (o.max_angle) c.angle.max_angle = *o.max_angle;
  if (o.temperature) c.angle.temperature = *o.temperature;
  if (o.unreachable) c.angle.unreachable = parse_unreachable(*o.unreachable);
  if (o.delta) c.delta = *o.delta;
}

inline nlohmann::ordered_json to_json(const RunConfig& c, std::size_t dim) {
  nlohmann::ordered_json j;
  j["layers"] = c.hierarchy.layers;
  j["clusters"] = c.hierarchy.clusters_per_node;
  j["kmeans_iters"] = c.hierarchy.kmeans_iters;
  j["neighbors"] = c.hierarchy.neighbors;
  j["leaf_threshold"] = c.hierarchy.leaf_threshold();
  j["metric"] = std::string(to_string(c.hierarchy.metric));
  j["center_mode"] = c.hierarchy.center_mode == CenterMode::Mean ? "mean" : "medoid";
  j["capacity"] = c.capacity;
  j["rebuild_period"] = c.rebuild_period;
  j["seed"] = c.seed;
  j["max_angle"] = c.angle.max_angle;
  j["temperature"] = c.angle.temperature;
  j["unreachable"] = c.angle.unreachable == UnreachablePolicy::MinSimilarity ? "min" : "exclude";
  j["delta"] = c.delta.value_or(std::sqrt(static_cast<double>(dim)));
  return j;
}

}  // namespace geodist::cli

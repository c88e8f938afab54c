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
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "geodist/common.hpp"
#include "geodist/matrix.hpp"

namespace geodist {

enum class MetricKind : std::uint8_t {
  Cosine,     // angular form: great-circle angle in [0, pi]
  Euclidean,
};

inline std::string_view to_string(MetricKind kind) {
  return kind == MetricKind::Cosine ? "cosine" : "euclidean";
}

inline MetricKind parse_metric(std::string_view s) {
  if (s == "cosine") return MetricKind::Cosine;
  if (s == "euclidean") return MetricKind::Euclidean;
  throw std::invalid_argument("unknown metric '" + std::string(s) + "'");
}

inline constexpr double kUnitNormTolerance = 1e-6;

namespace detail {

// Angle between unit vectors as 2*atan2(|a-b|, |a+b|). Equal to
// arccos(<a,b>) on the sphere but keeps full relative precision near 0 and
// pi, and cannot leave [0, pi].
inline double angular_unchecked(std::span<const double> a, std::span<const double> b) noexcept {
  double diff = 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    const double s = a[i] + b[i];
    diff += d * d;
    sum += s * s;
  }
  return 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum));
}

inline double euclidean_unchecked(std::span<const double> a, std::span<const double> b) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

inline double distance_unchecked(std::span<const double> a, std::span<const double> b,
                                 MetricKind kind) noexcept {
  return kind == MetricKind::Cosine ? angular_unchecked(a, b) : euclidean_unchecked(a, b);
}

inline bool all_finite(std::span<const double> v) noexcept {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

inline double squared_norm(std::span<const double> v) noexcept {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

}  // namespace detail

inline bool is_unit(std::span<const double> v, double tol = kUnitNormTolerance) noexcept {
  return std::abs(std::sqrt(detail::squared_norm(v)) - 1.0) <= tol;
}

inline double trivial_distance(std::span<const double> a, std::span<const double> b,
                               MetricKind kind) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("trivial_distance: dimension mismatch (" + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()) + ")");
  }
  if (!detail::all_finite(a) || !detail::all_finite(b)) {
    throw std::invalid_argument("trivial_distance: non-finite input");
  }
  return detail::distance_unchecked(a, b, kind);
}

inline FeatureVector normalize(std::span<const double> v) {
  if (!detail::all_finite(v)) throw std::invalid_argument("normalize: non-finite input");
  const double norm = std::sqrt(detail::squared_norm(v));
  if (norm == 0.0) throw std::invalid_argument("normalize: zero vector");
  FeatureVector out(v.begin(), v.end());
  for (double& x : out) x /= norm;
  return out;
}

inline void normalize_rows(PointSet& points) {
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto row = points[i];
    auto unit = normalize(row);
    std::copy(unit.begin(), unit.end(), row.begin());
  }
}

// Throws unless every row is finite and, for the cosine metric, unit length.
inline void validate_points(const PointSet& points, MetricKind kind, std::string_view what = "points") {
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!detail::all_finite(points[i])) {
      throw std::invalid_argument(std::string(what) + ": row " + std::to_string(i) + " is not finite");
    }
    if (kind == MetricKind::Cosine && !is_unit(points[i])) {
      throw std::invalid_argument(std::string(what) + ": row " + std::to_string(i) +
                                  " is not unit-normalized");
    }
  }
}

struct SimpleManifoldThreshold {
  double delta;

  explicit SimpleManifoldThreshold(double d) : delta(d) {
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw std::invalid_argument("SimpleManifoldThreshold: delta must be positive and finite");
    }
  }

  static SimpleManifoldThreshold for_dim(std::size_t dim) {
    return SimpleManifoldThreshold(std::sqrt(static_cast<double>(dim)));
  }
};

// True iff |geodesic - trivial| < delta for every pair of points.
inline bool simple_manifold_check(const PointSet& points, const DistanceMatrix& geo, MetricKind kind,
                                  SimpleManifoldThreshold thr) {
  if (geo.size() != points.size()) {
    throw std::invalid_argument("simple_manifold_check: geodesic matrix does not cover all pairs");
  }
  validate_points(points, kind);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      const double gap = std::abs(geo(i, j) - detail::distance_unchecked(points[i], points[j], kind));
      if (!(gap < thr.delta)) return false;
    }
  }
  return true;
}

}  // namespace geodist

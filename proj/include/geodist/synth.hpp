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
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "geodist/common.hpp"
#include "geodist/metrics.hpp"
#include "geodist/rng.hpp"

namespace geodist {

// Parameterization of a generated swiss roll: per-point roll angle t, the
// un-lifted ambient coordinates, and the orthonormal 3 x embed_dim basis
// that places the roll in embed space.
struct RollChart {
  std::size_t embed_dim = 3;
  std::vector<double> basis;
  std::vector<double> t;
  PointSet ambient;
};

struct Dataset {
  PointSet points;
  std::optional<PointSet> intrinsic;   // (arc length, height) for the roll
  std::vector<std::uint32_t> labels;   // blob ids; empty when not applicable
  std::uint64_t seed = 0;
  double lift_radius = 0.0;            // > 0 once lifted onto the unit sphere
  std::optional<RollChart> chart;
};

inline constexpr double kRollTMin = 1.5 * std::numbers::pi;
inline constexpr double kRollTMax = 4.5 * std::numbers::pi;
inline constexpr double kRollHeight = 21.0;

// Arc length of the spiral (t cos t, t sin t) from 0 to t.
inline double roll_arclength(double t) { return 0.5 * (t * std::sqrt(1.0 + t * t) + std::asinh(t)); }

inline double roll_angle_from_arclength(double s) {
  if (s < 0.0) throw std::invalid_argument("roll_angle_from_arclength: negative arc length");
  double t = std::sqrt(2.0 * s);
  for (int it = 0; it < 60; ++it) {
    const double step = (roll_arclength(t) - s) / std::sqrt(1.0 + t * t);
    t -= step;
    if (std::abs(step) <= 1e-15 * std::max(1.0, t)) break;
  }
  return t;
}

namespace detail {

// Rows of an orthonormal basis from Gram-Schmidt over Gaussian draws.
inline std::vector<double> random_frame(std::size_t rows, std::size_t dim, CounterRng& rng) {
  std::vector<double> q(rows * dim);
  for (std::size_t r = 0; r < rows; ++r) {
    double* v = q.data() + r * dim;
    for (;;) {
      for (std::size_t d = 0; d < dim; ++d) v[d] = rng.normal();
      for (std::size_t p = 0; p < r; ++p) {
        const double* u = q.data() + p * dim;
        double dot = 0.0;
        for (std::size_t d = 0; d < dim; ++d) dot += v[d] * u[d];
        for (std::size_t d = 0; d < dim; ++d) v[d] -= dot * u[d];
      }
      double nrm = 0.0;
      for (std::size_t d = 0; d < dim; ++d) nrm += v[d] * v[d];
      nrm = std::sqrt(nrm);
      if (nrm > 1e-6) {
        for (std::size_t d = 0; d < dim; ++d) v[d] /= nrm;
        break;
      }
    }
  }
  return q;
}

inline FeatureVector roll_embed(const RollChart& chart, double t, double h) {
  const double p[3] = {t * std::cos(t), h, t * std::sin(t)};
  FeatureVector out(chart.embed_dim, 0.0);
  for (std::size_t a = 0; a < 3; ++a) {
    const double* row = chart.basis.data() + a * chart.embed_dim;
    for (std::size_t d = 0; d < chart.embed_dim; ++d) out[d] += p[a] * row[d];
  }
  return out;
}

inline FeatureVector lift(std::span<const double> x, double radius) {
  FeatureVector v(x.begin(), x.end());
  v.push_back(radius);
  return normalize(v);
}

}  // namespace detail

// Classic roll: t = 1.5pi(1 + 2u), h = height * v, point (t cos t, h, t sin t).
// embed_dim > 3 places it on a random 3-frame; Gaussian noise of the given
// scale is added on every embed coordinate.
inline Dataset gen_swiss_roll(std::size_t n, double noise, std::uint64_t seed, std::size_t embed_dim = 3,
                              double height = kRollHeight) {
  if (n < 10) throw std::invalid_argument("gen_swiss_roll: n must be >= 10");
  if (embed_dim < 3) throw std::invalid_argument("gen_swiss_roll: embed_dim must be >= 3");
  if (!(noise >= 0.0)) throw std::invalid_argument("gen_swiss_roll: noise must be >= 0");
  if (!(height >= 0.0) || !std::isfinite(height)) throw std::invalid_argument("gen_swiss_roll: bad height");
  CounterRng param_rng(seed, 1);
  CounterRng frame_rng(seed, 2);
  CounterRng noise_rng(seed, 3);

  RollChart chart;
  chart.embed_dim = embed_dim;
  if (embed_dim == 3) {
    chart.basis = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  } else {
    chart.basis = detail::random_frame(3, embed_dim, frame_rng);
  }
  chart.ambient = PointSet(embed_dim);
  PointSet intrinsic(2);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = kRollTMin + (kRollTMax - kRollTMin) * param_rng.uniform();
    const double h = height * param_rng.uniform();
    auto x = detail::roll_embed(chart, t, h);
    if (noise > 0.0) {
      for (auto& v : x) v += noise * noise_rng.normal();
    }
    chart.t.push_back(t);
    chart.ambient.push_back(x);
    const double st[2] = {roll_arclength(t), h};
    intrinsic.push_back(st);
  }
  Dataset ds;
  ds.points = chart.ambient;
  ds.intrinsic = std::move(intrinsic);
  ds.seed = seed;
  ds.chart = std::move(chart);
  return ds;
}

// Appends a constant coordinate and unit-normalizes, so angular distances
// track ambient distances / radius for the cosine metric.
inline Dataset lift_to_sphere(Dataset ds, double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw std::invalid_argument("lift_to_sphere: radius must be > 0");
  if (ds.lift_radius > 0.0) throw std::invalid_argument("lift_to_sphere: dataset already lifted");
  PointSet out(ds.points.dim() + 1);
  for (std::size_t i = 0; i < ds.points.size(); ++i) out.push_back(detail::lift(ds.points[i], radius));
  ds.points = std::move(out);
  ds.lift_radius = radius;
  return ds;
}

inline double intrinsic_distance(const Dataset& ds, std::size_t i, std::size_t j) {
  if (!ds.intrinsic) throw std::invalid_argument("intrinsic_distance: dataset has no chart");
  const auto a = (*ds.intrinsic)[i];
  const auto b = (*ds.intrinsic)[j];
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

// Unit-sphere blobs: random unit centers, members normalize(center + spread * N(0, I)).
inline Dataset gen_sphere_blobs(std::size_t n_blobs, std::size_t per_blob, double spread, std::size_t dim,
                                std::uint64_t seed) {
  if (n_blobs == 0 || per_blob == 0) throw std::invalid_argument("gen_sphere_blobs: empty request");
  if (dim < 2) throw std::invalid_argument("gen_sphere_blobs: dim must be >= 2");
  if (!(spread >= 0.0)) throw std::invalid_argument("gen_sphere_blobs: spread must be >= 0");
  CounterRng center_rng(seed, 1);
  CounterRng point_rng(seed, 2);
  Dataset ds;
  ds.points = PointSet(dim);
  ds.seed = seed;
  FeatureVector tmp(dim);
  for (std::size_t b = 0; b < n_blobs; ++b) {
    for (auto& v : tmp) v = center_rng.normal();
    const auto center = normalize(tmp);
    for (std::size_t p = 0; p < per_blob; ++p) {
      if (spread == 0.0) {
        ds.points.push_back(center);
      } else {
        for (std::size_t d = 0; d < dim; ++d) tmp[d] = center[d] + spread * point_rng.normal();
        ds.points.push_back(normalize(tmp));
      }
      ds.labels.push_back(static_cast<std::uint32_t>(b));
    }
  }
  return ds;
}

struct PairedDatasets {
  Dataset a;
  Dataset b;
  std::vector<std::uint32_t> pairs;  // row r of a matches row pairs[r] of b
};

// Modality b is a smooth warp of the base plus Gaussian noise.
//
// With a roll chart the warp slides each point `warp` units of arc length
// along the spiral (height unchanged). Once the slide exceeds the gap
// between turns, points on the neighbouring turn sit closer in ambient
// space than the true partner while staying far along the sheet.
//
// Without a chart the warp twists the (x0, x1) plane by warp * pi * x2.
inline PairedDatasets gen_paired_modalities(const Dataset& base, double pair_noise, double warp,
                                            std::uint64_t seed) {
  if (!(pair_noise >= 0.0)) throw std::invalid_argument("gen_paired_modalities: pair_noise must be >= 0");
  if (!std::isfinite(warp)) throw std::invalid_argument("gen_paired_modalities: warp must be finite");
  PairedDatasets out;
  out.a = base;
  const std::size_t n = base.points.size();
  for (std::size_t r = 0; r < n; ++r) out.pairs.push_back(static_cast<std::uint32_t>(r));
  out.b = base;
  out.b.seed = seed;
  if (warp == 0.0 && pair_noise == 0.0) return out;

  CounterRng noise_rng(seed, 0x7061);
  if (base.chart) {
    const RollChart& chart = *base.chart;
    PointSet ambient(chart.embed_dim);
    PointSet intrinsic(2);
    std::vector<double> ts;
    for (std::size_t r = 0; r < n; ++r) {
      const double s = roll_arclength(chart.t[r]) + warp;
      const double t2 = roll_angle_from_arclength(std::max(s, 0.0));
      const double h = (*base.intrinsic)[r][1];
      const auto from = detail::roll_embed(chart, chart.t[r], h);
      const auto to = detail::roll_embed(chart, t2, h);
      FeatureVector x(chart.ambient[r].begin(), chart.ambient[r].end());
      for (std::size_t d = 0; d < x.size(); ++d) {
        x[d] += to[d] - from[d];
        if (pair_noise > 0.0) x[d] += pair_noise * noise_rng.normal();
      }
      ambient.push_back(x);
      const double st[2] = {roll_arclength(t2), h};
      intrinsic.push_back(st);
      ts.push_back(t2);
    }
    PointSet pts(base.lift_radius > 0.0 ? chart.embed_dim + 1 : chart.embed_dim);
    for (std::size_t r = 0; r < n; ++r) {
      if (base.lift_radius > 0.0) {
        pts.push_back(detail::lift(ambient[r], base.lift_radius));
      } else {
        pts.push_back(ambient[r]);
      }
    }
    out.b.points = std::move(pts);
    out.b.intrinsic = std::move(intrinsic);
    out.b.chart->t = std::move(ts);
    out.b.chart->ambient = std::move(ambient);
    return out;
  }

  const std::size_t dim = base.points.dim();
  if (dim < 3) throw std::invalid_argument("gen_paired_modalities: twist warp needs dim >= 3");
  bool unit = true;
  for (std::size_t r = 0; r < n && unit; ++r) unit = is_unit(base.points[r]);
  PointSet pts(dim);
  for (std::size_t r = 0; r < n; ++r) {
    FeatureVector x = base.points.row_vector(r);
    const double ang = warp * std::numbers::pi * x[2];
    const double c = std::cos(ang);
    const double s = std::sin(ang);
    const double x0 = x[0];
    const double x1 = x[1];
    x[0] = c * x0 - s * x1;
    x[1] = s * x0 + c * x1;
    if (pair_noise > 0.0) {
      for (auto& v : x) v += pair_noise * noise_rng.normal();
    }
    pts.push_back(unit ? normalize(x) : x);
  }
  out.b.points = std::move(pts);
  return out;
}

// Frozen parameters of the paired roll used for mining comparisons: a
// narrow roll (so 256 centers resolve it without cross-turn edges), lifted
// onto the sphere, partners slid 8 arc units, further than the 2pi gap
// between turns.
struct PairedRollParams {
  std::size_t n = 4096;
  std::size_t embed_dim = 16;
  double height = 4.0;
  double noise = 0.0;
  double lift_radius = 30.0;
  double warp = 8.0;
  double pair_noise = 0.05;
  std::uint64_t seed = 7;
};

inline PairedDatasets gen_paired_roll(const PairedRollParams& p = {}) {
  auto base = gen_swiss_roll(p.n, p.noise, p.seed, p.embed_dim, p.height);
  if (p.lift_radius > 0.0) base = lift_to_sphere(std::move(base), p.lift_radius);
  return gen_paired_modalities(base, p.pair_noise, p.warp, CounterRng::derive(p.seed, 0x70616972));
}

}  // namespace geodist

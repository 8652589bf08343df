/*
 Copyright 2026 flexmpc contributors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <utility>

#include "flexmpc/common.hpp"

namespace flexmpc {

/// Discrete-time control system x+ = f(x, u) with f(0, 0) = 0.
///
/// The transition map must be deterministic: identical (x, u) pairs yield
/// bit-identical successors. All shipped models satisfy this by being pure
/// arithmetic over their arguments.
struct SystemModel {
  int state_dim = 0;
  int input_dim = 0;
  double sampling_time = 0.0;
  std::function<Vector(const Vector&, const Vector&)> transition;
};

/// Axis-aligned box, possibly unbounded per coordinate. When both bounds of
/// a coordinate are finite, zero must lie strictly between them.
struct BoxSet {
  Vector lower;
  Vector upper;

  BoxSet() = default;
  BoxSet(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi)) { validate(); }

  static BoxSet unbounded(int dim) {
    const double inf = std::numeric_limits<double>::infinity();
    return BoxSet(Vector::Constant(dim, -inf), Vector::Constant(dim, inf));
  }

  /// Cube [-half, half]^dim.
  static BoxSet centered_cube(int dim, double half) {
    return BoxSet(Vector::Constant(dim, -half), Vector::Constant(dim, half));
  }

  int dim() const { return static_cast<int>(lower.size()); }

  bool bounded() const {
    return lower.allFinite() && upper.allFinite();
  }

  bool contains(const Vector& v, double tol = 0.0) const {
    if (v.size() != lower.size()) return false;
    for (Eigen::Index i = 0; i < v.size(); ++i)
      if (v[i] < lower[i] - tol || v[i] > upper[i] + tol) return false;
    return true;
  }

  Vector clamp(const Vector& v) const {
    return v.cwiseMax(lower).cwiseMin(upper);
  }

  void validate() const {
    require(lower.size() == upper.size(), "BoxSet: bound dimensions differ");
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
      require(lower[i] <= upper[i], "BoxSet: lower bound exceeds upper bound");
      if (std::isfinite(lower[i]) && std::isfinite(upper[i]))
        require(lower[i] < 0.0 && upper[i] > 0.0,
                "BoxSet: zero must be strictly interior when both bounds are finite");
    }
  }
};

/// One transition of the model. Checks dimensions, then applies f.
inline Vector step(const SystemModel& model, const Vector& x, const Vector& u) {
  require(x.size() == model.state_dim, "step: state dimension mismatch");
  require(u.size() == model.input_dim, "step: input dimension mismatch");
  return model.transition(x, u);
}

/// States [x^0, ..., x^N] reached from x0 under the N inputs of useq.
inline std::vector<Vector> rollout(const SystemModel& model, const Vector& x0,
                                   const InputSequence& useq) {
  std::vector<Vector> states;
  states.reserve(useq.size() + 1);
  states.push_back(x0);
  for (const auto& u : useq) states.push_back(step(model, states.back(), u));
  return states;
}

namespace detail {

/// State increment of the Brockett-variant dynamics, as scalars so hot loops
/// can evaluate it without touching the heap. delta > 0 softens |x4| to
/// sqrt(x4^2 + delta^2); delta = 0 is the exact dynamics.
inline std::array<double, 4> brockett_increment(double x1, double x2, double x3, double x4,
                                                double u1, double u2, double h, double delta) {
  const double a4 = delta > 0.0 ? std::sqrt(x4 * x4 + delta * delta) : std::abs(x4);
  return {h * u1, h * u2, h * (-x2 * u1 + x1 * u2), h * (x3 * u1 + x2 * u2 + a4)};
}

}  // namespace detail

/// Four-state, two-input variation of the Brockett integrator with an |x4|
/// drift that breaks the symmetry of the classical system:
///
///   x+ = x + h*[1, 0, -x2, x3]*u1 + h*[0, 1, x1, x2]*u2 + h*[0, 0, 0, |x4|]
///
/// with sampling time h = 0.1. A smooth_abs_delta > 0 builds the softened
/// variant used only inside optimization; closed-loop simulation always uses
/// the exact dynamics.
inline SystemModel brockett_variant(double smooth_abs_delta = 0.0) {
  SystemModel model;
  model.state_dim = 4;
  model.input_dim = 2;
  model.sampling_time = 0.1;
  const double h = model.sampling_time;
  const double delta = smooth_abs_delta;
  model.transition = [h, delta](const Vector& x, const Vector& u) {
    const auto d = detail::brockett_increment(x[0], x[1], x[2], x[3], u[0], u[1], h, delta);
    Vector next(4);
    next[0] = x[0] + d[0];
    next[1] = x[1] + d[1];
    next[2] = x[2] + d[2];
    next[3] = x[3] + d[3];
    return next;
  };
  return model;
}

/// The displacement map (x, u) -> f(x, u) - x of the Brockett variant.
inline Vector brockett_phi(const Vector& x, const Vector& u) {
  require(x.size() == 4, "brockett_phi: state must have dimension 4");
  require(u.size() == 2, "brockett_phi: input must have dimension 2");
  const auto d = detail::brockett_increment(x[0], x[1], x[2], x[3], u[0], u[1], 0.1, 0.0);
  Vector phi(4);
  phi << d[0], d[1], d[2], d[3];
  return phi;
}

/// Result of the necessary-condition probe: the smallest attainable residual
/// ||phi(x,u) - [0,0,0,-y4]|| over the searched box, together with where it
/// was attained.
struct ProbeReport {
  double min_residual = 0.0;
  double grid_residual = 0.0;  // best value before local refinement
  Vector argmin;               // (x1..x4, u1, u2)
  std::int64_t evaluations = 0;
};

namespace detail {

inline double probe_residual(const std::array<double, 6>& p, double y4) {
  const auto d = brockett_increment(p[0], p[1], p[2], p[3], p[4], p[5], 0.1, 0.0);
  const double r1 = d[0];
  const double r2 = d[1];
  const double r3 = d[2];
  const double r4 = d[3] + y4;
  return std::sqrt(r1 * r1 + r2 * r2 + r3 * r3 + r4 * r4);
}

// Minimizes the residual along one coordinate over [lo, hi]. The restriction
// of the squared residual is a quadratic polynomial on each sign-half of the
// coordinate (only x4 enters through |.|), so a three-point parabola fit per
// half is exact up to rounding.
inline void probe_line_min(std::array<double, 6>& p, int coord, double lo, double hi, double y4,
                           std::int64_t& evals) {
  auto eval_at = [&](double t) {
    std::array<double, 6> q = p;
    q[static_cast<std::size_t>(coord)] = t;
    ++evals;
    return probe_residual(q, y4);
  };
  double best_t = p[static_cast<std::size_t>(coord)];
  double best_f = eval_at(best_t);
  auto consider = [&](double t) {
    if (t < lo || t > hi || !std::isfinite(t)) return;
    const double f = eval_at(t);
    if (f < best_f) {
      best_f = f;
      best_t = t;
    }
  };
  auto fit_half = [&](double a, double b) {
    if (!(a < b)) return;
    const double m = 0.5 * (a + b);
    const double fa = eval_at(a), fm = eval_at(m), fb = eval_at(b);
    consider(a);
    consider(b);
    // Vertex of the parabola through (a,fa^2), (m,fm^2), (b,fb^2).
    const double ya = fa * fa, ym = fm * fm, yb = fb * fb;
    const double denom = (a - m) * (a - b) * (m - b);
    if (denom == 0.0) return;
    const double A = (b * (ym - ya) + m * (ya - yb) + a * (yb - ym)) / denom;
    const double B = (b * b * (ya - ym) + m * m * (yb - ya) + a * a * (ym - yb)) / denom;
    if (A > 0.0) consider(-B / (2.0 * A));
  };
  if (coord == 3 && lo < 0.0 && hi > 0.0) {
    fit_half(lo, 0.0);
    fit_half(0.0, hi);
    consider(0.0);
  } else {
    fit_half(lo, hi);
  }
  p[static_cast<std::size_t>(coord)] = best_t;
}

}  // namespace detail

/// Grid-plus-refinement search for the minimum of ||phi(x,u) - [0,0,0,-y4]||
/// over a compact box in (x, u) space. For y4 > 0 the minimum is strictly
/// positive: the first two components force u to zero, after which the
/// fourth component of phi is non-negative and cannot equal -y4.
inline ProbeReport brockett_residual_probe(double y4, const BoxSet& box, int grid_points_per_dim,
                                           int refine_iterations = 200) {
  require(y4 >= 0.0, "brockett_residual_probe: y4 must be non-negative");
  require(box.dim() == 6, "brockett_residual_probe: box must cover (x, u) in R^6");
  require(box.bounded(), "brockett_residual_probe: box must be compact");
  for (int i = 0; i < 6; ++i)
    require(box.lower[i] < box.upper[i], "brockett_residual_probe: degenerate box");
  require(grid_points_per_dim >= 2, "brockett_residual_probe: need at least 2 grid points per dim");

  const int g = grid_points_per_dim;
  std::array<double, 6> lo{}, span{};
  for (int i = 0; i < 6; ++i) {
    lo[static_cast<std::size_t>(i)] = box.lower[i];
    span[static_cast<std::size_t>(i)] = (box.upper[i] - box.lower[i]) / (g - 1);
  }

  std::int64_t evals = 0;
  // Keep a handful of the best grid points; coordinate descent can stall on
  // flat directions, so refining several seeds costs little and is robust.
  constexpr int kSeeds = 8;
  std::array<std::array<double, 6>, kSeeds> seeds{};
  std::array<double, kSeeds> seed_f{};
  seed_f.fill(std::numeric_limits<double>::infinity());

  std::array<int, 6> idx{};
  std::array<double, 6> pt{};
  for (;;) {
    for (int i = 0; i < 6; ++i)
      pt[static_cast<std::size_t>(i)] =
          lo[static_cast<std::size_t>(i)] + idx[static_cast<std::size_t>(i)] * span[static_cast<std::size_t>(i)];
    ++evals;
    const double f = detail::probe_residual(pt, y4);
    int worst = 0;
    for (int s = 1; s < kSeeds; ++s)
      if (seed_f[static_cast<std::size_t>(s)] > seed_f[static_cast<std::size_t>(worst)]) worst = s;
    if (f < seed_f[static_cast<std::size_t>(worst)]) {
      seed_f[static_cast<std::size_t>(worst)] = f;
      seeds[static_cast<std::size_t>(worst)] = pt;
    }
    int c = 5;
    while (c >= 0 && ++idx[static_cast<std::size_t>(c)] == g) {
      idx[static_cast<std::size_t>(c)] = 0;
      --c;
    }
    if (c < 0) break;
  }

  double grid_best = seed_f[0];
  for (double f : seed_f) grid_best = std::min(grid_best, f);

  double best_f = grid_best;
  std::array<double, 6> best_p = seeds[0];
  for (int s = 0; s < kSeeds; ++s)
    if (seed_f[static_cast<std::size_t>(s)] == grid_best) {
      best_p = seeds[static_cast<std::size_t>(s)];
      break;
    }

  for (int s = 0; s < kSeeds; ++s) {
    if (!std::isfinite(seed_f[static_cast<std::size_t>(s)])) continue;
    std::array<double, 6> p = seeds[static_cast<std::size_t>(s)];
    double prev = detail::probe_residual(p, y4);
    ++evals;
    for (int sweep = 0; sweep < refine_iterations; ++sweep) {
      for (int c = 0; c < 6; ++c)
        detail::probe_line_min(p, c, box.lower[c], box.upper[c], y4, evals);
      const double now = detail::probe_residual(p, y4);
      ++evals;
      if (prev - now < 1e-18) {
        prev = now;
        break;
      }
      prev = now;
    }
    if (prev < best_f) {
      best_f = prev;
      best_p = p;
    }
  }

  ProbeReport report;
  report.min_residual = best_f;
  report.grid_residual = grid_best;
  report.argmin = Eigen::Map<const Vector>(best_p.data(), 6);
  report.evaluations = evals;
  return report;
}

}  // namespace flexmpc

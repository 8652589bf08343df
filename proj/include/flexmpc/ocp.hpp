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

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "flexmpc/common.hpp"
#include "flexmpc/lyapunov.hpp"
#include "flexmpc/model.hpp"
#include "flexmpc/nlp.hpp"

namespace flexmpc {

/// Finite-horizon optimal control problem data. The flexible-step transcription
/// adds the average-decrease constraint from the g-dclf; the standard
/// transcription replaces it with a weighted terminal cost.
struct OcpSpec {
  int horizon = 1;  // Np
  std::function<double(const Vector&, const Vector&)> stage_cost;  // positive definite
  std::function<double(const Vector&)> terminal_cost;              // positive semi-definite; unset = 0
  BoxSet input_box;     // U; empty = unconstrained
  BoxSet state_box;     // X
  BoxSet terminal_box;  // X^Np
  GdclfSpec gdclf;

  void validate() const {
    require(horizon >= 1, "OcpSpec: horizon must be at least 1");
    require(static_cast<bool>(stage_cost), "OcpSpec: stage cost must be set");
  }
};

enum class WarmStartPad { Zeros, RepeatLast };

/// Drops the first `implemented` inputs of the previous optimum and appends
/// that many pad entries, preserving length.
inline InputSequence shift_warm_start(const InputSequence& u_star, int implemented,
                                      WarmStartPad pad = WarmStartPad::Zeros) {
  const int n = static_cast<int>(u_star.size());
  require(implemented >= 1 && implemented <= n, "shift_warm_start: invalid shift length");
  InputSequence guess(u_star.begin() + implemented, u_star.end());
  const Vector fill = pad == WarmStartPad::RepeatLast && !u_star.empty()
                          ? u_star.back()
                          : Vector(Vector::Zero(u_star.front().size()));
  for (int i = 0; i < implemented; ++i) guess.push_back(fill);
  return guess;
}

namespace detail {

inline int count_box_rows(const BoxSet& box) {
  if (box.dim() == 0) return 0;
  int rows = 0;
  for (int i = 0; i < box.dim(); ++i) {
    if (std::isfinite(box.upper[i])) ++rows;
    if (std::isfinite(box.lower[i])) ++rows;
  }
  return rows;
}

inline void append_box_rows(const BoxSet& box, const Vector& v, Vector& out, Eigen::Index& at) {
  if (box.dim() == 0) return;
  for (int i = 0; i < box.dim(); ++i) {
    if (std::isfinite(box.upper[i])) out[at++] = v[i] - box.upper[i];
    if (std::isfinite(box.lower[i])) out[at++] = box.lower[i] - v[i];
  }
}

inline void fill_input_bounds(const BoxSet& input_box, int p, int n_steps, NlpInstance& nlp) {
  if (input_box.dim() != p) return;
  if (!input_box.lower.allFinite() && !input_box.upper.allFinite()) {
    bool any = false;
    for (int i = 0; i < p; ++i)
      any = any || std::isfinite(input_box.lower[i]) || std::isfinite(input_box.upper[i]);
    if (!any) return;
  }
  nlp.lower = Vector(nlp.dim);
  nlp.upper = Vector(nlp.dim);
  for (int j = 0; j < n_steps; ++j) {
    nlp.lower.segment(j * p, p) = input_box.lower;
    nlp.upper.segment(j * p, p) = input_box.upper;
  }
}

}  // namespace detail

/// Single-shooting transcription of the flexible-step problem at state x with
/// the previous control window frozen into the adc constraint:
///
///   min  sum_{j<Np} f0(x^j, u^j) + phi(x^Np)
///   s.t. x^{j+1} = f(x^j, u^j), x^0 = x,
///        x^j in X (j = 1..Np-1), x^Np in X^Np, u^j in U,
///        (1/m) sum_l sigma_l V(x^l, u^{l..l+q-1}) - V(x, u_prev) <= -alpha(x, u_prev).
///
/// Decision variables are the N = max(q+m, Np) inputs; when q+m exceeds the
/// horizon, the trailing inputs appear only in the adc constraint. The adc
/// row is the last component of the constraint vector.
inline NlpInstance build_flexstep_nlp(const SystemModel& model, const OcpSpec& spec,
                                      const Vector& x, const InputWindow& u_prev) {
  spec.validate();
  spec.gdclf.validate();
  const int m = spec.gdclf.order;
  const int q = spec.gdclf.window;
  const int Np = spec.horizon;
  const int p = model.input_dim;
  require(m <= Np, "build_flexstep_nlp: order must not exceed the horizon");
  require(q <= Np, "build_flexstep_nlp: window must not exceed the horizon");
  require(x.size() == model.state_dim, "build_flexstep_nlp: state dimension mismatch");
  require(static_cast<int>(u_prev.size()) == q,
          "build_flexstep_nlp: previous window must have length q");
  if (spec.state_box.dim() > 0)
    require(spec.state_box.contains(x, 1e-12), "build_flexstep_nlp: initial state outside X");
  if (spec.input_box.dim() > 0)
    for (const auto& u : u_prev)
      require(spec.input_box.contains(u, 1e-12),
              "build_flexstep_nlp: previous window leaves the input set");

  const int N = std::max(q + m, Np);
  const int interior_rows = detail::count_box_rows(spec.state_box) * std::max(0, Np - 1);
  const int terminal_rows = spec.terminal_box.dim() > 0
                                ? detail::count_box_rows(spec.terminal_box)
                                : detail::count_box_rows(spec.state_box);
  const BoxSet terminal_box = spec.terminal_box.dim() > 0 ? spec.terminal_box : spec.state_box;

  // Frozen left-hand terms of the adc constraint, exactly as the problem
  // statement writes them with the previous strategy.
  const double V_left = spec.gdclf.V(x, u_prev);
  const double alpha_left = spec.gdclf.alpha(x, u_prev);

  NlpInstance nlp;
  nlp.dim = p * N;
  nlp.num_constraints = interior_rows + terminal_rows + 1;
  nlp.x0 = x;
  nlp.u_prev = u_prev;
  detail::fill_input_bounds(spec.input_box, p, N, nlp);

  const SystemModel dynamics = model;
  const GdclfSpec gdclf = spec.gdclf;
  const auto stage = spec.stage_cost;
  const auto terminal = spec.terminal_cost;

  nlp.objective = [dynamics, stage, terminal, x, Np, p](const Vector& z) {
    double cost = 0.0;
    Vector xj = x;
    for (int j = 0; j < Np; ++j) {
      const Vector uj = z.segment(j * p, p);
      cost += stage(xj, uj);
      xj = dynamics.transition(xj, uj);
    }
    if (terminal) cost += terminal(xj);
    return cost;
  };

  const BoxSet state_box = spec.state_box;
  const int n_rows = nlp.num_constraints;
  nlp.constraints = [dynamics, gdclf, state_box, terminal_box, x, u_prev, V_left, alpha_left, Np,
                     p, m, q, n_rows](const Vector& z) {
    Vector residuals(n_rows);
    Eigen::Index at = 0;
    Vector xj = x;
    std::vector<double> Vseq(static_cast<std::size_t>(m));
    for (int j = 1; j <= Np; ++j) {
      const Vector uj = z.segment((j - 1) * p, p);
      xj = dynamics.transition(xj, uj);
      if (j <= m) {
        InputWindow w(static_cast<std::size_t>(q));
        for (int i = 0; i < q; ++i) w[static_cast<std::size_t>(i)] = z.segment((j + i) * p, p);
        Vseq[static_cast<std::size_t>(j) - 1] = gdclf.V(xj, w);
      }
      if (j < Np)
        detail::append_box_rows(state_box, xj, residuals, at);
      else
        detail::append_box_rows(terminal_box, xj, residuals, at);
    }
    residuals[at++] = adc_residual(gdclf, V_left, alpha_left, Vseq);
    return residuals;
  };
  return nlp;
}

/// Standard terminal-cost transcription: same stage cost, gamma * ||x^Np||^2
/// as terminal penalty, no average-decrease constraint, Np decision inputs.
inline NlpInstance build_standard_nlp(const SystemModel& model, const OcpSpec& spec,
                                      const Vector& x, double gamma) {
  spec.validate();
  require(gamma > 0.0, "build_standard_nlp: gamma must be positive");
  require(x.size() == model.state_dim, "build_standard_nlp: state dimension mismatch");
  if (spec.state_box.dim() > 0)
    require(spec.state_box.contains(x, 1e-12), "build_standard_nlp: initial state outside X");

  const int Np = spec.horizon;
  const int p = model.input_dim;

  NlpInstance nlp;
  nlp.dim = p * Np;
  nlp.x0 = x;
  detail::fill_input_bounds(spec.input_box, p, Np, nlp);

  const SystemModel dynamics = model;
  const auto stage = spec.stage_cost;
  nlp.objective = [dynamics, stage, x, Np, p, gamma](const Vector& z) {
    double cost = 0.0;
    Vector xj = x;
    for (int j = 0; j < Np; ++j) {
      const Vector uj = z.segment(j * p, p);
      cost += stage(xj, uj);
      xj = dynamics.transition(xj, uj);
    }
    return cost + gamma * xj.squaredNorm();
  };

  const int state_rows = detail::count_box_rows(spec.state_box) * Np;
  if (state_rows > 0) {
    const BoxSet state_box = spec.state_box;
    nlp.num_constraints = state_rows;
    nlp.constraints = [dynamics, state_box, x, Np, p, state_rows](const Vector& z) {
      Vector residuals(state_rows);
      Eigen::Index at = 0;
      Vector xj = x;
      for (int j = 1; j <= Np; ++j) {
        xj = dynamics.transition(xj, z.segment((j - 1) * p, p));
        detail::append_box_rows(state_box, xj, residuals, at);
      }
      return residuals;
    };
  }
  return nlp;
}

}  // namespace flexmpc

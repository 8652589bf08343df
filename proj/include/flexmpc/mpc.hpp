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
#include <limits>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "flexmpc/common.hpp"
#include "flexmpc/lyapunov.hpp"
#include "flexmpc/model.hpp"
#include "flexmpc/nlp.hpp"
#include "flexmpc/ocp.hpp"

namespace flexmpc {

/// One solved optimization instance of a closed-loop run.
struct InstanceRecord {
  int instance_id = 0;
  int k_start = 0;
  Vector x;                    // state when the instance was solved
  InputWindow u_prev;          // previous control window frozen into the adc
  InputSequence u_star;        // full optimal input sequence (length N)
  std::vector<double> V_pred;  // V_0..V_m along the predicted optimum
  int l_decr = 0;              // implemented steps
  double adc_value = 0.0;      // adc constraint value at the solution (NaN for standard runs)
  NlpResult solve;
};

/// One implemented closed-loop step: input u(k) applied at state x(k).
struct StepRecord {
  int k = 0;
  Vector x;
  Vector u;
};

/// Full closed-loop record. The augmented pairs y(k) of the time-varying
/// formulation are derivable from the per-instance records via
/// augmented_log().
struct MpcTrace {
  std::vector<InstanceRecord> instances;
  std::vector<StepRecord> steps;
  Vector final_state;
  int k_start = 0;
  int k_final = 0;
  InputWindow final_window;  // u_prev after the last instance
  bool stopped_by_radius = false;

  // Evaluators carried along for reporting.
  std::function<double(const Vector&, const Vector&)> stage_cost;
  std::function<double(const Vector&, const InputWindow&)> V;
  int gdclf_window = 0;

  int total_implemented() const { return k_final - k_start; }
};

/// Raised when a closed-loop run cannot continue; carries whatever trace was
/// accumulated so callers can flush partial artifacts.
class FlexStepAbort : public std::runtime_error {
 public:
  FlexStepAbort(const std::string& what, MpcTrace partial)
      : std::runtime_error(what), trace(std::move(partial)) {}
  MpcTrace trace;
};

enum class WindowUpdate {
  ShiftOptimal,       // Algorithm step five: u_prev := u*[l_decr : q+l_decr-1]
  SearchAlternative,  // bounded random-restart search for a fresh window
};

struct FlexStepConfig {
  DescentPolicy policy = DescentPolicy::GreatestDescent;
  WindowUpdate window_update = WindowUpdate::ShiftOptimal;
  InputWindow u_prev_init;      // empty means a zero window of length q
  InputSequence initial_guess;  // empty means zeros
  WarmStartPad warm_pad = WarmStartPad::Zeros;
  int max_steps = 300;
  double stop_radius = 1e-3;  // infinity-norm threshold on the state
  double descent_tol = kDescentFeastol;
  int k_start = 0;

  /// Model used inside the optimization (e.g. with the softened |x4|).
  /// The closed loop itself always steps the plant model exactly.
  std::optional<SystemModel> prediction_model;

  /// Tighten the solver feasibility/optimality tolerances per instance in
  /// proportion to the current Lyapunov value. Without this, an absolute
  /// tolerance becomes coarser than the constraint itself once the state is
  /// small and the descent selection starves.
  bool scale_tolerances = true;

  /// Deterministic rescue solves used when the nominal solve cannot reduce
  /// the predicted Lyapunov values. Near the origin the warm start decays to
  /// zero controls, a stationary point of bilinear steering terms, so the
  /// engine re-seeds the solver from the last contracting solution rescaled
  /// to the current Lyapunov level, plus a few seeded random points.
  int contraction_restarts = 6;
  unsigned restart_seed = 0x5eed;

  int alt_window_restarts = 50;
  unsigned alt_window_seed = 7;
  double alt_window_scale = 5.0;
};

namespace detail {

inline InputWindow slice_window(const InputSequence& seq, int from, int q) {
  InputWindow w(static_cast<std::size_t>(q));
  for (int i = 0; i < q; ++i) w[static_cast<std::size_t>(i)] = seq[static_cast<std::size_t>(from + i)];
  return w;
}

/// Per-instance solver tolerances. Feasibility must be resolved on two
/// scales at once: relative to the current Lyapunov value (an absolute
/// tolerance says nothing once V is small), and tightly enough that a
/// solution within tolerance still admits a descent index. With weight mean
/// sbar, an adc violation v leaves min_l V_l <= (V0 - alpha0 + v)/sbar, so
/// descent within descent_tol is guaranteed when
///   v <= sbar*descent_tol + (sbar - 1)*(V0 - alpha0).
inline SolverOptions instance_options(const SolverOptions& base, bool scale, double V0,
                                      double alpha0, double sigma_mean, double descent_tol) {
  SolverOptions opts = base;
  if (scale) {
    const double v_required =
        sigma_mean * descent_tol + (sigma_mean - 1.0) * std::max(0.0, V0 - alpha0);
    opts.feastol = std::min({base.feastol, std::max(V0 * 1e-3, 1e-18),
                             std::max(0.5 * v_required, 1e-18)});
    opts.opttol = std::min(base.opttol, std::max(V0 * 1e-3, 1e-9));
  }
  opts.trace_csv.clear();
  return opts;
}

/// Remark-3 style update: search a fresh window achieving the same descent
/// inequality the shifted window satisfies. Falls back to the shift when the
/// budget is exhausted.
inline InputWindow search_alternative_window(const SystemModel& model, const OcpSpec& spec,
                                             const Vector& x_new, double V_left, double alpha_left,
                                             const InputWindow& shifted,
                                             const FlexStepConfig& cfg, double tol) {
  const int q = spec.gdclf.window;
  if (q == 0) return {};
  auto feasible = [&](const InputWindow& w) {
    Vector xj = x_new;
    for (const auto& u : w) {
      if (spec.input_box.dim() > 0 && !spec.input_box.contains(u, 1e-12)) return false;
      xj = step(model, xj, u);
      if (spec.state_box.dim() > 0 && !spec.state_box.contains(xj, 1e-12)) return false;
    }
    return true;
  };
  auto achieves_descent = [&](const InputWindow& w) {
    return spec.gdclf.V(x_new, w) - V_left <= -alpha_left + tol;
  };

  InputWindow zero(static_cast<std::size_t>(q), Vector::Zero(model.input_dim));
  if (feasible(zero) && achieves_descent(zero)) return zero;

  std::mt19937_64 rng(cfg.alt_window_seed);
  std::uniform_real_distribution<double> uni(-cfg.alt_window_scale, cfg.alt_window_scale);
  for (int r = 0; r < cfg.alt_window_restarts; ++r) {
    InputWindow w(static_cast<std::size_t>(q));
    for (int i = 0; i < q; ++i) {
      Vector u(model.input_dim);
      for (int j = 0; j < model.input_dim; ++j) u[j] = uni(rng);
      if (spec.input_box.dim() > 0) u = spec.input_box.clamp(u);
      w[static_cast<std::size_t>(i)] = u;
    }
    if (feasible(w) && achieves_descent(w)) return w;
  }
  return shifted;
}

}  // namespace detail

/// Flexible-step closed loop: repeatedly solve the flexible-step problem at
/// the current state, select a descent index among the predicted Lyapunov
/// values, implement that many inputs through the plant, shift the control
/// window, and advance time by the implemented count. Runs until the state
/// infinity norm falls to stop_radius or max_steps elapse.
inline MpcTrace flexible_step_run(const SystemModel& model, const OcpSpec& spec, const Vector& x0,
                                  const FlexStepConfig& cfg, const SolverOptions& opts = {}) {
  spec.validate();
  spec.gdclf.validate();
  require(x0.size() == model.state_dim, "flexible_step_run: state dimension mismatch");
  const int m = spec.gdclf.order;
  const int q = spec.gdclf.window;
  const int p = model.input_dim;
  const int N = std::max(q + m, spec.horizon);

  const SystemModel& plant = model;
  const SystemModel predictor = cfg.prediction_model ? *cfg.prediction_model : model;

  MpcTrace trace;
  trace.k_start = cfg.k_start;
  trace.k_final = cfg.k_start;
  trace.stage_cost = spec.stage_cost;
  trace.V = spec.gdclf.V;
  trace.gdclf_window = q;

  InputWindow u_prev = cfg.u_prev_init;
  if (u_prev.empty() && q > 0) u_prev.assign(static_cast<std::size_t>(q), Vector::Zero(p));
  require(static_cast<int>(u_prev.size()) == q,
          "flexible_step_run: initial window must have length q");

  InputSequence guess = cfg.initial_guess;
  if (guess.empty()) guess.assign(static_cast<std::size_t>(N), Vector::Zero(p));
  require(static_cast<int>(guess.size()) == N,
          "flexible_step_run: initial guess must have length max(q+m, Np)");

  Vector x = x0;
  int k = cfg.k_start;
  Vector last_contraction;        // stacked controls of the latest contracting solve
  double last_contraction_V = 0.0;

  while (true) {
    if (x.lpNorm<Eigen::Infinity>() <= cfg.stop_radius) {
      trace.stopped_by_radius = true;
      break;
    }
    if (k - cfg.k_start >= cfg.max_steps) break;

    const NlpInstance instance = build_flexstep_nlp(predictor, spec, x, u_prev);
    const double V0 = spec.gdclf.V(x, u_prev);
    const double alpha0 = spec.gdclf.alpha(x, u_prev);
    double sigma_mean = 0.0;
    for (double s : spec.gdclf.sigma) sigma_mean += s;
    sigma_mean /= m;
    SolverOptions run_opts = detail::instance_options(opts, cfg.scale_tolerances, V0, alpha0,
                                                      sigma_mean, cfg.descent_tol);

    auto predict = [&](const Vector& z) {
      const InputSequence u_full = unstack_inputs(z, p);
      std::vector<double> V_pred(static_cast<std::size_t>(m) + 1);
      V_pred[0] = V0;
      Vector xp = x;
      for (int l = 1; l <= m; ++l) {
        xp = step(predictor, xp, u_full[static_cast<std::size_t>(l) - 1]);
        V_pred[static_cast<std::size_t>(l)] =
            spec.gdclf.V(xp, detail::slice_window(u_full, l, q));
      }
      return std::pair<InputSequence, std::vector<double>>(u_full, V_pred);
    };
    auto min_tail = [m](const std::vector<double>& V_pred) {
      double v = V_pred[1];
      for (int l = 2; l <= m; ++l) v = std::min(v, V_pred[static_cast<std::size_t>(l)]);
      return v;
    };

    // A solver "infeasible" verdict is not grounds to stop by itself: the
    // per-instance tolerance can be tightened past what floating point can
    // deliver. The descent selection below is the actual gate.
    NlpResult sol = minimize(instance, stack_inputs(guess), run_opts);
    auto [u_full, V_pred] = predict(sol.z_star);

    // When the solve ran out of budget without finding any real reduction of
    // the predicted values, re-seed it away from the zero-control saddle and
    // keep the best outcome. The first candidates rescale the most recent
    // contracting solution to the current level (controls of the bilinear
    // steering scale like V^(1/4)); seeded random points follow.
    const bool solver_struggled =
        sol.status == SolveStatus::Infeasible || sol.status == SolveStatus::BudgetExhausted;
    if (solver_struggled && min_tail(V_pred) > 0.9 * V0 && cfg.contraction_restarts > 0) {
      std::mt19937_64 rng(cfg.restart_seed ^ (0x9e3779b97f4a7c15ull * (k + 1)));
      const double scale = 3.0 * std::pow(std::max(V0, 1e-300), 0.25);
      std::uniform_real_distribution<double> uni(-scale, scale);
      SolverOptions ropts = run_opts;
      ropts.max_outer = std::max(10, run_opts.max_outer / 2);
      ropts.max_inner = std::max(100, run_opts.max_inner / 2);

      std::vector<Vector> seeds;
      if (last_contraction_V > 0.0 && last_contraction.size() > 0) {
        const double ratio = std::pow(V0 / last_contraction_V, 0.25);
        seeds.push_back(ratio * last_contraction);
        seeds.push_back(-ratio * last_contraction);
      }
      while (static_cast<int>(seeds.size()) < cfg.contraction_restarts) {
        Vector zr(instance.dim);
        for (int i = 0; i < instance.dim; ++i) zr[i] = uni(rng);
        seeds.push_back(zr);
      }

      bool have_contraction = false;
      for (const Vector& zr : seeds) {
        const NlpResult alt = minimize(instance, zr, ropts);
        const auto [u_alt, V_alt] = predict(alt.z_star);
        const bool contracts = min_tail(V_alt) <= 0.9 * V0;
        const bool adopt = have_contraction
                               ? (contracts && alt.max_violation < sol.max_violation)
                               : (contracts || alt.max_violation < sol.max_violation);
        if (adopt) {
          sol = alt;
          u_full = u_alt;
          V_pred = V_alt;
          have_contraction = have_contraction || contracts;
          if (contracts && sol.max_violation <= run_opts.feastol) break;
        }
      }
    }

    std::vector<double> V_tail(V_pred.begin() + 1, V_pred.end());
    DescentReport report;
    try {
      report = select_index(V0, alpha0, V_tail, cfg.policy, cfg.descent_tol);
    } catch (const DescentNotFound&) {
      // One retry at tighter tolerances distinguishes solver slack from a
      // genuinely infeasible descent.
      SolverOptions tight = run_opts;
      tight.feastol /= 10.0;
      tight.opttol /= 10.0;
      sol = minimize(instance, sol.z_star, tight);
      std::tie(u_full, V_pred) = predict(sol.z_star);
      V_tail.assign(V_pred.begin() + 1, V_pred.end());
      try {
        report = select_index(V0, alpha0, V_tail, cfg.policy, cfg.descent_tol);
      } catch (const DescentNotFound& retry_fail) {
        trace.final_state = x;
        trace.final_window = u_prev;
        trace.k_final = k;
        throw FlexStepAbort("flexible_step_run: no descent index at k=" + std::to_string(k) +
                                " (best margin " + std::to_string(retry_fail.best_margin) + ")",
                            trace);
      }
    }
    const int l = report.chosen;

    if (min_tail(V_pred) <= 0.9 * V0) {
      last_contraction = sol.z_star;
      last_contraction_V = V0;
    }

    InstanceRecord rec;
    rec.instance_id = static_cast<int>(trace.instances.size());
    rec.k_start = k;
    rec.x = x;
    rec.u_prev = u_prev;
    rec.u_star = u_full;
    rec.V_pred = V_pred;
    rec.l_decr = l;
    rec.adc_value = instance.constraints(sol.z_star)[instance.num_constraints - 1];
    rec.solve = sol;
    trace.instances.push_back(rec);

    for (int i = 0; i < l; ++i) {
      const Vector& u = u_full[static_cast<std::size_t>(i)];
      trace.steps.push_back({k + i, x, u});
      x = step(plant, x, u);
    }

    InputWindow shifted = detail::slice_window(u_full, l, q);
    if (cfg.window_update == WindowUpdate::SearchAlternative)
      u_prev = detail::search_alternative_window(predictor, spec, x, V0, alpha0, shifted, cfg,
                                                 cfg.descent_tol);
    else
      u_prev = shifted;

    guess = shift_warm_start(u_full, l, cfg.warm_pad);
    k += l;
  }

  trace.final_state = x;
  trace.final_window = u_prev;
  trace.k_final = k;
  return trace;
}

/// Fixed-step baseline: solve the standard terminal-cost problem and always
/// implement steps_per_instance inputs.
inline MpcTrace standard_run(const SystemModel& model, const OcpSpec& spec, const Vector& x0,
                             double gamma, int steps_per_instance, int max_steps,
                             const SolverOptions& opts = {}) {
  spec.validate();
  require(x0.size() == model.state_dim, "standard_run: state dimension mismatch");
  require(steps_per_instance >= 1 && steps_per_instance <= spec.horizon,
          "standard_run: steps per instance must lie in [1, Np]");

  const int p = model.input_dim;
  MpcTrace trace;
  trace.stage_cost = spec.stage_cost;
  if (spec.gdclf.V)
    trace.V = spec.gdclf.V;
  else
    trace.V = [](const Vector& s, const InputWindow&) { return s.squaredNorm(); };
  trace.gdclf_window = 0;

  InputSequence guess(static_cast<std::size_t>(spec.horizon), Vector::Zero(p));
  Vector x = x0;
  int k = 0;

  while (k < max_steps) {
    const NlpInstance instance = build_standard_nlp(model, spec, x, gamma);
    NlpResult sol = minimize(instance, stack_inputs(guess), opts);
    if (sol.status == SolveStatus::Infeasible) {
      trace.final_state = x;
      trace.k_final = k;
      throw FlexStepAbort("standard_run: solver reported infeasible at k=" + std::to_string(k),
                          trace);
    }
    const InputSequence u_full = unstack_inputs(sol.z_star, p);

    InstanceRecord rec;
    rec.instance_id = static_cast<int>(trace.instances.size());
    rec.k_start = k;
    rec.x = x;
    rec.u_star = u_full;
    rec.l_decr = steps_per_instance;
    rec.adc_value = std::numeric_limits<double>::quiet_NaN();
    rec.solve = sol;
    rec.V_pred = {trace.V(x, {})};
    trace.instances.push_back(rec);

    for (int i = 0; i < steps_per_instance; ++i) {
      const Vector& u = u_full[static_cast<std::size_t>(i)];
      trace.steps.push_back({k + i, x, u});
      x = step(model, x, u);
    }
    guess = shift_warm_start(u_full, steps_per_instance, WarmStartPad::Zeros);
    k += steps_per_instance;
  }

  trace.final_state = x;
  trace.k_final = k;
  return trace;
}

/// Running closed-loop cost sum_{j<k} f0(x(j), u(j)) with the stage cost the
/// trace was produced with.
inline double total_cost(const MpcTrace& trace, int k) {
  require(k >= 0 && k <= static_cast<int>(trace.steps.size()),
          "total_cost: k exceeds the trace length");
  require(static_cast<bool>(trace.stage_cost), "total_cost: trace has no stage cost");
  double cost = 0.0;
  for (int j = 0; j < k; ++j) cost += trace.stage_cost(trace.steps[static_cast<std::size_t>(j)].x,
                                                       trace.steps[static_cast<std::size_t>(j)].u);
  return cost;
}

/// Lyapunov values at the optimization instances, V(x(k_n), u_prev(k_n)).
/// Along a successful flexible-step run this sequence is strictly decreasing.
inline std::vector<double> lyapunov_subsequence(const MpcTrace& trace) {
  std::vector<double> values;
  values.reserve(trace.instances.size());
  for (const auto& inst : trace.instances) {
    if (!inst.V_pred.empty())
      values.push_back(inst.V_pred[0]);
    else
      values.push_back(trace.V(inst.x, inst.u_prev));
  }
  return values;
}

/// Piecewise-constant augmented pairs y(k) = (x(k_n), u_prev(k_n)): each
/// instance contributes l_decr copies, so the log has exactly one entry per
/// implemented step and none for the final state (no optimization occurs
/// there once the run has ended).
inline std::vector<std::pair<Vector, InputWindow>> augmented_log(const MpcTrace& trace) {
  std::vector<std::pair<Vector, InputWindow>> y;
  y.reserve(static_cast<std::size_t>(trace.total_implemented()));
  for (const auto& inst : trace.instances)
    for (int i = 0; i < inst.l_decr; ++i) y.emplace_back(inst.x, inst.u_prev);
  return y;
}

}  // namespace flexmpc

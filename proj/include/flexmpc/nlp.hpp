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
#include <cstdio>
#include <deque>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <string>

#include "flexmpc/common.hpp"

namespace flexmpc {

/// Smooth constrained program over a real decision vector:
///
///   min  objective(z)   s.t.  constraints(z) <= 0 componentwise,
///                             lower <= z <= upper.
///
/// Objective and constraints must be pure functions of z: the builder freezes
/// any problem data (initial state, previous control window) into the
/// closures, and that metadata is kept here for inspection.
struct NlpInstance {
  int dim = 0;
  std::function<double(const Vector&)> objective;
  std::function<Vector(const Vector&)> constraints;  // unset means unconstrained
  int num_constraints = 0;
  Vector lower;  // box bounds on z; empty means unbounded
  Vector upper;

  // Frozen metadata of the optimal-control instance this program came from.
  Vector x0;
  InputWindow u_prev;
};

struct SolverOptions {
  double fd_step = 1e-6;
  double feastol = 1e-6;
  double opttol = 1e-5;
  int max_outer = 50;
  int max_inner = 500;
  double penalty_init = 10.0;
  double penalty_growth = 10.0;
  /// Optional softening of |.| inside model evaluations during solves. The
  /// solver itself never reads this; the closed-loop harness uses it to build
  /// the prediction model. Simulation always uses the exact dynamics.
  double smooth_abs_delta = 0.0;
  /// When set, appends one line per accepted inner iterate:
  /// outer,inner,objective,violation,penalty,merit
  std::string trace_csv;

  void validate() const {
    require(fd_step > 0.0 && feastol > 0.0 && opttol > 0.0,
            "SolverOptions: tolerances must be positive");
    require(penalty_growth > 1.0, "SolverOptions: penalty_growth must exceed 1");
    require(max_outer >= 1 && max_inner >= 1, "SolverOptions: iteration budgets must be positive");
  }
};

enum class SolveStatus { Optimal, FeasibleSuboptimal, Infeasible, BudgetExhausted };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::FeasibleSuboptimal: return "feasible-suboptimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::BudgetExhausted: return "budget-exhausted";
  }
  return "unknown";
}

struct NlpResult {
  Vector z_star;
  double objective = 0.0;
  double max_violation = 0.0;
  double stationarity = 0.0;  // projected merit-gradient infinity norm at z_star
  SolveStatus status = SolveStatus::BudgetExhausted;
  int outer_iterations = 0;
  int inner_iterations = 0;
  std::int64_t evaluations = 0;
};

/// Thrown when the starting point evaluates to a non-finite objective or
/// constraint value.
class InvalidStart : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Central finite differences, componentwise.
inline Vector gradient_fd(const std::function<double(const Vector&)>& fn, const Vector& z,
                          double step) {
  require(step > 0.0, "gradient_fd: step must be positive");
  Vector g(z.size());
  Vector probe = z;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    probe[i] = z[i] + step;
    const double fp = fn(probe);
    probe[i] = z[i] - step;
    const double fm = fn(probe);
    probe[i] = z[i];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::runtime_error("gradient_fd: non-finite sample at component " + std::to_string(i));
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

namespace detail {

struct MeritEval {
  double merit = 0.0;
  double objective = 0.0;
  Vector cons;  // empty when unconstrained
};

class AugLagSolver {
 public:
  AugLagSolver(const NlpInstance& p, const SolverOptions& opts) : p_(p), opts_(opts) {
    bounded_ = p_.lower.size() == p_.dim && p_.upper.size() == p_.dim;
  }

  NlpResult run(Vector z) {
    if (bounded_) z = clamp(z);
    lambda_ = Vector::Zero(p_.num_constraints);
    mu_ = opts_.penalty_init;

    MeritEval e0 = evaluate(z);
    if (!std::isfinite(e0.objective) || (e0.cons.size() > 0 && !e0.cons.allFinite()))
      throw InvalidStart("minimize: non-finite objective or constraint at the starting point");

    std::ofstream trace;
    if (!opts_.trace_csv.empty()) {
      trace.open(opts_.trace_csv);
      trace << "outer,inner,objective,violation,penalty,merit\n";
    }

    consider_best(z, e0);

    double v_prev = std::numeric_limits<double>::infinity();
    int stalled_rounds = 0;
    double stationarity = std::numeric_limits<double>::infinity();
    int outer = 0;
    for (; outer < opts_.max_outer; ++outer) {
      stationarity = inner_minimize(z, outer, trace);
      MeritEval e = evaluate(z);
      consider_best(z, e);
      const double v = violation(e.cons);

      if (v <= opts_.feastol && stationarity <= opts_.opttol) {
        finalize(z, e, stationarity, outer + 1, SolveStatus::Optimal);
        return result_;
      }

      // Multiplier update, then penalty growth unless feasibility improved
      // substantially over the previous round.
      for (Eigen::Index i = 0; i < lambda_.size(); ++i)
        lambda_[i] = std::max(0.0, lambda_[i] + mu_ * e.cons[i]);
      if (v > opts_.feastol) {
        // Growth stops once the penalty saturates; past that point only the
        // multiplier updates can make progress and a larger mu merely makes
        // the merit surface hostile to the line search.
        if (v > 0.25 * v_prev && mu_ < 1e20) mu_ *= opts_.penalty_growth;
        if (v > 0.9 * v_prev)
          ++stalled_rounds;
        else
          stalled_rounds = 0;
      }
      v_prev = v;
    }

    MeritEval e = evaluate(z);
    consider_best(z, e);
    const double v = violation(e.cons);
    SolveStatus status;
    if (v <= opts_.feastol) {
      status = SolveStatus::FeasibleSuboptimal;
    } else if (stalled_rounds >= 3) {
      status = SolveStatus::Infeasible;
    } else {
      status = SolveStatus::BudgetExhausted;
    }
    finalize(z, e, stationarity, outer, status);
    return result_;
  }

 private:
  Vector clamp(const Vector& z) const {
    return bounded_ ? Vector(z.cwiseMax(p_.lower).cwiseMin(p_.upper)) : z;
  }

  MeritEval evaluate(const Vector& z) {
    MeritEval e;
    ++evals_;
    e.objective = p_.objective(z);
    e.merit = e.objective;
    if (p_.constraints && p_.num_constraints > 0) {
      e.cons = p_.constraints(z);
      for (Eigen::Index i = 0; i < e.cons.size(); ++i) {
        const double t = lambda_[i] + mu_ * e.cons[i];
        if (t > 0.0)
          e.merit += (t * t - lambda_[i] * lambda_[i]) / (2.0 * mu_);
        else
          e.merit -= lambda_[i] * lambda_[i] / (2.0 * mu_);
      }
    }
    return e;
  }

  double merit_only(const Vector& z) { return evaluate(z).merit; }

  static double violation(const Vector& cons) {
    double v = 0.0;
    for (Eigen::Index i = 0; i < cons.size(); ++i) v = std::max(v, cons[i]);
    return v;
  }

  Vector projected_gradient(const Vector& z, const Vector& g) const {
    if (!bounded_) return g;
    Vector pg = g;
    const double eps = 1e-12;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      if (z[i] <= p_.lower[i] + eps && g[i] > 0.0) pg[i] = 0.0;
      if (z[i] >= p_.upper[i] - eps && g[i] < 0.0) pg[i] = 0.0;
    }
    return pg;
  }

  /// Limited-memory quasi-Newton descent on the current merit function.
  /// Returns the projected-gradient infinity norm at the final iterate.
  double inner_minimize(Vector& z, int outer, std::ofstream& trace) {
    auto merit_fn = [this](const Vector& y) { return merit_only(y); };

    std::deque<std::pair<Vector, Vector>> memory;  // (s, y) pairs
    constexpr std::size_t kMemory = 10;

    MeritEval e = evaluate(z);
    Vector g = gradient_fd(merit_fn, z, opts_.fd_step);
    double pg_norm = projected_gradient(z, g).lpNorm<Eigen::Infinity>();

    for (int inner = 0; inner < opts_.max_inner; ++inner) {
      if (pg_norm <= opts_.opttol) break;

      Vector d = lbfgs_direction(memory, g);
      if (d.dot(g) >= 0.0) {  // not a descent direction; fall back to steepest descent
        memory.clear();
        d = -g;
      }

      // Armijo backtracking with halving; projection keeps iterates in bounds.
      double t = 1.0;
      Vector z_new;
      MeritEval e_new;
      bool moved = false;
      for (int halve = 0; halve < 40; ++halve) {
        z_new = clamp(z + t * d);
        e_new = evaluate(z_new);
        const double pred = g.dot(z_new - z);
        if (std::isfinite(e_new.merit) && e_new.merit <= e.merit + 1e-4 * pred && pred < 0.0) {
          moved = true;
          break;
        }
        t *= 0.5;
      }
      if (!moved) break;

      Vector g_new = gradient_fd(merit_fn, z_new, opts_.fd_step);
      const Vector s = z_new - z;
      const Vector y = g_new - g;
      const double sy = s.dot(y);
      if (sy > 1e-12 * s.norm() * y.norm()) {
        memory.emplace_back(s, y);
        if (memory.size() > kMemory) memory.pop_front();
      }

      z = z_new;
      e = e_new;
      g = g_new;
      ++total_inner_;
      consider_best(z, e);
      pg_norm = projected_gradient(z, g).lpNorm<Eigen::Infinity>();

      if (trace.is_open()) {
        char line[160];
        std::snprintf(line, sizeof line, "%d,%d,%.17g,%.17g,%.17g,%.17g\n", outer, inner,
                      e.objective, violation(e.cons), mu_, e.merit);
        trace << line;
      }
    }
    return pg_norm;
  }

  static Vector lbfgs_direction(const std::deque<std::pair<Vector, Vector>>& memory,
                                const Vector& g) {
    Vector q = -g;
    if (memory.empty()) return q;
    std::vector<double> alpha(memory.size());
    for (std::size_t i = memory.size(); i-- > 0;) {
      const auto& [s, y] = memory[i];
      const double rho = 1.0 / s.dot(y);
      alpha[i] = rho * s.dot(q);
      q -= alpha[i] * y;
    }
    const auto& [s_last, y_last] = memory.back();
    q *= s_last.dot(y_last) / y_last.dot(y_last);
    for (std::size_t i = 0; i < memory.size(); ++i) {
      const auto& [s, y] = memory[i];
      const double rho = 1.0 / s.dot(y);
      const double beta = rho * y.dot(q);
      q += (alpha[i] - beta) * s;
    }
    return q;
  }

  void consider_best(const Vector& z, const MeritEval& e) {
    const double v = violation(e.cons);
    if (v <= opts_.feastol) {
      if (!best_feasible_ || e.objective < best_feasible_obj_) {
        best_feasible_ = z;
        best_feasible_obj_ = e.objective;
        best_feasible_violation_ = v;
      }
    } else if (!best_infeasible_ || v < best_infeasible_violation_) {
      best_infeasible_ = z;
      best_infeasible_obj_ = e.objective;
      best_infeasible_violation_ = v;
    }
  }

  void finalize(const Vector& z, const MeritEval& e, double stationarity, int outers,
                SolveStatus status) {
    result_.outer_iterations = outers;
    result_.inner_iterations = total_inner_;
    result_.evaluations = evals_;
    result_.stationarity = stationarity;
    // Prefer the best feasible iterate seen; a feasible warm start is then
    // never degraded. The final iterate is kept when it ties that point.
    const bool z_feasible = violation(e.cons) <= opts_.feastol;
    if (z_feasible && (!best_feasible_ || e.objective <= best_feasible_obj_)) {
      result_.z_star = z;
      result_.objective = e.objective;
      result_.max_violation = violation(e.cons);
      result_.status = status;
    } else if (best_feasible_) {
      result_.z_star = *best_feasible_;
      result_.objective = best_feasible_obj_;
      result_.max_violation = best_feasible_violation_;
      result_.status = SolveStatus::FeasibleSuboptimal;
    } else if (best_infeasible_ && best_infeasible_violation_ < violation(e.cons)) {
      // Nothing reached the tolerance; the closest-to-feasible iterate is a
      // better answer than wherever the final wander ended.
      result_.z_star = *best_infeasible_;
      result_.objective = best_infeasible_obj_;
      result_.max_violation = best_infeasible_violation_;
      result_.status = status;
    } else {
      result_.z_star = z;
      result_.objective = e.objective;
      result_.max_violation = violation(e.cons);
      result_.status = status;
    }
  }

  const NlpInstance& p_;
  SolverOptions opts_;
  bool bounded_ = false;
  Vector lambda_;
  double mu_ = 1.0;
  std::int64_t evals_ = 0;
  int total_inner_ = 0;
  std::optional<Vector> best_feasible_;
  double best_feasible_obj_ = std::numeric_limits<double>::infinity();
  double best_feasible_violation_ = 0.0;
  std::optional<Vector> best_infeasible_;
  double best_infeasible_obj_ = std::numeric_limits<double>::infinity();
  double best_infeasible_violation_ = std::numeric_limits<double>::infinity();
  NlpResult result_;
};

}  // namespace detail

/// Augmented-Lagrangian minimization of an NlpInstance from a starting guess.
/// Deterministic: identical inputs and options produce identical iterates.
inline NlpResult minimize(const NlpInstance& instance, const Vector& guess,
                          const SolverOptions& opts = {}) {
  opts.validate();
  require(guess.size() == instance.dim, "minimize: guess dimension mismatch");
  require(static_cast<bool>(instance.objective), "minimize: instance has no objective");
  detail::AugLagSolver solver(instance, opts);
  return solver.run(guess);
}

}  // namespace flexmpc

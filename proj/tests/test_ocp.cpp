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
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "flexmpc/model.hpp"
#include "flexmpc/nlp.hpp"
#include "flexmpc/ocp.hpp"

using namespace flexmpc;

namespace {

OcpSpec problem3_spec() {
  OcpSpec spec;
  spec.horizon = 10;
  spec.stage_cost = [](const Vector& x, const Vector& u) {
    return x.squaredNorm() + 5.0 * u.squaredNorm();
  };
  spec.gdclf.order = 10;
  spec.gdclf.window = 0;
  spec.gdclf.sigma = {0, 0, 5.5, 5.5, 5.5, 5.5, 0, 0, 0, 0};
  spec.gdclf.V = [](const Vector& x, const InputWindow&) { return x.squaredNorm(); };
  spec.gdclf.alpha = [](const Vector& x, const InputWindow&) {
    const double n2 = x.squaredNorm();
    return 1e-5 * n2 * n2;
  };
  return spec;
}

Vector paper_x0() {
  Vector x(4);
  x << 1, 2, 3, 5;
  return x;
}

/// Positive definite Lyapunov candidate in (x, u-window) for q = Np tests.
GdclfSpec objective_style_gdclf(int q) {
  GdclfSpec g;
  g.order = 1;
  g.window = q;
  g.sigma = {1.0};
  g.V = [](const Vector& x, const InputWindow& w) {
    double v = x.squaredNorm();
    for (const auto& u : w) v += 0.5 * u.squaredNorm();
    return v;
  };
  g.alpha = [](const Vector& x, const InputWindow& w) {
    double v = x.squaredNorm();
    for (const auto& u : w) v += 0.5 * u.squaredNorm();
    return 1e-6 * v;
  };
  return g;
}

}  // namespace

TEST_CASE("flexible-step transcription of the case study") {
  const SystemModel sys = brockett_variant();
  const OcpSpec spec = problem3_spec();
  const NlpInstance nlp = build_flexstep_nlp(sys, spec, paper_x0(), {});

  REQUIRE(nlp.dim == 20);               // max(q+m, Np) = 10 inputs of dimension 2
  REQUIRE(nlp.num_constraints == 1);    // the adc row only; no boxes configured
  REQUIRE(nlp.lower.size() == 0);       // unconstrained inputs
  REQUIRE(nlp.x0 == paper_x0());
  REQUIRE(nlp.u_prev.empty());

  // The zero decision vector leaves the state drifting; objective is finite
  // and the adc row is positive (descent requires effort from this state).
  const Vector z0 = Vector::Zero(20);
  REQUIRE(std::isfinite(nlp.objective(z0)));
  REQUIRE(nlp.constraints(z0).size() == 1);
}

TEST_CASE("equilibrium instance is feasible at zero") {
  const SystemModel sys = brockett_variant();
  const OcpSpec spec = problem3_spec();
  const NlpInstance nlp = build_flexstep_nlp(sys, spec, Vector::Zero(4), {});
  const Vector z0 = Vector::Zero(20);
  REQUIRE(nlp.objective(z0) == 0.0);
  REQUIRE(nlp.constraints(z0)[0] <= 0.0);
}

TEST_CASE("adc row agrees with the lyapunov-module residual") {
  const SystemModel sys = brockett_variant();
  const OcpSpec spec = problem3_spec();
  const Vector x = paper_x0();
  const NlpInstance nlp = build_flexstep_nlp(sys, spec, x, {});

  const double V0 = spec.gdclf.V(x, {});
  const double alpha0 = spec.gdclf.alpha(x, {});

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> uni(-3.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    Vector z(20);
    for (int i = 0; i < 20; ++i) z[i] = uni(rng);
    const auto states = rollout(sys, x, unstack_inputs(z, 2));
    std::vector<double> Vseq;
    for (int l = 1; l <= spec.gdclf.order; ++l)
      Vseq.push_back(spec.gdclf.V(states[static_cast<std::size_t>(l)], {}));
    const double expected = adc_residual(spec.gdclf, V0, alpha0, Vseq);
    const double actual = nlp.constraints(z)[0];
    REQUIRE_THAT(actual, Catch::Matchers::WithinAbs(expected, 1e-12 * (1.0 + std::abs(expected))));
  }
}

TEST_CASE("order-one window-Np transcription matches the one-step constraint") {
  // With m = 1, sigma = [1], q = Np the adc row must equal
  // V(x^1, [u^1..u^Np]) - V(x^0, u_prev) + alpha(x^0, u_prev).
  const SystemModel sys = brockett_variant();
  OcpSpec spec = problem3_spec();
  const int Np = spec.horizon;
  spec.gdclf = objective_style_gdclf(Np);

  const Vector x = paper_x0();
  InputWindow u_prev(static_cast<std::size_t>(Np), Vector::Zero(2));
  const NlpInstance nlp = build_flexstep_nlp(sys, spec, x, u_prev);
  REQUIRE(nlp.dim == 2 * (Np + 1));  // q + m = Np + 1 exceeds the horizon

  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> uni(-2.0, 2.0);
  for (int trial = 0; trial < 1000; ++trial) {
    Vector z(nlp.dim);
    for (int i = 0; i < nlp.dim; ++i) z[i] = uni(rng);
    const InputSequence u = unstack_inputs(z, 2);
    const Vector x1 = step(sys, x, u[0]);
    const InputWindow tail(u.begin() + 1, u.end());
    const double hand = spec.gdclf.V(x1, tail) - spec.gdclf.V(x, u_prev) + spec.gdclf.alpha(x, u_prev);
    const double actual = nlp.constraints(z)[nlp.num_constraints - 1];
    REQUIRE_THAT(actual, Catch::Matchers::WithinAbs(hand, 1e-12 * (1.0 + std::abs(hand))));
  }

  // Inputs beyond the horizon carry no stage cost.
  Vector z = Vector::Zero(nlp.dim);
  const double base = nlp.objective(z);
  z.tail(2) << 3.0, -4.0;
  REQUIRE(nlp.objective(z) == base);
}

TEST_CASE("instances freeze their metadata") {
  const SystemModel sys = brockett_variant();
  const OcpSpec spec = problem3_spec();
  const Vector x = paper_x0();
  const NlpInstance a = build_flexstep_nlp(sys, spec, x, {});
  const NlpInstance b = build_flexstep_nlp(sys, spec, x, {});

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> uni(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    Vector z(20);
    for (int i = 0; i < 20; ++i) z[i] = uni(rng);
    REQUIRE(a.objective(z) == b.objective(z));
    REQUIRE(a.constraints(z) == b.constraints(z));
    REQUIRE(a.objective(z) >= 0.0);
  }
}

TEST_CASE("state boxes become residual rows") {
  const SystemModel sys = brockett_variant();
  OcpSpec spec = problem3_spec();
  spec.horizon = 3;
  spec.gdclf.order = 2;
  spec.gdclf.sigma = {1.0, 1.0};
  spec.state_box = BoxSet::centered_cube(4, 10.0);
  spec.terminal_box = BoxSet::centered_cube(4, 1.0);

  Vector x = Vector::Zero(4);
  x[3] = 0.5;
  const NlpInstance nlp = build_flexstep_nlp(sys, spec, x, {});
  // 8 rows per interior state (two finite bounds per coordinate), Np-1 = 2
  // interior states, 8 terminal rows, plus the adc row.
  REQUIRE(nlp.num_constraints == 8 * 2 + 8 + 1);

  const Vector z = Vector::Zero(nlp.dim);
  const Vector res = nlp.constraints(z);
  for (Eigen::Index i = 0; i + 1 < res.size(); ++i) REQUIRE(res[i] <= 0.0);

  // Starting outside X violates the precondition.
  Vector far = Vector::Constant(4, 20.0);
  REQUIRE_THROWS_AS(build_flexstep_nlp(sys, spec, far, {}), ContractViolation);
}

TEST_CASE("input boxes become hard bounds") {
  const SystemModel sys = brockett_variant();
  OcpSpec spec = problem3_spec();
  spec.input_box = BoxSet::centered_cube(2, 7.0);
  const NlpInstance nlp = build_flexstep_nlp(sys, spec, paper_x0(), {});
  REQUIRE(nlp.lower.size() == nlp.dim);
  REQUIRE(nlp.lower.minCoeff() == -7.0);
  REQUIRE(nlp.upper.maxCoeff() == 7.0);
}

TEST_CASE("standard transcription") {
  const SystemModel sys = brockett_variant();
  const OcpSpec spec = problem3_spec();
  const NlpInstance nlp = build_standard_nlp(sys, spec, paper_x0(), 22.0);
  REQUIRE(nlp.dim == 20);
  REQUIRE(nlp.num_constraints == 0);

  // Terminal weight enters the objective.
  const Vector z = Vector::Zero(20);
  const auto states = rollout(sys, paper_x0(), unstack_inputs(z, 2));
  double expected = 0.0;
  for (int j = 0; j < 10; ++j)
    expected += spec.stage_cost(states[static_cast<std::size_t>(j)], Vector::Zero(2));
  expected += 22.0 * states.back().squaredNorm();
  REQUIRE_THAT(nlp.objective(z), Catch::Matchers::WithinAbs(expected, 1e-10));

  for (double gamma : {480.0, 1920.0})
    REQUIRE(build_standard_nlp(sys, spec, paper_x0(), gamma).dim == 20);
  REQUIRE_THROWS_AS(build_standard_nlp(sys, spec, paper_x0(), 0.0), ContractViolation);
  REQUIRE_THROWS_AS(build_standard_nlp(sys, spec, paper_x0(), -1.0), ContractViolation);

  // At the origin, the zero input sequence is optimal with objective zero.
  const NlpInstance at_zero = build_standard_nlp(sys, spec, Vector::Zero(4), 22.0);
  const NlpResult res = minimize(at_zero, Vector::Zero(20));
  REQUIRE(res.objective <= 1e-8);
}

TEST_CASE("warm-start shifting") {
  Vector a(2), b(2), c(2);
  a << 1, 2;
  b << 3, 4;
  c << 5, 6;

  const InputSequence shifted = shift_warm_start({a, b, c}, 1, WarmStartPad::Zeros);
  REQUIRE(shifted.size() == 3);
  REQUIRE(shifted[0] == b);
  REQUIRE(shifted[1] == c);
  REQUIRE(shifted[2].isZero(0.0));

  const InputSequence all_pad = shift_warm_start({a, b, c}, 3, WarmStartPad::Zeros);
  for (const auto& u : all_pad) REQUIRE(u.isZero(0.0));

  const InputSequence repeat = shift_warm_start({a, b, c}, 2, WarmStartPad::RepeatLast);
  REQUIRE(repeat[0] == c);
  REQUIRE(repeat[1] == c);
  REQUIRE(repeat[2] == c);

  REQUIRE_THROWS_AS(shift_warm_start({a, b, c}, 0, WarmStartPad::Zeros), ContractViolation);
  REQUIRE_THROWS_AS(shift_warm_start({a, b, c}, 4, WarmStartPad::Zeros), ContractViolation);
}

TEST_CASE("first case-study instance solves to feasibility") {
  const SystemModel sys = brockett_variant();
  const OcpSpec spec = problem3_spec();
  const NlpInstance nlp = build_flexstep_nlp(sys, spec, paper_x0(), {});

  InputSequence ones(10, Vector::Constant(2, 1.0));
  SolverOptions opts;
  const NlpResult res = minimize(nlp, stack_inputs(ones), opts);
  REQUIRE(res.max_violation <= opts.feastol);
  REQUIRE(nlp.constraints(res.z_star)[0] <= opts.feastol);
}

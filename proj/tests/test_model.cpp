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

using namespace flexmpc;

namespace {

Vector vec4(double a, double b, double c, double d) {
  Vector v(4);
  v << a, b, c, d;
  return v;
}

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

bool close(const Vector& a, const Vector& b, double tol) {
  return a.size() == b.size() && (a - b).lpNorm<Eigen::Infinity>() <= tol;
}

}  // namespace

TEST_CASE("brockett variant step reproduces the two-step hand computation") {
  const SystemModel sys = brockett_variant();
  REQUIRE(sys.state_dim == 4);
  REQUIRE(sys.input_dim == 2);
  REQUIRE(sys.sampling_time == 0.1);

  const Vector x1 = step(sys, vec4(0, 0, 0, 1), vec2(0, 5));
  REQUIRE(close(x1, vec4(0, 0.5, 0, 1.1), 1e-12));

  const Vector x2 = step(sys, x1, vec2(0, -5));
  REQUIRE(close(x2, vec4(0, 0, 0, 0.96), 1e-12));
}

TEST_CASE("brockett variant drift and equilibrium") {
  const SystemModel sys = brockett_variant();

  // Drift term only: h*|x4| added to the fourth component.
  REQUIRE(close(step(sys, vec4(1, 2, 3, 5), vec2(0, 0)), vec4(1, 2, 3, 5.5), 1e-12));

  // f(0,0) = 0 exactly.
  const Vector origin = step(sys, Vector::Zero(4), Vector::Zero(2));
  REQUIRE(origin.isZero(0.0));

  // At the origin the state-dependent columns vanish.
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uni(-10.0, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double a = uni(rng), b = uni(rng);
    REQUIRE(close(step(sys, Vector::Zero(4), vec2(a, b)), vec4(0.1 * a, 0.1 * b, 0, 0), 1e-12));
  }
}

TEST_CASE("step checks dimensions") {
  const SystemModel sys = brockett_variant();
  REQUIRE_THROWS_AS(step(sys, Vector::Zero(3), Vector::Zero(2)), ContractViolation);
  REQUIRE_THROWS_AS(step(sys, Vector::Zero(4), Vector::Zero(1)), ContractViolation);
}

TEST_CASE("rollout follows the hand-computed trajectory") {
  const SystemModel sys = brockett_variant();
  const auto states = rollout(sys, vec4(0, 0, 0, 1), {vec2(0, 5), vec2(0, -5)});
  REQUIRE(states.size() == 3);
  REQUIRE(close(states[0], vec4(0, 0, 0, 1), 0.0));
  REQUIRE(close(states[1], vec4(0, 0.5, 0, 1.1), 1e-12));
  REQUIRE(close(states[2], vec4(0, 0, 0, 0.96), 1e-12));

  const auto only = rollout(sys, vec4(1, 2, 3, 4), {});
  REQUIRE(only.size() == 1);
  REQUIRE(close(only[0], vec4(1, 2, 3, 4), 0.0));
}

TEST_CASE("rollout concatenation is exact") {
  const SystemModel sys = brockett_variant();
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> uni(-3.0, 3.0);
  std::uniform_int_distribution<int> len(0, 6);

  for (int trial = 0; trial < 100; ++trial) {
    Vector x0(4);
    for (int i = 0; i < 4; ++i) x0[i] = uni(rng);
    InputSequence a(static_cast<std::size_t>(len(rng))), b(static_cast<std::size_t>(len(rng)));
    for (auto& u : a) u = vec2(uni(rng), uni(rng));
    for (auto& u : b) u = vec2(uni(rng), uni(rng));

    InputSequence ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    const auto joint = rollout(sys, x0, ab);
    const auto first = rollout(sys, x0, a);
    const auto second = rollout(sys, first.back(), b);

    for (std::size_t i = 0; i < first.size(); ++i) REQUIRE(joint[i] == first[i]);
    for (std::size_t i = 0; i < second.size(); ++i) REQUIRE(joint[a.size() + i] == second[i]);
  }
}

TEST_CASE("brockett step is affine in the input for fixed state") {
  const SystemModel sys = brockett_variant();
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> uni(-5.0, 5.0);
  for (int trial = 0; trial < 1000; ++trial) {
    Vector x(4);
    for (int i = 0; i < 4; ++i) x[i] = uni(rng);
    const Vector u = vec2(uni(rng), uni(rng));
    const Vector v = vec2(uni(rng), uni(rng));
    const Vector lhs = step(sys, x, u) + step(sys, x, v) - step(sys, x, Vector::Zero(2));
    const Vector rhs = step(sys, x, u + v);
    REQUIRE(close(lhs, rhs, 1e-10 * (1.0 + rhs.lpNorm<Eigen::Infinity>())));
  }
}

TEST_CASE("brockett displacement map") {
  REQUIRE(brockett_phi(Vector::Zero(4), Vector::Zero(2)).isZero(0.0));
  REQUIRE(close(brockett_phi(vec4(0, 0, 0, 1), vec2(0, 5)), vec4(0, 0.5, 0, 0.1), 1e-12));
  REQUIRE(close(brockett_phi(vec4(1, 0, 0, 0), vec2(1, 0)), vec4(0.1, 0, 0, 0), 1e-12));

  // First two components are exactly h*u.
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> uni(-5.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    Vector x(4);
    for (int i = 0; i < 4; ++i) x[i] = uni(rng);
    const Vector u = vec2(uni(rng), uni(rng));
    const Vector phi = brockett_phi(x, u);
    REQUIRE(phi[0] == 0.1 * u[0]);
    REQUIRE(phi[1] == 0.1 * u[1]);
  }
}

TEST_CASE("residual probe certifies non-solvability") {
  const BoxSet box = BoxSet::centered_cube(6, 1.0);

  // At the origin the residual is exactly y4.
  const Vector target_gap = brockett_phi(Vector::Zero(4), Vector::Zero(2));
  REQUIRE(std::sqrt(target_gap.squaredNorm() + 0.01 * 0.01) == 0.01);

  // y4 = 0 is solvable at the origin.
  const ProbeReport solvable = brockett_residual_probe(0.0, box, 5, 50);
  REQUIRE(solvable.min_residual == 0.0);

  // For y4 > 0 the refined minimum sits near y4/sqrt(3), attained with the
  // controls splitting the defect across the three penalized components.
  const ProbeReport report = brockett_residual_probe(0.01, box, 5, 200);
  REQUIRE(report.min_residual > 0.0);
  REQUIRE(report.grid_residual >= report.min_residual);
  REQUIRE_THAT(report.min_residual, Catch::Matchers::WithinAbs(0.01 / std::sqrt(3.0), 2e-4));

  // A denser grid does not change the certified positivity.
  const ProbeReport dense = brockett_residual_probe(0.01, box, 9, 200);
  REQUIRE(dense.min_residual > 0.005);
}

TEST_CASE("residual probe rejects bad boxes") {
  REQUIRE_THROWS_AS(brockett_residual_probe(0.01, BoxSet::centered_cube(4, 1.0), 5),
                    ContractViolation);
  const double inf = std::numeric_limits<double>::infinity();
  REQUIRE_THROWS_AS(
      brockett_residual_probe(0.01, BoxSet(Vector::Constant(6, -inf), Vector::Constant(6, inf)), 5),
      ContractViolation);
  REQUIRE_THROWS_AS(brockett_residual_probe(0.01, BoxSet::centered_cube(6, 1.0), 1),
                    ContractViolation);
  REQUIRE_THROWS_AS(brockett_residual_probe(-0.01, BoxSet::centered_cube(6, 1.0), 5),
                    ContractViolation);
}

TEST_CASE("box sets validate their bounds") {
  Vector lo(2), hi(2);
  lo << -1.0, -2.0;
  hi << 1.0, 2.0;
  REQUIRE_NOTHROW(BoxSet(lo, hi));

  hi << 1.0, -3.0;  // upper below lower
  REQUIRE_THROWS_AS(BoxSet(lo, hi), ContractViolation);

  lo << 0.5, -2.0;  // zero not interior
  hi << 1.0, 2.0;
  REQUIRE_THROWS_AS(BoxSet(lo, hi), ContractViolation);

  const BoxSet u = BoxSet::unbounded(3);
  REQUIRE(u.contains(Vector::Constant(3, 1e9)));
  REQUIRE_FALSE(u.bounded());
}

TEST_CASE("smoothed drift differs only near x4 = 0") {
  const SystemModel exact = brockett_variant();
  const SystemModel soft = brockett_variant(0.01);
  const Vector u = vec2(0.3, -0.4);

  const Vector far = vec4(0.1, 0.2, 0.3, 2.0);
  REQUIRE(close(step(exact, far, u), step(soft, far, u), 1e-5));

  const Vector near = vec4(0.1, 0.2, 0.3, 0.0);
  const double gap = (step(exact, near, u) - step(soft, near, u)).lpNorm<Eigen::Infinity>();
  REQUIRE(gap == Catch::Approx(0.1 * 0.01).margin(1e-12));
}

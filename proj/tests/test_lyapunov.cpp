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

#include "flexmpc/lyapunov.hpp"
#include "flexmpc/model.hpp"

using namespace flexmpc;

namespace {

GdclfSpec norm_squared_spec(int m, std::vector<double> sigma, double epsilon = 1e-5) {
  GdclfSpec spec;
  spec.order = m;
  spec.window = 0;
  spec.sigma = std::move(sigma);
  spec.V = [](const Vector& x, const InputWindow&) { return x.squaredNorm(); };
  spec.alpha = [epsilon](const Vector& x, const InputWindow&) {
    const double n2 = x.squaredNorm();
    return epsilon * n2 * n2;
  };
  return spec;
}

std::vector<double> problem3_sigma() { return {0, 0, 5.5, 5.5, 5.5, 5.5, 0, 0, 0, 0}; }

}  // namespace

TEST_CASE("sigma admissibility") {
  REQUIRE(check_sigma(problem3_sigma(), 10));       // mean 2.2
  REQUIRE(check_sigma({1.0}, 1));                   // standard-MPC recovery weights
  REQUIRE_FALSE(check_sigma({0.5, 0.4}, 2));        // mean below one
  REQUIRE_FALSE(check_sigma({-0.5, 3.0}, 2));       // negative weight
  REQUIRE_THROWS_AS(check_sigma({1.0, 1.0}, 3), ContractViolation);
}

TEST_CASE("adc residual arithmetic") {
  REQUIRE_THAT(adc_residual(std::vector<double>{1.0, 1.0}, 1.0, 0.1, {1.5, 0.2}),
               Catch::Matchers::WithinAbs(-0.05, 1e-15));
  REQUIRE(adc_residual(std::vector<double>{1.0, 1.0}, 0.0, 0.0, {0.0, 0.0}) == 0.0);

  // The case-study weights reproduce the hand-written constraint
  // (5.5/10)(V3+V4+V5+V6) - V0 + eps*||x||^4.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uni(0.0, 10.0);
  const auto sigma = problem3_sigma();
  for (int trial = 0; trial < 100; ++trial) {
    Vector x(4);
    for (int i = 0; i < 4; ++i) x[i] = uni(rng) - 5.0;
    std::vector<double> Vseq(10);
    for (auto& v : Vseq) v = uni(rng);
    const double V0 = x.squaredNorm();
    const double alpha0 = 1e-5 * V0 * V0;
    const double by_module = adc_residual(sigma, V0, alpha0, Vseq);
    const double by_hand = 5.5 / 10.0 * (Vseq[2] + Vseq[3] + Vseq[4] + Vseq[5]) - V0 + alpha0;
    REQUIRE_THAT(by_module, Catch::Matchers::WithinAbs(by_hand, 1e-12 * (1.0 + std::abs(by_hand))));
  }
}

TEST_CASE("adc residual is linear in the values and decreasing in V0") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> uni(0.0, 5.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<double> sigma{uni(rng) + 1.0, uni(rng) + 1.0, uni(rng) + 1.0};
    std::vector<double> Vseq{uni(rng), uni(rng), uni(rng)};
    const double V0 = uni(rng), alpha0 = 0.1 * uni(rng);

    // Scaling the value sequence scales the weighted-average term.
    const double base = adc_residual(sigma, V0, alpha0, Vseq);
    std::vector<double> doubled = Vseq;
    for (auto& v : doubled) v *= 2.0;
    const double twice = adc_residual(sigma, V0, alpha0, doubled);
    REQUIRE_THAT(twice - base, Catch::Matchers::WithinAbs(base - adc_residual(sigma, V0, alpha0, std::vector<double>(3, 0.0)), 1e-10));

    // Increasing V0 decreases the residual one-for-one.
    const double shifted = adc_residual(sigma, V0 + 1.5, alpha0, Vseq);
    REQUIRE_THAT(shifted, Catch::Matchers::WithinAbs(base - 1.5, 1e-12));
  }
}

TEST_CASE("descent indices") {
  REQUIRE(descent_indices(1.0, 0.1, {1.5, 0.2}) == std::vector<int>{2});
  REQUIRE(descent_indices(1.0, 0.0, {1.0, 1.0}) == std::vector<int>{1, 2});
  REQUIRE(descent_indices(1.0, 0.5, {0.9, 0.8}).empty());
}

TEST_CASE("descent existence under the average decrease constraint") {
  // Any tuple satisfying the weight condition, V0 >= alpha0 >= 0 and a
  // non-positive residual admits a descent index. Sampled across orders with
  // both rejection-sampled and scaled-to-feasible tuples.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::uniform_int_distribution<int> order(1, 5);

  int checked = 0;
  while (checked < 20000) {
    const int m = order(rng);
    std::vector<double> sigma(static_cast<std::size_t>(m));
    double sum = 0.0;
    for (auto& s : sigma) {
      s = uni(rng) * 3.0;
      sum += s;
    }
    if (sum / m < 1.0) {
      const double fix = (m * (1.0 + uni(rng))) / sum;
      for (auto& s : sigma) s *= fix;
    }
    REQUIRE(check_sigma(sigma, m));

    const double V0 = uni(rng) * 10.0;
    const double alpha0 = uni(rng) * V0;
    std::vector<double> Vseq(static_cast<std::size_t>(m));
    for (auto& v : Vseq) v = uni(rng) * 3.0 * (V0 + 0.1);

    double residual = adc_residual(sigma, V0, alpha0, Vseq);
    if (residual > 0.0) {
      // Scale the value sequence until the constraint holds.
      double weighted = 0.0;
      for (int i = 0; i < m; ++i) weighted += sigma[static_cast<std::size_t>(i)] * Vseq[static_cast<std::size_t>(i)];
      weighted /= m;
      if (weighted <= 0.0) continue;
      const double target = (V0 - alpha0) * uni(rng);
      const double factor = target / weighted;
      for (auto& v : Vseq) v *= factor;
      residual = adc_residual(sigma, V0, alpha0, Vseq);
    }
    if (residual > 0.0) continue;

    ++checked;
    REQUIRE_FALSE(descent_indices(V0, alpha0, Vseq).empty());
  }
}

TEST_CASE("index selection policies") {
  const std::vector<double> Vseq{0.9, 0.3, 0.5};
  const auto greatest = select_index(1.0, 0.05, Vseq, DescentPolicy::GreatestDescent);
  REQUIRE(greatest.chosen == 2);
  REQUIRE_THAT(greatest.margin, Catch::Matchers::WithinAbs(1.0 - 0.05 - 0.3, 1e-15));

  const auto first = select_index(1.0, 0.05, Vseq, DescentPolicy::FirstDescent);
  REQUIRE(first.chosen == 1);

  // Ties resolve to the smallest index.
  REQUIRE(select_index(1.0, 0.0, {0.3, 0.3}, DescentPolicy::GreatestDescent).chosen == 1);

  // Failure carries the best margin for diagnostics.
  try {
    select_index(1.0, 0.5, {0.9, 0.8}, DescentPolicy::GreatestDescent, 0.0);
    FAIL("expected DescentNotFound");
  } catch (const DescentNotFound& e) {
    REQUIRE_THAT(e.best_margin, Catch::Matchers::WithinAbs(1.0 - 0.5 - 0.8, 1e-15));
  }
}

TEST_CASE("greatest descent is invariant under uniform rescaling") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> uni(0.1, 4.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double V0 = uni(rng) + 2.0;
    const double alpha0 = 0.01 * uni(rng);
    std::vector<double> Vseq{uni(rng), uni(rng), uni(rng), uni(rng)};
    if (descent_indices(V0, alpha0, Vseq).empty()) continue;
    const auto base = select_index(V0, alpha0, Vseq);

    const double c = uni(rng) * 5.0;
    std::vector<double> scaled = Vseq;
    for (auto& v : scaled) v *= c;
    const auto again = select_index(c * V0, c * alpha0, scaled);
    REQUIRE(again.chosen == base.chosen);

    double vmin = Vseq[0];
    for (double v : Vseq) vmin = std::min(vmin, v);
    REQUIRE(Vseq[static_cast<std::size_t>(base.chosen) - 1] == vmin);
  }
}

TEST_CASE("order-one weights reduce to the one-step condition") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> uni(0.0, 5.0);
  for (int trial = 0; trial < 500; ++trial) {
    const double V0 = uni(rng), alpha0 = uni(rng), V1 = uni(rng);
    REQUIRE(adc_residual(std::vector<double>{1.0}, V0, alpha0, {V1}) == V1 - V0 + alpha0);
  }
}

TEST_CASE("verifier certifies the two-step hand example") {
  const SystemModel sys = brockett_variant();
  GdclfSpec spec = norm_squared_spec(2, {1.0, 1.0});

  Vector e4 = Vector::Zero(4);
  e4[3] = 1.0;
  Vector u0(2), u1(2);
  u0 << 0.0, 5.0;
  u1 << 0.0, -5.0;

  VerifyOptions opts;
  opts.restarts = 0;  // the candidate must do the certifying
  const auto report = verify_gdclf_sample(sys, spec, {e4}, opts, {{u0, u1}});
  REQUIRE(report.states.size() == 1);
  const auto& entry = report.states[0];
  REQUIRE(entry.verified);
  REQUIRE(entry.witness.size() == 2);
  REQUIRE(entry.witness[0] == u0);
  REQUIRE(entry.witness[1] == u1);
  REQUIRE(entry.V_path.size() == 3);
  REQUIRE_THAT(entry.V_path[0], Catch::Matchers::WithinAbs(1.0, 1e-12));
  REQUIRE_THAT(entry.V_path[1], Catch::Matchers::WithinAbs(1.46, 1e-12));
  REQUIRE_THAT(entry.V_path[2], Catch::Matchers::WithinAbs(0.9216, 1e-12));
}

TEST_CASE("verifier succeeds trivially at the origin") {
  const SystemModel sys = brockett_variant();
  GdclfSpec spec = norm_squared_spec(2, {1.0, 1.0});
  VerifyOptions opts;
  opts.restarts = 0;
  const auto report = verify_gdclf_sample(sys, spec, {Vector::Zero(4)}, opts);
  REQUIRE(report.states[0].verified);
  for (const auto& u : report.states[0].witness) REQUIRE(u.isZero(0.0));
  REQUIRE(report.states[0].residual == 0.0);
}

TEST_CASE("verifier decreases the norm for random states within ten steps") {
  const SystemModel sys = brockett_variant();
  GdclfSpec spec = norm_squared_spec(10, problem3_sigma());

  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<Vector> states;
  for (int s = 0; s < 2; ++s) {
    Vector x(4);
    for (int i = 0; i < 4; ++i) x[i] = uni(rng);
    states.push_back(x);
  }

  VerifyOptions opts;
  opts.restarts = 10;
  opts.max_inner = 120;
  const auto report = verify_gdclf_sample(sys, spec, states, opts);
  REQUIRE(report.all_verified());
  for (const auto& entry : report.states) {
    double vmin = entry.V_path[1];
    for (std::size_t l = 1; l < entry.V_path.size(); ++l) vmin = std::min(vmin, entry.V_path[l]);
    REQUIRE(vmin < entry.V_path[0]);
  }
}

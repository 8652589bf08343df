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

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace flexmpc {

using Vector = Eigen::VectorXd;

/// Ordered sequence of input vectors, one per time step.
using InputSequence = std::vector<Eigen::VectorXd>;

/// Length-q slice of an input sequence (empty when q = 0).
using InputWindow = std::vector<Eigen::VectorXd>;

/// Thrown when a caller violates a documented precondition.
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require(bool condition, const std::string& what) {
  if (!condition) throw ContractViolation(what);
}

inline Vector stack_inputs(const InputSequence& seq) {
  Eigen::Index total = 0;
  for (const auto& u : seq) total += u.size();
  Vector z(total);
  Eigen::Index at = 0;
  for (const auto& u : seq) {
    z.segment(at, u.size()) = u;
    at += u.size();
  }
  return z;
}

inline InputSequence unstack_inputs(const Vector& z, int input_dim) {
  require(input_dim > 0 && z.size() % input_dim == 0,
          "unstack_inputs: vector length not a multiple of the input dimension");
  InputSequence seq(static_cast<std::size_t>(z.size() / input_dim));
  for (std::size_t j = 0; j < seq.size(); ++j)
    seq[j] = z.segment(static_cast<Eigen::Index>(j) * input_dim, input_dim);
  return seq;
}

}  // namespace flexmpc

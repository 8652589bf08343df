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

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "flexmpc/common.hpp"
#include "flexmpc/lyapunov.hpp"
#include "flexmpc/mpc.hpp"

namespace flexmpc {

namespace detail {

/// Shortest decimal form that round-trips a double, so repeated runs emit
/// byte-identical files.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Per-step closed-loop record. Columns are fixed:
///   k, x1..xn, u1..up, V, instance_id
/// with one row per implemented step; V is evaluated at (x(k), u_prev) of the
/// governing instance. The final state appears in the summary, not here.
inline void write_actual_csv(const MpcTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_actual_csv: cannot open " + path);
  const int n = trace.steps.empty() ? static_cast<int>(trace.final_state.size())
                                    : static_cast<int>(trace.steps.front().x.size());
  const int p = trace.steps.empty() ? 0 : static_cast<int>(trace.steps.front().u.size());
  out << "k";
  for (int i = 1; i <= n; ++i) out << ",x" << i;
  for (int i = 1; i <= p; ++i) out << ",u" << i;
  out << ",V,instance_id\n";

  std::size_t inst = 0;
  for (const auto& s : trace.steps) {
    while (inst + 1 < trace.instances.size() && trace.instances[inst + 1].k_start <= s.k) ++inst;
    double V = 0.0;
    if (trace.V) {
      const InputWindow& w =
          inst < trace.instances.size() ? trace.instances[inst].u_prev : InputWindow{};
      V = trace.V(s.x, w);
    }
    out << s.k;
    for (int i = 0; i < n; ++i) out << ',' << detail::format_double(s.x[i]);
    for (int i = 0; i < p; ++i) out << ',' << detail::format_double(s.u[i]);
    out << ',' << detail::format_double(V) << ',' << (inst < trace.instances.size() ? static_cast<int>(inst) : -1)
        << '\n';
  }
}

/// Per-instance record. Columns are fixed:
///   instance_id, k_start, l_decr, solve_status, adc_residual, objective
inline void write_instances_csv(const MpcTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_instances_csv: cannot open " + path);
  out << "instance_id,k_start,l_decr,solve_status,adc_residual,objective\n";
  for (const auto& inst : trace.instances) {
    out << inst.instance_id << ',' << inst.k_start << ',' << inst.l_decr << ','
        << to_string(inst.solve.status) << ',' << detail::format_double(inst.adc_value) << ','
        << detail::format_double(inst.solve.objective) << '\n';
  }
}

/// Verification report. Columns are fixed:
///   state_id, verified, residual, then the witness inputs flattened in time
///   order (w0_u1, w0_u2, w1_u1, ...).
inline void write_verification_csv(const VerificationReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_verification_csv: cannot open " + path);
  out << "state_id,verified,residual";
  if (!report.states.empty()) {
    const auto& w = report.states.front().witness;
    for (std::size_t j = 0; j < w.size(); ++j)
      for (Eigen::Index i = 0; i < w[j].size(); ++i) out << ",w" << j << "_u" << (i + 1);
  }
  out << '\n';
  for (std::size_t s = 0; s < report.states.size(); ++s) {
    const auto& entry = report.states[s];
    out << s << ',' << (entry.verified ? 1 : 0) << ',' << detail::format_double(entry.residual);
    for (const auto& u : entry.witness)
      for (Eigen::Index i = 0; i < u.size(); ++i) out << ',' << detail::format_double(u[i]);
    out << '\n';
  }
}

/// Minimal tabular view of an actual.csv file, for the comparison tool.
struct ActualTable {
  std::vector<int> k;
  std::vector<std::vector<double>> states;  // row-major per step
  std::vector<std::vector<double>> inputs;
};

inline ActualTable read_actual_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_actual_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_actual_csv: empty file " + path);

  int n = 0, p = 0;
  {
    std::istringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) {
      if (cell.size() >= 2 && cell[0] == 'x') n = std::max(n, std::stoi(cell.substr(1)));
      if (cell.size() >= 2 && cell[0] == 'u' && cell != "u") p = std::max(p, std::stoi(cell.substr(1)));
    }
  }

  ActualTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    table.k.push_back(std::stoi(cells.at(0)));
    std::vector<double> x(static_cast<std::size_t>(n)), u(static_cast<std::size_t>(p));
    for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = std::stod(cells.at(1 + static_cast<std::size_t>(i)));
    for (int i = 0; i < p; ++i)
      u[static_cast<std::size_t>(i)] = std::stod(cells.at(1 + static_cast<std::size_t>(n) + static_cast<std::size_t>(i)));
    table.states.push_back(std::move(x));
    table.inputs.push_back(std::move(u));
  }
  return table;
}

}  // namespace flexmpc

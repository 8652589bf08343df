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

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "flexmpc/common.hpp"
#include "flexmpc/lyapunov.hpp"
#include "flexmpc/nlp.hpp"

namespace flexmpc {

/// Raised on malformed or invalid configuration input; the CLI maps it to
/// exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Declarative description of one experiment. Defaults reproduce the
/// flexible-step case study on the Brockett variant.
struct ExperimentConfig {
  std::string scenario = "problem3";  // problem3|problem4|gdclf-verify|brockett-probe|custom

  // model
  double sampling_time = 0.1;

  // ocp numbers
  int horizon = 10;
  int order = 10;   // m
  int window = 0;   // q
  std::vector<double> sigma = {0, 0, 5.5, 5.5, 5.5, 5.5, 0, 0, 0, 0};
  double epsilon = 1e-5;        // alpha(x) = epsilon * ||x||^4
  double state_weight = 1.0;    // f0 = state_weight*||x||^2 + input_weight*||u||^2
  double input_weight = 5.0;

  // solver
  SolverOptions solver;

  // run options
  std::string policy = "greatest-descent";  // or "first-descent"
  int max_steps = 300;
  double stop_radius = 1e-3;
  std::vector<double> gamma = {22.0, 480.0, 1920.0};
  int steps_per_instance = 10;
  unsigned seed = 42;
  std::vector<double> x0 = {1.0, 2.0, 3.0, 5.0};
  double initial_control = 1.0;  // fill value of the first warm start

  // gdclf-verify options
  int verify_states = 5;
  double verify_box = 1.0;  // initial states sampled from [-v, v]^n
  int verify_restarts = 50;

  // brockett-probe options
  double probe_y4 = 0.01;
  double probe_box = 1.0;  // search box [-b, b]^6
  int probe_grid = 21;
  int probe_refine = 200;

  // output
  std::string out_dir = "out";
  bool svg = true;

  bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                                const std::string& where) {
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key))
      throw ConfigError("config: unknown key \"" + key + "\" in " + where);
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: bad value for \"" + std::string(key) + "\" in " + where + ": " +
                      e.what());
  }
}

}  // namespace detail

inline bool operator==(const SolverOptions& a, const SolverOptions& b) {
  return a.fd_step == b.fd_step && a.feastol == b.feastol && a.opttol == b.opttol &&
         a.max_outer == b.max_outer && a.max_inner == b.max_inner &&
         a.penalty_init == b.penalty_init && a.penalty_growth == b.penalty_growth &&
         a.smooth_abs_delta == b.smooth_abs_delta && a.trace_csv == b.trace_csv;
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["scenario"] = c.scenario;
  j["model"] = {{"sampling_time", c.sampling_time}};
  j["ocp"] = {{"horizon", c.horizon},       {"order", c.order},
              {"window", c.window},         {"sigma", c.sigma},
              {"epsilon", c.epsilon},       {"state_weight", c.state_weight},
              {"input_weight", c.input_weight}};
  j["solver"] = {{"fd_step", c.solver.fd_step},
                 {"feastol", c.solver.feastol},
                 {"opttol", c.solver.opttol},
                 {"max_outer", c.solver.max_outer},
                 {"max_inner", c.solver.max_inner},
                 {"penalty_init", c.solver.penalty_init},
                 {"penalty_growth", c.solver.penalty_growth},
                 {"smooth_abs_delta", c.solver.smooth_abs_delta}};
  j["run"] = {{"policy", c.policy},
              {"max_steps", c.max_steps},
              {"stop_radius", c.stop_radius},
              {"gamma", c.gamma},
              {"steps_per_instance", c.steps_per_instance},
              {"seed", c.seed},
              {"x0", c.x0},
              {"initial_control", c.initial_control}};
  j["verify"] = {{"states", c.verify_states}, {"box", c.verify_box}, {"restarts", c.verify_restarts}};
  j["probe"] = {{"y4", c.probe_y4},
                {"box", c.probe_box},
                {"grid", c.probe_grid},
                {"refine", c.probe_refine}};
  j["output"] = {{"dir", c.out_dir}, {"svg", c.svg}};
  return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  detail::reject_unknown_keys(
      j, {"scenario", "model", "ocp", "solver", "run", "verify", "probe", "output"}, "top level");
  detail::read_key(j, "scenario", c.scenario, "top level");

  if (j.contains("model")) {
    const auto& m = j.at("model");
    detail::reject_unknown_keys(m, {"sampling_time"}, "model");
    detail::read_key(m, "sampling_time", c.sampling_time, "model");
  }
  if (j.contains("ocp")) {
    const auto& o = j.at("ocp");
    detail::reject_unknown_keys(
        o, {"horizon", "order", "window", "sigma", "epsilon", "state_weight", "input_weight"},
        "ocp");
    detail::read_key(o, "horizon", c.horizon, "ocp");
    detail::read_key(o, "order", c.order, "ocp");
    detail::read_key(o, "window", c.window, "ocp");
    detail::read_key(o, "sigma", c.sigma, "ocp");
    detail::read_key(o, "epsilon", c.epsilon, "ocp");
    detail::read_key(o, "state_weight", c.state_weight, "ocp");
    detail::read_key(o, "input_weight", c.input_weight, "ocp");
  }
  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    detail::reject_unknown_keys(s,
                                {"fd_step", "feastol", "opttol", "max_outer", "max_inner",
                                 "penalty_init", "penalty_growth", "smooth_abs_delta"},
                                "solver");
    detail::read_key(s, "fd_step", c.solver.fd_step, "solver");
    detail::read_key(s, "feastol", c.solver.feastol, "solver");
    detail::read_key(s, "opttol", c.solver.opttol, "solver");
    detail::read_key(s, "max_outer", c.solver.max_outer, "solver");
    detail::read_key(s, "max_inner", c.solver.max_inner, "solver");
    detail::read_key(s, "penalty_init", c.solver.penalty_init, "solver");
    detail::read_key(s, "penalty_growth", c.solver.penalty_growth, "solver");
    detail::read_key(s, "smooth_abs_delta", c.solver.smooth_abs_delta, "solver");
  }
  if (j.contains("run")) {
    const auto& r = j.at("run");
    detail::reject_unknown_keys(r,
                                {"policy", "max_steps", "stop_radius", "gamma",
                                 "steps_per_instance", "seed", "x0", "initial_control"},
                                "run");
    detail::read_key(r, "policy", c.policy, "run");
    detail::read_key(r, "max_steps", c.max_steps, "run");
    detail::read_key(r, "stop_radius", c.stop_radius, "run");
    detail::read_key(r, "gamma", c.gamma, "run");
    detail::read_key(r, "steps_per_instance", c.steps_per_instance, "run");
    detail::read_key(r, "seed", c.seed, "run");
    detail::read_key(r, "x0", c.x0, "run");
    detail::read_key(r, "initial_control", c.initial_control, "run");
  }
  if (j.contains("verify")) {
    const auto& v = j.at("verify");
    detail::reject_unknown_keys(v, {"states", "box", "restarts"}, "verify");
    detail::read_key(v, "states", c.verify_states, "verify");
    detail::read_key(v, "box", c.verify_box, "verify");
    detail::read_key(v, "restarts", c.verify_restarts, "verify");
  }
  if (j.contains("probe")) {
    const auto& pr = j.at("probe");
    detail::reject_unknown_keys(pr, {"y4", "box", "grid", "refine"}, "probe");
    detail::read_key(pr, "y4", c.probe_y4, "probe");
    detail::read_key(pr, "box", c.probe_box, "probe");
    detail::read_key(pr, "grid", c.probe_grid, "probe");
    detail::read_key(pr, "refine", c.probe_refine, "probe");
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    detail::reject_unknown_keys(o, {"dir", "svg"}, "output");
    detail::read_key(o, "dir", c.out_dir, "output");
    detail::read_key(o, "svg", c.svg, "output");
  }
  return c;
}

inline void validate_config(const ExperimentConfig& c) {
  static const std::set<std::string> scenarios{"problem3", "problem4", "gdclf-verify",
                                               "brockett-probe", "custom"};
  if (!scenarios.count(c.scenario))
    throw ConfigError("config: unknown scenario \"" + c.scenario + "\"");
  if (c.policy != "greatest-descent" && c.policy != "first-descent")
    throw ConfigError("config: unknown policy \"" + c.policy + "\"");
  if (c.horizon < 1) throw ConfigError("config: horizon must be at least 1");
  if (c.order < 1 || c.order > c.horizon)
    throw ConfigError("config: order must lie in [1, horizon]");
  if (c.window < 0 || c.window > c.horizon)
    throw ConfigError("config: window must lie in [0, horizon]");
  if (static_cast<int>(c.sigma.size()) != c.order)
    throw ConfigError("config: sigma must have one weight per order");
  if (!check_sigma(c.sigma, c.order))
    throw ConfigError("config: sigma weights must be non-negative with mean at least 1");
  if (c.epsilon <= 0.0) throw ConfigError("config: epsilon must be positive");
  if (c.state_weight <= 0.0 || c.input_weight < 0.0)
    throw ConfigError("config: stage-cost weights must be positive");
  if (c.max_steps < 1) throw ConfigError("config: max_steps must be at least 1");
  if (c.stop_radius < 0.0) throw ConfigError("config: stop_radius must be non-negative");
  if (c.steps_per_instance < 1 || c.steps_per_instance > c.horizon)
    throw ConfigError("config: steps_per_instance must lie in [1, horizon]");
  for (double g : c.gamma)
    if (g <= 0.0) throw ConfigError("config: gamma weights must be positive");
  if (c.x0.size() != 4)
    throw ConfigError("config: x0 must have 4 components (Brockett-variant state)");
  if (c.probe_grid < 2) throw ConfigError("config: probe grid needs at least 2 points per dim");
  if (c.probe_box <= 0.0 || c.verify_box <= 0.0)
    throw ConfigError("config: search boxes must have positive half-width");
  try {
    c.solver.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

/// Loads, validates and default-fills a configuration from a JSON file.
inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config: " + path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: " + path + ": top level must be an object");
  ExperimentConfig c = config_from_json(j);
  validate_config(c);
  return c;
}

inline void save_config(const ExperimentConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_config: cannot open " + path);
  out << to_json(c).dump(2) << '\n';
}

/// Built-in presets mirroring the case studies.
inline std::vector<std::string> preset_names() {
  return {"problem3", "problem4", "gdclf-verify", "brockett-probe"};
}

inline ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;  // defaults are the problem3 numbers
  if (name == "problem3") {
    c.scenario = "problem3";
  } else if (name == "problem4") {
    c.scenario = "problem4";
  } else if (name == "gdclf-verify") {
    c.scenario = "gdclf-verify";
  } else if (name == "brockett-probe") {
    c.scenario = "brockett-probe";
  } else {
    throw ConfigError("config: unknown preset \"" + name + "\"");
  }
  validate_config(c);
  return c;
}

}  // namespace flexmpc

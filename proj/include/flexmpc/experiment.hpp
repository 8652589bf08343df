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

#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "flexmpc/config.hpp"
#include "flexmpc/mpc.hpp"
#include "flexmpc/model.hpp"
#include "flexmpc/svg.hpp"
#include "flexmpc/trace_io.hpp"

namespace flexmpc {

/// Model and problem data instantiated from a configuration.
struct ExperimentSetup {
  SystemModel plant;
  SystemModel predictor;
  OcpSpec spec;
  Vector x0;
  FlexStepConfig flex;
  SolverOptions solver;
};

inline ExperimentSetup make_setup(const ExperimentConfig& c) {
  ExperimentSetup s;
  s.plant = brockett_variant();
  s.plant.sampling_time = c.sampling_time;
  s.predictor =
      c.solver.smooth_abs_delta > 0.0 ? brockett_variant(c.solver.smooth_abs_delta) : s.plant;

  s.spec.horizon = c.horizon;
  const double wx = c.state_weight, wu = c.input_weight;
  s.spec.stage_cost = [wx, wu](const Vector& x, const Vector& u) {
    return wx * x.squaredNorm() + wu * u.squaredNorm();
  };
  s.spec.gdclf.order = c.order;
  s.spec.gdclf.window = c.window;
  s.spec.gdclf.sigma = c.sigma;
  s.spec.gdclf.V = [](const Vector& x, const InputWindow&) { return x.squaredNorm(); };
  const double eps = c.epsilon;
  s.spec.gdclf.alpha = [eps](const Vector& x, const InputWindow&) {
    const double n2 = x.squaredNorm();
    return eps * n2 * n2;
  };

  s.x0 = Eigen::Map<const Vector>(c.x0.data(), static_cast<Eigen::Index>(c.x0.size()));

  s.flex.policy =
      c.policy == "first-descent" ? DescentPolicy::FirstDescent : DescentPolicy::GreatestDescent;
  s.flex.max_steps = c.max_steps;
  s.flex.stop_radius = c.stop_radius;
  s.flex.initial_guess.assign(static_cast<std::size_t>(std::max(c.window + c.order, c.horizon)),
                              Vector::Constant(s.plant.input_dim, c.initial_control));
  if (c.solver.smooth_abs_delta > 0.0) s.flex.prediction_model = s.predictor;

  s.solver = c.solver;
  s.solver.trace_csv.clear();
  return s;
}

struct RunArtifacts {
  std::filesystem::path dir;
  nlohmann::json summary;
};

namespace detail {

inline nlohmann::json trace_summary(const ExperimentConfig& c, const MpcTrace& trace,
                                    const std::string& label) {
  nlohmann::json s;
  s["label"] = label;
  s["k_final"] = trace.k_final;
  s["steps"] = trace.steps.size();
  s["instances"] = trace.instances.size();
  s["converged"] = trace.stopped_by_radius;
  s["final_state_inf_norm"] = trace.final_state.lpNorm<Eigen::Infinity>();
  s["total_cost"] = total_cost(trace, static_cast<int>(trace.steps.size()));
  s["stage_cost"] = {{"state_weight", c.state_weight}, {"input_weight", c.input_weight}};

  int below = -1;
  for (const auto& st : trace.steps)
    if (st.x.lpNorm<Eigen::Infinity>() <= 0.1) {
      below = st.k;
      break;
    }
  if (below < 0 && trace.final_state.lpNorm<Eigen::Infinity>() <= 0.1) below = trace.k_final;
  s["first_step_below_0p1"] = below;

  std::map<std::string, int> histogram;
  for (const auto& inst : trace.instances) ++histogram[std::to_string(inst.l_decr)];
  s["l_decr_histogram"] = histogram;
  return s;
}

inline void write_trace_plots(const MpcTrace& trace, const std::filesystem::path& dir) {
  // State trajectories.
  const int n = static_cast<int>(trace.final_state.size());
  std::vector<SvgSeries> states(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) states[static_cast<std::size_t>(i)].name = "x" + std::to_string(i + 1);
  for (const auto& st : trace.steps)
    for (int i = 0; i < n; ++i) {
      states[static_cast<std::size_t>(i)].x.push_back(st.k);
      states[static_cast<std::size_t>(i)].y.push_back(st.x[i]);
    }
  for (int i = 0; i < n; ++i) {
    states[static_cast<std::size_t>(i)].x.push_back(trace.k_final);
    states[static_cast<std::size_t>(i)].y.push_back(trace.final_state[i]);
  }
  write_svg((dir / "states.svg").string(), states, "Closed-loop state trajectories", "time step k",
            "state");

  // Predicted Lyapunov values per instance; the part beyond the implemented
  // index is drawn dashed (it is discarded by the implementation).
  std::vector<SvgSeries> lyap;
  for (const auto& inst : trace.instances) {
    if (inst.V_pred.size() <= 1) continue;
    SvgSeries kept;
    kept.name = lyap.empty() ? "implemented" : "";
    SvgSeries tail;
    tail.dashed = true;
    tail.name = lyap.size() <= 1 ? "discarded tail" : "";
    for (int l = 0; l < static_cast<int>(inst.V_pred.size()); ++l) {
      const double kx = inst.k_start + l;
      const double vy = inst.V_pred[static_cast<std::size_t>(l)];
      if (l <= inst.l_decr) {
        kept.x.push_back(kx);
        kept.y.push_back(vy);
      }
      if (l >= inst.l_decr) {
        tail.x.push_back(kx);
        tail.y.push_back(vy);
      }
    }
    lyap.push_back(std::move(kept));
    if (tail.x.size() > 1) lyap.push_back(std::move(tail));
  }
  if (!lyap.empty())
    write_svg((dir / "lyapunov.svg").string(), lyap, "Predicted Lyapunov values per instance",
              "time step k", "V");

  // Implemented steps per instance.
  SvgSeries steps;
  steps.name = "implemented steps";
  for (const auto& inst : trace.instances) {
    steps.x.push_back(inst.instance_id + 1);
    steps.y.push_back(inst.l_decr);
  }
  if (!steps.x.empty())
    write_svg((dir / "steps.svg").string(), {steps}, "Implemented steps per optimization instance",
              "instance", "steps");

  // Running total cost.
  SvgSeries cost;
  cost.name = "total cost";
  double cum = 0.0;
  cost.x.push_back(0);
  cost.y.push_back(0.0);
  for (std::size_t j = 0; j < trace.steps.size(); ++j) {
    cum += trace.stage_cost(trace.steps[j].x, trace.steps[j].u);
    cost.x.push_back(static_cast<double>(j + 1));
    cost.y.push_back(cum);
  }
  write_svg((dir / "total_cost.svg").string(), {cost}, "Running closed-loop cost", "time step k",
            "cost");
}

inline RunArtifacts emit_trace(const ExperimentConfig& c, const MpcTrace& trace,
                               const std::filesystem::path& dir, const std::string& label) {
  std::filesystem::create_directories(dir);
  write_actual_csv(trace, (dir / "actual.csv").string());
  write_instances_csv(trace, (dir / "instances.csv").string());
  RunArtifacts artifacts;
  artifacts.dir = dir;
  artifacts.summary = trace_summary(c, trace, label);
  std::ofstream(dir / "summary.json") << artifacts.summary.dump(2) << '\n';
  if (c.svg) write_trace_plots(trace, dir);
  return artifacts;
}

}  // namespace detail

/// Runs the configured scenario and writes its artifact bundle under the
/// configured output directory. Partial artifacts are flushed when a closed
/// loop aborts; the abort is then rethrown for the caller to report.
inline std::vector<RunArtifacts> run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const ExperimentSetup setup = make_setup(cfg);
  const std::filesystem::path root = cfg.out_dir;
  std::filesystem::create_directories(root);
  save_config(cfg, (root / "config.json").string());
  std::vector<RunArtifacts> results;

  if (cfg.scenario == "problem3" || cfg.scenario == "custom") {
    MpcTrace trace;
    try {
      trace = flexible_step_run(setup.plant, setup.spec, setup.x0, setup.flex, setup.solver);
    } catch (const FlexStepAbort& abort) {
      detail::emit_trace(cfg, abort.trace, root / "flexstep", "flexstep-partial");
      throw;
    }
    results.push_back(detail::emit_trace(cfg, trace, root / "flexstep", "flexstep"));
  } else if (cfg.scenario == "problem4") {
    for (double gamma : cfg.gamma) {
      std::string label = "gamma_" + std::to_string(static_cast<long long>(gamma));
      MpcTrace trace;
      try {
        trace = standard_run(setup.plant, setup.spec, setup.x0, gamma, cfg.steps_per_instance,
                             cfg.max_steps, setup.solver);
      } catch (const FlexStepAbort& abort) {
        detail::emit_trace(cfg, abort.trace, root / label, label + "-partial");
        throw;
      }
      results.push_back(detail::emit_trace(cfg, trace, root / label, label));
    }
  } else if (cfg.scenario == "gdclf-verify") {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> uni(-cfg.verify_box, cfg.verify_box);
    std::vector<Vector> states;
    for (int s = 0; s < cfg.verify_states; ++s) {
      Vector x(setup.plant.state_dim);
      for (int i = 0; i < setup.plant.state_dim; ++i) x[i] = uni(rng);
      states.push_back(x);
    }
    VerifyOptions vopts;
    vopts.restarts = cfg.verify_restarts;
    vopts.seed = cfg.seed;
    vopts.solver = setup.solver;
    const VerificationReport report =
        verify_gdclf_sample(setup.plant, setup.spec.gdclf, states, vopts);
    write_verification_csv(report, (root / "verify.csv").string());

    RunArtifacts artifacts;
    artifacts.dir = root;
    artifacts.summary["label"] = "gdclf-verify";
    artifacts.summary["states"] = report.states.size();
    artifacts.summary["all_verified"] = report.all_verified();
    int verified = 0;
    for (const auto& e : report.states) verified += e.verified ? 1 : 0;
    artifacts.summary["verified"] = verified;
    std::ofstream(root / "summary.json") << artifacts.summary.dump(2) << '\n';

    if (cfg.svg) {
      std::vector<SvgSeries> paths;
      for (std::size_t s = 0; s < report.states.size(); ++s) {
        SvgSeries series;
        series.name = "state " + std::to_string(s);
        for (std::size_t l = 0; l < report.states[s].V_path.size(); ++l) {
          series.x.push_back(static_cast<double>(l));
          series.y.push_back(report.states[s].V_path[l]);
        }
        paths.push_back(std::move(series));
      }
      write_svg((root / "verify.svg").string(), paths, "Lyapunov value along the found witnesses",
                "step", "V");
    }
    results.push_back(std::move(artifacts));
  } else if (cfg.scenario == "brockett-probe") {
    const BoxSet box = BoxSet::centered_cube(6, cfg.probe_box);
    const ProbeReport report =
        brockett_residual_probe(cfg.probe_y4, box, cfg.probe_grid, cfg.probe_refine);
    RunArtifacts artifacts;
    artifacts.dir = root;
    artifacts.summary["label"] = "brockett-probe";
    artifacts.summary["y4"] = cfg.probe_y4;
    artifacts.summary["min_residual"] = report.min_residual;
    artifacts.summary["grid_residual"] = report.grid_residual;
    artifacts.summary["evaluations"] = report.evaluations;
    std::vector<double> argmin(report.argmin.data(), report.argmin.data() + report.argmin.size());
    artifacts.summary["argmin"] = argmin;
    std::ofstream(root / "summary.json") << artifacts.summary.dump(2) << '\n';
    results.push_back(std::move(artifacts));
  }
  return results;
}

/// Aligned total-cost comparison of previously emitted runs. Shorter series
/// continue at their final value, which reflects a converged loop accruing
/// negligible further cost. Refuses to compare runs with different stage
/// costs.
inline void compare_runs(const std::vector<std::string>& run_dirs, const std::string& out_dir,
                         bool svg = true) {
  require(run_dirs.size() >= 2, "compare: need at least two runs");

  struct Entry {
    std::string name;
    std::vector<double> cost;  // cumulative, index k
    double end_state_inf = 0.0;
  };
  std::vector<Entry> entries;
  double wx = 0.0, wu = 0.0;
  bool first = true;

  for (const auto& dir : run_dirs) {
    const std::filesystem::path d = dir;
    nlohmann::json summary;
    {
      std::ifstream in(d / "summary.json");
      if (!in) throw std::runtime_error("compare: missing summary.json in " + dir);
      in >> summary;
    }
    const double swx = summary.at("stage_cost").at("state_weight").get<double>();
    const double swu = summary.at("stage_cost").at("input_weight").get<double>();
    if (first) {
      wx = swx;
      wu = swu;
      first = false;
    } else if (swx != wx || swu != wu) {
      throw std::runtime_error(
          "compare: stage-cost definitions differ between runs (state_weight/input_weight " +
          std::to_string(wx) + "/" + std::to_string(wu) + " vs " + std::to_string(swx) + "/" +
          std::to_string(swu) + "); refusing to align total costs");
    }

    const ActualTable table = read_actual_csv((d / "actual.csv").string());
    Entry e;
    e.name = summary.value("label", d.filename().string());
    double cum = 0.0;
    e.cost.push_back(0.0);
    for (std::size_t r = 0; r < table.k.size(); ++r) {
      double x2 = 0.0, u2 = 0.0;
      for (double v : table.states[r]) x2 += v * v;
      for (double v : table.inputs[r]) u2 += v * v;
      cum += wx * x2 + wu * u2;
      e.cost.push_back(cum);
    }
    if (!table.states.empty()) {
      double m = 0.0;
      for (double v : table.states.back()) m = std::max(m, std::abs(v));
      e.end_state_inf = m;
    }
    entries.push_back(std::move(e));
  }

  std::size_t longest = 0;
  for (const auto& e : entries) longest = std::max(longest, e.cost.size());

  const std::filesystem::path out = out_dir;
  std::filesystem::create_directories(out);
  {
    std::ofstream csv(out / "comparison.csv");
    csv << "k";
    for (const auto& e : entries) csv << ",cost_" << e.name;
    csv << '\n';
    for (std::size_t k = 0; k < longest; ++k) {
      csv << k;
      for (const auto& e : entries)
        csv << ',' << detail::format_double(k < e.cost.size() ? e.cost[k] : e.cost.back());
      csv << '\n';
    }
  }
  {
    nlohmann::json j;
    for (const auto& e : entries)
      j["runs"].push_back({{"name", e.name},
                           {"final_cost", e.cost.back()},
                           {"end_state_inf_norm", e.end_state_inf}});
    std::ofstream(out / "comparison.json") << j.dump(2) << '\n';
  }
  if (svg) {
    std::vector<SvgSeries> series;
    for (const auto& e : entries) {
      SvgSeries s;
      s.name = e.name;
      for (std::size_t k = 0; k < longest; ++k) {
        s.x.push_back(static_cast<double>(k));
        s.y.push_back(k < e.cost.size() ? e.cost[k] : e.cost.back());
      }
      series.push_back(std::move(s));
    }
    write_svg((out / "comparison.svg").string(), series, "Total closed-loop cost", "time step k",
              "cost");
  }
}

}  // namespace flexmpc

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
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flexmpc/flexmpc.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

flexmpc::ExperimentConfig resolve_config(const std::string& config_path,
                                         const std::string& preset_name) {
  if (!config_path.empty() && !preset_name.empty())
    throw flexmpc::ConfigError("config: give either --config or --preset, not both");
  if (!config_path.empty()) return flexmpc::load_config(config_path);
  if (!preset_name.empty()) return flexmpc::preset(preset_name);
  throw flexmpc::ConfigError("config: one of --config or --preset is required");
}

void apply_overrides(flexmpc::ExperimentConfig& cfg, const std::string& out_dir, long seed,
                     const std::string& svg) {
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (seed >= 0) cfg.seed = static_cast<unsigned>(seed);
  if (svg == "on") cfg.svg = true;
  if (svg == "off") cfg.svg = false;
}

int run_scenario(const flexmpc::ExperimentConfig& cfg) {
  try {
    const auto artifacts = flexmpc::run_experiment(cfg);
    for (const auto& a : artifacts)
      std::printf("wrote %s (%s)\n", a.dir.string().c_str(),
                  a.summary.value("label", std::string("run")).c_str());
    return kExitOk;
  } catch (const flexmpc::FlexStepAbort& e) {
    std::fprintf(stderr, "run aborted: %s\npartial artifacts flushed under %s\n", e.what(),
                 cfg.out_dir.c_str());
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flexible-step MPC toolkit for the nonholonomic Brockett-variant case study"};
  app.require_subcommand(1);

  std::string config_path, preset_name, out_dir, svg_flag;
  long seed = -1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON experiment configuration");
    sub->add_option("--preset", preset_name, "built-in preset name");
    sub->add_option("--out", out_dir, "output directory override");
    sub->add_option("--seed", seed, "random seed override");
    sub->add_option("--svg", svg_flag, "SVG plot emission: on or off")
        ->check(CLI::IsMember({"on", "off"}));
  };

  CLI::App* run = app.add_subcommand("run", "execute a configured scenario");
  add_common(run);

  CLI::App* verify = app.add_subcommand("verify", "empirical g-dclf verification on random states");
  add_common(verify);

  CLI::App* probe_cmd =
      app.add_subcommand("probe", "necessary-condition residual probe for the Brockett variant");
  add_common(probe_cmd);

  CLI::App* compare = app.add_subcommand("compare", "align total-cost series of finished runs");
  std::vector<std::string> run_dirs;
  std::string compare_out = "comparison";
  std::string compare_svg = "on";
  compare->add_option("runs", run_dirs, "run directories to compare")->expected(-2);
  compare->add_option("--out", compare_out, "output directory");
  compare->add_option("--svg", compare_svg, "SVG plot emission: on or off")
      ->check(CLI::IsMember({"on", "off"}));

  CLI::App* presets = app.add_subcommand("presets", "preset utilities");
  CLI::App* presets_list = presets->add_subcommand("list", "print the available presets");

  CLI11_PARSE(app, argc, argv);

  try {
    if (presets->parsed() || presets_list->parsed()) {
      for (const auto& name : flexmpc::preset_names())
        std::printf("%s:\n%s\n", name.c_str(),
                    flexmpc::to_json(flexmpc::preset(name)).dump(2).c_str());
      return kExitOk;
    }
    if (compare->parsed()) {
      flexmpc::compare_runs(run_dirs, compare_out, compare_svg != "off");
      std::printf("wrote %s\n", compare_out.c_str());
      return kExitOk;
    }

    flexmpc::ExperimentConfig cfg = resolve_config(config_path, preset_name);
    if (verify->parsed()) cfg.scenario = "gdclf-verify";
    if (probe_cmd->parsed()) cfg.scenario = "brockett-probe";
    apply_overrides(cfg, out_dir, seed, svg_flag);
    flexmpc::validate_config(cfg);
    return run_scenario(cfg);
  } catch (const flexmpc::ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
}

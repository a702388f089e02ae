#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "sip/bench.hpp"

int main(int argc, char** argv) {
  CLI::App app{"difficulty-aware interpolant policy benchmark"};
  app.require_subcommand(1);

  std::string config_path;
  sip::CliOverrides ov;
  const std::vector<std::pair<const char*, const char*>> commands = {
      {"gen_demos", "generate scripted demonstrations"},
      {"train", "train the action-chunk field model on saved demos"},
      {"train_classifier", "harvest labeled states and fit the difficulty classifier"},
      {"eval", "run paired episodes per mode and report success and compute"},
      {"ablate", "sweep fixed sampler settings over a seed list"},
  };
  for (const auto& [name, desc] : commands) {
    auto* sc = app.add_subcommand(name, desc);
    sc->add_option("--config", config_path, "sectioned key=value config file");
    sc->add_option("--seed", ov.seed, "override run.seed");
    sc->add_option("--out", ov.out, "override run.out");
    sc->add_option("--task", ov.task, "override run.task");
    sc->add_option("--mode", ov.mode, "restrict eval.modes to one mode");
    sc->add_option("--preset", ov.preset, "override eval.preset");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? sip::kExitOk : sip::kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const sip::RunConfig cfg = sip::load_run_config(config_path, ov);
    sip::check_inputs(cfg, command);
    sip::print_resolved(cfg, std::cout);
    sip::run_command(command, cfg, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return sip::exit_code_for_current_exception();
  }
  return sip::kExitOk;
}

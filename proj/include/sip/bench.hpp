#pragma once

#include <map>
#include <string>
#include <vector>

#include "sip/difficulty.hpp"
#include "sip/envs.hpp"
#include "sip/runtime.hpp"

namespace sip {

// Benchmark configuration, loaded from a sectioned key=value file. Every
// key is listed in the schema below with its default; unknown keys, bad
// values, and duplicate keys are rejected. `resolved` holds the final
// string form of every key (defaults, file values, and flag overrides
// merged) for printing and for the run manifest.
struct RunConfig {
  // [run]
  TaskKind task = TaskKind::ReachLift;
  std::uint64_t seed = 1;
  std::string out = "out";

  // [schedule]
  InterpolantSchedule schedule;

  // [demos]
  int demo_count = 200;

  // [train]
  PredictionTarget target = PredictionTarget::Velocity;
  std::string demos_file;
  int epochs = 900;
  int batch_size = 256;
  double learning_rate = 2e-3;
  double weight_decay = 1e-6;
  double ema_rate = 0.99;
  int warmup_steps = 100;
  std::string lr_schedule = "cosine";
  std::vector<Eigen::Index> hidden = {256, 256};
  int time_embed_dim = 32;
  std::string activation = "gelu";
  int chunk_len = 8;
  int exec_len = 4;

  // [classifier]
  std::string classifier_arch = "mlp";
  int per_class = 125;
  int harvest_episodes = 4000;
  std::vector<int> curve_sizes = {100, 200, 300, 500};
  int classifier_epochs = 400;
  double classifier_learning_rate = 5e-3;
  double classifier_weight_decay = 1e-5;
  int classifier_batch_size = 64;

  // [eval]
  int eval_episodes = 100;
  ConfigPreset preset = ConfigPreset::SixLevel;
  std::vector<std::string> eval_modes = {"min", "max", "adaptive"};
  std::string policy_file;
  std::string classifier_file;  // empty = rule-based labels

  // [ablate]
  int ablate_episodes = 20;
  std::vector<int> ablate_steps = {1, 5, 10, 25, 50, 100};
  std::vector<std::string> ablate_solvers = {"euler", "heun"};
  std::vector<std::string> ablate_modes = {"ode", "sde"};
  std::vector<std::string> ablate_last_steps = {"none", "euler_step", "tweedie"};

  std::map<std::string, std::string> resolved;

  TrainConfig train_config() const;
  MlpSpec policy_arch() const;
};

// Flag overrides applied on top of the file; empty strings mean unset.
struct CliOverrides {
  std::string seed;
  std::string out;
  std::string task;
  std::string mode;    // replaces eval.modes with the single entry
  std::string preset;  // replaces eval.preset
};

// Parses the file (empty path = defaults only), applies overrides, and
// re-validates every value. Throws config_error with the offending key.
RunConfig load_run_config(const std::string& path, const CliOverrides& overrides = {});

// Input files the command will read must exist before any work starts.
void check_inputs(const RunConfig& cfg, const std::string& command);

// Echo of the final configuration, one sorted "key = value" line each.
void print_resolved(const RunConfig& cfg, std::ostream& os);

// Every command writes its artifacts under cfg.out plus a manifest.json
// naming the command, the resolved config, and the content hash of each
// input and output file. Wall-clock files are listed but not hashed, so
// manifests from identical reruns are byte-identical.
void cmd_gen_demos(const RunConfig& cfg, std::ostream& os);
void cmd_train(const RunConfig& cfg, std::ostream& os);
void cmd_train_classifier(const RunConfig& cfg, std::ostream& os);
void cmd_eval(const RunConfig& cfg, std::ostream& os);
void cmd_ablate(const RunConfig& cfg, std::ostream& os);

// Dispatch by command name; throws config_error for an unknown command.
void run_command(const std::string& command, const RunConfig& cfg, std::ostream& os);

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

// Maps the library error categories onto process exit codes.
int exit_code_for_current_exception();

}  // namespace sip

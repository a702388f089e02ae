#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sip/difficulty.hpp"
#include "sip/envs.hpp"
#include "sip/field.hpp"
#include "sip/sampler.hpp"

namespace sip {

// A trained policy plus the sampling context it was trained under. The
// field generates flattened chunks of chunk_len actions; exec_len of them
// are executed before replanning. The bundle does not own the field.
struct PolicyBundle {
  const FieldModel* field = nullptr;
  InterpolantSchedule schedule{ScheduleKind::Linear};
  PredictionTarget target = PredictionTarget::Velocity;
  int chunk_len = 8;
  int exec_len = 4;

  // Throws config_error on a null field, exec_len outside [1, chunk_len],
  // or a target that disagrees with the field's own head.
  void validate() const;
};

enum class PolicyModeKind { Fixed, Adaptive };

// Per-cycle inference policy. Fixed always samples with the one config.
// Adaptive labels the current state and looks the config up in the map;
// a null classifier means rule-based labels straight from the simulator
// state (the ground-truth labeler), otherwise the model's prediction.
struct PolicyMode {
  PolicyModeKind kind = PolicyModeKind::Fixed;
  InferenceConfig fixed;
  const ClassifierModel* classifier = nullptr;
  ConfigMap config_map;

  static PolicyMode fixed_config(const InferenceConfig& cfg);
  static PolicyMode adaptive(const ClassifierModel* model, const ConfigMap& map);
  static PolicyMode adaptive_oracle(const ConfigMap& map);
};

struct ControlCycleLog {
  int cycle = 0;
  DifficultyLabel label = DifficultyLabel::I;
  InferenceConfig config;
  int nfe = 0;
  double classifier_ms = 0.0;
  double sampler_ms = 0.0;
  double sim_ms = 0.0;
};

struct EpisodeResult {
  std::uint64_t seed = 0;
  bool success = false;
  int steps = 0;
  long total_nfe = 0;
  double classifier_s = 0.0;
  double sampler_s = 0.0;
  double sim_s = 0.0;
  double total_wall_s = 0.0;  // sum of the three categories
  std::vector<ControlCycleLog> cycles;
  std::vector<Vec> actions;  // executed simulator actions, one per step
};

// One evaluated (task, mode) cell. reduction_vs_max compares mean NFE
// against the most expensive mode evaluated alongside this one.
struct RunReport {
  TaskKind task = TaskKind::ReachLift;
  std::string mode_name;
  std::vector<EpisodeResult> episodes;
  double success_rate = 0.0;
  double mean_nfe = 0.0;
  double mean_cycles = 0.0;
  double mean_steps = 0.0;
  double mean_wall_s = 0.0;
  double mean_classifier_s = 0.0;
  double mean_sampler_s = 0.0;
  double mean_sim_s = 0.0;
  double reduction_vs_max = 1.0;
};

// Distinct per-episode seeds derived from one base seed.
std::vector<std::uint64_t> make_seeds(std::uint64_t base, int n);

// Closed-loop rollout: reset(task, seed), then label, sample a chunk, and
// execute exec_len actions per cycle until success or the horizon. The
// policy noise stream is derived from the episode seed alone and every
// mode draws from it identically, so runs with the same seed stay paired
// action-for-action across modes. Labeling time lands in classifier_ms
// and costs zero NFE; in fixed mode the logged label is the rule-based
// one and is informational only. Sampler failures are rethrown with the
// episode seed and cycle attached.
EpisodeResult run_episode(TaskKind task, std::uint64_t seed, const PolicyBundle& bundle,
                          const PolicyMode& mode, const EnvParams& p = {});

struct EvalMode {
  std::string name;
  PolicyMode mode;
};

// Runs every mode over the same seed list (paired comparison) and fills
// aggregates; reduction_vs_max uses the largest mean NFE among the modes
// as the baseline, so the max-compute mode reports exactly 1.
std::vector<RunReport> evaluate(TaskKind task, const PolicyBundle& bundle,
                                const std::vector<EvalMode>& modes,
                                const std::vector<std::uint64_t>& seeds,
                                const EnvParams& p = {});

// Training pairs for chunked imitation: one column per (demo, start index),
// x_star = the next chunk_len normalized actions flattened (zero-padded past
// the episode end), obs = the observation at the start index.
Dataset build_chunk_dataset(const std::vector<Demonstration>& demos, TaskKind task,
                            int chunk_len, const EnvParams& p = {});

struct ReportRow {
  std::string task;
  std::string mode;
  int episodes = 0;
  int successes = 0;
  double success_rate = 0.0;
  double mean_nfe = 0.0;
  double reduction_vs_max = 0.0;
  double mean_cycles = 0.0;
  double mean_steps = 0.0;
};

// Writes <out_dir>/results.tsv (deterministic aggregates, one row per
// report) and <out_dir>/timing.tsv (wall-clock means, which vary run to
// run and are kept out of the byte-stable file), then prints the summary
// table to `os`. Throws data_error on an empty report list.
void write_report(const std::vector<RunReport>& reports, const std::string& out_dir,
                  std::ostream& os);

// Parses a results.tsv produced by write_report.
std::vector<ReportRow> read_report(const std::string& path);

void print_summary(const std::vector<RunReport>& reports, std::ostream& os);

}  // namespace sip

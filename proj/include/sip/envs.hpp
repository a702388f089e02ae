#pragma once

#include <string>
#include <vector>

#include "sip/common.hpp"

namespace sip {

enum class TaskKind { ReachLift, PushBlock, PegInSlot };

const char* to_string(TaskKind k);
TaskKind task_kind_from_string(const std::string& s);

// Displacement channels per task, plus the grasp channel on the pick task.
int action_dim(TaskKind k);

struct EnvParams {
  double max_step = 0.05;      // per-component displacement clip
  double grasp_radius = 0.03;  // pick attach distance
  double success_tol = 0.05;
  double block_half = 0.08;    // push block half extent
  double slot_width = 0.04;    // full opening width
  double slot_depth = 0.03;    // insertion depth for success
  double d_near = 0.1;         // near-phase distance threshold
  int horizon = 300;
};

struct SlotGeometry {
  Vec2 entry = Vec2::Zero();  // point on the wall where the opening sits
  double angle = 0.0;         // opening axis; 0 = +x into the wall
  double width = 0.0;
};

struct SimState {
  Vec2 gripper_pos = Vec2::Zero();
  Vec2 gripper_vel = Vec2::Zero();
  Vec2 object_pos = Vec2::Zero();
  double object_angle = 0.0;
  bool attached = false;
  bool contact = false;
  Vec2 goal_pos = Vec2::Zero();
  SlotGeometry slot;
  int step_count = 0;
};

// Fixed observation layout:
//   [0:2)   gripper_pos
//   [2:4)   gripper_vel
//   [4:6)   object_pos
//   [6]     object_angle
//   [7]     attached
//   [8]     contact
//   [9:11)  goal_pos
//   [11:13) slot entry
//   [13]    slot angle
//   [14]    slot width
//   [15]    step_count / horizon
inline constexpr int kObsDim = 16;

Vec observe(const SimState& s, const EnvParams& p = {});
SimState state_from_observation(const Vec& obs, const EnvParams& p = {});

SimState reset(TaskKind task, std::uint64_t seed, const EnvParams& p = {});

// Kinematic update: displacement channels are clipped per component, the
// gripper is clamped to the workspace, then task dynamics run (quasi-static
// block push, sticky grasp, slot wall constraints).
SimState step(const SimState& s, TaskKind task, const Vec& action,
              const EnvParams& p = {});

bool is_success(const SimState& s, TaskKind task, const EnvParams& p = {});

// Phase-dependent proportional controller; insertion adds exploratory
// jitter near the slot mouth.
Vec scripted_expert(const SimState& s, TaskKind task, Rng& rng,
                    const EnvParams& p = {});

// Policies operate on actions scaled to [-1, 1] per channel.
Vec normalize_action(const Vec& a, TaskKind task, const EnvParams& p = {});
Vec denormalize_action(const Vec& a, TaskKind task, const EnvParams& p = {});

struct Demonstration {
  std::vector<Vec> observations;
  std::vector<Vec> actions;
  bool success = false;
};

// Successful expert episodes only; each records a few settle steps past
// success so terminal states appear in the data.
std::vector<Demonstration> gen_demos(TaskKind task, int n, std::uint64_t seed,
                                     const EnvParams& p = {});

struct DemoSet {
  TaskKind task = TaskKind::ReachLift;
  int obs_dim = 0;
  int action_dim = 0;
  std::vector<Demonstration> demos;
};

void save_demos(const std::string& path, TaskKind task,
                const std::vector<Demonstration>& demos);
DemoSet load_demos(const std::string& path);

}  // namespace sip

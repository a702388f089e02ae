#include "sip/envs.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "sip/binio.hpp"

namespace sip {

namespace {

constexpr double kWorkLo = -1.0;
constexpr double kWorkHi = 1.0;
constexpr std::uint64_t kResetStream = 0x7e5e;
constexpr std::uint64_t kDemoSeqStream = 0xd390;
constexpr std::uint64_t kExpertStream = 0x3c9e;
constexpr int kPostSuccessSteps = 4;
constexpr int kDemoAttemptFactor = 4;

double clampd(double v, double lo, double hi) {
  return std::min(std::max(v, lo), hi);
}

Vec2 clamp_workspace(const Vec2& v) {
  return Vec2(clampd(v.x(), kWorkLo, kWorkHi), clampd(v.y(), kWorkLo, kWorkHi));
}

Vec2 urand_box(Rng& rng, double half) {
  double x = rng.uniform(-half, half);
  double y = rng.uniform(-half, half);
  return Vec2(x, y);
}

// gripper placed on a ring around a point, rejected into the workspace
Vec2 ring_placement(Rng& rng, const Vec2& center, double r_lo, double r_hi) {
  for (int tries = 0; tries < 256; ++tries) {
    double r = rng.uniform(r_lo, r_hi);
    double th = rng.uniform(0.0, 2.0 * M_PI);
    Vec2 g = center + r * Vec2(std::cos(th), std::sin(th));
    if (g.x() >= -0.95 && g.x() <= 0.95 && g.y() >= -0.95 && g.y() <= 0.95)
      return g;
  }
  throw numeric_error("reset: ring placement failed");
}

bool inside_block(const Vec2& pt, const Vec2& center, double half) {
  return std::abs(pt.x() - center.x()) < half &&
         std::abs(pt.y() - center.y()) < half;
}

// scale a displacement so no component exceeds max_step, keeping direction
Vec2 scale_step(const Vec2& d, double max_step) {
  double m = std::max(std::abs(d.x()), std::abs(d.y()));
  if (m <= max_step || m == 0.0) return d;
  return d * (max_step / m);
}

Vec expert_action(TaskKind task, const Vec2& d, double grasp) {
  int n = action_dim(task);
  Vec a = Vec::Zero(n);
  a[0] = d.x();
  a[1] = d.y();
  if (n > 2) a[2] = grasp;
  return a;
}

}  // namespace

const char* to_string(TaskKind k) {
  switch (k) {
    case TaskKind::ReachLift: return "reach_lift";
    case TaskKind::PushBlock: return "push_block";
    case TaskKind::PegInSlot: return "peg_in_slot";
  }
  throw config_error("unknown task kind");
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "reach_lift") return TaskKind::ReachLift;
  if (s == "push_block") return TaskKind::PushBlock;
  if (s == "peg_in_slot") return TaskKind::PegInSlot;
  throw config_error("unknown task: " + s);
}

int action_dim(TaskKind k) {
  return k == TaskKind::ReachLift ? 3 : 2;
}

Vec observe(const SimState& s, const EnvParams& p) {
  Vec o(kObsDim);
  o[0] = s.gripper_pos.x();
  o[1] = s.gripper_pos.y();
  o[2] = s.gripper_vel.x();
  o[3] = s.gripper_vel.y();
  o[4] = s.object_pos.x();
  o[5] = s.object_pos.y();
  o[6] = s.object_angle;
  o[7] = s.attached ? 1.0 : 0.0;
  o[8] = s.contact ? 1.0 : 0.0;
  o[9] = s.goal_pos.x();
  o[10] = s.goal_pos.y();
  o[11] = s.slot.entry.x();
  o[12] = s.slot.entry.y();
  o[13] = s.slot.angle;
  o[14] = s.slot.width;
  o[15] = static_cast<double>(s.step_count) / p.horizon;
  return o;
}

SimState state_from_observation(const Vec& obs, const EnvParams& p) {
  if (obs.size() != kObsDim)
    throw data_error("observation size " + std::to_string(obs.size()) +
                     ", expected " + std::to_string(kObsDim));
  SimState s;
  s.gripper_pos = Vec2(obs[0], obs[1]);
  s.gripper_vel = Vec2(obs[2], obs[3]);
  s.object_pos = Vec2(obs[4], obs[5]);
  s.object_angle = obs[6];
  s.attached = obs[7] > 0.5;
  s.contact = obs[8] > 0.5;
  s.goal_pos = Vec2(obs[9], obs[10]);
  s.slot.entry = Vec2(obs[11], obs[12]);
  s.slot.angle = obs[13];
  s.slot.width = obs[14];
  s.step_count = static_cast<int>(std::lround(obs[15] * p.horizon));
  return s;
}

SimState reset(TaskKind task, std::uint64_t seed, const EnvParams& p) {
  Rng rng = Rng::substream(seed, kResetStream);
  SimState s;
  switch (task) {
    case TaskKind::ReachLift: {
      s.object_pos = urand_box(rng, 0.45);
      s.gripper_pos = ring_placement(rng, s.object_pos, 0.75, 0.95);
      for (int tries = 0; tries < 256; ++tries) {
        s.goal_pos = urand_box(rng, 0.45);
        if ((s.goal_pos - s.object_pos).norm() >= 0.25) break;
      }
      break;
    }
    case TaskKind::PushBlock: {
      s.object_pos = urand_box(rng, 0.35);
      for (int tries = 0; tries < 256; ++tries) {
        int axis = rng.uniform() < 0.5 ? 0 : 1;
        double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        double dist = rng.uniform(0.18, 0.26);
        double jitter = rng.uniform(-0.02, 0.02);
        Vec2 goal = s.object_pos;
        goal[axis] += sign * dist;
        goal[1 - axis] += jitter;
        if (goal.x() >= -0.85 && goal.x() <= 0.85 && goal.y() >= -0.85 &&
            goal.y() <= 0.85) {
          s.goal_pos = goal;
          break;
        }
      }
      for (int tries = 0; tries < 256; ++tries) {
        s.gripper_pos = ring_placement(rng, s.object_pos, 0.75, 0.95);
        if (!inside_block(s.gripper_pos, s.object_pos, p.block_half + 0.05))
          break;
      }
      break;
    }
    case TaskKind::PegInSlot: {
      double wall_x = rng.uniform(0.3, 0.5);
      double slot_y = rng.uniform(-0.3, 0.3);
      s.slot.entry = Vec2(wall_x, slot_y);
      s.slot.angle = 0.0;
      s.slot.width = p.slot_width;
      s.goal_pos = Vec2(wall_x + p.slot_depth, slot_y);
      for (int tries = 0; tries < 256; ++tries) {
        s.gripper_pos = ring_placement(rng, s.slot.entry, 0.75, 0.95);
        if (s.gripper_pos.x() <= wall_x - 0.15) break;
      }
      s.object_pos = s.gripper_pos;  // peg rides the gripper
      s.attached = true;
      break;
    }
  }
  return s;
}

namespace {

SimState step_reach_lift(const SimState& s, const Vec2& disp, double grasp,
                         const EnvParams& p) {
  SimState n = s;
  Vec2 pos = clamp_workspace(s.gripper_pos + disp);
  n.gripper_pos = pos;
  if (!n.attached && (pos - s.object_pos).norm() <= p.grasp_radius &&
      grasp > 0.5)
    n.attached = true;  // sticky grasp
  if (n.attached) n.object_pos = pos;
  n.contact = n.attached || (pos - n.object_pos).norm() <= p.grasp_radius;
  return n;
}

SimState step_push_block(const SimState& s, const Vec2& disp,
                         const EnvParams& p) {
  SimState n = s;
  Vec2 pos = clamp_workspace(s.gripper_pos + disp);
  n.contact = false;
  const double h = p.block_half;
  if (inside_block(pos, s.object_pos, h)) {
    // quasi-static push along the axis of least penetration
    double dx = pos.x() - s.object_pos.x();
    double dy = pos.y() - s.object_pos.y();
    double pen_x = h - std::abs(dx);
    double pen_y = h - std::abs(dy);
    Vec2 block = s.object_pos;
    // the block yields away from the penetrated face
    if (pen_x <= pen_y) {
      block.x() = dx >= 0.0 ? pos.x() - h : pos.x() + h;
    } else {
      block.y() = dy >= 0.0 ? pos.y() - h : pos.y() + h;
    }
    block.x() = clampd(block.x(), kWorkLo + h, kWorkHi - h);
    block.y() = clampd(block.y(), kWorkLo + h, kWorkHi - h);
    n.object_pos = block;
    // if the block hit the wall the gripper backs off to its face
    if (inside_block(pos, block, h)) {
      if (pen_x <= pen_y) {
        pos.x() = pos.x() >= block.x() ? block.x() + h : block.x() - h;
      } else {
        pos.y() = pos.y() >= block.y() ? block.y() + h : block.y() - h;
      }
    }
    n.contact = true;
  }
  n.gripper_pos = clamp_workspace(pos);
  return n;
}

SimState step_peg_in_slot(const SimState& s, const Vec2& disp,
                          const EnvParams& p) {
  SimState n = s;
  Vec2 pos = clamp_workspace(s.gripper_pos + disp);
  const double wall_x = s.slot.entry.x();
  const double slot_y = s.slot.entry.y();
  const double half_w = s.slot.width * 0.5;
  const double depth_limit = wall_x + p.slot_depth + 0.02;
  n.contact = false;
  if (s.gripper_pos.x() <= wall_x) {
    if (pos.x() > wall_x) {
      if (std::abs(pos.y() - slot_y) <= half_w) {
        // entering the channel
        pos.y() = clampd(pos.y(), slot_y - half_w, slot_y + half_w);
        pos.x() = std::min(pos.x(), depth_limit);
      } else {
        // blocked by the wall face; slide along it
        pos.x() = wall_x;
        n.contact = true;
      }
    }
  } else {
    // already in the channel: confined until withdrawn past the wall
    double y = clampd(pos.y(), slot_y - half_w, slot_y + half_w);
    if (y != pos.y() || pos.x() > depth_limit) n.contact = true;
    pos.y() = y;
    pos.x() = std::min(pos.x(), depth_limit);
  }
  n.gripper_pos = pos;
  n.object_pos = pos;  // peg rides the gripper
  return n;
}

}  // namespace

SimState step(const SimState& s, TaskKind task, const Vec& action,
              const EnvParams& p) {
  int n = action_dim(task);
  if (action.size() != n)
    throw data_error("action size " + std::to_string(action.size()) +
                     ", expected " + std::to_string(n));
  Vec2 disp(clampd(action[0], -p.max_step, p.max_step),
            clampd(action[1], -p.max_step, p.max_step));
  double grasp = n > 2 ? action[2] : 0.0;

  SimState out;
  switch (task) {
    case TaskKind::ReachLift:
      out = step_reach_lift(s, disp, grasp, p);
      break;
    case TaskKind::PushBlock:
      out = step_push_block(s, disp, p);
      break;
    case TaskKind::PegInSlot:
      out = step_peg_in_slot(s, disp, p);
      break;
    default:
      throw config_error("unknown task kind");
  }
  out.gripper_vel = out.gripper_pos - s.gripper_pos;
  out.step_count = s.step_count + 1;
  return out;
}

bool is_success(const SimState& s, TaskKind task, const EnvParams& p) {
  switch (task) {
    case TaskKind::ReachLift:
      return s.attached && (s.object_pos - s.goal_pos).norm() <= p.success_tol;
    case TaskKind::PushBlock:
      return (s.object_pos - s.goal_pos).norm() <= p.success_tol;
    case TaskKind::PegInSlot:
      return s.object_pos.x() >= s.slot.entry.x() + p.slot_depth &&
             std::abs(s.object_pos.y() - s.slot.entry.y()) <=
                 s.slot.width * 0.5;
  }
  throw config_error("unknown task kind");
}

namespace {

Vec expert_reach_lift(const SimState& s, const EnvParams& p) {
  const Vec2 g = s.gripper_pos;
  if (s.attached) {
    if ((s.object_pos - s.goal_pos).norm() <= 0.03)
      return expert_action(TaskKind::ReachLift, Vec2::Zero(), 1.0);
    return expert_action(TaskKind::ReachLift,
                         scale_step(s.goal_pos - g, p.max_step), 1.0);
  }
  Vec2 to_obj = s.object_pos - g;
  if (to_obj.norm() <= 0.8 * p.grasp_radius)
    return expert_action(TaskKind::ReachLift, scale_step(to_obj, p.max_step),
                         1.0);
  return expert_action(TaskKind::ReachLift, scale_step(to_obj, p.max_step),
                       0.0);
}

Vec expert_push_block(const SimState& s, const EnvParams& p) {
  const Vec2 g = s.gripper_pos;
  const Vec2 o = s.object_pos;
  const double h = p.block_half;
  Vec2 rem = s.goal_pos - o;
  if (rem.norm() <= 0.03)
    return expert_action(TaskKind::PushBlock, Vec2::Zero(), 0.0);

  // push along the dominant goal axis
  int axis = std::abs(rem.x()) >= std::abs(rem.y()) ? 0 : 1;
  double sign = rem[axis] >= 0.0 ? 1.0 : -1.0;
  Vec2 dirv = Vec2::Zero();
  dirv[axis] = sign;
  int lat_axis = 1 - axis;

  Vec2 rel = g - o;
  bool behind = rel[axis] * sign <= -h + 0.01 && std::abs(rel[lat_axis]) <= h;
  if (behind) {
    Vec2 staging = o - dirv * (h + 0.015);
    if ((g - staging).norm() > 0.02 && rel[axis] * sign < -(h + 0.01))
      return expert_action(TaskKind::PushBlock,
                           scale_step(staging - g, p.max_step), 0.0);
    Vec2 d = dirv * std::abs(rem[axis]);
    d[lat_axis] += clampd(o[lat_axis] - g[lat_axis], -0.01, 0.01);
    return expert_action(TaskKind::PushBlock, scale_step(d, p.max_step), 0.0);
  }

  if ((g - o).norm() > 0.35)
    return expert_action(TaskKind::PushBlock, scale_step(o - g, p.max_step),
                         0.0);

  // circle to the staging point behind the block; the lateral detour only
  // applies until the back face plane is crossed, so the target never flips
  Vec2 target = o - dirv * (h + 0.12);
  if (rel[axis] * sign > -h) {
    Vec2 latv = Vec2::Zero();
    latv[lat_axis] = rel[lat_axis] >= 0.0 ? 1.0 : -1.0;
    target += latv * (h + 0.12);
  }
  return expert_action(TaskKind::PushBlock, scale_step(target - g, p.max_step),
                       0.0);
}

Vec expert_peg_in_slot(const SimState& s, Rng& rng, const EnvParams& p) {
  const Vec2 g = s.gripper_pos;
  const double wall_x = s.slot.entry.x();
  const double slot_y = s.slot.entry.y();
  if (s.object_pos.x() >= wall_x + p.slot_depth &&
      std::abs(s.object_pos.y() - slot_y) <= s.slot.width * 0.5)
    return expert_action(TaskKind::PegInSlot, Vec2::Zero(), 0.0);

  bool in_s_region =
      g.x() > wall_x - 0.06 && std::abs(g.y() - slot_y) < 0.08;
  if (in_s_region) {
    Vec2 target(wall_x + p.slot_depth + 0.015, slot_y);
    Vec2 d = scale_step(target - g, p.max_step);
    d.x() += 0.01 * rng.normal();
    d.y() += 0.01 * rng.normal();
    d.x() = clampd(d.x(), -p.max_step, p.max_step);
    d.y() = clampd(d.y(), -p.max_step, p.max_step);
    return expert_action(TaskKind::PegInSlot, d, 0.0);
  }
  Vec2 staging(wall_x - 0.05, slot_y);
  return expert_action(TaskKind::PegInSlot,
                       scale_step(staging - g, p.max_step), 0.0);
}

}  // namespace

Vec scripted_expert(const SimState& s, TaskKind task, Rng& rng,
                    const EnvParams& p) {
  switch (task) {
    case TaskKind::ReachLift: return expert_reach_lift(s, p);
    case TaskKind::PushBlock: return expert_push_block(s, p);
    case TaskKind::PegInSlot: return expert_peg_in_slot(s, rng, p);
  }
  throw config_error("unknown task kind");
}

Vec normalize_action(const Vec& a, TaskKind task, const EnvParams& p) {
  int n = action_dim(task);
  if (a.size() != n)
    throw data_error("action size " + std::to_string(a.size()) +
                     ", expected " + std::to_string(n));
  Vec out(n);
  out[0] = a[0] / p.max_step;
  out[1] = a[1] / p.max_step;
  if (n > 2) out[2] = 2.0 * a[2] - 1.0;
  return out;
}

Vec denormalize_action(const Vec& a, TaskKind task, const EnvParams& p) {
  int n = action_dim(task);
  if (a.size() != n)
    throw data_error("action size " + std::to_string(a.size()) +
                     ", expected " + std::to_string(n));
  Vec out(n);
  out[0] = a[0] * p.max_step;
  out[1] = a[1] * p.max_step;
  if (n > 2) out[2] = 0.5 * (a[2] + 1.0);
  return out;
}

std::vector<Demonstration> gen_demos(TaskKind task, int n, std::uint64_t seed,
                                     const EnvParams& p) {
  if (n < 1) throw config_error("gen_demos: n must be positive");
  std::vector<Demonstration> demos;
  demos.reserve(n);
  Rng seq = Rng::substream(seed, kDemoSeqStream);
  int attempts = 0;
  const int max_attempts = kDemoAttemptFactor * n;
  while (static_cast<int>(demos.size()) < n && attempts < max_attempts) {
    std::uint64_t ep_seed = seq.next_u64();
    ++attempts;
    Rng expert_rng = Rng::substream(ep_seed, kExpertStream);
    SimState s = reset(task, ep_seed, p);
    Demonstration d;
    bool done = false;
    for (int t = 0; t < p.horizon && !done; ++t) {
      Vec a = scripted_expert(s, task, expert_rng, p);
      d.observations.push_back(observe(s, p));
      d.actions.push_back(a);
      s = step(s, task, a, p);
      done = is_success(s, task, p);
    }
    if (!done) continue;
    // a few settle steps so terminal states appear in the data
    for (int t = 0; t < kPostSuccessSteps; ++t) {
      Vec a = scripted_expert(s, task, expert_rng, p);
      d.observations.push_back(observe(s, p));
      d.actions.push_back(a);
      s = step(s, task, a, p);
    }
    d.success = true;
    demos.push_back(std::move(d));
  }
  if (static_cast<int>(demos.size()) < n)
    throw data_error("gen_demos: expert succeeded on " +
                     std::to_string(demos.size()) + "/" + std::to_string(n) +
                     " within the attempt budget");
  return demos;
}

void save_demos(const std::string& path, TaskKind task,
                const std::vector<Demonstration>& demos) {
  using namespace binio;
  std::string out;
  out.append("SIPDEMO1", 8);
  put_u32(out, 1);
  put_u8(out, static_cast<std::uint8_t>(task));
  put_u32(out, kObsDim);
  put_u32(out, static_cast<std::uint32_t>(action_dim(task)));
  put_u32(out, static_cast<std::uint32_t>(demos.size()));
  for (const auto& d : demos) {
    if (d.observations.size() != d.actions.size())
      throw data_error("demo has mismatched observation/action counts");
    put_u32(out, static_cast<std::uint32_t>(d.observations.size()));
    put_u8(out, d.success ? 1 : 0);
    for (const auto& o : d.observations)
      for (int i = 0; i < o.size(); ++i) put_f32(out, static_cast<float>(o[i]));
    for (const auto& a : d.actions)
      for (int i = 0; i < a.size(); ++i) put_f32(out, static_cast<float>(a[i]));
  }
  write_file(path, out, "demo");
}

DemoSet load_demos(const std::string& path) {
  using namespace binio;
  std::string buf = read_file(path, "demo");
  Reader r{buf, "demo"};
  r.need(8);
  if (std::memcmp(buf.data(), "SIPDEMO1", 8) != 0)
    throw data_error("demo: bad magic");
  r.pos += 8;
  std::uint32_t version = r.u32();
  if (version != 1)
    throw data_error("demo: unsupported version " + std::to_string(version));
  DemoSet set;
  std::uint8_t task_id = r.u8();
  if (task_id > 2) throw data_error("demo: bad task id");
  set.task = static_cast<TaskKind>(task_id);
  set.obs_dim = static_cast<int>(r.u32());
  set.action_dim = static_cast<int>(r.u32());
  if (set.obs_dim != kObsDim || set.action_dim != action_dim(set.task))
    throw data_error("demo: dimension mismatch");
  std::uint32_t count = r.u32();
  set.demos.resize(count);
  for (auto& d : set.demos) {
    std::uint32_t steps = r.u32();
    d.success = r.u8() != 0;
    d.observations.resize(steps);
    d.actions.resize(steps);
    for (auto& o : d.observations) {
      o.resize(set.obs_dim);
      for (int i = 0; i < set.obs_dim; ++i) o[i] = r.f32();
    }
    for (auto& a : d.actions) {
      a.resize(set.action_dim);
      for (int i = 0; i < set.action_dim; ++i) a[i] = r.f32();
    }
  }
  return set;
}

}  // namespace sip

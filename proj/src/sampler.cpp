#include "sip/sampler.hpp"

#include <cmath>
#include <string>

namespace sip {

const char* to_string(Solver s) {
  switch (s) {
    case Solver::Euler: return "euler";
    case Solver::Heun: return "heun";
    case Solver::RK4: return "rk4";
  }
  return "?";
}

const char* to_string(IntegrationMode m) {
  return m == IntegrationMode::ODE ? "ode" : "sde";
}

const char* to_string(LastStep l) {
  switch (l) {
    case LastStep::None: return "none";
    case LastStep::EulerStep: return "euler_step";
    case LastStep::Tweedie: return "tweedie";
  }
  return "?";
}

Solver solver_from_string(const std::string& s) {
  if (s == "euler") return Solver::Euler;
  if (s == "heun") return Solver::Heun;
  if (s == "rk4") return Solver::RK4;
  throw config_error("unknown solver: " + s);
}

IntegrationMode integration_mode_from_string(const std::string& s) {
  if (s == "ode") return IntegrationMode::ODE;
  if (s == "sde") return IntegrationMode::SDE;
  throw config_error("unknown integration mode: " + s);
}

LastStep last_step_from_string(const std::string& s) {
  if (s == "none") return LastStep::None;
  if (s == "euler_step") return LastStep::EulerStep;
  if (s == "tweedie") return LastStep::Tweedie;
  throw config_error("unknown last step: " + s);
}

void InferenceConfig::validate() const {
  if (steps < 1) throw config_error("steps must be >= 1");
  if (!(w_scale >= 0.0)) throw config_error("w_scale must be >= 0");
  if (!(t_end_clamp >= 0.0) || t_end_clamp >= 1.0)
    throw config_error("t_end_clamp must lie in [0, 1)");
  if (mode == IntegrationMode::SDE && solver == Solver::RK4)
    throw config_error("rk4 supports only ode mode");
}

std::vector<double> build_time_grid(const InferenceConfig& cfg) {
  if (cfg.steps < 1) throw config_error("steps must be >= 1");
  if (!(cfg.t_end_clamp >= 0.0) || cfg.t_end_clamp >= 1.0)
    throw config_error("t_end_clamp must lie in [0, 1)");
  const double t_end = 1.0 - cfg.t_end_clamp;
  std::vector<double> knots(static_cast<std::size_t>(cfg.steps) + 1);
  for (int i = 0; i <= cfg.steps; ++i)
    knots[static_cast<std::size_t>(i)] =
        t_end * (static_cast<double>(i) / cfg.steps);
  return knots;
}

int predicted_nfe(const InferenceConfig& cfg) {
  int per_step = 1;
  if (cfg.solver == Solver::Heun) per_step = 2;
  if (cfg.solver == Solver::RK4) per_step = 4;
  return cfg.steps * per_step + (cfg.last_step == LastStep::None ? 0 : 1);
}

namespace {

// Score and noise heads cannot be turned into a velocity at alpha = 0, and
// a schedule whose dalpha diverges at t = 0 has no pointwise drift there,
// so those evaluations are pushed up to this floor. Matches the lower edge
// of the training time band; only the t = 0 knot is ever affected.
constexpr double kConvTimeFloor = 1e-3;

double eval_time_for(const FieldModel& field, const InterpolantSchedule& sched,
                     double t) {
  double te = std::max(t, field.min_eval_time());
  if (field.target() != PredictionTarget::Velocity ||
      !std::isfinite(sched.eval(TimePoint(te)).dalpha))
    te = std::max(te, kConvTimeFloor);
  return te;
}

Vec score_at(const FieldModel& field, const InterpolantSchedule& sched,
             const Vec& x, double t, const Vec& obs, int* nfe) {
  const double te = eval_time_for(field, sched, t);
  const Vec y = field.eval(x, te, obs);
  ++*nfe;
  const TimePoint tp(te);
  switch (field.target()) {
    case PredictionTarget::Velocity: return score_from_velocity(x, y, tp, sched);
    case PredictionTarget::Score: return y;
    case PredictionTarget::Noise: return score_from_noise(y, tp, sched);
  }
  throw config_error("unknown prediction target");
}

// One field evaluation, converted to the drift of the active mode. The
// score term is skipped entirely when w_scale = 0 so the SDE path stays
// bitwise identical to the ODE path.
Vec drift_at(const FieldModel& field, const InterpolantSchedule& sched,
             const Vec& x, double t, const Vec& obs, bool noisy, double w_scale,
             int* nfe) {
  const double te = eval_time_for(field, sched, t);
  const Vec y = field.eval(x, te, obs);
  ++*nfe;
  const TimePoint tp(te);
  Vec v;
  switch (field.target()) {
    case PredictionTarget::Velocity: v = y; break;
    case PredictionTarget::Score: v = velocity_from_score(x, y, tp, sched); break;
    case PredictionTarget::Noise: v = velocity_from_noise(x, y, tp, sched); break;
  }
  if (!noisy) return v;
  Vec s;
  switch (field.target()) {
    case PredictionTarget::Velocity: s = score_from_velocity(x, y, tp, sched); break;
    case PredictionTarget::Score: s = y; break;
    case PredictionTarget::Noise: s = score_from_noise(y, tp, sched); break;
  }
  const double w = w_scale * sched.eval(tp).sigma;
  return v + (0.5 * w) * s;
}

SampleOut integrate_core(const FieldModel& field, const InterpolantSchedule& sched,
                         const InferenceConfig& cfg, const Vec& x0, const Vec& obs,
                         bool sde) {
  if (sde && cfg.solver == Solver::RK4)
    throw config_error("rk4 supports only ode mode");
  if (!(cfg.w_scale >= 0.0)) throw config_error("w_scale must be >= 0");
  const std::vector<double> knots = build_time_grid(cfg);

  const bool noisy = sde && cfg.w_scale > 0.0;
  Rng noise_rng = Rng::substream(cfg.seed, 0x5de);

  Vec x = x0;
  int nfe = 0;
  const auto drift = [&](const Vec& xx, double t) {
    return drift_at(field, sched, xx, t, obs, noisy, cfg.w_scale, &nfe);
  };

  for (int i = 0; i < cfg.steps; ++i) {
    const double t0 = knots[static_cast<std::size_t>(i)];
    const double t1 = knots[static_cast<std::size_t>(i) + 1];
    const double h = t1 - t0;

    Vec g;
    if (noisy) {
      const double w_left = cfg.w_scale * sched.eval(TimePoint(t0)).sigma;
      g = std::sqrt(w_left * h) * noise_rng.normal_vec(x.size());
    }

    switch (cfg.solver) {
      case Solver::Euler: {
        Vec incr = h * drift(x, t0);
        if (noisy) incr += g;
        x += incr;
        break;
      }
      case Solver::Heun: {
        // predictor and corrector share the same brownian increment
        const Vec k1 = drift(x, t0);
        Vec xp = x + h * k1;
        if (noisy) xp += g;
        const Vec k2 = drift(xp, t1);
        Vec incr = (0.5 * h) * (k1 + k2);
        if (noisy) incr += g;
        x += incr;
        break;
      }
      case Solver::RK4: {
        const double tm = t0 + 0.5 * h;
        const Vec k1 = drift(x, t0);
        const Vec k2 = drift(x + (0.5 * h) * k1, tm);
        const Vec k3 = drift(x + (0.5 * h) * k2, tm);
        const Vec k4 = drift(x + h * k3, t1);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        break;
      }
    }
    if (!x.allFinite())
      throw numeric_error("non-finite state at knot " + std::to_string(i + 1));
  }

  const double tf = knots.back();
  switch (cfg.last_step) {
    case LastStep::None:
      break;
    case LastStep::EulerStep: {
      // deterministic completion across the clamp gap, no diffusion
      x += (1.0 - tf) * drift(x, tf);
      break;
    }
    case LastStep::Tweedie: {
      const Vec s = score_at(field, sched, x, tf, obs, &nfe);
      x = tweedie_denoise(x, s, TimePoint(tf), sched);
      break;
    }
  }
  if (!x.allFinite()) throw numeric_error("non-finite state after the last step");
  return {std::move(x), nfe};
}

}  // namespace

SampleOut integrate_ode(const FieldModel& field, const InterpolantSchedule& sched,
                        const InferenceConfig& cfg, const Vec& x0, const Vec& obs) {
  return integrate_core(field, sched, cfg, x0, obs, false);
}

SampleOut integrate_sde(const FieldModel& field, const InterpolantSchedule& sched,
                        const InferenceConfig& cfg, const Vec& x0, const Vec& obs) {
  return integrate_core(field, sched, cfg, x0, obs, true);
}

SampleOut sample_actions(const FieldModel& field, const InterpolantSchedule& sched,
                         const InferenceConfig& cfg, const Vec& obs, Rng& rng) {
  cfg.validate();
  const Vec x0 = rng.normal_vec(field.action_dim());
  if (cfg.mode == IntegrationMode::SDE)
    return integrate_sde(field, sched, cfg, x0, obs);
  return integrate_ode(field, sched, cfg, x0, obs);
}

}  // namespace sip

#pragma once

#include <vector>

#include "sip/field.hpp"

namespace sip {

enum class Solver { Euler, Heun, RK4 };
enum class IntegrationMode { ODE, SDE };
enum class LastStep { None, EulerStep, Tweedie };

const char* to_string(Solver s);
const char* to_string(IntegrationMode m);
const char* to_string(LastStep l);
Solver solver_from_string(const std::string& s);
IntegrationMode integration_mode_from_string(const std::string& s);
LastStep last_step_from_string(const std::string& s);

struct InferenceConfig {
  int steps = 10;
  Solver solver = Solver::Euler;
  IntegrationMode mode = IntegrationMode::ODE;
  LastStep last_step = LastStep::None;
  double w_scale = 1.0;
  double t_end_clamp = 1e-3;
  std::uint64_t seed = 0;

  // Throws config_error on steps < 1, w_scale < 0, t_end_clamp outside
  // [0, 1), or RK4 paired with SDE.
  void validate() const;
};

// steps + 1 uniform knots on [0, 1 - t_end_clamp].
std::vector<double> build_time_grid(const InferenceConfig& cfg);

// Field evaluations the integrator will spend: steps x {Euler 1, Heun 2,
// RK4 4}, plus one for a Tweedie or EulerStep final step. Parameterization
// conversions reuse the same forward pass, so SDE costs the same as ODE.
int predicted_nfe(const InferenceConfig& cfg);

struct SampleOut {
  Vec x;
  int nfe = 0;
};

// Deterministic probability-flow integration of x' = v(x, t, obs) across
// the grid. cfg.mode is ignored; cfg.solver, steps, and last_step apply.
SampleOut integrate_ode(const FieldModel& field, const InterpolantSchedule& sched,
                        const InferenceConfig& cfg, const Vec& x0, const Vec& obs);

// Euler-Maruyama or stochastic Heun integration of
//   dX = [v + 0.5 w_t s] dt + sqrt(w_t) dW,   w_t = w_scale * sigma_t,
// noise stream seeded by cfg.seed. w_scale = 0 skips both the noise draw
// and the score term, reproducing the ODE trajectory bitwise.
SampleOut integrate_sde(const FieldModel& field, const InterpolantSchedule& sched,
                        const InferenceConfig& cfg, const Vec& x0, const Vec& obs);

// Draws x0 ~ N(0, I) from rng and dispatches on cfg.mode.
SampleOut sample_actions(const FieldModel& field, const InterpolantSchedule& sched,
                         const InferenceConfig& cfg, const Vec& obs, Rng& rng);

}  // namespace sip

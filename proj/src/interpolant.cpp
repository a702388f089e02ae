#include "sip/interpolant.hpp"

#include <cmath>

namespace sip {

const char* to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::Linear: return "linear";
    case ScheduleKind::VP: return "vp";
    case ScheduleKind::GVP: return "gvp";
  }
  return "?";
}

ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "linear") return ScheduleKind::Linear;
  if (s == "vp") return ScheduleKind::VP;
  if (s == "gvp") return ScheduleKind::GVP;
  throw config_error("unknown schedule kind: " + s);
}

ScheduleValues InterpolantSchedule::eval(TimePoint tp) const {
  const double t = tp.value();
  switch (kind) {
    case ScheduleKind::Linear:
      return {t, 1.0 - t, 1.0, -1.0};
    case ScheduleKind::GVP: {
      const double a = std::sin(M_PI_2 * t);
      const double s = std::cos(M_PI_2 * t);
      return {a, s, M_PI_2 * s, -M_PI_2 * a};
    }
    case ScheduleKind::VP: {
      // beta(t) = beta_min + t * (beta_max - beta_min), integrated in closed form.
      const double beta = beta_min + t * (beta_max - beta_min);
      const double big_b = beta_min * t + 0.5 * (beta_max - beta_min) * t * t;
      const double eb = std::exp(-big_b);
      const double sigma = std::exp(-0.5 * big_b);
      const double alpha = std::sqrt(1.0 - eb);
      const double dalpha = 0.5 * beta * eb / alpha;  // +inf at t = 0
      const double dsigma = -0.5 * beta * sigma;
      return {alpha, sigma, dalpha, dsigma};
    }
  }
  throw std::logic_error("unreachable schedule kind");
}

namespace {

void check_same_size(const Vec& a, const Vec& b, const char* what) {
  if (a.size() != b.size())
    throw std::invalid_argument(std::string(what) + ": dimension mismatch " +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
}

ScheduleValues eval_finite(const InterpolantSchedule& sched, TimePoint t, const char* what) {
  const ScheduleValues sv = sched.eval(t);
  if (!std::isfinite(sv.alpha) || !std::isfinite(sv.sigma) || !std::isfinite(sv.dsigma))
    throw schedule_error(std::string(what) + ": non-finite schedule values at t=" +
                         std::to_string(t.value()));
  return sv;
}

}  // namespace

InterpolantSample make_interpolant(const Vec& x_star, const Vec& eps, TimePoint t,
                                   const InterpolantSchedule& sched) {
  check_same_size(x_star, eps, "make_interpolant");
  const ScheduleValues sv = sched.eval(t);
  InterpolantSample out;
  out.i_t = sv.alpha * x_star + sv.sigma * eps;
  out.di_t = sv.dalpha * x_star + sv.dsigma * eps;
  return out;
}

Vec score_from_velocity(const Vec& x, const Vec& v, TimePoint t,
                        const InterpolantSchedule& sched) {
  check_same_size(x, v, "score_from_velocity");
  const ScheduleValues sv = eval_finite(sched, t, "score_from_velocity");
  if (sv.sigma <= kSigmaFloor)
    throw schedule_error("score_from_velocity: sigma below floor at t=" +
                         std::to_string(t.value()));
  if (sv.alpha <= kAlphaFloor) {
    // Pure-noise limit: x = sigma * eps exactly, so the score is -x / sigma^2
    // for any velocity. This is the limit of the general formula as alpha -> 0.
    return -x / (sv.sigma * sv.sigma);
  }
  const double denom = sv.dalpha * sv.sigma - sv.alpha * sv.dsigma;
  if (!std::isfinite(denom) || denom == 0.0)
    throw schedule_error("score_from_velocity: degenerate denominator at t=" +
                         std::to_string(t.value()));
  return (sv.alpha * v - sv.dalpha * x) / (sv.sigma * denom);
}

Vec velocity_from_score(const Vec& x, const Vec& s, TimePoint t,
                        const InterpolantSchedule& sched) {
  check_same_size(x, s, "velocity_from_score");
  const ScheduleValues sv = eval_finite(sched, t, "velocity_from_score");
  if (sv.alpha <= kAlphaFloor)
    throw schedule_error("velocity_from_score: alpha below floor at t=" +
                         std::to_string(t.value()));
  const double denom = sv.dalpha * sv.sigma - sv.alpha * sv.dsigma;
  if (!std::isfinite(denom) || denom == 0.0)
    throw schedule_error("velocity_from_score: degenerate denominator at t=" +
                         std::to_string(t.value()));
  return (sv.dalpha / sv.alpha) * x + (sv.sigma * denom / sv.alpha) * s;
}

Vec score_from_noise(const Vec& eps_hat, TimePoint t, const InterpolantSchedule& sched) {
  const ScheduleValues sv = eval_finite(sched, t, "score_from_noise");
  if (sv.sigma <= kSigmaFloor)
    throw schedule_error("score_from_noise: sigma below floor at t=" +
                         std::to_string(t.value()));
  return -eps_hat / sv.sigma;
}

Vec noise_from_score(const Vec& s, TimePoint t, const InterpolantSchedule& sched) {
  const ScheduleValues sv = eval_finite(sched, t, "noise_from_score");
  if (sv.sigma <= kSigmaFloor)
    throw schedule_error("noise_from_score: sigma below floor at t=" +
                         std::to_string(t.value()));
  return -sv.sigma * s;
}

Vec velocity_from_noise(const Vec& x, const Vec& eps_hat, TimePoint t,
                        const InterpolantSchedule& sched) {
  return velocity_from_score(x, score_from_noise(eps_hat, t, sched), t, sched);
}

Vec noise_from_velocity(const Vec& x, const Vec& v, TimePoint t,
                        const InterpolantSchedule& sched) {
  return noise_from_score(score_from_velocity(x, v, t, sched), t, sched);
}

Vec tweedie_denoise(const Vec& x, const Vec& s, TimePoint t,
                    const InterpolantSchedule& sched) {
  check_same_size(x, s, "tweedie_denoise");
  const ScheduleValues sv = eval_finite(sched, t, "tweedie_denoise");
  if (sv.alpha <= kAlphaFloor)
    throw schedule_error("tweedie_denoise: alpha below floor at t=" +
                         std::to_string(t.value()));
  return (x + sv.sigma * sv.sigma * s) / sv.alpha;
}

}  // namespace sip

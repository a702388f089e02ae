#pragma once

#include "sip/common.hpp"

namespace sip {

// Noise sits at t = 0 and data at t = 1 for every schedule.
class TimePoint {
 public:
  explicit TimePoint(double t) : t_(t) {
    if (!(t >= 0.0 && t <= 1.0))
      throw std::invalid_argument("TimePoint outside [0, 1]: " + std::to_string(t));
  }
  double value() const { return t_; }

 private:
  double t_;
};

enum class ScheduleKind { Linear, VP, GVP };

const char* to_string(ScheduleKind k);
ScheduleKind schedule_kind_from_string(const std::string& s);

struct ScheduleValues {
  double alpha;
  double sigma;
  double dalpha;
  double dsigma;
};

// Conversions between parameterizations are ill conditioned where the data
// or noise coefficient vanishes; these floors bound the usable band.
inline constexpr double kAlphaFloor = 1e-4;
inline constexpr double kSigmaFloor = 1e-4;

struct InterpolantSchedule {
  ScheduleKind kind = ScheduleKind::Linear;
  double beta_min = 0.1;
  double beta_max = 20.0;

  // alpha, sigma and their time derivatives at t. The VP data coefficient
  // has a square-root singularity at t = 0, where dalpha is +inf.
  ScheduleValues eval(TimePoint t) const;
};

struct InterpolantSample {
  Vec i_t;   // alpha * x_star + sigma * eps
  Vec di_t;  // dalpha * x_star + dsigma * eps
};

InterpolantSample make_interpolant(const Vec& x_star, const Vec& eps, TimePoint t,
                                   const InterpolantSchedule& sched);

// s = (alpha * v - dalpha * x) / (sigma * (dalpha * sigma - alpha * dsigma)).
// Where alpha <= kAlphaFloor the interpolant is pure noise and the limit
// -x / sigma^2 is returned.
Vec score_from_velocity(const Vec& x, const Vec& v, TimePoint t,
                        const InterpolantSchedule& sched);

// v = (dalpha / alpha) * x + sigma * (dalpha * sigma - alpha * dsigma) / alpha * s.
// The score carries no information about the data at alpha -> 0, so this
// direction fails below the alpha floor.
Vec velocity_from_score(const Vec& x, const Vec& s, TimePoint t,
                        const InterpolantSchedule& sched);

Vec score_from_noise(const Vec& eps_hat, TimePoint t, const InterpolantSchedule& sched);

Vec noise_from_score(const Vec& s, TimePoint t, const InterpolantSchedule& sched);

Vec velocity_from_noise(const Vec& x, const Vec& eps_hat, TimePoint t,
                        const InterpolantSchedule& sched);

Vec noise_from_velocity(const Vec& x, const Vec& v, TimePoint t,
                        const InterpolantSchedule& sched);

// Posterior-mean denoiser (x + sigma^2 * s) / alpha.
Vec tweedie_denoise(const Vec& x, const Vec& s, TimePoint t,
                    const InterpolantSchedule& sched);

}  // namespace sip

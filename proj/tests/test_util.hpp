#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "sip/common.hpp"

namespace sip_test {

inline double rel_err(double a, double b) {
  const double scale = std::max({std::fabs(a), std::fabs(b), 1e-300});
  return std::fabs(a - b) / scale;
}

inline double vec_rel_err(const sip::Vec& a, const sip::Vec& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-300});
  return (a - b).norm() / scale;
}

inline double central_diff(const std::function<double(double)>& f, double t, double h) {
  return (f(t + h) - f(t - h)) / (2.0 * h);
}

// Least-squares slope of log(err) against log(h).
inline double loglog_slope(const std::vector<double>& h, const std::vector<double>& err) {
  const std::size_t n = h.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::log(h[i]);
    const double y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double var_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

// Empirical W1 distance between a sample set and N(mu, sd^2) via the
// quantile coupling.
inline double w1_to_gaussian(std::vector<double> samples, double mu, double sd) {
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    // Acklam-style inverse normal CDF via Newton refinement of erfc.
    // Use the simple bisection-free approximation: inverse via std::erf
    // refinement starting from a rational estimate.
    double x = 0.0;
    {
      // Beasley-Springer-Moro initial estimate.
      static const double a[] = {2.50662823884, -18.61500062529, 41.39119773534,
                                 -25.44106049637};
      static const double b[] = {-8.47351093090, 23.08336743743, -21.06224101826,
                                 3.13082909833};
      static const double c[] = {0.3374754822726147, 0.9761690190917186,
                                 0.1607979714918209, 0.0276438810333863,
                                 0.0038405729373609, 0.0003951896511919,
                                 0.0000321767881768, 0.0000002888167364,
                                 0.0000003960315187};
      const double y = p - 0.5;
      if (std::fabs(y) < 0.42) {
        const double r = y * y;
        x = y * (((a[3] * r + a[2]) * r + a[1]) * r + a[0]) /
            ((((b[3] * r + b[2]) * r + b[1]) * r + b[0]) * r + 1.0);
      } else {
        double r = p;
        if (y > 0) r = 1 - p;
        r = std::log(-std::log(r));
        double s = c[0];
        double rp = 1;
        for (int k = 1; k < 9; ++k) {
          rp *= r;
          s += c[k] * rp;
        }
        x = (y < 0) ? -s : s;
      }
      // Two Newton steps against the exact CDF.
      for (int it = 0; it < 2; ++it) {
        const double cdf = 0.5 * std::erfc(-x / std::sqrt(2.0));
        const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
        x -= (cdf - p) / pdf;
      }
    }
    acc += std::fabs(samples[i] - (mu + sd * x));
  }
  return acc / static_cast<double>(n);
}

}  // namespace sip_test

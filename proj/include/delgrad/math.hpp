#pragma once
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace delgrad {

// Principal branch W0 of w*exp(w) = z, defined on z >= -1/e with W0 >= -1.
// Initial guess per region (series around the branch point, rational fit in
// the midrange, asymptotic logs for large z), then Halley refinement until
// |w*exp(w) - z| <= 1e-13 * max(1, |z|).
inline double lambert_w0(double z)
{
  constexpr double e_inv = 1.0 / std::numbers::e;
  constexpr double branch_slack = 1e-12;
  if (z < -e_inv) {
    if (z < -e_inv - branch_slack)
      throw std::domain_error("lambert_w0: argument below -1/e");
    z = -e_inv;
  }
  if (z == 0.0) return 0.0;

  // p parametrizes the branch point: W = -1 + p - p^2/3 + 11 p^3/72 - ...
  const double q = 2.0 * (std::numbers::e * z + 1.0);
  const double p = std::sqrt(q > 0.0 ? q : 0.0);
  double w;
  if (p < 1e-3) {
    return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
  } else if (z < -0.25) {
    w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
  } else if (z < 3.0) {
    w = z / (1.0 + z);
  } else {
    const double l1 = std::log(z);
    const double l2 = std::log(l1);
    w = l1 - l2 + l2 / l1;
  }

  const double tol = 1e-13 * std::max(1.0, std::fabs(z));
  for (int it = 0; it < 60; ++it) {
    const double ew = std::exp(w);
    const double f = w * ew - z;
    if (std::fabs(f) <= tol) return w;
    const double wp1 = w + 1.0;
    // Halley step; near the branch point (wp1 -> 0) fall back to a bisection
    // towards the series value to stay stable.
    const double denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
    if (wp1 <= 1e-9 || denom == 0.0 || !std::isfinite(denom)) {
      w = -1.0 + p - p * p / 3.0;
      continue;
    }
    w -= f / denom;
    if (w < -1.0) w = -1.0 + 0.5 * (wp1 > 0 ? wp1 : 1e-12);
  }
  const double res = std::fabs(w * std::exp(w) - z);
  if (res <= 10.0 * tol) return w;
  throw std::runtime_error("lambert_w0: no convergence");
}

inline double logistic(double x)
{
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logistic_grad(double x)
{
  const double s = logistic(x);
  return s * (1.0 - s);
}

inline double median(std::vector<double> v)
{
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Interquartile range with linear interpolation between order statistics.
inline double iqr(std::vector<double> v)
{
  if (v.size() < 2) return 0.0;
  std::sort(v.begin(), v.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const size_t lo = static_cast<size_t>(pos);
    const size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
  };
  return quantile(0.75) - quantile(0.25);
}

}  // namespace delgrad

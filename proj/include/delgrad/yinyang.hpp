#pragma once
#include <array>
#include <cassert>
#include <cmath>
#include <vector>

#include "delgrad/rng.hpp"

// Yin-yang classification task on the unit square: big circle of radius 0.5
// centered at (0.5, 0.5), two half-discs of radius 0.25 and two dots of
// radius 0.125 on the vertical diameter. Labels: 0 yin, 1 yang, 2 dot.

namespace delgrad {

struct YinYangSample {
  double x = 0.0;
  double y = 0.0;
  int label = 0;
};

namespace yy {
constexpr double kRadius = 0.5;          // big circle
constexpr double kHalfDisc = kRadius / 2;
constexpr double kDot = kRadius / 4;
}  // namespace yy

// Region test; points on a dot rim count as dot.
inline int yinyang_region(double x, double y)
{
  const double r = yy::kRadius;
  const double d_up = std::hypot(x - r, y - 1.5 * r);
  const double d_low = std::hypot(x - r, y - 0.5 * r);
  if (d_up <= yy::kDot || d_low <= yy::kDot) return 2;
  // yin = lower bulb, plus the right half with the upper bulb cut out
  const bool is_yin = (d_low <= yy::kHalfDisc) || (x > r && d_up > yy::kHalfDisc);
  return is_yin ? 0 : 1;
}

// Class-balanced rejection sampling, deterministic per (seed, index): sample
// i targets class i mod 3 and redraws until it lands there, so any n that is
// a multiple of 3 yields exactly equal counts.
inline std::vector<YinYangSample> yinyang_generate(uint64_t seed, int n)
{
  assert(n > 0);
  std::vector<YinYangSample> out(n);
  for (int i = 0; i < n; ++i) {
    const int goal = i % 3;
    Rng rng(seed, Stream::dataset, static_cast<uint64_t>(i));
    for (;;) {
      const double x = rng.uniform();
      const double y = rng.uniform();
      if (std::hypot(x - yy::kRadius, y - yy::kRadius) > yy::kRadius) continue;
      const int c = yinyang_region(x, y);
      if (c != goal) continue;
      out[i] = {x, y, c};
      break;
    }
  }
  return out;
}

struct EncodingConfig {
  double t_early = 0.15;
  double t_late = 2.0;

  double span() const { return t_late - t_early; }
};

inline EncodingConfig rescale_span(EncodingConfig cfg, double span)
{
  assert(span > 0.0);
  cfg.t_late = cfg.t_early + span;
  return cfg;
}

// Features (x, y, 1-x, 1-y) mapped linearly onto [t_early, t_late]; larger
// coordinate values spike later.
inline std::array<double, 4> encode(const YinYangSample& s,
                                    const EncodingConfig& cfg)
{
  const double span = cfg.span();
  return {cfg.t_early + s.x * span, cfg.t_early + s.y * span,
          cfg.t_early + (1.0 - s.x) * span, cfg.t_early + (1.0 - s.y) * span};
}

}  // namespace delgrad

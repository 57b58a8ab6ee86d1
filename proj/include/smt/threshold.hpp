#pragma once

// Threshold extrapolation shared by the finite-N and large-N routes.
//
// For every delta3 on a grid the success time t* (first time the overlap
// reaches a level, censored at t_max) is measured and 1/t* is extrapolated
// to zero. The primary estimate is a power law 1/t* = A (delta3 - d_c)^gamma
// fit on all uncensored points; 1/t* vanishes with gamma ~ 1/2 near the
// line, so a straight-line fit on the points closest to it is biased low
// and is kept only as a sensitivity check (and as fallback with < 3 points).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "smt/core.hpp"

namespace smt::threshold {

struct GridPoint {
  double delta3 = 0.0;
  std::vector<std::optional<double>> times; // per seed; nullopt = censored
  double median = kInf;                     // inf when censored
  bool censored() const { return std::isinf(median); }
};

//! Median with censored entries ranked above every finite time.
inline double censored_median(const std::vector<std::optional<double>> &ts) {
  if (ts.empty())
    return kInf;
  std::vector<double> v;
  v.reserve(ts.size());
  for (const auto &t : ts)
    v.push_back(t ? *t : kInf);
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1)
    return v[n / 2];
  const double a = v[n / 2 - 1], b = v[n / 2];
  return (std::isinf(a) || std::isinf(b)) ? kInf : 0.5 * (a + b);
}

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double root = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> delta3;    // points used
  std::vector<double> residuals; // 1/t* - fit
};

struct PowerFit {
  bool ok = false;
  double amplitude = 0.0;
  double exponent = 0.0;
  double root = std::numeric_limits<double>::quiet_NaN();
  double rss = 0.0; // in log(1/t*)
};

struct Estimate {
  std::vector<GridPoint> points;
  LinearFit linear;
  PowerFit power;
  double threshold = std::numeric_limits<double>::quiet_NaN();
  bool out_of_range = false; // root outside the sampled delta3 interval
  std::vector<std::string> notes;
};

inline LinearFit fit_line(const std::vector<double> &x,
                          const std::vector<double> &y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sx += x[k];
    sy += y[k];
    sxx += x[k] * x[k];
    sxy += x[k] * y[k];
  }
  LinearFit f;
  const double den = n * sxx - sx * sx;
  f.slope = den != 0.0 ? (n * sxy - sx * sy) / den : 0.0;
  f.intercept = (sy - f.slope * sx) / n;
  if (f.slope != 0.0)
    f.root = -f.intercept / f.slope;
  f.delta3 = x;
  for (std::size_t k = 0; k < x.size(); ++k)
    f.residuals.push_back(y[k] - (f.intercept + f.slope * x[k]));
  return f;
}

//! log(1/t*) = log A + gamma log(x - xc), xc scanned below min(x).
inline PowerFit fit_power(const std::vector<double> &x,
                          const std::vector<double> &y) {
  PowerFit best;
  if (x.size() < 3)
    return best;
  const double xmin = *std::min_element(x.begin(), x.end());
  const double xmax = *std::max_element(x.begin(), x.end());
  const double span = std::max(xmax - xmin, 1e-6);
  auto evaluate = [&](double xc) {
    std::vector<double> lx, ly;
    for (std::size_t k = 0; k < x.size(); ++k) {
      lx.push_back(std::log(x[k] - xc));
      ly.push_back(std::log(y[k]));
    }
    LinearFit f = fit_line(lx, ly);
    double rss = 0;
    for (double r : f.residuals)
      rss += r * r;
    PowerFit p{true, std::exp(f.intercept), f.slope, xc, rss};
    return p;
  };
  const double lo = std::max(xmin - 3.0 * span, 0.0);
  const int samples = 400;
  for (int s = 0; s < samples; ++s) {
    const double xc = lo + (xmin - lo) * (s + 0.5) / samples;
    PowerFit p = evaluate(xc);
    if (p.exponent > 0 && (!best.ok || p.rss < best.rss))
      best = p;
  }
  if (best.ok) { // refine by golden section around the best sample
    double a = std::max(lo, best.root - (xmin - lo) / samples);
    double b = std::min(xmin - 1e-12, best.root + (xmin - lo) / samples);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 60; ++it) {
      const double c = b - g * (b - a), d = a + g * (b - a);
      if (evaluate(c).rss < evaluate(d).rss)
        b = d;
      else
        a = c;
    }
    PowerFit p = evaluate(0.5 * (a + b));
    if (p.exponent > 0 && p.rss <= best.rss)
      best = p;
  }
  return best;
}

//! Extrapolates 1/t* -> 0. The linear check uses the `window` uncensored
//! points with the smallest delta3.
inline Estimate extrapolate(std::vector<GridPoint> points,
                            std::size_t window = 3) {
  std::sort(points.begin(), points.end(),
            [](const auto &a, const auto &b) { return a.delta3 < b.delta3; });
  Estimate est;
  std::vector<double> x, y;
  for (const auto &p : points)
    if (!p.censored()) {
      x.push_back(p.delta3);
      y.push_back(1.0 / p.median);
    }
  est.points = std::move(points);
  if (x.size() < 2)
    throw InsufficientDataError(
        "threshold extrapolation needs at least two uncensored grid points "
        "(got " + std::to_string(x.size()) + ")");
  window = std::max<std::size_t>(2, window);
  std::vector<double> wx(x.begin(), x.begin() + std::min(window, x.size()));
  std::vector<double> wy(y.begin(), y.begin() + std::min(window, y.size()));
  est.linear = fit_line(wx, wy);
  if (!(est.linear.slope > 0.0))
    throw InsufficientDataError(
        "1/t* does not increase with delta3 on the fit window; cannot "
        "extrapolate");
  est.power = fit_power(x, y);
  if (est.power.ok) {
    est.threshold = est.power.root;
  } else {
    est.threshold = est.linear.root;
    est.notes.push_back("fewer than three uncensored points; threshold from "
                        "the linear fit");
  }
  const double lo = est.points.front().delta3;
  const double hi = est.points.back().delta3;
  est.out_of_range = est.threshold < lo || est.threshold > hi;
  if (est.out_of_range)
    est.notes.push_back("extrapolated threshold lies outside the sampled "
                        "delta3 interval; grid does not straddle it");
  for (const auto &p : est.points)
    if (p.censored() && p.delta3 > est.threshold)
      est.notes.push_back("censored point at delta3=" +
                          std::to_string(p.delta3) +
                          " lies above the extrapolated threshold");
  return est;
}

} // namespace smt::threshold

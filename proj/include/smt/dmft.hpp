#pragma once

// Large-N Langevin / gradient-flow dynamics of the spiked matrix-tensor model:
// causal propagation of the closed two-time equations
//
//   d/dt C(t,t') = -mu(t) C(t,t') + Q'(m(t)) m(t')
//                  + int_0^t  R(t,s) Q''(C(t,s)) C(t',s) ds
//                  + int_0^t' R(t',s) Q'(C(t,s)) ds
//   d/dt R(t,t') = -mu(t) R(t,t') + int_t'^t R(t,s) Q''(C(t,s)) R(s,t') ds
//   d/dt m(t)    = -mu(t) m(t) + Q'(m(t)) + int_0^t R(t,s) m(s) Q''(C(t,s)) ds
//
// with R(t,t') = 0 for t < t', R(t,t^-) = 1 and C(t,t) = 1. The Lagrange
// multiplier follows from d/dt C(t,t) = 0, the equal-time derivative picking
// up the thermal term 2T:
//
//   mu(t) = T + Q'(m) m + int_0^t R(t,s) [Q''(C(t,s)) C(t,s) + Q'(C(t,s))] ds
//
// Quadratures are trapezoidal on the uniform grid, stepping is Heun. The
// diagonal C(t,t) is integrated like every other entry, so its drift from 1
// measures how well the closure matches the C equation.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "smt/core.hpp"
#include "smt/parallel.hpp"
#include "smt/threshold.hpp"

namespace smt::dmft {

//! Q(x) = x^2/(2 d2) + x^3/(3 d3), stored through the inverse variances so
//! the free case Q = 0 is representable exactly.
struct KernelQ {
  double inv_delta2 = 0.0;
  double inv_delta3 = 0.0;

  static KernelQ from_deltas(double delta2, double delta3) {
    return {1.0 / delta2, 1.0 / delta3};
  }
  static KernelQ zero() { return {0.0, 0.0}; }

  double q(double x) const {
    return x * x * inv_delta2 / 2.0 + x * x * x * inv_delta3 / 3.0;
  }
  double dq(double x) const { return x * inv_delta2 + x * x * inv_delta3; }
  double d2q(double x) const { return inv_delta2 + 2.0 * x * inv_delta3; }
};

struct Options {
  double h = 0.05;
  double t_max = 50.0;
  double m0 = 1e-6;
  double beta = 1.0; // inf: gradient flow
  double drift_tolerance = 1e-3;
  //! Stop once m(t) >= this level (threshold timing); nullopt runs to t_max.
  std::optional<double> stop_at_overlap;
};

//! Causal grid: entries (i, j) with i >= j are meaningful. C is kept
//! symmetric and R is kept in both orientations so every memory integral
//! reads a contiguous row.
class TwoTimeGrid {
public:
  TwoTimeGrid() = default;
  TwoTimeGrid(double h, std::size_t capacity)
      : h_(h), cap_(capacity), c_(capacity * capacity, 0.0),
        r_(capacity * capacity, 0.0), rt_(capacity * capacity, 0.0) {
    m_.reserve(capacity);
    mu_.reserve(capacity);
  }

  double h() const { return h_; }
  //! Number of filled time points (steps + 1).
  std::size_t size() const { return m_.size(); }
  std::size_t steps() const { return size() == 0 ? 0 : size() - 1; }
  double time(std::size_t i) const { return h_ * static_cast<double>(i); }

  double C(std::size_t i, std::size_t j) const { return c_[i * cap_ + j]; }
  //! Zero above the diagonal.
  double R(std::size_t i, std::size_t j) const {
    return i >= j ? r_[i * cap_ + j] : 0.0;
  }
  double m(std::size_t i) const { return m_[i]; }
  double mu(std::size_t i) const { return mu_[i]; }
  std::span<const double> m_series() const { return m_; }
  std::span<const double> mu_series() const { return mu_; }

  double max_diagonal_drift() const {
    double d = 0.0;
    for (std::size_t i = 0; i < size(); ++i)
      d = std::max(d, std::abs(C(i, i) - 1.0));
    return d;
  }

private:
  friend class Solver;

  const double *c_row(std::size_t i) const { return c_.data() + i * cap_; }
  const double *r_row(std::size_t i) const { return r_.data() + i * cap_; }
  //! rt_row(j)[s] = R(s, j).
  const double *rt_row(std::size_t j) const { return rt_.data() + j * cap_; }

  void set_c(std::size_t i, std::size_t j, double v) {
    c_[i * cap_ + j] = v;
    c_[j * cap_ + i] = v;
  }
  void set_r(std::size_t i, std::size_t j, double v) {
    r_[i * cap_ + j] = v;
    rt_[j * cap_ + i] = v;
  }

  double h_ = 0.0;
  std::size_t cap_ = 0;
  std::vector<double> c_, r_, rt_;
  std::vector<double> m_, mu_;
};

namespace detail {

//! Trapezoid rule for sum_s f[s] g[s] over indices lo..hi with step h.
inline double trapz(const double *f, const double *g, std::size_t lo,
                    std::size_t hi, double h) {
  if (hi <= lo)
    return 0.0;
  double acc = 0.0;
  for (std::size_t s = lo; s <= hi; ++s)
    acc += f[s] * g[s];
  acc -= 0.5 * (f[lo] * g[lo] + f[hi] * g[hi]);
  return h * acc;
}

} // namespace detail

//! mu(t_i) from row i of the grid (C, R on [0, t_i] and m(t_i)).
inline double mu_closure(std::span<const double> c_row,
                         std::span<const double> r_row, double m_now,
                         const KernelQ &q, double beta, double h) {
  const std::size_t i = c_row.size() - 1;
  double acc = 0.0;
  if (i > 0) {
    for (std::size_t s = 0; s <= i; ++s) {
      const double w = (s == 0 || s == i) ? 0.5 : 1.0;
      acc += w * r_row[s] * (q.d2q(c_row[s]) * c_row[s] + q.dq(c_row[s]));
    }
    acc *= h;
  }
  return 1.0 / beta + q.dq(m_now) * m_now + acc;
}

class Solver {
public:
  Solver(const KernelQ &q, const Options &opt) : q_(q), opt_(opt) {
    if (!(opt.h > 0.0) || opt.h > 0.1)
      throw ParameterError("dmft: step h must be in (0, 0.1]");
    if (!(opt.t_max > 0.0))
      throw ParameterError("dmft: t_max must be positive");
    if (!(opt.beta > 0.0))
      throw ParameterError("dmft: beta must be > 0 or inf");
    if (!(opt.m0 >= 0.0 && opt.m0 < 1.0))
      throw ParameterError("dmft: m0 must lie in [0, 1)");
  }

  TwoTimeGrid run() const {
    const auto steps =
        static_cast<std::size_t>(std::llround(opt_.t_max / opt_.h));
    TwoTimeGrid g(opt_.h, steps + 1);
    g.set_c(0, 0, 1.0);
    g.set_r(0, 0, 1.0);
    g.m_.push_back(opt_.m0);
    g.mu_.push_back(mu_of_row(g, 0));

    Rhs now(steps + 1), next(steps + 1);
    for (std::size_t i = 0; i < steps; ++i) {
      if (opt_.stop_at_overlap && g.m(i) >= *opt_.stop_at_overlap)
        break;
      const std::size_t k = i + 1;
      rhs(g, i, now);

      // predictor
      for (std::size_t j = 0; j < i; ++j) {
        g.set_c(k, j, g.C(i, j) + opt_.h * now.fc[j]);
        g.set_r(k, j, g.R(i, j) + opt_.h * now.fr[j]);
      }
      g.set_c(k, i, g.C(i, i) + opt_.h * now.fc[i]);
      g.set_r(k, i, 1.0 + opt_.h * now.fr[i]);
      g.set_c(k, k, g.C(i, i) + opt_.h * now.diag);
      g.set_r(k, k, 1.0);
      g.m_.push_back(g.m(i) + opt_.h * now.fm);
      g.mu_.push_back(mu_of_row(g, k));

      // corrector
      rhs(g, k, next);
      const double hh = 0.5 * opt_.h;
      for (std::size_t j = 0; j < i; ++j) {
        g.set_c(k, j, g.C(i, j) + hh * (now.fc[j] + next.fc[j]));
        g.set_r(k, j, g.R(i, j) + hh * (now.fr[j] + next.fr[j]));
      }
      g.set_c(k, i, g.C(i, i) + hh * (now.fc[i] + next.fc[i]));
      g.set_r(k, i, 1.0 + hh * (now.fr[i] + next.fr[i]));
      g.set_c(k, k, g.C(i, i) + hh * (now.diag + next.diag));
      g.m_[k] = g.m(i) + hh * (now.fm + next.fm);
      g.mu_[k] = mu_of_row(g, k);

      check(g, k);
    }
    return g;
  }

private:
  struct Rhs {
    explicit Rhs(std::size_t cap) : fc(cap), fr(cap), a(cap), b(cap) {}
    std::vector<double> fc; // d/dt C(t_i, t_j), j <= i
    std::vector<double> fr; // d/dt R(t_i, t_j), j <= i
    double fm = 0.0;        // d/dt m(t_i)
    double diag = 0.0;      // d/dt C(t_i, t_i)
    std::vector<double> a;  // R(i,s) Q''(C(i,s))
    std::vector<double> b;  // Q'(C(i,s))
  };

  double mu_of_row(const TwoTimeGrid &g, std::size_t i) const {
    return mu_closure(std::span<const double>(g.c_row(i), i + 1),
                      std::span<const double>(g.r_row(i), i + 1), g.m(i), q_,
                      opt_.beta, opt_.h);
  }

  //! Right-hand sides on row i; reads only rows <= i.
  void rhs(const TwoTimeGrid &g, std::size_t i, Rhs &out) const {
    const double h = opt_.h;
    const double *ci = g.c_row(i);
    const double *ri = g.r_row(i);
    for (std::size_t s = 0; s <= i; ++s) {
      out.a[s] = ri[s] * q_.d2q(ci[s]);
      out.b[s] = q_.dq(ci[s]);
    }
    const double mu = g.mu(i);
    const double mi = g.m(i);
    const double drive = q_.dq(mi);
    const double *a = out.a.data();
    const double *b = out.b.data();

    for (std::size_t j = 0; j <= i; ++j) {
      const double i1 = detail::trapz(a, g.c_row(j), 0, i, h);
      const double i2 = detail::trapz(g.r_row(j), b, 0, j, h);
      out.fc[j] = -mu * ci[j] + drive * g.m(j) + i1 + i2;
      const double i3 = detail::trapz(a, g.rt_row(j), j, i, h);
      out.fr[j] = -mu * g.R(i, j) + i3;
    }
    out.diag = 2.0 * out.fc[i] + 2.0 / opt_.beta;
    out.fm = -mu * mi + drive + detail::trapz(a, g.m_.data(), 0, i, h);
  }

  void check(const TwoTimeGrid &g, std::size_t k) const {
    if (!std::isfinite(g.m(k)) || !std::isfinite(g.mu(k)) ||
        !std::isfinite(g.C(k, 0)))
      throw DivergenceError("dmft: non-finite state", static_cast<long>(k));
    const double drift = std::abs(g.C(k, k) - 1.0);
    if (drift > opt_.drift_tolerance)
      throw InstabilityError("dmft: |C(t,t) - 1| = " + std::to_string(drift) +
                                 " at t = " + std::to_string(g.time(k)) +
                                 "; reduce h",
                             opt_.h / 2.0);
  }

  KernelQ q_;
  Options opt_;
};

inline TwoTimeGrid integrate(const KernelQ &q, const Options &opt) {
  return Solver(q, opt).run();
}

//! max over sampled t > t' > t0 of |R(t,t') - beta dC(t,t')/dt'|, with a
//! first-order backward difference in t'.
inline double fdt_check(const TwoTimeGrid &g, double beta, double t0,
                        std::size_t stride = 1) {
  if (std::isinf(beta))
    throw ParameterError("fdt_check: needs finite beta");
  stride = std::max<std::size_t>(stride, 1);
  const double h = g.h();
  const auto j0 = static_cast<std::size_t>(std::ceil(t0 / h)) + 1;
  double dev = 0.0;
  for (std::size_t i = j0 + 1; i < g.size(); i += stride)
    for (std::size_t j = j0; j < i; j += stride) {
      const double dc = (g.C(i, j) - g.C(i, j - 1)) / h;
      dev = std::max(dev, std::abs(g.R(i, j) - beta * dc));
    }
  return dev;
}

//! First time m crosses `level` (linear interpolation), nullopt if never.
inline std::optional<double> crossing_time(std::span<const double> m,
                                           double h, double level) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] >= level) {
      if (i == 0)
        return 0.0;
      const double f = (level - m[i - 1]) / (m[i] - m[i - 1]);
      return h * (static_cast<double>(i - 1) + f);
    }
  }
  return std::nullopt;
}

//! DMFT success time t*(m >= level) for one delta3; nullopt when censored.
inline std::optional<double> success_time(double delta2, double delta3,
                                          const Options &base,
                                          double level = 0.5) {
  Options opt = base;
  opt.stop_at_overlap = level;
  const TwoTimeGrid g = integrate(KernelQ::from_deltas(delta2, delta3), opt);
  return crossing_time(g.m_series(), g.h(), level);
}

//! t*(delta3) over a grid, then extrapolation of 1/t* -> 0.
inline threshold::Estimate dmft_threshold(double delta2,
                                          const std::vector<double> &grid,
                                          const Options &base,
                                          std::size_t jobs = 1,
                                          double level = 0.5) {
  std::vector<threshold::GridPoint> pts(grid.size());
  parallel_for(grid.size(), jobs, [&](std::size_t k) {
    pts[k].delta3 = grid[k];
    pts[k].times = {success_time(delta2, grid[k], base, level)};
    pts[k].median = threshold::censored_median(pts[k].times);
  });
  return threshold::extrapolate(std::move(pts));
}

} // namespace smt::dmft

#pragma once

// Closed-form algorithmic thresholds for Langevin (finite beta) and gradient
// flow (beta = inf). Late-time overlap growth is exponential with rate
//
//   Lambda(d2, d3; beta) = 1/d2 - sqrt(1/d2 + 2 (1 - d2/beta) / d3)
//
// and the transition line is Lambda = 0, i.e.
//
//   d3_c(d2; beta) = 2 d2^2 (1 - d2/beta) / (1 - d2),   0 < d2 < 1.

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "smt/core.hpp"

namespace smt::theory {

inline double lambda_exponent(double delta2, double delta3, double beta) {
  const double radicand =
      1.0 / delta2 + 2.0 * (1.0 - delta2 / beta) / delta3;
  if (!(radicand >= 0.0)) {
    std::ostringstream os;
    os << "Lambda undefined: negative radicand " << radicand
       << " at delta2=" << delta2 << " delta3=" << delta3
       << " beta=" << format_beta(beta);
    throw DomainError(os.str());
  }
  return 1.0 / delta2 - std::sqrt(radicand);
}

//! Algebraic root of Lambda = 0; nullopt outside 0 < d2 < min(1, beta).
inline std::optional<double> threshold_delta3_closed(double delta2,
                                                     double beta) {
  if (!(delta2 > 0.0 && delta2 < 1.0) || !(delta2 < beta))
    return std::nullopt;
  return 2.0 * delta2 * delta2 * (1.0 - delta2 / beta) / (1.0 - delta2);
}

//! Root of the printed Lambda in delta3 by bracketing (TOMS 748).
inline std::optional<double> threshold_delta3_root(double delta2, double beta) {
  if (!(delta2 > 0.0 && delta2 < 1.0) || !(delta2 < beta))
    return std::nullopt;
  // Lambda is increasing in delta3: negative as delta3 -> 0, tends to
  // 1/d2 - 1/sqrt(d2) > 0 as delta3 -> inf.
  auto f = [&](double d3) { return lambda_exponent(delta2, d3, beta); };
  double lo = 1.0, hi = 1.0;
  while (f(lo) > 0.0) {
    lo *= 0.5;
    if (lo < 1e-300)
      return std::nullopt;
  }
  while (f(hi) < 0.0) {
    hi *= 2.0;
    if (hi > 1e300)
      return std::nullopt;
  }
  if (f(lo) == 0.0)
    return lo;
  if (f(hi) == 0.0)
    return hi;
  std::uintmax_t max_iter = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(
      f, lo, hi, boost::math::tools::eps_tolerance<double>(52), max_iter);
  return 0.5 * (a + b);
}

struct LineSample {
  double delta2;
  double delta3_c;    // closed form
  double delta3_root; // bracketed root of Lambda
};

struct ThresholdLine {
  double beta;
  std::vector<LineSample> samples;
  std::vector<std::string> notes; // skipped grid points
};

inline ThresholdLine threshold_line(double beta,
                                    const std::vector<double> &delta2_grid) {
  ThresholdLine line{beta, {}, {}};
  for (double d2 : delta2_grid) {
    const auto closed = threshold_delta3_closed(d2, beta);
    std::optional<double> root;
    if (closed && std::isfinite(*closed))
      root = threshold_delta3_root(d2, beta);
    if (!closed || !root) {
      std::ostringstream os;
      os << "delta2=" << d2 << ": no threshold at beta=" << format_beta(beta)
         << " (requires 0 < delta2 < min(1, beta))";
      line.notes.push_back(os.str());
      continue;
    }
    line.samples.push_back({d2, *closed, *root});
  }
  return line;
}

struct OrderingRow {
  double delta2;
  double beta1;    // delta3_c at beta = 1
  double beta1_25; // beta = 1.25
  double beta_inf; // beta = inf
  bool ordered;    // beta1 <= beta1_25 <= beta_inf
};

struct OrderingReport {
  std::vector<OrderingRow> rows;
  bool all_ordered = true;
};

inline OrderingReport
threshold_ordering_report(const std::vector<double> &delta2_grid) {
  OrderingReport rep;
  for (double d2 : delta2_grid) {
    const auto a = threshold_delta3_closed(d2, 1.0);
    const auto b = threshold_delta3_closed(d2, 1.25);
    const auto c = threshold_delta3_closed(d2, kInf);
    if (!a || !b || !c)
      continue;
    OrderingRow row{d2, *a, *b, *c, *a <= *b && *b <= *c};
    rep.all_ordered = rep.all_ordered && row.ordered;
    rep.rows.push_back(row);
  }
  return rep;
}

//! Uniform grid lo, lo+step, ..., <= hi (+ half a step of slack).
inline std::vector<double> linspace_step(double lo, double hi, double step) {
  std::vector<double> v;
  if (!(step > 0.0) || hi < lo)
    return v;
  const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long k = 0; k <= count; ++k)
    v.push_back(lo + static_cast<double>(k) * step);
  return v;
}

} // namespace smt::theory

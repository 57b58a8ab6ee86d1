// Acceptance gates 1-9. One PASS/FAIL line per criterion; exit status 1 if
// any gate fails. Pass criterion numbers as arguments to run a subset.
//
// Lines starting with "  " are diagnostics; "note:" lines are supplementary
// measurements that never affect the exit status.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "smt/amp.hpp"
#include "smt/dmft.hpp"
#include "smt/dynamics.hpp"
#include "smt/model.hpp"
#include "smt/theory.hpp"
#include "smt/threshold.hpp"

using namespace smt;

namespace {

struct Verdict {
  bool pass;
  std::string summary;
};

std::string fmt(const char *f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

//------------------------------------------------------------------------------

Verdict analytic_threshold() {
  const double l1 = theory::lambda_exponent(0.5, 1.0, kInf);
  const double l2 = theory::lambda_exponent(0.5, 0.5, 1.0);
  double worst = 0.0, at_d2 = 0.0, at_beta = 0.0;
  for (double beta : {1.0, 1.25, 2.0, kInf})
    for (double d2 = 0.05; d2 <= 0.95 + 1e-12; d2 += 0.01) {
      const auto c = theory::threshold_delta3_closed(d2, beta);
      const auto r = theory::threshold_delta3_root(d2, beta);
      if (!c || !r)
        return {false, fmt("no threshold at delta2=%g beta=%g", d2, beta)};
      const double e = std::abs(*c - *r);
      if (e > worst) {
        worst = e;
        at_d2 = d2;
        at_beta = beta;
      }
    }
  const bool ok = std::abs(l1) <= 1e-12 && std::abs(l2) <= 1e-12 && worst <= 1e-10;
  return {ok, fmt("Lambda(0.5,1,inf)=%.3g Lambda(0.5,0.5,1)=%.3g; "
                  "max |closed-root|=%.3g (delta2=%.2f beta=%g)",
                  l1, l2, worst, at_d2, at_beta)};
}

Verdict dmft_free_case() {
  dmft::Options o;
  o.h = 0.01;
  o.t_max = 5.0;
  o.m0 = 0.3;
  o.beta = 1.0;
  const auto g = dmft::integrate(dmft::KernelQ::zero(), o);
  double ec = 0, er = 0, em = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    em = std::max(em, std::abs(g.m(i) - o.m0 * std::exp(-g.time(i))));
    for (std::size_t j = 0; j <= i; ++j) {
      const double ex = std::exp(-(g.time(i) - g.time(j)));
      ec = std::max(ec, std::abs(g.C(i, j) - ex));
      er = std::max(er, std::abs(g.R(i, j) - ex));
    }
  }
  const double worst = std::max({ec, er, em});
  return {worst <= 1e-3,
          fmt("max error C=%.3g R=%.3g m=%.3g (tol 1e-3)", ec, er, em)};
}

Verdict spherical_closure() {
  dmft::Options o;
  o.h = 0.01;
  o.t_max = 50.0;
  o.m0 = 1e-6;
  o.beta = 1.0;
  const auto g = dmft::integrate(dmft::KernelQ::from_deltas(0.7, 1.5), o);
  const double d = g.max_diagonal_drift();
  return {d <= 1e-4 && g.time(g.size() - 1) >= 50.0 - 1e-9,
          fmt("max |C(t,t)-1| = %.3g over t <= %g (tol 1e-4)", d,
              g.time(g.size() - 1))};
}

constexpr double kGridFactors[] = {0.7, 0.85, 1.1, 1.25, 1.5, 2.0, 3.0};

Verdict threshold_agreement() {
  bool ok = true;
  std::string s;
  for (double beta : {1.0, kInf}) {
    const double analytic = *theory::threshold_delta3_closed(0.5, beta);
    std::vector<double> grid;
    for (double f : kGridFactors)
      grid.push_back(f * analytic);
    dmft::Options o;
    o.h = 0.05;
    o.t_max = 200.0;
    o.m0 = 1e-4;
    o.beta = beta;
    try {
      const auto est = dmft::dmft_threshold(0.5, grid, o);
      for (const auto &p : est.points)
        std::printf("  beta=%s delta3=%.4g t*=%s\n", format_beta(beta).c_str(),
                    p.delta3,
                    p.censored() ? "censored" : fmt("%.4g", p.median).c_str());
      std::printf("  beta=%s power-law root %.4g (gamma %.3g), linear check %.4g\n",
                  format_beta(beta).c_str(), est.power.root,
                  est.power.exponent, est.linear.root);
      const double err = std::abs(est.threshold - analytic) / analytic;
      ok = ok && err <= 0.10;
      s += fmt("beta=%s: %.4g vs %.4g (%.1f%%); ", format_beta(beta).c_str(),
               est.threshold, analytic, 100 * err);
    } catch (const InsufficientDataError &e) {
      ok = false;
      s += fmt("beta=%s: %s; ", format_beta(beta).c_str(), e.what());
    }
  }
  return {ok, s + "tol 10%"};
}

Verdict dmft_vs_finite_n() {
  const ModelParams p{256, 0.7, 1.5, 1.0};
  dynamics::SimConfig sim;
  sim.dt = 0.005;
  sim.t_max = 10.0;
  sim.record_stride = 20; // every 0.1
  sim.positive_start = true;
  dynamics::EnsembleSpec ens;
  ens.members = 20;
  const auto trs = dynamics::run_ensemble(p, sim, ens);
  const auto mean = dynamics::mean_trajectory(trs);

  // DMFT started from the ensemble's own mean initial overlap
  dmft::Options o;
  o.h = 0.01;
  o.t_max = 10.0;
  o.m0 = mean.m.front();
  o.beta = 1.0;
  const auto g = dmft::integrate(dmft::KernelQ::from_deltas(0.7, 1.5), o);
  double worst = 0.0, at = 0.0;
  for (std::size_t k = 0; k < mean.size(); ++k) {
    const auto i = static_cast<std::size_t>(std::llround(mean.times[k] / o.h));
    const double d = std::abs(mean.m[k] - g.m(i));
    if (k % 10 == 0)
      std::printf("  t=%-5.1f finite-N %.4f  DMFT %.4f\n", mean.times[k],
                  mean.m[k], g.m(i));
    if (d > worst) {
      worst = d;
      at = mean.times[k];
    }
  }
  return {worst <= 0.05,
          fmt("max |<m>_N=256 - m_DMFT| = %.4f at t=%.1f (20 seeds, m0=%.4f; tol 0.05)",
              worst, at, o.m0)};
}

Verdict amp_se_consistency() {
  bool ok = true;
  std::string s;
  for (double d2 : {0.3, 0.5, 0.7}) {
    const auto r = amp::run_se(dmft::KernelQ::from_deltas(d2, kInf), 1.0,
                               1e-15, 10'000'000);
    const double e = std::abs(r.fixed_point - (1.0 - d2));
    ok = ok && e <= 1e-6;
    s += fmt("SE matrix-only |m*-(1-d2)| at d2=%.1f: %.2g; ", d2, e);
  }

  const std::size_t n = 2048, instances = 10, iters = 10;
  const double m0 = 0.1;
  const ModelParams p{n, 0.7, 1.5, 1.0};
  GeneratorOptions gen;
  gen.storage = TensorStorage::implicit;
  std::vector<double> mean(iters + 1, 0.0);
  double worst_single = 0.0;
  std::vector<std::vector<double>> runs;
  for (std::size_t r = 0; r < instances; ++r) {
    const Instance inst = generate_instance(p, 100 + r, gen);
    const auto run = amp::run_amp(inst, {amp::Init::informed, m0, 200 + r}, iters, 0.0);
    runs.push_back(run.m);
    for (std::size_t k = 0; k <= iters; ++k)
      mean[k] += run.m[k] / static_cast<double>(instances);
  }
  const auto q = dmft::KernelQ::from_deltas(0.7, 1.5);
  double se = mean[0], worst = 0.0;
  for (std::size_t k = 1; k <= iters; ++k) {
    se = amp::se_step(se, q);
    worst = std::max(worst, std::abs(mean[k] - se));
    std::printf("  iter %2zu  AMP %.4f  SE %.4f\n", k, mean[k], se);
  }
  for (const auto &m : runs) {
    double x = m[0];
    for (std::size_t k = 1; k <= iters; ++k) {
      x = amp::se_step(x, q);
      worst_single = std::max(worst_single, std::abs(m[k] - x));
    }
  }
  ok = ok && worst <= 0.05;
  s += fmt("AMP vs SE (n=2048, 10 instances, informed m0=0.1): mean-curve max "
           "dev %.4f, worst single instance %.4f (tol 0.05)",
           worst, worst_single);
  return {ok, s};
}

bool strictly_increasing(const std::vector<double> &v) {
  for (std::size_t k = 1; k < v.size(); ++k)
    if (!(v[k] > v[k - 1]) || std::isinf(v[k]))
      return false;
  return !v.empty() && std::isfinite(v.front());
}

std::string time_or_censored(double t) {
  return std::isinf(t) ? "censored" : fmt("%.4g", t);
}

Verdict slowdown_vs_amp() {
  // delta3 decreasing through the easy phase toward the beta = 1 line (0.98)
  const std::vector<double> sweep = {5.0, 3.0, 2.0, 1.5, 1.25, 1.1, 1.05};
  const std::size_t n = 256, seeds = 10, max_iter = 1000;
  dynamics::SimConfig sim;
  sim.dt = 0.01;
  sim.t_max = 100.0;
  sim.record_stride = 5;
  sim.positive_start = true;
  sim.stop_at_overlap = 0.5;
  std::vector<double> t50, amp_iters;
  for (double d3 : sweep) {
    const ModelParams p{n, 0.7, d3, 1.0};
    dynamics::EnsembleSpec ens;
    ens.members = seeds;
    const auto trs = dynamics::run_ensemble(p, sim, ens);
    std::vector<std::optional<double>> ts;
    for (const auto &t : trs)
      ts.push_back(dynamics::success_time(t, 0.5));
    t50.push_back(threshold::censored_median(ts));

    // AMP from an uninformative random start; non-converged runs count as
    // max_iter (censored)
    std::vector<double> its;
    std::size_t converged = 0;
    for (std::size_t r = 0; r < seeds; ++r) {
      const Instance inst = generate_instance(p, 1 + r);
      const auto run = amp::run_amp(inst, {amp::Init::random, 1e-2, 300 + r}, max_iter);
      converged += run.converged;
      its.push_back(static_cast<double>(run.converged ? run.iterations : max_iter));
    }
    std::sort(its.begin(), its.end());
    amp_iters.push_back(0.5 * (its[(seeds - 1) / 2] + its[seeds / 2]));
    std::printf("  delta3=%-5.3g Langevin median t*(0.5)=%-9s AMP median iterations=%-6g "
                "(%zu/%zu converged)\n",
                d3, time_or_censored(t50.back()).c_str(), amp_iters.back(), converged, seeds);
    std::fflush(stdout);
  }
  const auto [lo, hi] = std::minmax_element(amp_iters.begin(), amp_iters.end());
  const double amp_ratio = *hi / *lo;
  const bool inc = strictly_increasing(t50);
  const double var = t50.back() / t50.front();

  // large-N analogue (not gated): DMFT t*(0.25) from m0 = E|m(0)| at n = 256
  // and state-evolution iterations from m0 = 1e-8
  std::vector<double> dmft_t, se_its;
  dmft::Options o;
  o.h = 0.1;
  o.t_max = 400.0;
  o.m0 = std::sqrt(2.0 / (std::numbers::pi * static_cast<double>(n)));
  o.beta = 1.0;
  for (double d3 : sweep) {
    const auto t = dmft::success_time(0.7, d3, o, 0.25);
    dmft_t.push_back(t ? *t : kInf);
    const auto se = amp::run_se(dmft::KernelQ::from_deltas(0.7, d3), 1e-8, 1e-7, 100000);
    se_its.push_back(static_cast<double>(se.iterations));
    std::printf("  large-N: delta3=%-5.3g DMFT t*(0.25)=%-9s SE iterations=%g\n", d3,
                time_or_censored(dmft_t.back()).c_str(), se_its.back());
    std::fflush(stdout);
  }
  const auto [slo, shi] = std::minmax_element(se_its.begin(), se_its.end());
  const bool dinc = strictly_increasing(dmft_t);
  const double dvar = dmft_t.back() / dmft_t.front();
  std::printf("note: criterion 7 large-N analogue (supplementary, level 0.25 since the "
              "beta=1 plateau lies below 0.5): DMFT t* %s, variation %.3gx; SE "
              "iterations ratio %.3g -> %s\n",
              dinc ? "strictly increasing" : "not strictly increasing", dvar,
              *shi / *slo, dinc && dvar > 10.0 && *shi / *slo < 2.0 ? "PASS" : "FAIL");

  const bool ok = inc && var > 10.0 && amp_ratio < 2.0;
  std::size_t censored = 0;
  for (double t : t50)
    censored += std::isinf(t);
  return {ok, fmt("n=256, %zu seeds: Langevin median t*(m>=0.5) %s, %zu/%zu sweep points "
                  "censored at t=%g (last/first %s, need >10x); AMP median iterations "
                  "ratio %.3g (need <2)",
                  seeds, inc ? "strictly increasing" : "not strictly increasing", censored,
                  t50.size(), sim.t_max,
                  std::isfinite(var) ? fmt("%.3gx", var).c_str() : "undefined", amp_ratio)};
}

Verdict property_suite() {
  const ModelParams p{32, 0.7, 1.5, 1.0};
  const Instance inst = generate_instance(p, 7);
  const Vector x = random_on_sphere(32, 8, rng::Tag::init);
  const Vector g = gradient(inst, x);
  double gerr = 0.0;
  const double eps = 1e-5;
  for (std::size_t i = 0; i < 32; ++i) {
    Vector xp = x, xm = x;
    xp[i] += eps;
    xm[i] -= eps;
    const double fd = (hamiltonian(inst, xp) - hamiltonian(inst, xm)) / (2 * eps);
    gerr = std::max(gerr, std::abs(g[i] - fd));
  }

  double nerr = 0.0;
  {
    Vector y = x, grad(32);
    rng::GaussianStream noise(3, rng::Tag::thermal);
    for (int s = 0; s < 500; ++s) {
      dynamics::langevin_step(y, inst, 1.0, 0.01, &noise, grad, s);
      nerr = std::max(nerr, std::abs(squared_norm(y) / 32.0 - 1.0));
    }
    Vector z = x;
    for (int s = 0; s < 500; ++s) {
      dynamics::gradient_flow_step(z, inst, 0.01, grad, s);
      nerr = std::max(nerr, std::abs(squared_norm(z) / 32.0 - 1.0));
    }
  }

  bool identical = true;
  for (auto storage : {TensorStorage::stored, TensorStorage::implicit}) {
    GeneratorOptions gen;
    gen.storage = storage;
    const Instance a = generate_instance(p, 11, gen), b = generate_instance(p, 11, gen);
    identical = identical && a.signal == b.signal && a.y == b.y && a.t3 == b.t3 &&
                hamiltonian(a, x) == hamiltonian(b, x);
  }

  const std::size_t n = 16;
  const Instance small = generate_instance(ModelParams{n, 0.7, 1.5, 1.0}, 23);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937 rng(5);
  std::shuffle(perm.begin(), perm.end(), rng);
  const Instance pinst = smt::testing::permuted(small, perm);
  const Vector sx = random_on_sphere(n, 24, rng::Tag::init);
  Vector px(n);
  for (std::size_t a = 0; a < n; ++a)
    px[a] = sx[perm[a]];
  const double perr = rel(hamiltonian(small, sx), hamiltonian(pinst, px));

  const bool ok = gerr <= 1e-5 && nerr <= 1e-9 && identical && perr <= 1e-9;
  return {ok, fmt("gradient vs central difference %.2g (tol 1e-5); norm drift "
                  "%.2g (tol 1e-9); determinism %s; permutation rel. error %.2g "
                  "(tol 1e-9)",
                  gerr, nerr, identical ? "bit-exact" : "MISMATCH", perr)};
}

Verdict line_ordering() {
  std::vector<double> grid;
  for (int k = 1; k <= 999; ++k)
    grid.push_back(k / 1000.0);
  const auto rep = theory::threshold_ordering_report(grid);
  std::size_t bad = 0;
  for (const auto &r : rep.rows)
    bad += !r.ordered;
  return {rep.all_ordered && rep.rows.size() == grid.size(),
          fmt("%zu delta2 points in (0,1), %zu out of order", rep.rows.size(), bad)};
}

} // namespace

int main(int argc, char **argv) {
  const std::map<int, std::pair<const char *, std::function<Verdict()>>> gates = {
      {1, {"analytic threshold values", analytic_threshold}},
      {2, {"DMFT free-case exactness", dmft_free_case}},
      {3, {"spherical-constraint closure", spherical_closure}},
      {4, {"numeric-vs-analytic threshold", threshold_agreement}},
      {5, {"DMFT vs finite-N Langevin", dmft_vs_finite_n}},
      {6, {"AMP-SE consistency", amp_se_consistency}},
      {7, {"Langevin slowdown vs AMP", slowdown_vs_amp}},
      {8, {"gradient and invariance properties", property_suite}},
      {9, {"threshold-line ordering", line_ordering}},
  };
  std::setvbuf(stdout, nullptr, _IOLBF, 0);
  std::set<int> selected;
  for (int a = 1; a < argc; ++a)
    selected.insert(std::atoi(argv[a]));

  int failures = 0;
  for (const auto &[id, gate] : gates) {
    if (!selected.empty() && !selected.count(id))
      continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = gate.second();
    } catch (const std::exception &e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !v.pass;
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", v.pass ? "PASS" : "FAIL",
                id, gate.first, v.summary.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}

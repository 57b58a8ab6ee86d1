#pragma once

// Approximate message passing for the spiked matrix-tensor model, its scalar
// state evolution, and the fixed-point phase classifier.
//
// Field and denoiser (Gaussian prior matched to the sphere, q = |xhat|^2/N):
//
//   B     = Y xhat / (d2 sqrt(N)) + sqrt(2)/(d3 N) T.xhat.xhat - b xhat_prev
//   b     = sigma (1/d2 + 2 q_cross / d3),  q_cross = xhat.xhat_prev / N
//   xhat' = B / (1 + Q'(q)),  sigma' = 1 / (1 + Q'(q))
//
// On the Nishimori line (overlap = q) the field is Q'(m) x* + sqrt(Q'(m)) z,
// which gives the state evolution m' = Q'(m) / (1 + Q'(m)).

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "smt/core.hpp"
#include "smt/dmft.hpp"
#include "smt/model.hpp"
#include "smt/rng.hpp"

namespace smt::amp {

using dmft::KernelQ;

//==============================================================================
// State evolution

inline double se_step(double m, const KernelQ &q) {
  const double s = q.dq(m);
  return s / (1.0 + s);
}

struct SeResult {
  std::vector<double> trajectory; // m_0, m_1, ...
  double fixed_point = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

//! Iterates until |m' - m| <= tol * m' (relative), or m' underflows below
//! 1e-30 (the uninformative fixed point), or max_iter.
inline SeResult run_se(const KernelQ &q, double m0, double tol,
                       std::size_t max_iter) {
  if (!(m0 > 0.0 && m0 <= 1.0))
    throw ParameterError("run_se: m0 must lie in (0, 1]");
  if (!(tol > 0.0))
    throw ParameterError("run_se: tol must be positive");
  SeResult r;
  double m = m0;
  r.trajectory.push_back(m);
  for (std::size_t it = 1; it <= max_iter; ++it) {
    const double next = se_step(m, q);
    r.trajectory.push_back(next);
    r.iterations = it;
    if (next < 1e-30) {
      r.fixed_point = 0.0;
      r.converged = true;
      return r;
    }
    const bool done = std::abs(next - m) <= tol * next;
    m = next;
    if (done) {
      r.converged = true;
      break;
    }
  }
  r.fixed_point = m;
  return r;
}

enum class Phase { easy, hard_or_impossible, impossible_proxy };

inline std::string to_string(Phase p) {
  switch (p) {
  case Phase::easy:
    return "easy";
  case Phase::hard_or_impossible:
    return "hard_or_impossible";
  case Phase::impossible_proxy:
    return "impossible_proxy";
  }
  return "?";
}

struct PhaseDetail {
  Phase phase;
  double from_small = 0.0; // fixed point reached from m0 = 1e-8
  double from_one = 0.0;   // fixed point reached from m0 = 1
};

inline constexpr double kUninformativeStart = 1e-8;
inline constexpr double kInformativeLevel = 0.01;

inline PhaseDetail classify_phase_detail(double delta2, double delta3) {
  const KernelQ q = KernelQ::from_deltas(delta2, delta3);
  // near delta2 = 1 growth from 1e-8 is slow; SE is cheap, so allow many steps
  const SeResult lo = run_se(q, kUninformativeStart, 1e-12, 2'000'000);
  const SeResult hi = run_se(q, 1.0, 1e-12, 2'000'000);
  PhaseDetail d{Phase::hard_or_impossible, lo.fixed_point, hi.fixed_point};
  const bool lo_pos = lo.fixed_point > kInformativeLevel;
  const bool hi_pos = hi.fixed_point > kInformativeLevel;
  if (lo_pos && hi_pos && std::abs(lo.fixed_point - hi.fixed_point) < 1e-6)
    d.phase = Phase::easy;
  else if (!lo_pos && !hi_pos)
    d.phase = Phase::impossible_proxy;
  return d;
}

inline Phase classify_phase(double delta2, double delta3) {
  return classify_phase_detail(delta2, delta3).phase;
}

//==============================================================================
// AMP

struct AmpState {
  Vector xhat;
  Vector xhat_prev; // zero before the first step
  double sigma = 0.0;
  std::size_t iter = 0;
};

inline AmpState amp_step(const AmpState &s, const Instance &inst) {
  const std::size_t N = inst.n();
  const double invN = 1.0 / static_cast<double>(N);
  const KernelQ q = KernelQ::from_deltas(inst.params.delta2,
                                         inst.params.delta3);
  const double qself = squared_norm(s.xhat) * invN;
  double qcross = 0.0;
  for (std::size_t i = 0; i < N; ++i)
    qcross += s.xhat[i] * s.xhat_prev[i];
  qcross *= invN;
  const double onsager =
      s.sigma * (q.inv_delta2 + 2.0 * qcross * q.inv_delta3);

  const Fields f = local_fields(inst, s.xhat);
  const double c2 = matrix_coupling(inst.params);
  const double c3 = tensor_coupling(inst.params);
  const double snr = q.dq(qself);
  const double shrink = 1.0 / (1.0 + snr);

  AmpState out;
  out.xhat.resize(N);
  for (std::size_t i = 0; i < N; ++i) {
    const double field =
        c2 * f.matrix[i] + c3 * f.tensor[i] - onsager * s.xhat_prev[i];
    out.xhat[i] = field * shrink;
  }
  if (!std::isfinite(squared_norm(out.xhat)))
    throw DivergenceError("amp: non-finite field", static_cast<long>(s.iter));
  out.xhat_prev = s.xhat;
  out.sigma = shrink;
  out.iter = s.iter + 1;
  return out;
}

enum class Init { random, spectral, informed };

inline std::string to_string(Init i) {
  switch (i) {
  case Init::random:
    return "random";
  case Init::spectral:
    return "spectral";
  case Init::informed:
    return "informed";
  }
  return "?";
}

struct InitSpec {
  Init kind = Init::random;
  //! random: squared norm per component; informed: target overlap m0 (the
  //! estimate is m0 x* + sqrt(m0 - m0^2) g, which has q = m0).
  double scale = 1e-4;
  std::uint64_t seed = 0;
  std::size_t power_iterations = 200;
};

//! Posterior variance matching a Nishimori-consistent estimate with q.
inline double nishimori_sigma(double q) { return 1.0 - q; }

inline AmpState initial_state(const Instance &inst, const InitSpec &init) {
  const std::size_t N = inst.n();
  AmpState s;
  s.xhat_prev.assign(N, 0.0);
  switch (init.kind) {
  case Init::random: {
    s.xhat = random_on_sphere(N, init.seed, rng::Tag::amp_init);
    const double a = std::sqrt(init.scale);
    for (auto &v : s.xhat)
      v *= a;
    s.sigma = nishimori_sigma(init.scale);
    break;
  }
  case Init::informed: {
    const double m0 = init.scale;
    if (!(m0 >= 0.0 && m0 <= 1.0))
      throw ParameterError("informed init needs m0 in [0, 1]");
    rng::GaussianStream g(init.seed, rng::Tag::amp_init);
    s.xhat.resize(N);
    const double a = std::sqrt(m0 - m0 * m0);
    for (std::size_t i = 0; i < N; ++i)
      s.xhat[i] = m0 * inst.signal[i] + a * g();
    s.sigma = nishimori_sigma(m0);
    break;
  }
  case Init::spectral: {
    // leading eigenvector of the matrix channel by power iteration, shifted
    // by the semicircle edge so the iteration targets the largest eigenvalue
    Vector v = random_on_sphere(N, init.seed, rng::Tag::amp_init);
    const double c2 = matrix_coupling(inst.params);
    const double shift = 2.0 / std::sqrt(inst.params.delta2);
    Vector w(N);
    for (std::size_t it = 0; it < init.power_iterations; ++it) {
      std::fill(w.begin(), w.end(), 0.0);
      for (std::size_t i = 0; i + 1 < N; ++i)
        for (std::size_t j = i + 1; j < N; ++j) {
          const double y = inst.y[pair_index(N, i, j)];
          w[i] += y * v[j];
          w[j] += y * v[i];
        }
      for (std::size_t i = 0; i < N; ++i)
        w[i] = c2 * w[i] + shift * v[i];
      project_to_sphere(w);
      v.swap(w);
    }
    // overlap^2 of the top eigenvector is 1 - d2 above the spectral threshold
    const double q0 = std::max(1.0 - inst.params.delta2, 1e-4);
    const double a = std::sqrt(q0);
    for (auto &x : v)
      x *= a;
    s.xhat = std::move(v);
    s.sigma = nishimori_sigma(q0);
    break;
  }
  }
  return s;
}

struct AmpRun {
  std::vector<double> m;        // overlap xhat.x*/N per iteration (m[0] = init)
  std::vector<double> residual; // |xhat_t - xhat_{t-1}|/sqrt(N), residual[0] = 0
  std::size_t iterations = 0;
  bool converged = false;
  std::string init;
  Vector xhat;
};

inline AmpRun run_amp(const Instance &inst, const InitSpec &init,
                      std::size_t max_iter = 1000, double tol = 1e-7,
                      std::size_t min_iter = 0) {
  AmpState s = initial_state(inst, init);
  AmpRun run;
  run.init = to_string(init.kind);
  run.m.push_back(overlap(s.xhat, inst));
  run.residual.push_back(0.0);
  const double invSqrtN = 1.0 / std::sqrt(static_cast<double>(inst.n()));
  for (std::size_t it = 1; it <= max_iter; ++it) {
    AmpState next = amp_step(s, inst);
    double d = 0.0;
    for (std::size_t i = 0; i < inst.n(); ++i) {
      const double e = next.xhat[i] - s.xhat[i];
      d += e * e;
    }
    const double res = std::sqrt(d) * invSqrtN;
    s = std::move(next);
    run.m.push_back(overlap(s.xhat, inst));
    run.residual.push_back(res);
    run.iterations = it;
    if (res < tol && it >= min_iter) {
      run.converged = true;
      break;
    }
  }
  run.xhat = std::move(s.xhat);
  return run;
}

} // namespace smt::amp

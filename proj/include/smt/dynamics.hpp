#pragma once

// Finite-N Langevin and gradient-flow dynamics on the sphere |x|^2 = N.
//
//   x' = x + dt (-grad H - mu x) + sqrt(2 dt / beta) g,   then x' <- sqrt(N) x'/|x'|
//
// mu is the instantaneous multiplier x.(-grad H)/N + 1/beta; the projection
// enforces the constraint exactly, mu is reported for comparison with the
// large-N multiplier.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "smt/core.hpp"
#include "smt/model.hpp"
#include "smt/parallel.hpp"
#include "smt/rng.hpp"
#include "smt/threshold.hpp"

namespace smt::dynamics {

enum class Algo { langevin, gradient_flow };

inline std::string to_string(Algo a) {
  return a == Algo::langevin ? "langevin" : "gradient_flow";
}

struct SimConfig {
  double dt = 0.01;
  double t_max = 10.0;
  Algo algo = Algo::langevin;
  std::size_t record_stride = 10;
  std::uint64_t seed = 0; // thermal noise and initial condition
  //! Reflect the random start into the half-space m(0) >= 0.
  bool positive_start = false;
  //! Stop (after recording) once m >= this level.
  std::optional<double> stop_at_overlap;

  void validate(const ModelParams &p) const {
    if (!(dt > 0.0) || !(dt < 0.1))
      throw ParameterError("dt must be in (0, 0.1)");
    if (!(t_max > 0.0) || t_max / dt > 9.0e15)
      throw ParameterError("t_max must be positive and t_max/dt representable");
    if (record_stride == 0)
      throw ParameterError("record_stride must be positive");
    if (algo == Algo::langevin && std::isinf(p.beta))
      throw ParameterError(
          "langevin needs finite beta; use gradient_flow for beta = inf");
  }
};

struct Trajectory {
  std::vector<double> times;
  std::vector<double> m;
  std::vector<double> energy_per_spin;
  std::vector<double> mu;

  std::size_t size() const { return times.size(); }
  void push(double t, double m_, double e, double mu_) {
    times.push_back(t);
    m.push_back(m_);
    energy_per_spin.push_back(e);
    mu.push_back(mu_);
  }
};

struct StepInfo {
  double energy = 0.0; // H at the pre-step state
  double mu = 0.0;     // multiplier at the pre-step state
};

//! One Euler-Maruyama step plus projection. `noise` == nullptr (or
//! beta = inf) gives the gradient-flow step. `grad` is workspace of length N.
inline StepInfo langevin_step(std::span<double> x, const Instance &inst,
                              double beta, double dt,
                              rng::GaussianStream *noise,
                              std::span<double> grad, long step_index = 0) {
  const std::size_t N = inst.n();
  const EnergyTerms e = energy_and_gradient(inst, x, grad);
  double drive = 0.0;
  for (std::size_t i = 0; i < N; ++i)
    drive -= x[i] * grad[i];
  const double T = 1.0 / beta;
  const double mu = drive / static_cast<double>(N) + T;
  const double amp = (noise && T > 0.0) ? std::sqrt(2.0 * dt * T) : 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    double v = x[i] + dt * (-grad[i] - mu * x[i]);
    if (amp > 0.0)
      v += amp * (*noise)();
    x[i] = v;
  }
  const double norm2 = squared_norm(x);
  if (!std::isfinite(norm2) || norm2 == 0.0)
    throw DivergenceError("langevin: non-finite configuration", step_index);
  project_to_sphere(x);
  return {e.total(), mu};
}

inline StepInfo gradient_flow_step(std::span<double> x, const Instance &inst,
                                   double dt, std::span<double> grad,
                                   long step_index = 0) {
  return langevin_step(x, inst, kInf, dt, nullptr, grad, step_index);
}

inline Vector initial_configuration(const Instance &inst,
                                    const SimConfig &sim) {
  Vector x = random_on_sphere(inst.n(), sim.seed, rng::Tag::init);
  if (sim.positive_start && overlap(x, inst) < 0.0)
    for (auto &v : x)
      v = -v;
  return x;
}

//! Runs from x0 (uniform random on the sphere when empty).
inline Trajectory run_dynamics(const Instance &inst, const ModelParams &params,
                               const SimConfig &sim, Vector x0 = {}) {
  sim.validate(params);
  const std::size_t N = inst.n();
  Vector x = x0.empty() ? initial_configuration(inst, sim) : std::move(x0);
  check_length(inst, x);
  project_to_sphere(x);

  const double beta =
      sim.algo == Algo::gradient_flow ? kInf : params.beta;
  std::optional<rng::GaussianStream> noise;
  if (sim.algo == Algo::langevin)
    noise.emplace(sim.seed, rng::Tag::thermal);

  const auto steps = static_cast<long>(std::llround(sim.t_max / sim.dt));
  Vector grad(N);
  Trajectory traj;
  const double invN = 1.0 / static_cast<double>(N);
  for (long s = 0;; ++s) {
    const double t = static_cast<double>(s) * sim.dt;
    const double m = overlap(x, inst);
    const bool done = s == steps ||
                      (sim.stop_at_overlap && m >= *sim.stop_at_overlap);
    if (done) {
      const EnergyTerms e = energy_and_gradient(inst, x, grad);
      double drive = 0.0;
      for (std::size_t i = 0; i < N; ++i)
        drive -= x[i] * grad[i];
      traj.push(t, m, e.total() * invN, drive * invN + 1.0 / beta);
      break;
    }
    // energy and mu returned by the step belong to the pre-step state
    const StepInfo info = langevin_step(x, inst, beta, sim.dt,
                                        noise ? &*noise : nullptr, grad, s);
    if (s % static_cast<long>(sim.record_stride) == 0)
      traj.push(t, m, info.energy * invN, info.mu);
  }
  return traj;
}

//! First recorded time with m >= level, linearly interpolated.
inline std::optional<double> success_time(const Trajectory &tr,
                                          double level) {
  for (std::size_t k = 0; k < tr.size(); ++k)
    if (tr.m[k] >= level) {
      if (k == 0)
        return tr.times[0];
      const double f = (level - tr.m[k - 1]) / (tr.m[k] - tr.m[k - 1]);
      return tr.times[k - 1] + f * (tr.times[k] - tr.times[k - 1]);
    }
  return std::nullopt;
}

struct EnsembleSpec {
  std::uint64_t instance_seed = 1; // seed of member k is instance_seed + k
  std::uint64_t thermal_seed = 1000;
  std::size_t members = 1;
  unsigned jobs = 1;
  GeneratorOptions generator{};
};

//! One trajectory per member; each member has its own instance and thermal
//! stream, so the result is independent of `jobs`.
inline std::vector<Trajectory> run_ensemble(const ModelParams &params,
                                            const SimConfig &sim,
                                            const EnsembleSpec &ens) {
  params.validate();
  sim.validate(params);
  std::vector<Trajectory> out(ens.members);
  parallel_for(ens.members, ens.jobs, [&](std::size_t k) {
    const Instance inst =
        generate_instance(params, ens.instance_seed + k, ens.generator);
    SimConfig s = sim;
    s.seed = ens.thermal_seed + k;
    out[k] = run_dynamics(inst, params, s);
  });
  return out;
}

//! Pointwise mean over members; stops at the shortest trajectory.
inline Trajectory mean_trajectory(const std::vector<Trajectory> &ts) {
  Trajectory mean;
  if (ts.empty())
    return mean;
  std::size_t len = ts.front().size();
  for (const auto &t : ts)
    len = std::min(len, t.size());
  const double w = 1.0 / static_cast<double>(ts.size());
  for (std::size_t k = 0; k < len; ++k) {
    double m = 0, e = 0, mu = 0;
    for (const auto &t : ts) {
      m += t.m[k];
      e += t.energy_per_spin[k];
      mu += t.mu[k];
    }
    mean.push(ts.front().times[k], w * m, w * e, w * mu);
  }
  return mean;
}

//! Finite-N threshold: per delta3, the ensemble median of t*(m >= level)
//! (censored at t_max), extrapolated as in the large-N route. Members keep
//! the same seeds across the grid, so neighbouring points share noise.
inline threshold::Estimate finite_n_threshold(ModelParams params,
                                              const std::vector<double> &grid,
                                              SimConfig sim,
                                              const EnsembleSpec &ens,
                                              double level = 0.5) {
  sim.stop_at_overlap = level;
  std::vector<threshold::GridPoint> pts;
  for (double d3 : grid) {
    params.delta3 = d3;
    const auto trs = run_ensemble(params, sim, ens);
    threshold::GridPoint gp;
    gp.delta3 = d3;
    for (const auto &t : trs)
      gp.times.push_back(success_time(t, level));
    gp.median = threshold::censored_median(gp.times);
    pts.push_back(std::move(gp));
  }
  return threshold::extrapolate(std::move(pts));
}

} // namespace smt::dynamics

// smt: command-line front end.
//
//   smt sim        finite-N Langevin / gradient flow / AMP ensembles
//   smt dmft       large-N two-time equations
//   smt phase      phase-diagram data pack
//   smt threshold  algorithmic threshold by several methods
//   smt verify     rerun a manifest and compare output digests
//
// Exit codes: 0 ok, 1 other failure, 2 usage, 3 numerical instability,
// 4 insufficient data.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "manifest.hpp"
#include "smt/amp.hpp"
#include "smt/dmft.hpp"
#include "smt/dynamics.hpp"
#include "smt/parallel.hpp"
#include "smt/report.hpp"
#include "smt/theory.hpp"
#include "smt/threshold.hpp"

namespace smt::cli {
namespace {

struct UsageError : Error {
  using Error::Error;
};

constexpr const char *kOutEnv = "SMT_OUTPUT_DIR";

std::string default_out_dir() {
  const char *e = std::getenv(kOutEnv);
  return e && *e ? e : "smt_out";
}

//! "a:b:step" -> grid; empty or malformed -> usage error.
std::vector<double> parse_range(const std::string &spec, const char *flag) {
  std::vector<double> parts;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ':')) {
    try {
      parts.push_back(std::stod(tok));
    } catch (const std::exception &) {
      throw UsageError(std::string(flag) + ": cannot parse '" + spec + "'");
    }
  }
  if (parts.size() != 3)
    throw UsageError(std::string(flag) + ": expected a:b:step, got '" + spec + "'");
  auto v = theory::linspace_step(parts[0], parts[1], parts[2]);
  if (v.empty())
    throw UsageError(std::string(flag) + ": empty range '" + spec + "'");
  return v;
}

std::vector<double> parse_betas(const std::vector<std::string> &v) {
  std::vector<double> out;
  for (const auto &s : v)
    out.push_back(parse_beta(s));
  return out;
}

std::string tag(double v) { return report::num(v); }

//------------------------------------------------------------------------------
// Shared option blocks

struct Global {
  std::string out = default_out_dir();
  unsigned jobs = default_jobs();
  bool no_cache = false;
  std::vector<std::string> argv;

  std::optional<fs::path> cache_dir() const {
    if (no_cache)
      return std::nullopt;
    return fs::path(out) / ".cache";
  }
};

struct DmftOpts {
  double h = 0.05;
  double t_max = 200.0;
  double m0 = 1e-4;
  double level = 0.5;

  void add(CLI::App *c) {
    c->add_option("--h", h, "DMFT time step")->check(CLI::Range(1e-6, 0.1));
    c->add_option("--t-max", t_max, "DMFT horizon (t* censored beyond)");
    c->add_option("--m0", m0, "initial overlap for the large-N equations");
    c->add_option("--level", level, "overlap level defining t*");
  }
};

//! DMFT success time with caching; one entry per full parameter tuple.
std::optional<double> cached_dmft_time(const Cache &cache, double d2, double d3, double beta,
                                       const DmftOpts &o) {
  const json key = {{"kind", "dmft_t_star"}, {"version", SMT_VERSION},
                    {"delta2", d2},          {"delta3", d3},
                    {"beta", format_beta(beta)}, {"h", o.h},
                    {"t_max", o.t_max},      {"m0", o.m0},
                    {"level", o.level}};
  if (auto v = cache.get(key))
    return v->is_null() ? std::nullopt : std::optional<double>(v->get<double>());
  dmft::Options opt;
  opt.h = o.h;
  opt.t_max = o.t_max;
  opt.m0 = o.m0;
  opt.beta = beta;
  const auto t = dmft::success_time(d2, d3, opt, o.level);
  cache.put(key, t ? json(*t) : json(nullptr));
  return t;
}

threshold::Estimate dmft_estimate(const Cache &cache, double d2, double beta,
                                  const std::vector<double> &grid, const DmftOpts &o,
                                  unsigned jobs) {
  std::vector<threshold::GridPoint> pts(grid.size());
  parallel_for(grid.size(), jobs, [&](std::size_t k) {
    pts[k].delta3 = grid[k];
    pts[k].times = {cached_dmft_time(cache, d2, grid[k], beta, o)};
    pts[k].median = threshold::censored_median(pts[k].times);
  });
  return threshold::extrapolate(std::move(pts));
}

//! Default delta3 grid: multiples of the analytic threshold bracketing it.
std::vector<double> default_grid(double d2, double beta, const std::vector<double> &factors) {
  const auto c = theory::threshold_delta3_closed(d2, beta);
  if (!c)
    throw UsageError("no analytic threshold at delta2=" + tag(d2) + " beta=" +
                     format_beta(beta) + "; pass an explicit --grid");
  std::vector<double> g;
  for (double f : factors)
    g.push_back(f * *c);
  return g;
}

const std::vector<double> kGridFactors = {0.7, 0.85, 1.1, 1.25, 1.5, 2.0, 3.0};

GeneratorOptions generator_for(std::size_t n, const std::string &tensor) {
  GeneratorOptions g;
  if (tensor == "implicit")
    g.storage = TensorStorage::implicit;
  else if (tensor == "auto" && num_triples(n) * sizeof(double) > (std::size_t{1} << 30))
    g.storage = TensorStorage::implicit;
  return g;
}

//------------------------------------------------------------------------------
// sim

struct SimCmd {
  std::size_t n = 256;
  double delta2 = 0.7;
  std::vector<double> delta3;
  std::string beta = "1";
  double dt = 0.005;
  double t_max = 10.0;
  std::string algo = "langevin";
  std::size_t seeds = 20;
  std::uint64_t seed = 1;
  std::uint64_t thermal_seed = 1000;
  std::size_t record_stride = 20;
  bool positive_start = false;
  std::string tensor = "auto";
  std::string amp_init = "informed";
  double amp_scale = 0.1;
  std::size_t max_iter = 1000;
  double tol = 1e-7;

  void add(CLI::App *c) {
    c->add_option("--n", n, "system size")->check(CLI::PositiveNumber);
    c->add_option("--delta2", delta2, "matrix-channel noise variance");
    c->add_option("--delta3", delta3, "tensor-channel noise variance(s)")
        ->required()
        ->delimiter(',');
    c->add_option("--beta", beta, "inverse temperature or 'inf'");
    c->add_option("--dt", dt, "time step");
    c->add_option("--t-max", t_max, "horizon");
    c->add_option("--algo", algo, "langevin | gd | amp")
        ->check(CLI::IsMember({"langevin", "gd", "amp"}));
    c->add_option("--seeds", seeds, "ensemble members")->check(CLI::PositiveNumber);
    c->add_option("--seed", seed, "instance seed of member 0 (member k uses seed+k)");
    c->add_option("--thermal-seed", thermal_seed, "noise/init seed of member 0");
    c->add_option("--record-stride", record_stride, "record every k-th step");
    c->add_flag("--positive-start", positive_start, "reflect starts into m(0) >= 0");
    c->add_option("--tensor", tensor, "tensor storage: auto | stored | implicit")
        ->check(CLI::IsMember({"auto", "stored", "implicit"}));
    c->add_option("--amp-init", amp_init, "random | spectral | informed")
        ->check(CLI::IsMember({"random", "spectral", "informed"}));
    c->add_option("--amp-scale", amp_scale, "AMP initial q0 (random) or m0 (informed)");
    c->add_option("--max-iter", max_iter, "AMP iteration cap");
    c->add_option("--tol", tol, "AMP convergence tolerance");
  }

  int run(const Global &g) const {
    const double b = parse_beta(beta);
    if (algo == "langevin" && std::isinf(b))
      throw UsageError("--algo langevin needs a finite --beta; use --algo gd for beta = inf");
    if (algo == "gd" && !std::isinf(b))
      std::cerr << "note: --algo gd ignores --beta " << beta << '\n';
    for (double d3 : delta3)
      ModelParams{n, delta2, d3, b}.validate();
    dynamics::SimConfig sim;
    sim.dt = dt;
    sim.t_max = t_max;
    sim.algo = algo == "langevin" ? dynamics::Algo::langevin : dynamics::Algo::gradient_flow;
    sim.record_stride = record_stride;
    sim.positive_start = positive_start;
    if (algo != "amp")
      sim.validate(ModelParams{n, delta2, delta3.front(), b});

    Manifest man(g.out, "sim", g.argv);
    man.parameters() = {{"n", n},           {"delta2", delta2},
                        {"delta3", delta3}, {"beta", format_beta(b)},
                        {"algo", algo},     {"dt", dt},
                        {"t_max", t_max},   {"seeds", seeds},
                        {"record_stride", record_stride},
                        {"positive_start", positive_start},
                        {"tensor", tensor}};
    std::vector<std::uint64_t> inst_seeds, th_seeds;
    for (std::size_t k = 0; k < seeds; ++k) {
      inst_seeds.push_back(seed + k);
      th_seeds.push_back(thermal_seed + k);
    }
    man.parameters()["instance_seeds"] = inst_seeds;
    man.parameters()["thermal_seeds"] = th_seeds;

    const GeneratorOptions gen = generator_for(n, tensor);
    std::ostringstream joined;
    if (algo == "amp") {
      man.parameters()["amp"] = {{"init", amp_init}, {"scale", amp_scale},
                                 {"max_iter", max_iter}, {"tol", tol}};
      report::CsvWriter jw(joined, {"delta3", "seed", "iter", "m", "residual"});
      json iters = json::object();
      for (double d3 : delta3) {
        const ModelParams p{n, delta2, d3, b};
        std::vector<amp::AmpRun> runs(seeds);
        parallel_for(seeds, g.jobs, [&](std::size_t k) {
          const Instance inst = generate_instance(p, inst_seeds[k], gen);
          amp::InitSpec init;
          init.kind = amp_init == "random"     ? amp::Init::random
                      : amp_init == "spectral" ? amp::Init::spectral
                                               : amp::Init::informed;
          init.scale = amp_scale;
          init.seed = th_seeds[k];
          runs[k] = amp::run_amp(inst, init, max_iter, tol);
        });
        std::ostringstream per;
        report::CsvWriter w(per, {"seed", "iter", "m", "residual"});
        std::vector<double> counts;
        for (std::size_t k = 0; k < seeds; ++k) {
          if (!runs[k].converged)
            man.warn("amp did not converge within " + std::to_string(max_iter) +
                     " iterations (delta3=" + tag(d3) + ", seed=" + std::to_string(inst_seeds[k]) + ")");
          counts.push_back(static_cast<double>(runs[k].iterations));
          for (std::size_t it = 0; it < runs[k].m.size(); ++it) {
            w.row(inst_seeds[k], it, runs[k].m[it], runs[k].residual[it]);
            jw.row(d3, inst_seeds[k], it, runs[k].m[it], runs[k].residual[it]);
          }
        }
        man.write("sim_d3=" + tag(d3) + ".csv", per.str());
        // state-evolution reference from the same starting overlap
        const double m_start = amp_init == "informed" ? amp_scale : 1e-8;
        std::ostringstream se;
        report::write_se(se, amp::run_se(dmft::KernelQ::from_deltas(delta2, d3),
                                         std::max(m_start, 1e-300), 1e-10, max_iter));
        man.write("se_d3=" + tag(d3) + ".csv", se.str());
        std::sort(counts.begin(), counts.end());
        iters[tag(d3)] = counts[counts.size() / 2];
      }
      man.extra()["median_iterations"] = iters;
    } else {
      report::CsvWriter jw(joined, {"delta3", "seed", "t", "m", "energy_per_spin", "mu"});
      for (double d3 : delta3) {
        const ModelParams p{n, delta2, d3, b};
        dynamics::EnsembleSpec ens;
        ens.instance_seed = seed;
        ens.thermal_seed = thermal_seed;
        ens.members = seeds;
        ens.jobs = g.jobs;
        ens.generator = gen;
        const auto trs = dynamics::run_ensemble(p, sim, ens);
        std::ostringstream per, mean;
        report::write_ensemble(per, trs, inst_seeds);
        report::write_trajectory(mean, dynamics::mean_trajectory(trs));
        man.write("sim_d3=" + tag(d3) + ".csv", per.str());
        man.write("sim_d3=" + tag(d3) + "_mean.csv", mean.str());
        for (std::size_t k = 0; k < trs.size(); ++k)
          for (std::size_t i = 0; i < trs[k].size(); ++i)
            jw.row(d3, inst_seeds[k], trs[k].times[i], trs[k].m[i],
                   trs[k].energy_per_spin[i], trs[k].mu[i]);
      }
    }
    man.write("sim_joined.csv", joined.str());
    man.finish();
    for (const auto &w : man.warnings())
      std::cerr << "warning: " << w << '\n';
    return man.warnings().empty() ? 0 : 3;
  }
};

//------------------------------------------------------------------------------
// dmft

struct DmftCmd {
  double delta2 = 0.7;
  double delta3 = 1.5;
  std::string beta = "1";
  double h = 0.05;
  double t_max = 50.0;
  double m0 = 1e-6;
  std::vector<double> slices;
  bool richardson = false;
  double fdt_t0 = -1.0;

  void add(CLI::App *c) {
    c->add_option("--delta2", delta2, "matrix-channel noise variance (large = absent)");
    c->add_option("--delta3", delta3, "tensor-channel noise variance (large = absent)");
    c->add_option("--beta", beta, "inverse temperature or 'inf'");
    c->add_option("--h", h, "time step (<= 0.1)");
    c->add_option("--t-max", t_max, "horizon");
    c->add_option("--m0", m0, "initial overlap");
    c->add_option("--slices", slices, "waiting times tw for C(t,tw), R(t,tw)")->delimiter(',');
    c->add_flag("--richardson", richardson, "also run at h/2 and report the step error");
    c->add_option("--fdt-t0", fdt_t0, "report the FDT deviation after this burn-in");
  }

  int run(const Global &g) const {
    const double b = parse_beta(beta);
    if (!(delta2 > 0) || !(delta3 > 0))
      throw UsageError("--delta2 and --delta3 must be positive");
    if (!(m0 >= 0.0 && m0 < 1.0))
      throw UsageError("--m0 must lie in [0, 1)");
    Manifest man(g.out, "dmft", g.argv);
    if (m0 == 0.0)
      man.warn("m0 = 0 is a fixed point of the overlap equation: m(t) stays 0 "
               "(symmetric initialization never grows)");
    for (const auto &w : man.warnings())
      std::cerr << "warning: " << w << '\n';

    dmft::Options opt;
    opt.h = h;
    opt.t_max = t_max;
    opt.m0 = m0;
    opt.beta = b;
    man.parameters() = {{"delta2", delta2}, {"delta3", delta3}, {"beta", format_beta(b)},
                        {"h", h},           {"t_max", t_max},   {"m0", m0},
                        {"slices", slices}};
    const dmft::KernelQ q = dmft::KernelQ::from_deltas(delta2, delta3);
    const dmft::TwoTimeGrid grid = dmft::integrate(q, opt);
    std::ostringstream series, sl;
    report::write_dmft_series(series, grid);
    man.write("dmft_series.csv", series.str());
    if (!slices.empty()) {
      report::write_dmft_slices(sl, grid, slices);
      man.write("dmft_slices.csv", sl.str());
    }
    const double m_end = grid.m(grid.size() - 1);
    man.extra()["m_final"] = m_end;
    man.extra()["max_diagonal_drift"] = grid.max_diagonal_drift();
    const auto t_half = dmft::crossing_time(grid.m_series(), h, 0.5);
    man.extra()["t_star_0.5"] = t_half ? json(*t_half) : json(nullptr);
    if (fdt_t0 >= 0.0 && !std::isinf(b))
      man.extra()["fdt_deviation"] = {{"t0", fdt_t0}, {"value", dmft::fdt_check(grid, b, fdt_t0)}};
    if (richardson) {
      dmft::Options half = opt;
      half.h = h / 2.0;
      const dmft::TwoTimeGrid g2 = dmft::integrate(q, half);
      const double m_half = g2.m(g2.size() - 1);
      // O(h^2) stepping: error of the h/2 result ~ (m_h/2 - m_h) / 3
      man.extra()["richardson"] = {{"h", h},
                                   {"m_h", m_end},
                                   {"m_h_over_2", m_half},
                                   {"extrapolated", m_half + (m_half - m_end) / 3.0},
                                   {"error_estimate_h_over_2", std::abs(m_half - m_end) / 3.0},
                                   {"assumed_order", 2}};
    }
    man.finish();
    return 0;
  }
};

//------------------------------------------------------------------------------
// phase

struct PhaseCmd {
  std::string delta2_range = "0.05:2:0.05";
  std::string delta3_range = "0.1:3:0.1";
  std::vector<std::string> betas = {"1", "1.25", "inf"};
  bool numeric_marks = false;
  std::vector<double> marks_delta2 = {0.5};
  std::vector<double> marks_factors = kGridFactors;
  DmftOpts dm;

  void add(CLI::App *c) {
    c->add_option("--delta2-range", delta2_range, "a:b:step");
    c->add_option("--delta3-range", delta3_range, "a:b:step");
    c->add_option("--betas", betas, "temperatures for the analytic lines")->delimiter(',');
    c->add_flag("--numeric-marks", numeric_marks, "add DMFT-extrapolated thresholds (slow)");
    c->add_option("--marks-delta2", marks_delta2, "delta2 values for numeric marks")->delimiter(',');
    c->add_option("--marks-factors", marks_factors,
                  "delta3 grid for marks, in units of the analytic threshold")
        ->delimiter(',');
    dm.add(c);
  }

  int run(const Global &g) const {
    const auto d2s = parse_range(delta2_range, "--delta2-range");
    const auto d3s = parse_range(delta3_range, "--delta3-range");
    const auto bs = parse_betas(betas);
    Manifest man(g.out, "phase", g.argv);
    man.parameters() = {{"delta2_range", delta2_range}, {"delta3_range", delta3_range},
                        {"betas", betas},               {"numeric_marks", numeric_marks}};

    std::vector<amp::PhaseDetail> cls(d2s.size() * d3s.size());
    parallel_for(cls.size(), g.jobs, [&](std::size_t k) {
      cls[k] = amp::classify_phase_detail(d2s[k / d3s.size()], d3s[k % d3s.size()]);
    });

    std::ostringstream pack;
    report::CsvWriter w(pack, {"kind", "delta2", "delta3", "beta", "phase", "m_small", "m_one"});
    std::map<std::string, std::size_t> counts;
    std::size_t easy_below = 0, below = 0, easy_above = 0;
    for (std::size_t k = 0; k < cls.size(); ++k) {
      const double d2 = d2s[k / d3s.size()], d3 = d3s[k % d3s.size()];
      const std::string ph = amp::to_string(cls[k].phase);
      ++counts[ph];
      const bool easy = cls[k].phase == amp::Phase::easy;
      if (d2 < 1.0) {
        ++below;
        easy_below += easy;
      } else if (d2 > 1.0) {
        easy_above += easy;
      }
      w.row("phase", d2, d3, "", ph, cls[k].from_small, cls[k].from_one);
    }
    std::vector<theory::ThresholdLine> lines;
    for (double b : bs) {
      lines.push_back(theory::threshold_line(b, d2s));
      for (const auto &s : lines.back().samples)
        w.row("line", s.delta2, s.delta3_c, format_beta(b), "", "", "");
    }
    json marks = json::array();
    if (numeric_marks) {
      const Cache cache(g.cache_dir());
      for (double b : bs)
        for (double d2 : marks_delta2) {
          const auto grid = default_grid(d2, b, marks_factors);
          const auto est = dmft_estimate(cache, d2, b, grid, dm, g.jobs);
          const double analytic = *theory::threshold_delta3_closed(d2, b);
          w.row("mark", d2, est.threshold, format_beta(b), "", "", "");
          marks.push_back({{"delta2", d2},
                           {"beta", format_beta(b)},
                           {"numeric", report::jnum(est.threshold)},
                           {"analytic", analytic},
                           {"discrepancy_pct", 100.0 * std::abs(est.threshold - analytic) / analytic},
                           {"estimate", report::to_json(est)}});
        }
    }
    man.write("phase_pack.csv", pack.str());
    std::ostringstream phase_csv, lines_csv;
    report::CsvWriter pw(phase_csv, {"delta2", "delta3", "phase"});
    for (std::size_t k = 0; k < cls.size(); ++k)
      pw.row(d2s[k / d3s.size()], d3s[k % d3s.size()], amp::to_string(cls[k].phase));
    report::write_line(lines_csv, lines);
    man.write("phase.csv", phase_csv.str());
    man.write("lines.csv", lines_csv.str());

    const auto ordering = theory::threshold_ordering_report(d2s);
    json summary = {{"phase_counts", counts},
                    {"easy_fraction_delta2_below_1",
                     below ? static_cast<double>(easy_below) / below : 0.0},
                    {"easy_points_delta2_above_1", easy_above},
                    {"line_ordering_holds", ordering.all_ordered},
                    {"line_notes", json::array()},
                    {"numeric_marks", marks}};
    for (const auto &l : lines)
      for (const auto &n : l.notes)
        summary["line_notes"].push_back(n);
    std::ostringstream js;
    js << summary.dump(2) << '\n';
    man.write("phase_summary.json", js.str());
    if (!ordering.all_ordered)
      man.warn("threshold-line ordering violated");
    man.finish();
    return ordering.all_ordered ? 0 : 3;
  }
};

//------------------------------------------------------------------------------
// threshold

struct ThresholdCmd {
  double delta2 = 0.5;
  std::string beta = "inf";
  std::vector<std::string> methods = {"analytic", "dmft"};
  std::vector<double> grid;
  std::vector<double> factors = kGridFactors;
  DmftOpts dm;
  std::vector<double> m0_sensitivity;
  bool no_sensitivity = false;
  // finite-n
  std::size_t n = 256;
  std::size_t seeds = 8;
  double dt = 0.01;
  double sim_t_max = 400.0;
  std::uint64_t seed = 1;
  std::uint64_t thermal_seed = 1000;

  void add(CLI::App *c) {
    c->add_option("--delta2", delta2, "matrix-channel noise variance");
    c->add_option("--beta", beta, "inverse temperature or 'inf'");
    c->add_option("--method", methods, "analytic, dmft, finite-n (comma separated)")
        ->delimiter(',')
        ->check(CLI::IsMember({"analytic", "dmft", "finite-n"}));
    c->add_option("--grid", grid, "delta3 grid (default: multiples of the analytic value)")
        ->delimiter(',');
    c->add_option("--grid-factors", factors, "multiples used for the default grid")->delimiter(',');
    dm.add(c);
    c->add_option("--m0-sensitivity", m0_sensitivity,
                  "extra m0 values for the DMFT estimate (default: 10 x m0)")
        ->delimiter(',');
    c->add_flag("--no-sensitivity", no_sensitivity, "skip the m0 sensitivity runs");
    c->add_option("--n", n, "finite-n: system size");
    c->add_option("--seeds", seeds, "finite-n: ensemble members per grid point");
    c->add_option("--dt", dt, "finite-n: time step");
    c->add_option("--sim-t-max", sim_t_max, "finite-n: horizon");
    c->add_option("--seed", seed, "finite-n: instance seed of member 0");
    c->add_option("--thermal-seed", thermal_seed, "finite-n: noise seed of member 0");
  }

  int run(const Global &g) const {
    const double b = parse_beta(beta);
    if (!(delta2 > 0.0))
      throw UsageError("--delta2 must be positive");
    const auto analytic = theory::threshold_delta3_closed(delta2, b);
    const std::vector<double> g3 =
        grid.empty() ? default_grid(delta2, b, factors) : grid;
    Manifest man(g.out, "threshold", g.argv);
    man.parameters() = {{"delta2", delta2}, {"beta", format_beta(b)}, {"methods", methods},
                        {"grid", g3},       {"h", dm.h},              {"t_max", dm.t_max},
                        {"m0", dm.m0},      {"level", dm.level}};
    json rep = {{"delta2", delta2},
                {"beta", format_beta(b)},
                {"analytic", analytic ? json(*analytic) : json(nullptr)},
                {"methods", json::object()}};
    const auto discrepancy = [&](double v) -> json {
      if (!analytic)
        return nullptr;
      return 100.0 * std::abs(v - *analytic) / *analytic;
    };
    const Cache cache(g.cache_dir());
    int status = 0;
    for (const auto &m : methods) {
      if (m == "analytic") {
        rep["methods"]["analytic"] = {{"threshold", analytic ? json(*analytic) : json(nullptr)}};
      } else if (m == "dmft") {
        const auto est = dmft_estimate(cache, delta2, b, g3, dm, g.jobs);
        json j = report::to_json(est);
        j["discrepancy_pct"] = discrepancy(est.threshold);
        j["m0"] = dm.m0;
        std::vector<double> extra = m0_sensitivity;
        if (extra.empty() && !no_sensitivity)
          extra = {10.0 * dm.m0};
        if (no_sensitivity)
          extra.clear();
        json sens = json::array();
        for (double m0 : extra) {
          DmftOpts o = dm;
          o.m0 = m0;
          try {
            const auto e2 = dmft_estimate(cache, delta2, b, g3, o, g.jobs);
            sens.push_back({{"m0", m0}, {"threshold", report::jnum(e2.threshold)},
                            {"discrepancy_pct", discrepancy(e2.threshold)}});
          } catch (const InsufficientDataError &e) {
            sens.push_back({{"m0", m0}, {"threshold", nullptr}, {"error", e.what()}});
          }
        }
        j["m0_sensitivity"] = sens;
        if (est.out_of_range)
          man.warn("dmft: extrapolated threshold outside the sampled grid");
        rep["methods"]["dmft"] = j;
      } else if (m == "finite-n") {
        dynamics::SimConfig sim;
        sim.algo = std::isinf(b) ? dynamics::Algo::gradient_flow : dynamics::Algo::langevin;
        sim.dt = dt;
        sim.t_max = sim_t_max;
        sim.record_stride = std::max<std::size_t>(1, static_cast<std::size_t>(0.1 / dt));
        sim.positive_start = true;
        dynamics::EnsembleSpec ens;
        ens.instance_seed = seed;
        ens.thermal_seed = thermal_seed;
        ens.members = seeds;
        ens.jobs = g.jobs;
        std::vector<threshold::GridPoint> pts;
        for (double d3 : g3) {
          const json key = {{"kind", "finite_n_t_star"}, {"version", SMT_VERSION},
                            {"n", n},           {"delta2", delta2},
                            {"delta3", d3},     {"beta", format_beta(b)},
                            {"dt", dt},         {"t_max", sim_t_max},
                            {"seeds", seeds},   {"seed", seed},
                            {"thermal_seed", thermal_seed}, {"level", dm.level}};
          threshold::GridPoint gp;
          gp.delta3 = d3;
          if (auto v = cache.get(key)) {
            for (const auto &t : *v)
              gp.times.push_back(t.is_null() ? std::nullopt : std::optional<double>(t.get<double>()));
          } else {
            auto s = sim;
            s.stop_at_overlap = dm.level;
            const auto trs = dynamics::run_ensemble(ModelParams{n, delta2, d3, b}, s, ens);
            json arr = json::array();
            for (const auto &t : trs) {
              gp.times.push_back(dynamics::success_time(t, dm.level));
              arr.push_back(gp.times.back() ? json(*gp.times.back()) : json(nullptr));
            }
            cache.put(key, arr);
          }
          gp.median = threshold::censored_median(gp.times);
          pts.push_back(std::move(gp));
        }
        const auto est = threshold::extrapolate(std::move(pts));
        json j = report::to_json(est);
        j["discrepancy_pct"] = discrepancy(est.threshold);
        j["n"] = n;
        j["caveat"] = "finite-size estimate: t* carries O(log N) and 1/sqrt(N) "
                      "corrections; expect a shift relative to the large-N value";
        rep["methods"]["finite-n"] = j;
      }
    }
    rep["cache_hits"] = cache.hits();
    std::ostringstream os;
    os << rep.dump(2) << '\n';
    man.write("threshold.json", os.str());
    man.finish();
    for (const auto &w : man.warnings())
      std::cerr << "warning: " << w << '\n';
    if (!man.warnings().empty())
      status = 3;
    return status;
  }
};

//------------------------------------------------------------------------------

int dispatch(std::vector<std::string> args);

int verify(const Global &g, const std::string &manifest_path) {
  const json m = json::parse(read_file(manifest_path));
  std::vector<std::string> argv = m.at("argv");
  // drop any previous output directory and rerun into a fresh one
  std::vector<std::string> clean;
  for (std::size_t i = 0; i < argv.size(); ++i) {
    if (argv[i] == "--out") {
      ++i;
      continue;
    }
    if (argv[i].rfind("--out=", 0) == 0)
      continue;
    clean.push_back(argv[i]);
  }
  const fs::path dir = fs::path(g.out) / "verify";
  fs::remove_all(dir);
  clean.insert(clean.begin(), {"--out", dir.string()});
  const int rc = dispatch(clean);
  if (rc != 0 && rc != 3)
    return rc;
  std::size_t bad = 0;
  for (const auto &f : m.at("files")) {
    const std::string path = f.at("path");
    const fs::path p = dir / path;
    const std::string now = fs::exists(p) ? sha256(read_file(p)) : std::string("missing");
    const bool same = now == f.at("sha256").get<std::string>();
    bad += !same;
    std::cout << (same ? "same  " : "DIFF  ") << path << '\n';
  }
  std::cout << (bad ? "digests differ" : "all digests identical") << '\n';
  return bad ? 1 : 0;
}

int dispatch(std::vector<std::string> args) {
  CLI::App app{"spiked matrix-tensor model laboratory", "smt"};
  app.set_help_flag("--help", "print help");
  app.set_version_flag("--version", SMT_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<CLI::ConfigINI>());
  app.set_config("--config", "", "key = value file; [sim], [dmft], ... sections per command");

  Global g;
  g.argv = args;
  app.add_option("--out", g.out, std::string("output directory (default $") + kOutEnv + " or smt_out)");
  app.add_option("--jobs", g.jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--no-cache", g.no_cache, "recompute every grid point");

  SimCmd sim;
  DmftCmd dm;
  PhaseCmd ph;
  ThresholdCmd th;
  std::string manifest_path;
  sim.add(app.add_subcommand("sim", "finite-N dynamics or AMP over a seed ensemble"));
  dm.add(app.add_subcommand("dmft", "integrate the large-N two-time equations"));
  ph.add(app.add_subcommand("phase", "phase-diagram data pack"));
  th.add(app.add_subcommand("threshold", "threshold report comparing methods"));
  app.add_subcommand("verify", "rerun a manifest and compare digests")
      ->add_option("manifest", manifest_path, "manifest.json of a previous run")
      ->required();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return 2;
  }

  const auto *cmd = app.get_subcommands().front();
  // record the merged flags + config so a manifest is self-contained
  g.argv.clear();
  g.argv.push_back(cmd->get_name());
  for (const auto *opt : cmd->get_options()) {
    if (opt->get_name() == "--help" || opt->count() == 0 || opt->get_lnames().empty())
      continue;
    const std::string flag = "--" + opt->get_lnames().front();
    const auto res = opt->results();
    if (opt->get_expected_max() == 0) {
      if (opt->as<bool>())
        g.argv.push_back(flag);
      continue;
    }
    if (opt->get_positional() || opt->get_lnames().empty())
      continue;
    std::string joined;
    for (std::size_t i = 0; i < res.size(); ++i)
      joined += (i ? "," : "") + res[i];
    g.argv.push_back(flag);
    g.argv.push_back(joined);
  }
  const std::string name = cmd->get_name();
  if (name == "sim")
    return sim.run(g);
  if (name == "dmft")
    return dm.run(g);
  if (name == "phase")
    return ph.run(g);
  if (name == "threshold")
    return th.run(g);
  return verify(g, manifest_path);
}

int run(std::vector<std::string> args) {
  try {
    return dispatch(std::move(args));
  } catch (const UsageError &e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const ParameterError &e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const InstabilityError &e) {
    std::cerr << "numerical instability: " << e.what() << " (suggested h = "
              << e.suggested_h() << ")\n";
    return 3;
  } catch (const DivergenceError &e) {
    std::cerr << "numerical instability: " << e.what() << '\n';
    return 3;
  } catch (const InsufficientDataError &e) {
    std::cerr << "insufficient data: " << e.what() << '\n';
    return 4;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

} // namespace
} // namespace smt::cli

int main(int argc, char **argv) {
  return smt::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}

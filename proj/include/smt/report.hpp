#pragma once

// CSV and JSON emitters. Column schemas are versioned in FORMAT.md; numbers
// are written in shortest round-trip form so reruns are byte-identical.

#include <charconv>
#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "smt/amp.hpp"
#include "smt/core.hpp"
#include "smt/dmft.hpp"
#include "smt/dynamics.hpp"
#include "smt/theory.hpp"
#include "smt/threshold.hpp"

namespace smt::report {

using json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

//! Shortest decimal that round-trips; "inf"/"-inf"/"nan" otherwise.
inline std::string num(double v) {
  if (std::isnan(v))
    return "nan";
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

//! JSON has no infinities; they are written as the string "inf".
inline json jnum(double v) {
  if (std::isfinite(v))
    return v;
  return num(v);
}

class CsvWriter {
public:
  CsvWriter(std::ostream &os, std::initializer_list<const char *> header)
      : os_(os) {
    bool first = true;
    for (const char *h : header) {
      os_ << (first ? "" : ",") << h;
      first = false;
    }
    os_ << '\n';
  }

  template <class... Ts> void row(const Ts &...cells) {
    bool first = true;
    ((os_ << (first ? "" : ",") << cell(cells), first = false), ...);
    os_ << '\n';
  }

private:
  static std::string cell(double v) { return num(v); }
  static std::string cell(const std::string &s) { return s; }
  static std::string cell(const char *s) { return s; }
  template <class I>
    requires std::is_integral_v<I>
  static std::string cell(I v) { return std::to_string(v); }

  std::ostream &os_;
};

//------------------------------------------------------------------------------
// finite-sim

inline void write_trajectory(std::ostream &os, const dynamics::Trajectory &t) {
  CsvWriter w(os, {"t", "m", "energy_per_spin", "mu"});
  for (std::size_t k = 0; k < t.size(); ++k)
    w.row(t.times[k], t.m[k], t.energy_per_spin[k], t.mu[k]);
}

//! Long format over members; `seeds[k]` labels member k.
inline void write_ensemble(std::ostream &os,
                           const std::vector<dynamics::Trajectory> &ts,
                           const std::vector<std::uint64_t> &seeds) {
  CsvWriter w(os, {"seed", "t", "m", "energy_per_spin", "mu"});
  for (std::size_t s = 0; s < ts.size(); ++s)
    for (std::size_t k = 0; k < ts[s].size(); ++k)
      w.row(seeds.at(s), ts[s].times[k], ts[s].m[k],
            ts[s].energy_per_spin[k], ts[s].mu[k]);
}

//------------------------------------------------------------------------------
// dmft

inline void write_dmft_series(std::ostream &os, const dmft::TwoTimeGrid &g) {
  CsvWriter w(os, {"t", "m", "mu", "C_t0"});
  for (std::size_t i = 0; i < g.size(); ++i)
    w.row(g.time(i), g.m(i), g.mu(i), g.C(i, 0));
}

//! C(t, tw) and R(t, tw) for t >= tw at each waiting time (nearest grid point).
inline void write_dmft_slices(std::ostream &os, const dmft::TwoTimeGrid &g,
                              const std::vector<double> &waits) {
  CsvWriter w(os, {"t", "tw", "C", "R"});
  for (double tw : waits) {
    const auto j = static_cast<std::size_t>(std::llround(tw / g.h()));
    if (j >= g.size())
      continue;
    for (std::size_t i = j; i < g.size(); ++i)
      w.row(g.time(i), g.time(j), g.C(i, j), g.R(i, j));
  }
}

//------------------------------------------------------------------------------
// amp

inline void write_amp_run(std::ostream &os, const amp::AmpRun &r) {
  CsvWriter w(os, {"iter", "m", "residual"});
  for (std::size_t k = 0; k < r.m.size(); ++k)
    w.row(k, r.m[k], r.residual[k]);
}

inline void write_se(std::ostream &os, const amp::SeResult &r) {
  CsvWriter w(os, {"iter", "m"});
  for (std::size_t k = 0; k < r.trajectory.size(); ++k)
    w.row(k, r.trajectory[k]);
}

//------------------------------------------------------------------------------
// theory / phase

inline void write_line(std::ostream &os,
                       const std::vector<theory::ThresholdLine> &lines) {
  CsvWriter w(os, {"delta2", "delta3_c", "beta"});
  for (const auto &l : lines)
    for (const auto &s : l.samples)
      w.row(s.delta2, s.delta3_c, format_beta(l.beta));
}

//------------------------------------------------------------------------------
// thresholds

inline json to_json(const threshold::Estimate &e) {
  json pts = json::array();
  for (const auto &p : e.points) {
    json times = json::array();
    for (const auto &t : p.times)
      times.push_back(t ? json(*t) : json(nullptr));
    pts.push_back({{"delta3", p.delta3},
                   {"median_t_star", jnum(p.median)},
                   {"censored", p.censored()},
                   {"t_star", times}});
  }
  return {
      {"threshold", jnum(e.threshold)},
      {"estimator", e.power.ok ? "power_law" : "linear"},
      {"out_of_range", e.out_of_range},
      {"power_law",
       {{"ok", e.power.ok},
        {"root", jnum(e.power.root)},
        {"exponent", e.power.exponent},
        {"amplitude", e.power.amplitude},
        {"rss_log", e.power.rss}}},
      {"linear",
       {{"root", jnum(e.linear.root)},
        {"slope", e.linear.slope},
        {"intercept", e.linear.intercept},
        {"delta3_window", e.linear.delta3},
        {"residuals", e.linear.residuals}}},
      {"points", pts},
      {"notes", e.notes},
  };
}

inline json to_json(const ModelParams &p) {
  return {{"n", p.n},
          {"delta2", p.delta2},
          {"delta3", p.delta3},
          {"beta", format_beta(p.beta)}};
}

} // namespace smt::report

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

namespace smt {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

//==============================================================================
// Errors. Each kind maps onto one CLI exit status (see tools/smt.cpp).

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

//! Parameter outside its admissible domain (non-positive variance, n < 3...).
class ParameterError : public Error {
public:
  using Error::Error;
};

//! Vector / instance dimensions do not agree.
class ShapeError : public Error {
public:
  using Error::Error;
};

//! Non-finite state during time stepping or iteration.
class DivergenceError : public Error {
public:
  DivergenceError(const std::string &what, long step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  long step() const { return step_; }

private:
  long step_;
};

//! Integrator constraint drift beyond tolerance; carries a suggested step.
class InstabilityError : public Error {
public:
  InstabilityError(const std::string &what, double suggested_h)
      : Error(what), suggested_h_(suggested_h) {}
  double suggested_h() const { return suggested_h_; }

private:
  double suggested_h_;
};

//! Threshold extrapolation without enough uncensored points.
class InsufficientDataError : public Error {
public:
  using Error::Error;
};

//! Square root of a negative number in a closed-form expression.
class DomainError : public Error {
public:
  using Error::Error;
};

//==============================================================================

//! Problem definition shared by every module. beta may be +infinity
//! (gradient flow / maximum likelihood).
struct ModelParams {
  std::size_t n = 64;
  double delta2 = 1.0;
  double delta3 = 1.0;
  double beta = 1.0;

  double temperature() const { return 1.0 / beta; } // 0 at beta = inf
  bool zero_temperature() const { return std::isinf(beta); }

  void validate() const {
    std::ostringstream os;
    if (n < 3)
      os << "n must be >= 3 (got " << n << ")";
    else if (!(delta2 > 0.0) || std::isnan(delta2))
      os << "delta2 must be > 0 (got " << delta2 << ")";
    else if (!(delta3 > 0.0) || std::isnan(delta3))
      os << "delta3 must be > 0 (got " << delta3 << ")";
    else if (!(beta > 0.0) || std::isnan(beta))
      os << "beta must be > 0 or inf (got " << beta << ")";
    if (!os.str().empty())
      throw ParameterError(os.str());
  }
};

inline std::string format_beta(double beta) {
  if (std::isinf(beta))
    return "inf";
  std::ostringstream os;
  os << beta;
  return os.str();
}

//! Parses a positive real or one of "inf", "infinity".
inline double parse_beta(const std::string &s) {
  if (s == "inf" || s == "infinity" || s == "Inf")
    return kInf;
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception &) {
    throw ParameterError("cannot parse beta '" + s + "'");
  }
  if (pos != s.size())
    throw ParameterError("cannot parse beta '" + s + "'");
  return v;
}

} // namespace smt

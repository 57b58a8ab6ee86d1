#pragma once

// Spiked matrix-tensor model: instance generation, Hamiltonian, gradient and
// overlap.
//
//   Y_ij  = x*_i x*_j / sqrt(N)          + xi_ij,   xi_ij  ~ N(0, delta2), i<j
//   T_ijk = sqrt(2) x*_i x*_j x*_k / N   + xi_ijk,  xi_ijk ~ N(0, delta3), i<j<k
//
//   H(x)  = -1/(delta2 sqrt(N)) sum_{i<j} Y_ij x_i x_j
//           - sqrt(2)/(delta3 N) sum_{i<j<k} T_ijk x_i x_j x_k
//
// Only strictly ordered entries are stored. The tensor can also be kept
// implicit: its rows are then regenerated from the seed on every contraction,
// which trades time for O(N^2) memory at large N. Both modes produce the same
// numbers because every row has its own random substream.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "smt/core.hpp"
#include "smt/rng.hpp"

namespace smt {

using Vector = std::vector<double>;

enum class TensorStorage : std::uint32_t { stored = 0, implicit = 1 };

struct GeneratorOptions {
  bool spike = true; // false: pure-noise observations (same noise draws)
  bool noise = true; // false: noiseless observations (same signal)
  TensorStorage storage = TensorStorage::stored;
};

inline std::size_t num_pairs(std::size_t n) { return n * (n - 1) / 2; }
inline std::size_t num_triples(std::size_t n) {
  return n * (n - 1) * (n - 2) / 6;
}

//! Offset of Y_ij (i<j) in the packed upper triangle, row-major.
inline std::size_t pair_index(std::size_t n, std::size_t i, std::size_t j) {
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}

class Instance {
public:
  ModelParams params;
  std::uint64_t seed = 0;
  GeneratorOptions options;
  Vector signal; // x*, |x*|^2 = N
  Vector y;      // Y_ij, i<j, row-major
  Vector t3;     // T_ijk, i<j<k, lexicographic; empty when implicit

  std::size_t n() const { return params.n; }
  bool tensor_stored() const { return options.storage == TensorStorage::stored; }

  //! Start of the (i,j) row {T_ijk : k > j} inside t3; indexed by pair_index.
  std::size_t tensor_row_offset(std::size_t pair) const {
    return row_offsets_[pair];
  }

  double matrix_entry(std::size_t i, std::size_t j) const {
    if (i == j)
      return 0.0;
    if (i > j)
      std::swap(i, j);
    return y[pair_index(n(), i, j)];
  }

  //! Fills `out` (length n-1-j) with T_ijk for k = j+1..n-1.
  void tensor_row(std::size_t i, std::size_t j, std::span<double> out) const {
    const std::size_t p = pair_index(n(), i, j);
    if (tensor_stored()) {
      const double *src = t3.data() + row_offsets_[p];
      std::copy(src, src + out.size(), out.begin());
      return;
    }
    generate_tensor_row(i, j, p, out);
  }

  //! Calls f(i, j, row) for every pair i<j, row[k-j-1] = T_ijk.
  template <class F> void for_each_tensor_row(F &&f) const {
    const std::size_t N = n();
    if (tensor_stored()) {
      for (std::size_t i = 0; i + 2 < N; ++i)
        for (std::size_t j = i + 1; j + 1 < N; ++j) {
          const std::size_t off = row_offsets_[pair_index(N, i, j)];
          f(i, j, std::span<const double>(t3.data() + off, N - 1 - j));
        }
      return;
    }
    Vector buf(N);
    for (std::size_t i = 0; i + 2 < N; ++i)
      for (std::size_t j = i + 1; j + 1 < N; ++j) {
        const std::size_t len = N - 1 - j;
        std::span<double> row(buf.data(), len);
        generate_tensor_row(i, j, pair_index(N, i, j), row);
        f(i, j, std::span<const double>(row));
      }
  }

  void build_offsets() {
    const std::size_t N = n();
    row_offsets_.assign(num_pairs(N), 0);
    std::size_t off = 0;
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = i + 1; j < N; ++j) {
        row_offsets_[pair_index(N, i, j)] = off;
        off += N - 1 - j;
      }
  }

  void generate_tensor_row(std::size_t i, std::size_t j, std::size_t pair,
                           std::span<double> out) const {
    const std::size_t N = n();
    if (options.noise) {
      rng::GaussianStream g(seed, rng::Tag::tensor_row, pair);
      g.fill(out.begin(), out.end(), std::sqrt(params.delta3));
    } else {
      std::fill(out.begin(), out.end(), 0.0);
    }
    if (options.spike) {
      const double c = std::sqrt(2.0) * signal[i] * signal[j] /
                       static_cast<double>(N);
      for (std::size_t k = j + 1; k < N; ++k)
        out[k - j - 1] += c * signal[k];
    }
  }

private:
  std::vector<std::size_t> row_offsets_;
};

inline Instance generate_instance(const ModelParams &params,
                                  std::uint64_t seed,
                                  const GeneratorOptions &opt = {}) {
  params.validate();
  Instance inst;
  inst.params = params;
  inst.seed = seed;
  inst.options = opt;
  const std::size_t N = params.n;
  const double sqrtN = std::sqrt(static_cast<double>(N));

  inst.signal.resize(N);
  rng::GaussianStream gs(seed, rng::Tag::signal);
  gs.fill(inst.signal.begin(), inst.signal.end());
  const double norm = std::sqrt(std::inner_product(
      inst.signal.begin(), inst.signal.end(), inst.signal.begin(), 0.0));
  for (auto &v : inst.signal)
    v *= sqrtN / norm;

  inst.y.assign(num_pairs(N), 0.0);
  const double sd2 = std::sqrt(params.delta2);
  for (std::size_t i = 0; i + 1 < N; ++i) {
    double *row = inst.y.data() + pair_index(N, i, i + 1);
    const std::size_t len = N - 1 - i;
    if (opt.noise) {
      rng::GaussianStream g(seed, rng::Tag::matrix_row, i);
      g.fill(row, row + len, sd2);
    }
    if (opt.spike)
      for (std::size_t j = i + 1; j < N; ++j)
        row[j - i - 1] += inst.signal[i] * inst.signal[j] / sqrtN;
  }

  inst.build_offsets();
  if (opt.storage == TensorStorage::stored) {
    inst.t3.assign(num_triples(N), 0.0);
    for (std::size_t i = 0; i + 2 < N; ++i)
      for (std::size_t j = i + 1; j + 1 < N; ++j) {
        const std::size_t p = pair_index(N, i, j);
        std::span<double> row(inst.t3.data() + inst.tensor_row_offset(p),
                              N - 1 - j);
        inst.generate_tensor_row(i, j, p, row);
      }
  }
  return inst;
}

//==============================================================================
// Observables

inline void check_length(const Instance &inst, std::span<const double> x) {
  if (x.size() != inst.n())
    throw ShapeError("configuration has length " + std::to_string(x.size()) +
                     ", instance has n = " + std::to_string(inst.n()));
}

//! The two contributions to H; total() is the Hamiltonian.
struct EnergyTerms {
  double matrix = 0.0;
  double tensor = 0.0;
  double total() const { return matrix + tensor; }
};

inline double matrix_coupling(const ModelParams &p) {
  return 1.0 / (p.delta2 * std::sqrt(static_cast<double>(p.n)));
}
inline double tensor_coupling(const ModelParams &p) {
  return std::sqrt(2.0) / (p.delta3 * static_cast<double>(p.n));
}

//! H split into matrix and tensor parts, by direct triangle sums.
inline EnergyTerms energy_terms(const Instance &inst,
                                std::span<const double> x) {
  check_length(inst, x);
  const std::size_t N = inst.n();
  double s2 = 0.0;
  for (std::size_t i = 0; i + 1 < N; ++i) {
    const double *row = inst.y.data() + pair_index(N, i, i + 1);
    double acc = 0.0;
    for (std::size_t j = i + 1; j < N; ++j)
      acc += row[j - i - 1] * x[j];
    s2 += x[i] * acc;
  }
  double s3 = 0.0;
  inst.for_each_tensor_row(
      [&](std::size_t i, std::size_t j, std::span<const double> row) {
        double acc = 0.0;
        for (std::size_t k = 0; k < row.size(); ++k)
          acc += row[k] * x[j + 1 + k];
        s3 += x[i] * x[j] * acc;
      });
  return {-matrix_coupling(inst.params) * s2,
          -tensor_coupling(inst.params) * s3};
}

inline double hamiltonian(const Instance &inst, std::span<const double> x) {
  return energy_terms(inst, x).total();
}

//! Local fields of the two channels:
//!   matrix_i = sum_{j != i} Y_ij x_j
//!   tensor_i = sum_{j<k; j,k != i} T_ijk x_j x_k
struct Fields {
  Vector matrix;
  Vector tensor;
};

inline Fields local_fields(const Instance &inst, std::span<const double> x) {
  check_length(inst, x);
  const std::size_t N = inst.n();
  Fields f{Vector(N, 0.0), Vector(N, 0.0)};
  for (std::size_t i = 0; i + 1 < N; ++i) {
    const double *row = inst.y.data() + pair_index(N, i, i + 1);
    double acc = 0.0;
    for (std::size_t j = i + 1; j < N; ++j) {
      acc += row[j - i - 1] * x[j];
      f.matrix[j] += row[j - i - 1] * x[i];
    }
    f.matrix[i] += acc;
  }
  double *ft = f.tensor.data();
  inst.for_each_tensor_row(
      [&](std::size_t i, std::size_t j, std::span<const double> row) {
        const double a = x[i] * x[j];
        const double *xk = x.data() + j + 1;
        double *gk = ft + j + 1;
        double s = 0.0;
        for (std::size_t k = 0; k < row.size(); ++k) {
          s += row[k] * xk[k];
          gk[k] += a * row[k];
        }
        ft[i] += x[j] * s;
        ft[j] += x[i] * s;
      });
  return f;
}

//! dH/dx_i.
inline Vector gradient(const Instance &inst, std::span<const double> x) {
  Fields f = local_fields(inst, x);
  const double c2 = matrix_coupling(inst.params);
  const double c3 = tensor_coupling(inst.params);
  Vector g(inst.n());
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = -c2 * f.matrix[i] - c3 * f.tensor[i];
  return g;
}

//! H and its gradient from one contraction pass (Euler: x.f2 = 2 S2, x.f3 = 3 S3).
inline EnergyTerms energy_and_gradient(const Instance &inst,
                                       std::span<const double> x,
                                       std::span<double> grad) {
  Fields f = local_fields(inst, x);
  const double c2 = matrix_coupling(inst.params);
  const double c3 = tensor_coupling(inst.params);
  double d2 = 0.0, d3 = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    grad[i] = -c2 * f.matrix[i] - c3 * f.tensor[i];
    d2 += x[i] * f.matrix[i];
    d3 += x[i] * f.tensor[i];
  }
  return {-c2 * d2 / 2.0, -c3 * d3 / 3.0};
}

inline double overlap(std::span<const double> x, std::span<const double> ref) {
  if (x.size() != ref.size())
    throw ShapeError("overlap: length mismatch");
  return std::inner_product(x.begin(), x.end(), ref.begin(), 0.0) /
         static_cast<double>(x.size());
}

inline double overlap(std::span<const double> x, const Instance &inst) {
  check_length(inst, x);
  return overlap(x, std::span<const double>(inst.signal));
}

inline double squared_norm(std::span<const double> x) {
  return std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
}

//! Rescales x onto the sphere |x|^2 = N.
inline void project_to_sphere(std::span<double> x) {
  const double s =
      std::sqrt(static_cast<double>(x.size()) / squared_norm(x));
  for (auto &v : x)
    v *= s;
}

//! Uniform point on the sphere of radius sqrt(n).
inline Vector random_on_sphere(std::size_t n, std::uint64_t seed,
                               rng::Tag tag = rng::Tag::init) {
  Vector x(n);
  rng::GaussianStream g(seed, tag);
  g.fill(x.begin(), x.end());
  project_to_sphere(x);
  return x;
}

} // namespace smt

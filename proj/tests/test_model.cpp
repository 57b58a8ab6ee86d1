#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "smt/model.hpp"

using namespace smt;

namespace {

ModelParams params(std::size_t n, double d2 = 0.7, double d3 = 1.5) {
  return ModelParams{n, d2, d3, 1.0};
}

Vector random_config(std::size_t n, std::uint64_t seed) {
  return random_on_sphere(n, seed, rng::Tag::init);
}

double rel(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

} // namespace

TEST(Params, RejectsOutOfDomain) {
  EXPECT_THROW(generate_instance(params(16, 0.0), 1), ParameterError);
  EXPECT_THROW(generate_instance(params(16, 0.7, -1.0), 1), ParameterError);
  EXPECT_THROW(generate_instance(params(2), 1), ParameterError);
  ModelParams p = params(16);
  p.beta = 0.0;
  EXPECT_THROW(p.validate(), ParameterError);
  p.beta = kInf;
  EXPECT_NO_THROW(p.validate());
}

TEST(Instance, SignalOnSphere) {
  const Instance inst = generate_instance(params(64), 3);
  EXPECT_NEAR(squared_norm(inst.signal) / 64.0, 1.0, 1e-12);
}

TEST(Instance, BitIdenticalForSameSeed) {
  const Instance a = generate_instance(params(64), 1);
  const Instance b = generate_instance(params(64), 1);
  EXPECT_EQ(a.signal, b.signal);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.t3, b.t3);
  const Instance c = generate_instance(params(64), 2);
  EXPECT_NE(a.y, c.y);
}

TEST(Instance, ImplicitTensorMatchesStored) {
  const Instance a = generate_instance(params(24), 5);
  GeneratorOptions opt;
  opt.storage = TensorStorage::implicit;
  const Instance b = generate_instance(params(24), 5, opt);
  EXPECT_TRUE(b.t3.empty());
  const Vector x = random_config(24, 9);
  EXPECT_EQ(hamiltonian(a, x), hamiltonian(b, x));
  EXPECT_EQ(gradient(a, x), gradient(b, x));
}

TEST(Instance, MatrixNoiseVarianceMonteCarlo) {
  // (1/N) sum_{i<j} (Y_ij - x*_i x*_j / sqrt N)^2 has mean delta2 (N-1)/2
  const std::size_t n = 64;
  const double d2 = 0.7;
  const int seeds = 200;
  std::vector<double> vals;
  for (int s = 0; s < seeds; ++s) {
    GeneratorOptions opt;
    opt.storage = TensorStorage::implicit;
    const Instance inst = generate_instance(params(n, d2), 1000 + s, opt);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double noise = inst.y[pair_index(n, i, j)] -
                             inst.signal[i] * inst.signal[j] / std::sqrt(static_cast<double>(n));
        acc += noise * noise;
      }
    vals.push_back(acc / static_cast<double>(n));
  }
  const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / seeds;
  double var = 0.0;
  for (double v : vals)
    var += (v - mean) * (v - mean);
  var /= seeds - 1;
  const double se = std::sqrt(var / seeds);
  const double expected = d2 * (n - 1) / 2.0;
  EXPECT_LE(std::abs(mean - expected), 3.0 * se)
      << "mean " << mean << " expected " << expected << " se " << se;
}

TEST(Hamiltonian, ZeroObservationsGiveZero) {
  GeneratorOptions opt;
  opt.spike = false;
  opt.noise = false;
  const Instance inst = generate_instance(params(20), 1, opt);
  const Vector x = random_config(20, 2);
  EXPECT_EQ(hamiltonian(inst, x), 0.0);
  const Vector g = gradient(inst, x);
  EXPECT_TRUE(std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; }));
}

TEST(Hamiltonian, NoiselessGroundTruthEnergy) {
  const std::size_t n = 128;
  const double d2 = 0.7, d3 = 1.5;
  GeneratorOptions opt;
  opt.noise = false;
  const Instance inst = generate_instance(params(n, d2, d3), 4, opt);
  const double h = hamiltonian(inst, inst.signal) / static_cast<double>(n);
  EXPECT_LE(std::abs(h - (-1.0 / (2 * d2) - 1.0 / (3 * d3))), 5.0 / n);
}

TEST(Hamiltonian, TriangleSumsMatchFullSymmetricSums) {
  const Instance inst = generate_instance(params(18), 11);
  for (std::uint64_t s = 0; s < 3; ++s) {
    const Vector x = random_config(18, 100 + s);
    const EnergyTerms direct = energy_terms(inst, x);
    const EnergyTerms full = smt::testing::full_sum_energy(inst, x);
    EXPECT_LE(rel(direct.matrix, full.matrix), 1e-9);
    EXPECT_LE(rel(direct.tensor, full.tensor), 1e-9);
  }
}

TEST(Hamiltonian, NoisePlusDeterministicDecomposition) {
  // H(x) on the full instance = H on the pure-noise instance with the same
  // draws + the spike part computed independently from power sums
  const ModelParams p = params(40);
  const Instance full = generate_instance(p, 21);
  GeneratorOptions noise_only;
  noise_only.spike = false;
  const Instance noise = generate_instance(p, 21, noise_only);
  ASSERT_EQ(full.signal, noise.signal);
  for (std::uint64_t s = 0; s < 3; ++s) {
    Vector x = random_config(40, 300 + s);
    // tilt toward the signal so the spike part is not negligible
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] += 0.8 * full.signal[i];
    project_to_sphere(x);
    const double lhs = hamiltonian(full, x);
    const double rhs = hamiltonian(noise, x) + smt::testing::deterministic_energy(full, x);
    EXPECT_LE(rel(lhs, rhs), 1e-9);
  }
}

TEST(Gradient, MatchesCentralDifferences) {
  const std::size_t n = 32;
  const Instance inst = generate_instance(params(n), 7);
  Vector x = random_config(n, 8);
  const Vector g = gradient(inst, x);
  const double eps = 1e-5;
  for (std::size_t i = 0; i < n; ++i) {
    Vector xp = x, xm = x;
    xp[i] += eps;
    xm[i] -= eps;
    const double fd = (hamiltonian(inst, xp) - hamiltonian(inst, xm)) / (2 * eps);
    EXPECT_LE(std::abs(g[i] - fd), 1e-5) << "component " << i;
  }
}

TEST(Gradient, EulerHomogeneity) {
  // x . grad H = 2 H_matrix + 3 H_tensor (degrees 2 and 3)
  const Instance inst = generate_instance(params(30), 13);
  const Vector x = random_config(30, 14);
  const Vector g = gradient(inst, x);
  const EnergyTerms e = energy_terms(inst, x);
  const double lhs = std::inner_product(x.begin(), x.end(), g.begin(), 0.0);
  EXPECT_LE(rel(lhs, 2.0 * e.matrix + 3.0 * e.tensor), 1e-9);
}

TEST(Gradient, CombinedPassAgreesWithSeparateCalls) {
  const Instance inst = generate_instance(params(25), 17);
  const Vector x = random_config(25, 18);
  Vector g(25);
  const EnergyTerms e = energy_and_gradient(inst, x, g);
  EXPECT_LE(rel(e.total(), hamiltonian(inst, x)), 1e-12);
  const Vector g2 = gradient(inst, x);
  for (std::size_t i = 0; i < g.size(); ++i)
    EXPECT_DOUBLE_EQ(g[i], g2[i]);
}

TEST(Symmetry, PermutationInvariance) {
  const std::size_t n = 16;
  const Instance inst = generate_instance(params(n), 23);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937 gen(5);
  std::shuffle(perm.begin(), perm.end(), gen);
  const Instance pinst = smt::testing::permuted(inst, perm);
  const Vector x = random_config(n, 24);
  Vector px(n);
  for (std::size_t a = 0; a < n; ++a)
    px[a] = x[perm[a]];
  EXPECT_LE(rel(hamiltonian(inst, x), hamiltonian(pinst, px)), 1e-9);
  EXPECT_NEAR(overlap(x, inst), overlap(px, pinst), 1e-12);
  const Vector g = gradient(inst, x);
  const Vector pg = gradient(pinst, px);
  for (std::size_t a = 0; a < n; ++a)
    EXPECT_NEAR(pg[a], g[perm[a]], 1e-9 * (1.0 + std::abs(g[perm[a]])));
}

TEST(Overlap, ExtremesAndOrthogonal) {
  const Instance inst = generate_instance(params(50), 31);
  EXPECT_NEAR(overlap(inst.signal, inst), 1.0, 1e-12);
  Vector neg = inst.signal;
  for (auto &v : neg)
    v = -v;
  EXPECT_NEAR(overlap(neg, inst), -1.0, 1e-12);
  Vector orth = random_config(50, 32);
  const double c = overlap(orth, inst);
  for (std::size_t i = 0; i < orth.size(); ++i)
    orth[i] -= c * inst.signal[i];
  project_to_sphere(orth);
  EXPECT_NEAR(overlap(orth, inst), 0.0, 1e-12);
}

TEST(Overlap, ShapeMismatchThrows) {
  const Instance inst = generate_instance(params(10), 1);
  Vector x(9, 1.0);
  EXPECT_THROW(overlap(x, inst), ShapeError);
  EXPECT_THROW(hamiltonian(inst, x), ShapeError);
}

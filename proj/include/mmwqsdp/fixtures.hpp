#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"
#include "gibbs_spec.hpp"
#include "instance.hpp"
#include "learn.hpp"
#include "orsim.hpp"
#include "rng.hpp"

// Deterministic random instances. Every generator takes a seed and nothing
// else random, so equal arguments give bit-identical output.
namespace mmwqsdp::fixtures {

inline Vector random_unit_vector(Eigen::Index n, Rng& rng) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = Complex(rng.normal(), rng.normal());
  return v / v.norm();
}

// GUE sample (G + G^dag) / 2.
inline HermitianMatrix random_hermitian(Eigen::Index n, Rng& rng) {
  Matrix g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = Complex(rng.normal(), rng.normal());
  return HermitianMatrix(Matrix((g + g.adjoint()) / 2.0));
}

// Random Hermitian with spectral norm drawn from [0.5, 1].
inline HermitianMatrix random_contraction(Eigen::Index n, Rng& rng) {
  const HermitianMatrix h = random_hermitian(n, rng);
  const Spectrum s = eigh(h);
  const double norm = std::max(std::abs(s.eigenvalues(0)), std::abs(s.eigenvalues(n - 1)));
  const double target = rng.uniform(0.5, 1.0);
  return HermitianMatrix::trusted(h.matrix() * (norm > 0.0 ? target / norm : 0.0));
}

// G G^dag / tr for a complex Gaussian n x rank matrix G.
inline DensityMatrix random_density(Eigen::Index n, Eigen::Index rank, Rng& rng) {
  Matrix g(n, rank);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < rank; ++j) g(i, j) = Complex(rng.normal(), rng.normal());
  const Matrix p = g * g.adjoint();
  return DensityMatrix::trusted(p / p.trace().real());
}

inline void check_range(const char* what, long v, long lo, long hi) {
  if (v < lo || v > hi)
    throw UsageError(std::string(what) + " = " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " +
                     std::to_string(hi) + "]");
}

inline constexpr long kMaxDim = 128;
inline constexpr long kMaxConstraints = 4096;

// Every A_j = |i*><i*|; a_{j*} = -1/2 and all other a_j = 1/2. Infeasible for
// eps < 1/2 since tr(A_{j*} X) >= 0 for every density matrix.
inline SdpInstance lower_bound(Eigen::Index n, std::size_t m, double eps, std::uint64_t seed,
                               std::optional<Eigen::Index> i_star = std::nullopt,
                               std::optional<std::size_t> j_star = std::nullopt) {
  check_range("n", n, 1, kMaxDim);
  check_range("m", static_cast<long>(m), 1, kMaxConstraints);
  Rng rng(seed);
  const Eigen::Index i = i_star.value_or(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  const std::size_t j = j_star.value_or(static_cast<std::size_t>(rng.below(m)));
  if (i < 0 || i >= n || j >= m) throw UsageError("lower_bound: i* or j* out of range");
  Vector e = Vector::Zero(n);
  e(i) = 1.0;
  const HermitianMatrix a = HermitianMatrix::outer(e);
  std::vector<Constraint> cons;
  for (std::size_t k = 0; k < m; ++k) cons.push_back({a, k == j ? -0.5 : 0.5});
  InstanceMeta meta;
  meta.trace_bound = 1.0;
  meta.rank = 1;
  meta.sparsity = 1;
  meta.seed = seed;
  return SdpInstance(std::move(cons), eps, meta);
}

struct Planted {
  SdpInstance instance;
  DensityMatrix x0;
};

// Random contractions A_j and a_j = tr(A_j X0) + margin for a random full
// rank X0, so X0 satisfies every constraint with slack margin.
inline Planted planted_feasible(Eigen::Index n, std::size_t m, double eps, double margin, std::uint64_t seed) {
  check_range("n", n, 1, kMaxDim);
  check_range("m", static_cast<long>(m), 1, kMaxConstraints);
  if (!(margin >= 0.0)) throw UsageError("planted_feasible: margin must be >= 0");
  Rng rng(seed);
  const DensityMatrix x0 = random_density(n, n, rng);
  std::vector<Constraint> cons;
  double widest = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    HermitianMatrix a = random_contraction(n, rng);
    widest = std::max(widest, eigh(a).eigenvalues.cwiseAbs().sum());
    const double b = trace_inner(a, x0) + margin;
    cons.push_back({std::move(a), b});
  }
  InstanceMeta meta;
  meta.trace_bound = widest;
  meta.rank = static_cast<int>(n);
  meta.sparsity = static_cast<int>(n);
  meta.seed = seed;
  return {SdpInstance(std::move(cons), eps, meta), x0};
}

// Lambda_i = |i><i| for i < m on C^(m+1), input |k-1><k-1| with k in 1..m+1.
inline OrInstance grover_or(std::size_t m, std::size_t k, double eps, double phi, double xi) {
  check_range("m", static_cast<long>(m), 1, 4095);
  check_range("k", static_cast<long>(k), 1, static_cast<long>(m) + 1);
  const auto d = static_cast<Eigen::Index>(m + 1);
  if (static_cast<std::size_t>(d) * next_pow2(m) > kDefaultSimulatorCap)
    throw UsageError("grover_or: simulated dimension exceeds " + std::to_string(kDefaultSimulatorCap));
  std::vector<HermitianMatrix> proj;
  for (std::size_t i = 0; i < m; ++i) {
    Vector e = Vector::Zero(d);
    e(static_cast<Eigen::Index>(i)) = 1.0;
    proj.push_back(HermitianMatrix::outer(e));
  }
  return OrInstance(std::move(proj), DensityMatrix::basis(d, static_cast<Eigen::Index>(k - 1)), eps, phi, xi);
}

// K+ and K- each a sum of random pure states with random weights; the total
// trace is B, split between the signs uniformly in [0.3, 0.7].
inline GibbsSpec low_rank_gibbs(Eigen::Index n, int r_plus, int r_minus, double bound_b, std::uint64_t seed) {
  check_range("n", n, 1, kMaxDim);
  check_range("r+", r_plus, 0, static_cast<long>(n));
  check_range("r-", r_minus, 0, static_cast<long>(n));
  if (!(bound_b >= 0.0)) throw UsageError("low_rank_gibbs: B must be >= 0");
  Rng rng(seed);
  const double share = (r_plus == 0) ? 0.0 : (r_minus == 0 ? 1.0 : rng.uniform(0.3, 0.7));
  auto side = [&](int r, double total) {
    std::vector<GibbsTerm> terms;
    std::vector<double> w(r);
    double sum = 0.0;
    for (int t = 0; t < r; ++t) sum += (w[t] = -std::log(1.0 - rng.uniform()) + 0.25);
    for (int t = 0; t < r; ++t)
      terms.push_back(GibbsTerm{1.0, DensityMatrix::pure(random_unit_vector(n, rng)), total * w[t] / sum});
    return terms;
  };
  auto plus = side(r_plus, bound_b * share);
  auto minus = side(r_minus, bound_b * (1.0 - share));
  return GibbsSpec(n, std::move(plus), std::move(minus), bound_b, std::max(r_plus, r_minus));
}

// E_i = V_i |0><0| V_i^dag for Haar random V_i, i.e. random rank-1 projectors.
inline MeasurementSet rank1_measurements(Eigen::Index n, std::size_t m, std::uint64_t seed) {
  check_range("n", n, 1, kMaxDim);
  check_range("m", static_cast<long>(m), 1, kMaxConstraints);
  Rng rng(seed);
  std::vector<HermitianMatrix> ops;
  for (std::size_t i = 0; i < m; ++i) ops.push_back(HermitianMatrix::outer(random_unit_vector(n, rng)));
  return MeasurementSet(std::move(ops), 1);
}

}  // namespace mmwqsdp::fixtures

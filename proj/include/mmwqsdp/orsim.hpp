#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

#include "core.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace mmwqsdp {

inline constexpr std::size_t kDefaultSimulatorCap = 4096;

// Projectors Lambda_1..Lambda_m on C^d with an input state and the
// parameters (eps, phi, xi) of the fast OR test.
class OrInstance {
 public:
  OrInstance(std::vector<HermitianMatrix> projectors, DensityMatrix input, double eps, double phi, double xi)
      : projectors_(std::move(projectors)), input_(std::move(input)), eps_(eps), phi_(phi), xi_(xi) {
    if (projectors_.empty()) throw ContractViolation("OrInstance: need at least one projector");
    if (!(eps_ > 0.0 && eps_ <= 0.5)) throw ContractViolation("OrInstance: eps must lie in (0, 1/2]");
    if (!(phi_ >= 0.0)) throw ContractViolation("OrInstance: phi must be >= 0");
    if (!(xi_ > 0.0)) throw ContractViolation("OrInstance: xi must be > 0");
    const auto d = input_.dim();
    for (std::size_t i = 0; i < projectors_.size(); ++i) {
      const Matrix& p = projectors_[i].matrix();
      if (p.rows() != d)
        throw ContractViolation("OrInstance: projector " + std::to_string(i) + " has dimension " +
                                std::to_string(p.rows()) + ", input has " + std::to_string(d));
      const double err = (p * p - p).cwiseAbs().maxCoeff();
      if (err > 1e-9) throw ContractViolation("OrInstance: projector " + std::to_string(i) + " is not idempotent");
    }
  }

  std::size_t m() const noexcept { return projectors_.size(); }
  Eigen::Index dim() const noexcept { return input_.dim(); }
  const std::vector<HermitianMatrix>& projectors() const noexcept { return projectors_; }
  const DensityMatrix& input() const noexcept { return input_; }
  double eps() const noexcept { return eps_; }
  double phi() const noexcept { return phi_; }
  double xi() const noexcept { return xi_; }

  // Lower acceptance bound when some tr(Lambda_i rho) >= 1 - eps.
  double case1_bound() const noexcept { return (1.0 - eps_) * (1.0 - eps_) / 4.0 - xi_; }
  // Upper acceptance bound when the average of tr(Lambda_i rho) <= phi.
  double case2_bound() const noexcept { return 3.0 * phi_ * static_cast<double>(m()) + xi_; }
  bool gap_condition() const noexcept { return case1_bound() > case2_bound(); }

  std::vector<double> acceptances() const {
    std::vector<double> out;
    for (const auto& p : projectors_) out.push_back(trace_inner(p, input_));
    return out;
  }

  OrInstance with_input(DensityMatrix rho) const { return OrInstance(projectors_, std::move(rho), eps_, phi_, xi_); }

 private:
  std::vector<HermitianMatrix> projectors_;
  DensityMatrix input_;
  double eps_, phi_, xi_;
};

inline std::size_t next_pow2(std::size_t m) {
  std::size_t p = 1;
  while (p < m) p <<= 1;
  return p;
}

struct GroverSpec {
  double lambda_thresh = 0.0;
  double angle_a = 0.0;
  double angle_b = 0.0;
  double precision = 0.0;
  std::size_t ancilla_dim = 1;

  static GroverSpec make(std::size_t m, double eps) {
    GroverSpec g;
    g.lambda_thresh = (1.0 - eps) / (2.0 * static_cast<double>(m));
    g.angle_a = std::acos(std::sqrt(g.lambda_thresh));
    g.angle_b = std::acos(std::sqrt(0.8 * g.lambda_thresh));
    g.precision = (g.angle_b - g.angle_a) / 2.0;
    g.ancilla_dim = next_pow2(m);
    return g;
  }
  static GroverSpec make(const OrInstance& inst) { return make(inst.m(), inst.eps()); }

  double accept_angle() const noexcept { return (angle_a + angle_b) / 2.0; }
};

struct GroverIterate {
  Matrix pi;
  Matrix delta;
  Matrix g;
  Eigen::Index system_dim = 0;
  Eigen::Index ancilla_dim = 0;
};

// Fourier transform on Z_m in the first m levels of a register of size anc.
inline Matrix padded_fourier(std::size_t m, std::size_t anc) {
  Matrix q = Matrix::Identity(anc, anc);
  const double norm = 1.0 / std::sqrt(static_cast<double>(m));
  for (std::size_t x = 0; x < m; ++x)
    for (std::size_t y = 0; y < m; ++y)
      q(x, y) = std::polar(norm, 2.0 * std::numbers::pi * static_cast<double>(x * y % m) / static_cast<double>(m));
  return q;
}

// Pi = sum_i Lambda_{i+1} (x) Q|i><i|Q^dag, Delta = I (x) |0><0|,
// G = (I - 2 Pi)(I - 2 Delta). Index of |s>|a> is s * anc + a.
inline GroverIterate build_iterate(const OrInstance& inst, std::size_t cap = kDefaultSimulatorCap) {
  const std::size_t m = inst.m();
  const std::size_t anc = next_pow2(m);
  const auto d = static_cast<std::size_t>(inst.dim());
  const std::size_t total = d * anc;
  if (total > cap)
    throw ResourceError("build_iterate: simulated dimension " + std::to_string(total) + " exceeds cap " +
                        std::to_string(cap));
  const Matrix q = padded_fourier(m, anc);
  GroverIterate it;
  it.system_dim = static_cast<Eigen::Index>(d);
  it.ancilla_dim = static_cast<Eigen::Index>(anc);
  it.pi = Matrix::Zero(total, total);
  for (std::size_t i = 0; i < m; ++i) {
    const Matrix a = q.col(i) * q.col(i).adjoint();
    const Matrix& lam = inst.projectors()[i].matrix();
    it.pi += Eigen::kroneckerProduct(lam, a);
  }
  it.delta = Matrix::Zero(total, total);
  for (std::size_t s = 0; s < d; ++s) it.delta(s * anc, s * anc) = 1.0;
  const Matrix eye = Matrix::Identity(total, total);
  it.g = (eye - 2.0 * it.pi) * (eye - 2.0 * it.delta);
  return it;
}

// Phase in (-pi, pi].
inline double canonical_phase(double theta) {
  double t = std::remainder(theta, 2.0 * std::numbers::pi);
  if (t <= -std::numbers::pi) t += 2.0 * std::numbers::pi;
  return t;
}

inline int phase_bits(double precision, double fail_prob) {
  return static_cast<int>(std::ceil(std::log2(2.0 * std::numbers::pi / precision)) +
                          std::ceil(std::log2(2.0 + 1.0 / (2.0 * fail_prob))));
}

// Distribution-level phase estimation for a fixed unitary. The eigenbasis
// comes from a complex Schur form (diagonal for normal matrices).
class PhaseEstimator {
 public:
  explicit PhaseEstimator(const Matrix& unitary) {
    Eigen::ComplexSchur<Matrix> schur(unitary);
    if (schur.info() != Eigen::Success)
      throw NumericFailure("phase_estimate: Schur decomposition failed for dimension " +
                           std::to_string(unitary.rows()));
    basis_ = schur.matrixU();
    const Matrix& t = schur.matrixT();
    phases_.resize(t.rows());
    for (Eigen::Index k = 0; k < t.rows(); ++k) phases_[k] = canonical_phase(std::arg(t(k, k)));
  }

  const std::vector<double>& phases() const noexcept { return phases_; }
  const Matrix& basis() const noexcept { return basis_; }

  // <phi_k| state |phi_k> for each eigenvector.
  RealVector weights(const Matrix& state) const {
    const Matrix z = basis_.adjoint() * state * basis_;
    RealVector w(z.rows());
    for (Eigen::Index k = 0; k < z.rows(); ++k) w(k) = std::max(0.0, z(k, k).real());
    return w;
  }

  // Probability of reading y in a t-bit register for true phase theta.
  static double outcome_probability(double theta, std::uint64_t y, int bits) {
    const double n = std::ldexp(1.0, bits);
    const double diff = theta - 2.0 * std::numbers::pi * static_cast<double>(y) / n;
    const double half = diff / 2.0;
    const double den = std::sin(half);
    if (std::abs(den) < 1e-300 || std::abs(std::remainder(diff, 2.0 * std::numbers::pi)) < 1e-15) return 1.0;
    const double num = std::sin(n * half);
    return (num * num) / (n * n * den * den);
  }

  static double outcome_phase(std::uint64_t y, int bits) {
    return canonical_phase(2.0 * std::numbers::pi * static_cast<double>(y) / std::ldexp(1.0, bits));
  }

  // Cumulative outcome table for eigencomponent k at the given register size.
  const std::vector<double>& cdf(std::size_t k, int bits) const {
    if (bits != bits_) {
      cache_.assign(phases_.size(), {});
      bits_ = bits;
    }
    auto& c = cache_[k];
    if (c.empty()) {
      const std::uint64_t n = std::uint64_t{1} << bits;
      c.resize(n);
      double acc = 0.0;
      for (std::uint64_t y = 0; y < n; ++y) {
        acc += outcome_probability(phases_[k], y, bits);
        c[y] = acc;
      }
    }
    return c;
  }

  // Sample eigencomponent by weight, then a register reading; returns phase.
  double sample(const std::vector<double>& weight_cdf, int bits, Rng& rng) const {
    const std::size_t k = rng.discrete_cumulative(weight_cdf);
    const auto& c = cdf(k, bits);
    return outcome_phase(rng.discrete_cumulative(c), bits);
  }

  // Probability that the measured phase satisfies |phase| <= bound.
  double mass_within(const RealVector& w, int bits, double bound) const {
    const std::uint64_t n = std::uint64_t{1} << bits;
    double total = 0.0;
    for (std::size_t k = 0; k < phases_.size(); ++k) {
      if (w(k) <= 0.0) continue;
      double acc = 0.0;
      for (std::uint64_t y = 0; y < n; ++y)
        if (std::abs(outcome_phase(y, bits)) <= bound) acc += outcome_probability(phases_[k], y, bits);
      total += w(k) * acc;
    }
    return total;
  }

 private:
  Matrix basis_;
  std::vector<double> phases_;
  mutable std::vector<std::vector<double>> cache_;
  mutable int bits_ = -1;
};

inline std::vector<double> cumulative(const RealVector& w) {
  std::vector<double> c(w.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) c[i] = (acc += w(i));
  return c;
}

inline double phase_estimate(const Matrix& g, const DensityMatrix& state, double precision, double fail_prob,
                             Rng& rng) {
  if (!(precision > 0.0)) throw UsageError("phase_estimate: precision must be positive");
  if (!(fail_prob > 0.0 && fail_prob < 1.0)) throw UsageError("phase_estimate: fail_prob must lie in (0, 1)");
  detail::require_same_dim(g.rows(), state.dim(), "phase_estimate");
  PhaseEstimator pe(g);
  return pe.sample(cumulative(pe.weights(state.matrix())), phase_bits(precision, fail_prob), rng);
}

// rho (x) |0><0| on the system (x) ancilla register.
inline Matrix with_ancilla_zero(const Matrix& rho, Eigen::Index anc) {
  Matrix zero = Matrix::Zero(anc, anc);
  zero(0, 0) = 1.0;
  return Eigen::kroneckerProduct(rho, zero);
}

// Eigenphases of G are +-2 theta where cos^2(theta) is an eigenvalue of
// Delta Pi Delta, so the test halves the measured phase and estimates the
// full phase to precision (b - a).
class OrTester {
 public:
  explicit OrTester(const OrInstance& inst, std::size_t cap = kDefaultSimulatorCap)
      : spec_(GroverSpec::make(inst)), iterate_(build_iterate(inst, cap)), pe_(iterate_.g),
        bits_(phase_bits(2.0 * spec_.precision, inst.xi())) {
    set_input(inst.input());
  }

  void set_input(const DensityMatrix& rho) {
    weights_ = pe_.weights(with_ancilla_zero(rho.matrix(), iterate_.ancilla_dim));
    weight_cdf_ = cumulative(weights_);
  }

  const GroverSpec& spec() const noexcept { return spec_; }
  const GroverIterate& iterate() const noexcept { return iterate_; }
  const PhaseEstimator& estimator() const noexcept { return pe_; }
  int bits() const noexcept { return bits_; }

  bool trial(Rng& rng) const {
    const double phase = pe_.sample(weight_cdf_, bits_, rng);
    return std::abs(phase) / 2.0 <= spec_.accept_angle();
  }

  // Exact acceptance probability of one trial.
  double accept_probability() const { return pe_.mass_within(weights_, bits_, 2.0 * spec_.accept_angle()); }

  // Accepting trials out of `trials`, one child stream per chunk.
  std::size_t run(std::size_t trials, Rng& rng) const {
    constexpr std::size_t chunk = 256;
    const std::size_t chunks = (trials + chunk - 1) / chunk;
    std::vector<std::size_t> hits(chunks, 0);
    const Rng base = rng.split();
    // warm the per-component tables so worker threads only read them
    for (Eigen::Index k = 0; k < weights_.size(); ++k)
      if (weights_(k) > 0.0) pe_.cdf(static_cast<std::size_t>(k), bits_);
    for_each_chunk(chunks, [&](std::size_t c) {
      Rng r = base.child(c);
      const std::size_t lo = c * chunk, hi = std::min(trials, lo + chunk);
      for (std::size_t i = lo; i < hi; ++i) hits[c] += trial(r) ? 1 : 0;
    });
    std::size_t total = 0;
    for (auto h : hits) total += h;
    return total;
  }

 private:
  GroverSpec spec_;
  GroverIterate iterate_;
  PhaseEstimator pe_;
  int bits_;
  RealVector weights_;
  std::vector<double> weight_cdf_;
};

inline bool or_test(const OrInstance& inst, Rng& rng) { return OrTester(inst).trial(rng); }

struct GapVerdict {
  bool case1 = false;
  double rate = 0.0;
  double threshold = 0.0;
  std::size_t trials = 0;
  std::size_t accepted = 0;
};

inline double gap_midpoint(const OrInstance& inst) { return (inst.case1_bound() + inst.case2_bound()) / 2.0; }

inline GapVerdict gap_verdict(const OrTester& tester, const OrInstance& inst, std::size_t trials, Rng& rng) {
  if (!inst.gap_condition())
    throw UsageError("gap_verdict: gap condition (1-eps)^2/4 - xi > 3 phi m + xi does not hold");
  if (trials < 1) throw UsageError("gap_verdict: trials must be >= 1");
  GapVerdict v;
  v.trials = trials;
  v.accepted = tester.run(trials, rng);
  v.rate = static_cast<double>(v.accepted) / static_cast<double>(trials);
  v.threshold = gap_midpoint(inst);
  v.case1 = v.rate >= v.threshold;
  return v;
}

inline GapVerdict gap_verdict(const OrInstance& inst, std::size_t trials, Rng& rng,
                              std::size_t cap = kDefaultSimulatorCap) {
  if (!inst.gap_condition())
    throw UsageError("gap_verdict: gap condition (1-eps)^2/4 - xi > 3 phi m + xi does not hold");
  return gap_verdict(OrTester(inst, cap), inst, trials, rng);
}

// (1/m) sum Lambda_i, the system block of Delta Pi Delta.
inline Matrix projector_average(const OrInstance& inst) {
  Matrix avg = Matrix::Zero(inst.dim(), inst.dim());
  for (const auto& p : inst.projectors()) avg += p.matrix();
  return avg / static_cast<double>(inst.m());
}

// tr(P_{>=lambda} rho), P the spectral projector of the projector average.
inline double mass_above(const OrInstance& inst, double lambda) {
  const Spectrum s = eigh(projector_average(inst));
  const Matrix p = spectral_apply(s, [&](double x) { return x >= lambda ? 1.0 : 0.0; });
  return raw_trace_product(p, inst.input().matrix()).real();
}

// Largest deviation, over eigenvectors |psi> (x) |0> of Delta Pi Delta with
// eigenvalue cos^2(phi), of 1 minus the norm of its projection onto the
// G-eigenvectors with phases +-2 phi.
inline double jordan_defect(const OrInstance& inst, std::size_t cap = kDefaultSimulatorCap,
                            double phase_tol = 1e-7) {
  const GroverIterate it = build_iterate(inst, cap);
  const Spectrum avg = eigh(projector_average(inst));
  const PhaseEstimator pe(it.g);  // Schur vectors: orthonormal eigenbasis of G
  const auto total = it.g.rows();

  double worst = 0.0;
  for (Eigen::Index i = 0; i < avg.dim(); ++i) {
    const double mu = std::clamp(avg.eigenvalues(i), 0.0, 1.0);
    const double phi = std::acos(std::sqrt(mu));
    Vector psi = Vector::Zero(total);
    for (Eigen::Index s = 0; s < it.system_dim; ++s) psi(s * it.ancilla_dim) = avg.eigenvectors(s, i);
    double norm2 = 0.0;
    for (Eigen::Index k = 0; k < total; ++k) {
      const double p = pe.phases()[k];
      const auto near = [&](double target) { return std::abs(canonical_phase(p - target)) <= phase_tol; };
      if (near(2.0 * phi) || near(-2.0 * phi)) norm2 += std::norm(pe.basis().col(k).dot(psi));
    }
    worst = std::max(worst, std::abs(1.0 - std::sqrt(norm2)));
  }
  return worst;
}

}  // namespace mmwqsdp

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "mmw.hpp"
#include "oracle.hpp"
#include "rng.hpp"

namespace mmwqsdp {

// Two-outcome measurements 0 <= E_i <= I on C^n.
class MeasurementSet {
 public:
  MeasurementSet(std::vector<HermitianMatrix> ops, int rank_bound) : ops_(std::move(ops)), rank_(rank_bound) {
    if (ops_.empty()) throw ContractViolation("MeasurementSet: need at least one operator");
    if (rank_ < 1) throw ContractViolation("MeasurementSet: rank bound must be >= 1");
    const auto n = ops_.front().dim();
    for (std::size_t i = 0; i < ops_.size(); ++i) {
      if (ops_[i].dim() != n)
        throw ContractViolation("MeasurementSet: operator " + std::to_string(i) + " dimension mismatch");
      const auto [lo, hi] = spectral_range(ops_[i]);
      if (lo < -kPsdTol || hi > 1.0 + kPsdTol)
        throw ContractViolation("MeasurementSet: operator " + std::to_string(i) + " spectrum [" + std::to_string(lo) +
                                ", " + std::to_string(hi) + "] outside [0, 1]");
      const double tr = ops_[i].matrix().trace().real();
      traces_.push_back(tr);
      states_.push_back(tr > 1e-14 ? std::optional<DensityMatrix>(DensityMatrix::trusted(ops_[i].matrix() / tr))
                                   : std::nullopt);
    }
  }

  Eigen::Index dim() const noexcept { return ops_.front().dim(); }
  std::size_t size() const noexcept { return ops_.size(); }
  const HermitianMatrix& op(std::size_t i) const { return ops_.at(i); }
  const std::vector<HermitianMatrix>& ops() const noexcept { return ops_; }
  int rank_bound() const noexcept { return rank_; }
  double trace(std::size_t i) const { return traces_.at(i); }
  // E_i / tr E_i, absent for E_i = 0
  const std::optional<DensityMatrix>& normalized(std::size_t i) const { return states_.at(i); }

 private:
  std::vector<HermitianMatrix> ops_;
  int rank_;
  std::vector<double> traces_;
  std::vector<std::optional<DensityMatrix>> states_;
};

struct JaynesTerm {
  std::size_t index = 0;
  double coefficient = 0.0;
  std::size_t raise_rounds = 0;  // rounds where tr(E sigma) was too small
  std::size_t lower_rounds = 0;  // rounds where tr(E sigma) was too large
};

// sigma = exp(sum_i lambda_i E_i) / Tr[.]
struct JaynesDescription {
  Eigen::Index dim = 1;
  double delta = 0.0;
  std::vector<JaynesTerm> terms;
};

inline DensityMatrix jaynes_reconstruct(const JaynesDescription& desc, const MeasurementSet& meas) {
  if (desc.dim != meas.dim()) throw UsageError("jaynes_reconstruct: dimension mismatch");
  Matrix h = Matrix::Zero(desc.dim, desc.dim);
  for (const auto& t : desc.terms) {
    if (t.index >= meas.size()) throw UsageError("jaynes_reconstruct: term index " + std::to_string(t.index) + " out of range");
    h -= t.coefficient * meas.op(t.index).matrix();
  }
  return gibbs_of(HermitianMatrix::trusted(h));
}

inline double verify_shadow(const DensityMatrix& sigma, const DensityMatrix& rho, const MeasurementSet& meas) {
  detail::require_same_dim(sigma.dim(), rho.dim(), "verify_shadow");
  detail::require_same_dim(sigma.dim(), meas.dim(), "verify_shadow");
  double worst = 0.0;
  for (const auto& e : meas.ops()) worst = std::max(worst, std::abs(trace_inner(e, sigma) - trace_inner(e, rho)));
  return worst;
}

enum class LearnBackend { Exact, Sampled };

struct LearnOptions {
  LearnBackend backend = LearnBackend::Exact;
  std::uint64_t shots = 0;              // 0: ceil(128 r^2 ln(max(2m, 2)) / eps^2)
  std::optional<double> delta_fail;     // per round, default eps^2 / (failure_constant ln n)
  double failure_constant = 400.0;
  unsigned boost = 0;                   // 0: derived from delta_fail
  std::optional<double> delta;          // default eps / 4
  std::optional<std::uint64_t> copy_budget;  // copies of the hidden state, whole run
  bool record_history = false;
};

struct FiredConstraint {
  std::size_t index = 0;
  bool raise = false;        // true: tr(E sigma) below tr(E rho)
  double target_value = 0.0; // tr(E rho) used in the gain
};

struct LearnResult {
  JaynesDescription description;
  DensityMatrix sigma;
  std::size_t rounds = 0;
  std::size_t round_cap = 0;
  std::vector<FiredConstraint> fired;
  std::map<std::string, std::uint64_t> counters;
  std::vector<std::pair<HermitianMatrix, DensityMatrix>> history;  // (gain, rho_t) when recorded
};

// Gain for a violated two-sided constraint.
//   raise: M = ((1 - t) I + E) / 2
//   lower: M = ((1 + t) I - E) / 2
inline HermitianMatrix learner_gain(const HermitianMatrix& e, double t, bool raise) {
  const Matrix eye = Matrix::Identity(e.dim(), e.dim());
  if (raise) return HermitianMatrix::trusted(((1.0 - t) * eye + e.matrix()) / 2.0);
  return HermitianMatrix::trusted(((1.0 + t) * eye - e.matrix()) / 2.0);
}

namespace detail {

inline std::optional<FiredConstraint> exact_shadow_violation(const MeasurementSet& meas, const DensityMatrix& sigma,
                                                             const DensityMatrix& rho, double eps) {
  for (std::size_t i = 0; i < meas.size(); ++i) {
    const double want = trace_inner(meas.op(i), rho);
    const double have = trace_inner(meas.op(i), sigma);
    if (have - want > eps) return FiredConstraint{i, false, want};
    if (want - have > eps) return FiredConstraint{i, true, want};
  }
  return std::nullopt;
}

// Two SWAP-test estimates per test, against the hidden state and sigma.
struct ShadowTester {
  const MeasurementSet& meas;
  CopySupplier& hidden;
  const DensityMatrix& sigma;
  double eps;
  std::uint64_t shots;
  unsigned boost;
  Rng& rng;
  SearchStats& stats;
  std::uint64_t sigma_copies = 0;
  std::map<std::size_t, FiredConstraint> last;

  bool operator()(std::size_t i) {
    ++stats.index_decisions;
    const auto& state = meas.normalized(i);
    if (!state) return false;
    const double tr = meas.trace(i);
    const bool yes = majority(boost, [&] {
      ++stats.tests;
      const double want = (2.0 * swap_test_sample(*state, hidden.take(shots), shots, rng) - 1.0) * tr;
      sigma_copies += shots;
      const double have = (2.0 * swap_test_sample(*state, sigma, shots, rng) - 1.0) * tr;
      const double diff = have - want;
      if (std::abs(diff) > eps / 2.0) {
        last[i] = FiredConstraint{i, diff < 0.0, std::clamp(want, 0.0, 1.0)};
        return true;
      }
      return false;
    });
    if (yes) stats.last_positive = i;
    return yes;
  }
};

}  // namespace detail

inline std::uint64_t learner_shots(int rank, std::size_t m, double eps) {
  const double r = static_cast<double>(rank);
  return static_cast<std::uint64_t>(
      std::ceil(128.0 * r * r * std::log(std::max(2.0 * static_cast<double>(m), 2.0)) / (eps * eps)));
}

// Matrix multiplicative weights on the learning system
// |tr(E_i sigma) - tr(E_i rho)| <= eps, which rho itself satisfies.
inline LearnResult learn_state(const MeasurementSet& meas, const DensityMatrix& target, double eps, Rng& rng,
                               const LearnOptions& opt = {}) {
  if (!(eps > 0.0 && eps < 1.0)) throw UsageError("learn_state: eps must lie in (0, 1)");
  detail::require_same_dim(meas.dim(), target.dim(), "learn_state");
  const auto n = meas.dim();
  const double delta = opt.delta.value_or(eps / 4.0);
  LearnResult res;
  res.round_cap = round_cap(n, eps);
  res.description.dim = n;
  res.description.delta = delta;

  const bool sampled = opt.backend == LearnBackend::Sampled;
  CopySupplier hidden(target, opt.copy_budget);
  const double ln_n = std::max(std::log(static_cast<double>(n)), 1.0);
  const double delta_fail = opt.delta_fail.value_or(eps * eps / (opt.failure_constant * ln_n));
  const std::uint64_t shots = opt.shots ? opt.shots : learner_shots(meas.rank_bound(), meas.size(), eps);
  const double single = std::min(
      0.5, 4.0 * std::exp(-static_cast<double>(shots) * eps * eps /
                          (32.0 * meas.rank_bound() * meas.rank_bound())));
  const unsigned boost = opt.boost ? opt.boost : boost_count(single, per_index_target(delta_fail, meas.size()));
  std::uint64_t tests = 0, sigma_copies = 0;

  MwState state(n, delta);
  std::vector<long> raise_count(meas.size(), 0), lower_count(meas.size(), 0);
  bool done = false;
  for (std::size_t t = 1; t <= res.round_cap; ++t) {
    res.rounds = t;
    std::optional<FiredConstraint> hit;
    if (!sampled) {
      hit = detail::exact_shadow_violation(meas, state.rho(), target, eps);
      tests += meas.size();
    } else {
      SearchStats stats;
      detail::ShadowTester tester{meas, hidden, state.rho(), eps, shots, boost, rng, stats, 0, {}};
      auto range = classical_or(tester);
      if (auto i = violation_binary_search(meas.size(), range, stats)) hit = tester.last.at(*i);
      tests += stats.tests;
      sigma_copies += tester.sigma_copies;
    }
    if (!hit) {
      done = true;
      break;
    }
    res.fired.push_back(*hit);
    (hit->raise ? raise_count : lower_count)[hit->index] += 1;
    auto gain = std::make_shared<const HermitianMatrix>(learner_gain(meas.op(hit->index), hit->target_value, hit->raise));
    if (opt.record_history) res.history.emplace_back(*gain, state.rho());
    state.advance(std::move(gain));
  }

  res.counters["rounds"] = res.rounds;
  res.counters["tests"] = tests;
  res.counters["hidden_copies"] = hidden.consumed();
  res.counters["sigma_copies"] = sigma_copies;
  res.counters["gibbs_preparations"] = 1 + res.fired.size();
  res.counters["boost"] = boost;
  res.counters["shots"] = sampled ? shots : 0;

  if (!done)
    throw LearnerFailure("learn_state: no consistent state within " + std::to_string(res.round_cap) +
                         " rounds (backend " + (sampled ? "sampled" : "exact") + ", " +
                         std::to_string(res.fired.size()) + " violations, " + std::to_string(tests) + " tests)");

  for (std::size_t i = 0; i < meas.size(); ++i) {
    const long net = raise_count[i] - lower_count[i];
    if (raise_count[i] == 0 && lower_count[i] == 0) continue;
    if (net == 0) continue;
    res.description.terms.push_back(JaynesTerm{i, delta / 2.0 * static_cast<double>(net),
                                               static_cast<std::size_t>(raise_count[i]),
                                               static_cast<std::size_t>(lower_count[i])});
  }
  res.sigma = state.rho();
  const double gap = trace_distance(jaynes_reconstruct(res.description, meas), res.sigma);
  if (gap > 1e-8)
    throw NumericFailure("learn_state: Jaynes reconstruction differs from sigma by " + std::to_string(gap));
  return res;
}

}  // namespace mmwqsdp

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/distributions/binomial.hpp>
#include <boost/random/binomial_distribution.hpp>

#include "core.hpp"
#include "gibbs_spec.hpp"
#include "instance.hpp"
#include "orsim.hpp"
#include "rng.hpp"
#include "violation.hpp"

namespace mmwqsdp {

// Per-constraint data of the quantum input model: A_j = t+ rho+ - t- rho-.
struct TableEntry {
  std::optional<DensityMatrix> plus_state;   // absent when t+ = 0
  std::optional<DensityMatrix> minus_state;  // absent when t- = 0
  double trace_plus = 0.0;
  double trace_minus = 0.0;
  double bound = 0.0;  // a_j
};

class QuantumInputTables {
 public:
  QuantumInputTables(Eigen::Index n, std::vector<TableEntry> entries, double epsilon, double bound_b)
      : n_(n), entries_(std::move(entries)), eps_(epsilon), bound_(bound_b) {
    if (entries_.empty()) throw ContractViolation("QuantumInputTables: no constraints");
    for (std::size_t j = 0; j < entries_.size(); ++j) {
      const auto& e = entries_[j];
      const std::string where = "QuantumInputTables: entry " + std::to_string(j);
      if (!(e.trace_plus >= 0.0) || !(e.trace_minus >= 0.0))
        throw ContractViolation(where + ": negative trace");
      if (e.trace_plus + e.trace_minus > bound_ + 1e-9)
        throw ContractViolation(where + ": tr+ + tr- exceeds bound " + std::to_string(bound_));
      if ((e.trace_plus > 0.0) != e.plus_state.has_value() || (e.trace_minus > 0.0) != e.minus_state.has_value())
        throw ContractViolation(where + ": state presence does not match traces");
      for (const auto* s : {&e.plus_state, &e.minus_state})
        if (s->has_value() && (*s)->dim() != n_) throw ContractViolation(where + ": state dimension mismatch");
    }
  }

  // Splits every A_j by its spectrum. B defaults to the largest tr|A_j|.
  static QuantumInputTables from_instance(const SdpInstance& inst) {
    std::vector<TableEntry> entries;
    double widest = 0.0;
    for (std::size_t j = 0; j < inst.size(); ++j) {
      const auto& c = inst.constraint(j);
      const Spectrum s = eigh(c.a);
      const Matrix ap = spectral_apply(s, [](double x) { return x > 0.0 ? x : 0.0; });
      const Matrix am = spectral_apply(s, [](double x) { return x < 0.0 ? -x : 0.0; });
      TableEntry e;
      e.bound = c.bound;
      e.trace_plus = ap.trace().real();
      e.trace_minus = am.trace().real();
      if (e.trace_plus > 1e-14) e.plus_state = DensityMatrix::trusted(ap / e.trace_plus); else e.trace_plus = 0.0;
      if (e.trace_minus > 1e-14) e.minus_state = DensityMatrix::trusted(am / e.trace_minus); else e.trace_minus = 0.0;
      Matrix rebuilt = Matrix::Zero(inst.dim(), inst.dim());
      if (e.plus_state) rebuilt += e.trace_plus * e.plus_state->matrix();
      if (e.minus_state) rebuilt -= e.trace_minus * e.minus_state->matrix();
      if ((rebuilt - c.a.matrix()).norm() > 1e-8)
        throw NumericFailure("QuantumInputTables: decomposition of constraint " + std::to_string(j) +
                             " does not reconstruct A_j");
      widest = std::max(widest, e.trace_plus + e.trace_minus);
      entries.push_back(std::move(e));
    }
    double b = widest;
    if (inst.meta().trace_bound) {
      if (widest > *inst.meta().trace_bound + 1e-9)
        throw ContractViolation("QuantumInputTables: instance bound B = " + std::to_string(*inst.meta().trace_bound) +
                                " is below tr|A_j| = " + std::to_string(widest));
      b = *inst.meta().trace_bound;
    }
    return QuantumInputTables(inst.dim(), std::move(entries), inst.epsilon(), std::max(b, 1e-300));
  }

  Eigen::Index dim() const noexcept { return n_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const TableEntry& entry(std::size_t j) const { return entries_.at(j); }
  double epsilon() const noexcept { return eps_; }
  double bound() const noexcept { return bound_; }

 private:
  Eigen::Index n_;
  std::vector<TableEntry> entries_;
  double eps_;
  double bound_;
};

// Hands out copies of a state against an optional budget.
class CopySupplier {
 public:
  explicit CopySupplier(DensityMatrix rho, std::optional<std::uint64_t> budget = std::nullopt)
      : rho_(std::move(rho)), budget_(budget) {}

  const DensityMatrix& take(std::uint64_t copies) {
    if (budget_ && consumed_ + copies > *budget_)
      throw ResourceError("copy supplier exhausted: budget of " + std::to_string(*budget_) + " copies, " +
                          std::to_string(consumed_) + " already used, " + std::to_string(copies) + " requested");
    consumed_ += copies;
    return rho_;
  }

  const DensityMatrix& peek() const noexcept { return rho_; }
  std::uint64_t consumed() const noexcept { return consumed_; }
  std::optional<std::uint64_t> budget() const noexcept { return budget_; }

 private:
  DensityMatrix rho_;
  std::optional<std::uint64_t> budget_;
  std::uint64_t consumed_ = 0;
};

inline double swap_accept_probability(const DensityMatrix& sigma, const DensityMatrix& rho) {
  detail::require_same_dim(sigma.dim(), rho.dim(), "swap_test_sample");
  const double overlap = raw_trace_product(sigma.matrix(), rho.matrix()).real();
  return std::clamp(0.5 + overlap / 2.0, 0.0, 1.0);
}

// Fraction of `shots` SWAP tests between sigma and rho that output 1.
inline double swap_test_sample(const DensityMatrix& sigma, const DensityMatrix& rho, std::uint64_t shots, Rng& rng) {
  if (shots < 1) throw UsageError("swap_test_sample: shots must be >= 1");
  const double p = swap_accept_probability(sigma, rho);
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  // the shots are independent, so only the count of ones is drawn
  boost::random::binomial_distribution<std::int64_t, double> count(static_cast<std::int64_t>(shots), p);
  return static_cast<double>(count(rng)) / static_cast<double>(shots);
}

// (2 p+ - 1) t+ - (2 p- - 1) t-; consumes shots copies per nonzero side.
inline double threshold_estimate(const TableEntry& e, CopySupplier& rho, std::uint64_t shots, Rng& rng) {
  double v = 0.0;
  if (e.plus_state) v += (2.0 * swap_test_sample(*e.plus_state, rho.take(shots), shots, rng) - 1.0) * e.trace_plus;
  if (e.minus_state) v -= (2.0 * swap_test_sample(*e.minus_state, rho.take(shots), shots, rng) - 1.0) * e.trace_minus;
  return v;
}

inline bool trace_threshold_test(const QuantumInputTables& tables, std::size_t j, CopySupplier& rho,
                                 std::uint64_t shots, Rng& rng) {
  const auto& e = tables.entry(j);
  return threshold_estimate(e, rho, shots, rng) > e.bound + tables.epsilon() / 2.0;
}

inline bool trace_threshold_test(const QuantumInputTables& tables, std::size_t j, const DensityMatrix& rho,
                                 std::uint64_t shots, Rng& rng) {
  CopySupplier supply(rho);
  return trace_threshold_test(tables, j, supply, shots, rng);
}

// Exact probability that trace_threshold_test reports a violation.
inline double threshold_accept_probability(const TableEntry& e, const DensityMatrix& rho, std::uint64_t shots,
                                           double eps) {
  using boost::math::binomial_distribution;
  const double thr = e.bound + eps / 2.0;
  const double s = static_cast<double>(shots);
  const double pp = e.plus_state ? swap_accept_probability(*e.plus_state, rho) : 0.5;
  const double pm = e.minus_state ? swap_accept_probability(*e.minus_state, rho) : 0.5;
  // P(Y < c) for Y ~ Bin(shots, p)
  auto below = [&](double p, double c) {
    if (c <= 0.0) return 0.0;
    if (c > s) return 1.0;
    const double k = std::ceil(c) - 1.0;
    if (k < 0.0) return 0.0;
    return boost::math::cdf(binomial_distribution<double>(s, p), std::min(k, s));
  };
  if (!e.plus_state && !e.minus_state) return 0.0 > thr ? 1.0 : 0.0;
  if (!e.minus_state) {
    // X > s (thr / t+ + 1) / 2
    const double c = s * (thr / e.trace_plus + 1.0) / 2.0;
    if (c < 0.0) return 1.0;
    if (c >= s) return 0.0;
    return boost::math::cdf(boost::math::complement(binomial_distribution<double>(s, pp), std::floor(c)));
  }
  if (!e.plus_state) return below(pm, s * (1.0 - thr / e.trace_minus) / 2.0);
  const binomial_distribution<double> bx(s, pp);
  const double sd = std::sqrt(s * pp * (1.0 - pp));
  const double lo = std::max(0.0, std::floor(s * pp - 14.0 * sd - 2.0));
  const double hi = std::min(s, std::ceil(s * pp + 14.0 * sd + 2.0));
  double total = 0.0;
  for (double x = lo; x <= hi; x += 1.0) {
    const double px = boost::math::pdf(bx, x);
    if (px < 1e-300) continue;
    const double lhs = (2.0 * x / s - 1.0) * e.trace_plus - thr;  // need (2y/s - 1) t- < lhs
    total += px * below(pm, s * (lhs / e.trace_minus + 1.0) / 2.0);
  }
  return std::clamp(total, 0.0, 1.0);
}

// Majority vote of L tests with per-test error p fails with probability at
// most (4 p (1 - p))^(L/2). Returns the smallest odd L meeting target.
inline unsigned boost_count(double p, double target) {
  if (p <= target) return 1;
  if (p >= 0.5) return 1;  // bound is vacuous, boosting cannot be justified
  const double base = 4.0 * p * (1.0 - p);
  unsigned l = static_cast<unsigned>(std::ceil(2.0 * std::log(target) / std::log(base)));
  if (l % 2 == 0) ++l;
  return std::max(1u, l);
}

inline std::uint64_t default_shots(double bound_b, std::size_t m, double eps) {
  return static_cast<std::uint64_t>(
      std::ceil(128.0 * bound_b * bound_b * std::log(std::max<double>(static_cast<double>(m), 2.0)) / (eps * eps)));
}

// delta_fail / (m * max(1, log2 m))
inline double per_index_target(double delta_fail, std::size_t m) {
  const double md = static_cast<double>(m);
  return delta_fail / (md * std::max(1.0, std::log2(md)));
}

struct SamplingParams {
  std::uint64_t shots = 0;      // 0: default_shots
  double delta_fail = 0.05;
  unsigned boost = 0;           // 0: derived from delta_fail
  std::optional<std::uint64_t> copy_budget;
};

struct SearchStats {
  std::uint64_t tests = 0;          // single threshold tests
  std::uint64_t index_decisions = 0;  // boosted per-index decisions
  std::uint64_t range_tests = 0;
  bool inconsistent = false;        // a range said yes but neither half did
  std::optional<std::size_t> last_positive;  // latest index whose own decision was yes
};

// Binary search for the leftmost range containing a violation. range_has
// decides whether [lo, hi) holds a violated index.
template <class RangeTest>
std::optional<std::size_t> violation_binary_search(std::size_t m, RangeTest&& range_has, SearchStats& stats) {
  ++stats.range_tests;
  if (!range_has(std::size_t{0}, m)) return std::nullopt;
  std::size_t lo = 0, hi = m;
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    ++stats.range_tests;
    if (range_has(lo, mid)) {
      hi = mid;
      continue;
    }
    ++stats.range_tests;
    if (range_has(mid, hi)) {
      lo = mid;
      continue;
    }
    // tests near the threshold can flip between calls; fall back to an index
    // that did test positive, if any
    stats.inconsistent = true;
    return stats.last_positive;
  }
  return lo;
}

// Majority of `boost` runs of a single test.
template <class Single>
bool majority(unsigned boost, Single&& single) {
  unsigned yes = 0;
  for (unsigned r = 0; r < boost; ++r) {
    if (single()) ++yes;
    if (2 * yes > boost || 2 * (r + 1 - yes) > boost) break;
  }
  return 2 * yes > boost;
}

// OR of boosted per-index tests over a range, left to right, stopping at the
// first yes.
template <class IndexTest>
auto classical_or(IndexTest& index_test) {
  return [&index_test](std::size_t lo, std::size_t hi) {
    for (std::size_t j = lo; j < hi; ++j)
      if (index_test(j)) return true;
    return false;
  };
}

namespace detail {

struct QuantumTester {
  const QuantumInputTables& tables;
  CopySupplier& supply;
  std::uint64_t shots;
  unsigned boost;
  Rng& rng;
  SearchStats& stats;

  bool operator()(std::size_t j) {
    ++stats.index_decisions;
    const bool yes = majority(boost, [&] {
      ++stats.tests;
      return trace_threshold_test(tables, j, supply, shots, rng);
    });
    if (yes) stats.last_positive = j;
    return yes;
  }
};

// tr(A_j rho) by measuring rho in the eigenbasis of A_j.
struct PlainTester {
  const SdpInstance& inst;
  const std::vector<Spectrum>& spectra;
  CopySupplier& supply;
  std::uint64_t shots;
  unsigned boost;
  Rng& rng;
  SearchStats& stats;

  double estimate(std::size_t j) {
    const Spectrum& s = spectra[j];
    const Matrix& rho = supply.take(shots).matrix();
    std::vector<double> cdf(s.dim());
    double acc = 0.0;
    for (Eigen::Index k = 0; k < s.dim(); ++k) {
      const double q = std::max(0.0, (s.eigenvectors.col(k).adjoint() * rho * s.eigenvectors.col(k))(0, 0).real());
      cdf[k] = (acc += q);
    }
    double sum = 0.0;
    for (std::uint64_t i = 0; i < shots; ++i) sum += s.eigenvalues(rng.discrete_cumulative(cdf));
    return sum / static_cast<double>(shots);
  }

  bool operator()(std::size_t j) {
    ++stats.index_decisions;
    const bool yes = majority(boost, [&] {
      ++stats.tests;
      return estimate(j) > inst.constraint(j).bound + inst.epsilon() / 2.0;
    });
    if (yes) stats.last_positive = j;
    return yes;
  }
};

inline std::vector<Spectrum> constraint_spectra(const SdpInstance& inst) {
  std::vector<Spectrum> out;
  for (const auto& c : inst.constraints()) out.push_back(eigh(c.a));
  return out;
}

}  // namespace detail

struct SearchPlan {
  std::uint64_t shots = 0;
  unsigned boost = 1;
  double single_failure_bound = 0.0;
};

inline SearchPlan quantum_plan(const QuantumInputTables& t, const SamplingParams& p) {
  SearchPlan plan;
  const double eps = t.epsilon(), b = t.bound();
  plan.shots = p.shots ? p.shots : default_shots(b, t.size(), eps);
  plan.single_failure_bound =
      std::min(0.5, 4.0 * std::exp(-static_cast<double>(plan.shots) * eps * eps / (32.0 * b * b)));
  plan.boost = p.boost ? p.boost : boost_count(plan.single_failure_bound, per_index_target(p.delta_fail, t.size()));
  return plan;
}

inline SearchPlan plain_plan(const SdpInstance& inst, const SamplingParams& p) {
  SearchPlan plan;
  const double eps = inst.epsilon();
  plan.shots = p.shots ? p.shots : default_shots(1.0, inst.size(), eps);
  plan.single_failure_bound = std::min(0.5, 2.0 * std::exp(-static_cast<double>(plan.shots) * eps * eps / 8.0));
  plan.boost = p.boost ? p.boost : boost_count(plan.single_failure_bound, per_index_target(p.delta_fail, inst.size()));
  return plan;
}

// Quantum input model: SWAP-test statistics against the table states.
inline OracleReport sampled_violation_search(const QuantumInputTables& tables, CopySupplier& supply,
                                             const SamplingParams& params, Rng& rng, SearchStats* stats_out = nullptr) {
  const SearchPlan plan = quantum_plan(tables, params);
  SearchStats stats;
  detail::QuantumTester tester{tables, supply, plan.shots, plan.boost, rng, stats};
  auto range = classical_or(tester);
  OracleReport r;
  r.violation = violation_binary_search(tables.size(), range, stats);
  r.samples_used = supply.consumed();
  r.queries_used = stats.tests;
  r.backend = "quantum-sampled";
  if (stats_out) *stats_out = stats;
  return r;
}

// Plain model: the matrices are known, rho is only sampled.
inline OracleReport sampled_violation_search(const SdpInstance& inst, CopySupplier& supply,
                                             const SamplingParams& params, Rng& rng, SearchStats* stats_out = nullptr) {
  const SearchPlan plan = plain_plan(inst, params);
  const auto spectra = detail::constraint_spectra(inst);
  SearchStats stats;
  detail::PlainTester tester{inst, spectra, supply, plan.shots, plan.boost, rng, stats};
  auto range = classical_or(tester);
  OracleReport r;
  r.violation = violation_binary_search(inst.size(), range, stats);
  r.samples_used = supply.consumed();
  r.queries_used = stats.tests;
  r.backend = "plain-sampled";
  r.promise_violation = inst.outside_promise(supply.peek());
  if (stats_out) *stats_out = stats;
  return r;
}

class PlainSampledOracle : public ViolationOracle {
 public:
  PlainSampledOracle(const SdpInstance& inst, SamplingParams params)
      : ViolationOracle(inst), params_(params), plan_(plain_plan(inst, params)),
        spectra_(detail::constraint_spectra(inst)) {}

  std::string_view name() const override { return "plain-sampled"; }
  const SearchPlan& plan() const noexcept { return plan_; }

  OracleReport query(const DensityMatrix& rho, Rng& rng) override {
    ++calls_;
    CopySupplier supply(rho, params_.copy_budget);
    SearchStats stats;
    detail::PlainTester tester{instance(), spectra_, supply, plan_.shots, plan_.boost, rng, stats};
    auto range = classical_or(tester);
    OracleReport r;
    r.violation = violation_binary_search(instance().size(), range, stats);
    samples_ += supply.consumed();
    queries_ += stats.tests;
    r.promise_violation = instance().outside_promise(rho);
    return stamp(r);
  }

 private:
  SamplingParams params_;
  SearchPlan plan_;
  std::vector<Spectrum> spectra_;
};

class QuantumSampledOracle : public ViolationOracle {
 public:
  QuantumSampledOracle(const SdpInstance& inst, SamplingParams params)
      : ViolationOracle(inst), params_(params), tables_(QuantumInputTables::from_instance(inst)),
        plan_(quantum_plan(tables_, params)) {}

  std::string_view name() const override { return "quantum-sampled"; }
  const QuantumInputTables& tables() const noexcept { return tables_; }
  const SearchPlan& plan() const noexcept { return plan_; }

  OracleReport query(const DensityMatrix& rho, Rng& rng) override {
    ++calls_;
    CopySupplier supply(rho, params_.copy_budget);
    SearchStats stats;
    detail::QuantumTester tester{tables_, supply, plan_.shots, plan_.boost, rng, stats};
    auto range = classical_or(tester);
    OracleReport r;
    r.violation = violation_binary_search(tables_.size(), range, stats);
    samples_ += supply.consumed();
    queries_ += stats.tests;
    r.promise_violation = instance().outside_promise(rho);
    return stamp(r);
  }

 protected:
  SamplingParams params_;
  QuantumInputTables tables_;
  SearchPlan plan_;
};

// Range existence decided by the simulated fast OR test. Index j of a range
// of k indices is a qubit prepared as sqrt(1-p_j)|0> + sqrt(p_j)|1>, where
// p_j is the exact acceptance probability of one threshold test, and
// Lambda_j projects that qubit onto |1>.
class OrSimOracle : public QuantumSampledOracle {
 public:
  static constexpr double kOrEps = 0.05;

  OrSimOracle(const SdpInstance& inst, SamplingParams params, std::size_t cap = 256)
      : QuantumSampledOracle(inst, params), cap_(cap) {}

  std::string_view name() const override { return "or-sim"; }

  static std::size_t simulated_dim(std::size_t k) { return (std::size_t{1} << k) * next_pow2(k); }

  static OrInstance qubit_instance(const std::vector<double>& p) {
    const std::size_t k = p.size();
    const std::size_t d = std::size_t{1} << k;
    std::vector<HermitianMatrix> proj;
    for (std::size_t t = 0; t < k; ++t) {
      Matrix l = Matrix::Zero(d, d);
      for (std::size_t x = 0; x < d; ++x)
        if (x >> t & 1) l(x, x) = 1.0;
      proj.emplace_back(std::move(l));
    }
    Vector psi(d);
    for (std::size_t x = 0; x < d; ++x) {
      double a = 1.0;
      for (std::size_t t = 0; t < k; ++t) a *= (x >> t & 1) ? std::sqrt(p[t]) : std::sqrt(1.0 - p[t]);
      psi(x) = a;
    }
    const double phi = 0.01 / static_cast<double>(k);
    const double xi = ((1.0 - kOrEps) * (1.0 - kOrEps) / 4.0 - 3.0 * static_cast<double>(k) * phi) / 3.0;
    return OrInstance(std::move(proj), DensityMatrix::pure(psi), kOrEps, phi, xi);
  }

  // Trials so the empirical rate lands on the right side of the midpoint
  // with probability >= 1 - target (Hoeffding).
  static std::size_t or_trials(const OrInstance& inst, double target) {
    const double half_gap = (inst.case1_bound() - inst.case2_bound()) / 2.0;
    return static_cast<std::size_t>(std::ceil(std::log(1.0 / target) / (2.0 * half_gap * half_gap)));
  }

  OracleReport query(const DensityMatrix& rho, Rng& rng) override {
    ++calls_;
    CopySupplier supply(rho, params_.copy_budget);
    SearchStats stats;
    detail::QuantumTester tester{tables_, supply, plan_.shots, plan_.boost, rng, stats};
    const double target = per_index_target(params_.delta_fail, tables_.size());
    auto range = [&](std::size_t lo, std::size_t hi) {
      const std::size_t k = hi - lo;
      if (simulated_dim(k) > cap_) return classical_or(tester)(lo, hi);
      std::vector<double> p;
      for (std::size_t j = lo; j < hi; ++j)
        p.push_back(threshold_accept_probability(tables_.entry(j), rho, plan_.shots, tables_.epsilon()));
      const OrInstance inst = qubit_instance(p);
      auto it = testers_.find(k);
      if (it == testers_.end()) it = testers_.emplace(k, std::make_unique<OrTester>(inst, cap_)).first;
      it->second->set_input(inst.input());
      const std::size_t trials = or_trials(inst, target);
      const GapVerdict v = gap_verdict(*it->second, inst, trials, rng);
      // every trial consumes one threshold test per index in the range
      for (std::size_t j = lo; j < hi; ++j) {
        const auto& e = tables_.entry(j);
        const std::uint64_t sides = (e.plus_state ? 1 : 0) + (e.minus_state ? 1 : 0);
        supply.take(trials * sides * plan_.shots);
      }
      stats.tests += trials * k;
      ++or_tests_;
      return v.case1;
    };
    OracleReport r;
    r.violation = violation_binary_search(tables_.size(), range, stats);
    samples_ += supply.consumed();
    queries_ += stats.tests;
    r.promise_violation = instance().outside_promise(rho);
    return stamp(r);
  }

  std::uint64_t or_tests() const noexcept { return or_tests_; }

 private:
  std::size_t cap_;
  std::map<std::size_t, std::unique_ptr<OrTester>> testers_;
  std::uint64_t or_tests_ = 0;
};

inline std::unique_ptr<ViolationOracle> make_oracle(std::string_view backend, const SdpInstance& inst,
                                                    const SamplingParams& params = {}) {
  if (backend == "exact") return std::make_unique<ExactOracle>(inst);
  if (backend == "plain-sampled") return std::make_unique<PlainSampledOracle>(inst, params);
  if (backend == "quantum-sampled") return std::make_unique<QuantumSampledOracle>(inst, params);
  if (backend == "or-sim") return std::make_unique<OrSimOracle>(inst, params);
  throw UsageError("unknown oracle backend '" + std::string(backend) +
                   "' (expected exact, plain-sampled, quantum-sampled or or-sim)");
}

// Draws term j of the requested sign with probability proportional to its
// trace weight and returns its normalized state.
inline const DensityMatrix& linear_combo_sampler(const GibbsSpec& spec, Sign sign, Rng& rng) {
  const auto& terms = spec.terms(sign);
  std::vector<double> cdf;
  double acc = 0.0;
  for (const auto& t : terms) cdf.push_back(acc += t.trace_weight);
  if (terms.empty() || !(acc > 0.0))
    throw ContractViolation(std::string("linear_combo_sampler: empty mixture on sign ") + to_string(sign));
  return terms[rng.discrete_cumulative(cdf)].state;
}

}  // namespace mmwqsdp

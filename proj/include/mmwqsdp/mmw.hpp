#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "core.hpp"
#include "instance.hpp"
#include "rng.hpp"
#include "violation.hpp"

namespace mmwqsdp {

using GainPtr = std::shared_ptr<const HermitianMatrix>;

// T = ceil(16 ln n / eps^2), at least one round.
inline std::size_t round_cap(Eigen::Index n, double eps) {
  if (n <= 1) return 1;
  const double t = std::ceil(16.0 * std::log(static_cast<double>(n)) / (eps * eps));
  return std::max<std::size_t>(1, static_cast<std::size_t>(t));
}

// Matrix multiplicative weights state after t rounds. The weight matrix is
// exp(+delta * sum M), i.e. directions with large accumulated gain are
// favoured, and rho = weight / trace = gibbs_of(-delta * sum M).
class MwState {
 public:
  MwState(Eigen::Index n, double delta)
      : n_(n), delta_(delta), rho_(DensityMatrix::maximally_mixed(n)) {
    if (n < 1) throw UsageError("MwState: dimension must be >= 1");
    if (!(delta > 0.0)) throw UsageError("MwState: delta must be positive");
  }

  std::size_t round() const noexcept { return gains_.size(); }
  Eigen::Index dim() const noexcept { return n_; }
  double delta() const noexcept { return delta_; }
  const DensityMatrix& rho() const noexcept { return rho_; }
  const std::vector<GainPtr>& gains() const noexcept { return gains_; }

  // sum of all gains, rebuilt from the history. Repeated gain objects are
  // summed once with their multiplicity.
  Matrix gain_sum() const {
    std::vector<std::pair<const HermitianMatrix*, double>> unique;
    std::unordered_map<const HermitianMatrix*, std::size_t> slot;
    for (const auto& g : gains_) {
      auto [it, fresh] = slot.try_emplace(g.get(), unique.size());
      if (fresh) unique.emplace_back(g.get(), 0.0);
      unique[it->second].second += 1.0;
    }
    Matrix sum = Matrix::Zero(n_, n_);
    for (const auto& [g, count] : unique) sum += count * g->matrix();
    return sum;
  }

  // In-place round; mw_round is the value-returning form.
  void advance(GainPtr gain) {
    check_gain(*gain);
    gains_.push_back(std::move(gain));
    rho_ = gibbs_of(HermitianMatrix::trusted(-delta_ * gain_sum()));
  }

  static void check_gain(const HermitianMatrix& g) {
    const auto [lo, hi] = spectral_range(g);
    if (lo < -kPsdTol || hi > 1.0 + kPsdTol)
      throw ContractViolation("mw_round: gain spectrum [" + std::to_string(lo) + ", " + std::to_string(hi) +
                              "] outside [0, 1]");
  }

 private:
  Eigen::Index n_;
  double delta_;
  std::vector<GainPtr> gains_;
  DensityMatrix rho_;
};

inline MwState mw_round(const MwState& state, const HermitianMatrix& gain) {
  detail::require_same_dim(state.dim(), gain.dim(), "mw_round");
  MwState next = state;
  next.advance(std::make_shared<const HermitianMatrix>(gain));
  return next;
}

enum class Verdict { Feasible, Infeasible };

inline const char* to_string(Verdict v) { return v == Verdict::Feasible ? "Feasible" : "Infeasible"; }

struct SolveOptions {
  std::optional<double> delta;          // default eps / 4
  std::optional<std::size_t> round_cap; // default round_cap(n, eps)
  bool record_history = true;           // keep rho^(t) for every violated round
};

struct FeasibilityResult {
  Verdict verdict = Verdict::Infeasible;
  std::optional<DensityMatrix> witness;
  std::vector<std::size_t> violated;      // constraint index per violated round
  std::vector<DensityMatrix> rho_history; // rho^(t) at each violated round
  DensityMatrix final_rho;
  std::size_t rounds_used = 0;
  std::size_t round_cap = 0;
  double delta = 0.0;
  double epsilon = 0.0;
  std::string backend;
  std::map<std::string, std::uint64_t> counters;
  double claimed_bound = 0.0;               // eps + backend tolerance on a Feasible answer
  double exact_max_violation = 0.0;         // max_j tr(A_j final_rho) - a_j
  bool promise_violation_seen = false;

  // M^(t) = (I - A_j(t)) / 2 for every violated round.
  std::vector<HermitianMatrix> certificate(const SdpInstance& inst) const {
    std::vector<HermitianMatrix> out;
    out.reserve(violated.size());
    const auto eye = HermitianMatrix::identity(inst.dim());
    for (std::size_t j : violated) out.push_back((eye - inst.constraint(j).a) * 0.5);
    return out;
  }
};

inline FeasibilityResult solve_feasibility(const SdpInstance& inst, ViolationOracle& oracle, Rng& rng,
                                           const SolveOptions& opt = {}) {
  if (&oracle.instance() != &inst && oracle.instance().dim() != inst.dim())
    throw UsageError("solve_feasibility: oracle bound to an instance of different dimension");
  const auto n = inst.dim();
  const double eps = inst.epsilon();

  FeasibilityResult res;
  res.epsilon = eps;
  res.delta = opt.delta.value_or(eps / 4.0);
  res.round_cap = opt.round_cap.value_or(round_cap(n, eps));
  res.backend = std::string(oracle.name());
  res.claimed_bound = eps + oracle.tolerance_report();

  MwState state(n, res.delta);
  std::vector<GainPtr> gain_of(inst.size());
  const auto eye = HermitianMatrix::identity(n);
  std::uint64_t preparations = 1;  // rho^(1)

  for (std::size_t t = 1; t <= res.round_cap; ++t) {
    const OracleReport rep = oracle.query(state.rho(), rng);
    res.rounds_used = t;
    res.promise_violation_seen = res.promise_violation_seen || rep.promise_violation;
    if (rep.feasible()) {
      res.verdict = Verdict::Feasible;
      res.witness = state.rho();
      break;
    }
    const std::size_t j = *rep.violation;
    if (j >= inst.size()) throw ContractViolation("solve_feasibility: oracle returned out-of-range index");
    res.violated.push_back(j);
    if (opt.record_history) res.rho_history.push_back(state.rho());
    if (!gain_of[j])
      gain_of[j] = std::make_shared<const HermitianMatrix>((eye - inst.constraint(j).a) * 0.5);
    if (t < res.round_cap) {
      state.advance(gain_of[j]);
      ++preparations;
    }
  }

  res.final_rho = state.rho();
  res.exact_max_violation = inst.max_violation(state.rho());
  res.counters["oracle_calls"] = oracle.calls();
  res.counters["samples"] = oracle.samples_used();
  res.counters["queries"] = oracle.queries_used();
  res.counters["gibbs_preparations"] = preparations;
  res.counters["rounds"] = res.rounds_used;
  return res;
}

struct RegretAudit {
  double lhs = 0.0;
  double rhs = 0.0;
  bool passes = false;
  double slack() const noexcept { return lhs - rhs; }
};

// LHS = (1-d) sum_{M<=0} tr(M rho_t) + (1+d) sum_{M>=0} tr(M rho_t)
// RHS = sum tr(M probe) - ln n / d
inline RegretAudit regret_audit(const std::vector<std::pair<HermitianMatrix, DensityMatrix>>& history,
                                double delta, const DensityMatrix& probe) {
  if (!(delta > 0.0 && delta <= 0.5)) throw UsageError("regret_audit: delta must lie in (0, 1/2]");
  const auto n = probe.dim();
  RegretAudit a;
  double probe_sum = 0.0;
  for (std::size_t t = 0; t < history.size(); ++t) {
    const auto& [m, rho] = history[t];
    detail::require_same_dim(m.dim(), n, "regret_audit");
    const auto [lo, hi] = spectral_range(m);
    const double v = trace_inner(m, rho);
    if (lo >= -kPsdTol) {
      a.lhs += (1.0 + delta) * v;
    } else if (hi <= kPsdTol) {
      a.lhs += (1.0 - delta) * v;
    } else {
      throw ContractViolation("regret_audit: gain " + std::to_string(t) + " is neither PSD nor NSD");
    }
    probe_sum += trace_inner(m, probe);
  }
  a.rhs = probe_sum - std::log(static_cast<double>(n)) / delta;
  a.passes = a.lhs >= a.rhs - 1e-8;
  return a;
}

// (gain, rho_t) pairs of a finished run, for regret_audit.
inline std::vector<std::pair<HermitianMatrix, DensityMatrix>> regret_history(const SdpInstance& inst,
                                                                             const FeasibilityResult& r) {
  if (r.rho_history.size() != r.violated.size())
    throw UsageError("regret_history: run was solved without record_history");
  auto gains = r.certificate(inst);
  std::vector<std::pair<HermitianMatrix, DensityMatrix>> out;
  for (std::size_t t = 0; t < gains.size(); ++t) out.emplace_back(std::move(gains[t]), r.rho_history[t]);
  return out;
}

}  // namespace mmwqsdp

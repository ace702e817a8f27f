#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "instance.hpp"
#include "rng.hpp"

namespace mmwqsdp {

// Result of one violation query. Counter fields are the oracle's running
// totals after the query, so they never decrease within a run.
struct OracleReport {
  std::optional<std::size_t> violation;  // 0-based index, empty = feasible
  std::uint64_t samples_used = 0;
  std::uint64_t queries_used = 0;
  std::string backend;
  bool promise_violation = false;

  bool feasible() const noexcept { return !violation.has_value(); }
};

// Smallest j with tr(A_j rho) > a_j + eps.
inline OracleReport exact_violation_search(const SdpInstance& inst, const DensityMatrix& rho) {
  detail::require_same_dim(inst.dim(), rho.dim(), "exact_violation_search");
  OracleReport r;
  r.backend = "exact";
  for (std::size_t j = 0; j < inst.size(); ++j) {
    if (inst.slack(j, rho) > inst.epsilon()) {
      r.violation = j;
      break;
    }
  }
  return r;
}

class ViolationOracle {
 public:
  explicit ViolationOracle(const SdpInstance& inst) : inst_(&inst) {}
  virtual ~ViolationOracle() = default;

  virtual std::string_view name() const = 0;
  virtual OracleReport query(const DensityMatrix& rho, Rng& rng) = 0;
  // Extra additive slack the backend guarantees on a FEASIBLE answer.
  virtual double tolerance_report() const { return 0.0; }
  virtual bool statistical() const { return true; }

  const SdpInstance& instance() const noexcept { return *inst_; }
  std::uint64_t samples_used() const noexcept { return samples_; }
  std::uint64_t queries_used() const noexcept { return queries_; }
  std::uint64_t calls() const noexcept { return calls_; }

 protected:
  OracleReport stamp(OracleReport r) const {
    r.samples_used = samples_;
    r.queries_used = queries_;
    r.backend = std::string(name());
    return r;
  }

  const SdpInstance* inst_;
  std::uint64_t samples_ = 0;
  std::uint64_t queries_ = 0;
  std::uint64_t calls_ = 0;
};

class ExactOracle : public ViolationOracle {
 public:
  using ViolationOracle::ViolationOracle;
  std::string_view name() const override { return "exact"; }
  bool statistical() const override { return false; }

  OracleReport query(const DensityMatrix& rho, Rng&) override {
    ++calls_;
    queries_ += instance().size();
    return stamp(exact_violation_search(instance(), rho));
  }
};

}  // namespace mmwqsdp

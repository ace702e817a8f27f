#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"

namespace mmwqsdp {

struct Constraint {
  HermitianMatrix a;
  double bound = 0.0;
};

struct InstanceMeta {
  std::optional<double> trace_bound;  // B
  std::optional<int> rank;            // r
  std::optional<int> sparsity;        // s
  std::optional<std::uint64_t> seed;
};

// Feasibility problem: find rho with tr(A_j rho) <= a_j + eps for all j.
class SdpInstance {
 public:
  SdpInstance(std::vector<Constraint> constraints, double epsilon, InstanceMeta meta = {})
      : constraints_(std::move(constraints)), epsilon_(epsilon), meta_(meta) {
    if (constraints_.empty()) throw ContractViolation("SdpInstance: need at least one constraint");
    if (!(epsilon_ > 0.0 && epsilon_ < 1.0))
      throw ContractViolation("SdpInstance: epsilon must lie in (0, 1), got " + std::to_string(epsilon_));
    const auto n = constraints_.front().a.dim();
    for (std::size_t j = 0; j < constraints_.size(); ++j) {
      const auto& c = constraints_[j];
      if (c.a.dim() != n)
        throw ContractViolation("SdpInstance: constraint " + std::to_string(j) + " has dimension " +
                                std::to_string(c.a.dim()) + ", expected " + std::to_string(n));
      if (!std::isfinite(c.bound))
        throw ContractViolation("SdpInstance: constraint " + std::to_string(j) + " bound is not finite");
      const auto [lo, hi] = spectral_range(c.a);
      if (lo < -1.0 - kPsdTol || hi > 1.0 + kPsdTol)
        throw ContractViolation("SdpInstance: constraint " + std::to_string(j) +
                                " violates -I <= A <= I (spectrum [" + std::to_string(lo) + ", " +
                                std::to_string(hi) + "])");
    }
  }

  Eigen::Index dim() const noexcept { return constraints_.front().a.dim(); }
  std::size_t size() const noexcept { return constraints_.size(); }
  const Constraint& constraint(std::size_t j) const { return constraints_.at(j); }
  const std::vector<Constraint>& constraints() const noexcept { return constraints_; }
  double epsilon() const noexcept { return epsilon_; }
  const InstanceMeta& meta() const noexcept { return meta_; }

  SdpInstance with_epsilon(double eps) const { return SdpInstance(constraints_, eps, meta_); }

  double slack(std::size_t j, const DensityMatrix& rho) const {
    return trace_inner(constraints_.at(j).a, rho) - constraints_[j].bound;
  }

  // max_j tr(A_j rho) - a_j
  double max_violation(const DensityMatrix& rho) const {
    detail::require_same_dim(dim(), rho.dim(), "SdpInstance::max_violation");
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < size(); ++j) worst = std::max(worst, slack(j, rho));
    return worst;
  }

  // Any constraint whose slack sits strictly inside (0, eps)?
  bool outside_promise(const DensityMatrix& rho) const {
    for (std::size_t j = 0; j < size(); ++j) {
      const double s = slack(j, rho);
      if (s > 1e-12 && s < epsilon_ - 1e-12) return true;
    }
    return false;
  }

 private:
  std::vector<Constraint> constraints_;
  double epsilon_;
  InstanceMeta meta_;
};

}  // namespace mmwqsdp

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "gibbs_spec.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace mmwqsdp {

// Shifted-grid rounding model of consistent phase estimation:
// f(s, x) = grid * round((x + s) / grid) - s. With probability xi a call
// returns f(s, x) +- grid instead.
class ConsistentEstimator {
 public:
  ConsistentEstimator(double shift, double grid, double xi = 0.0) : shift_(shift), grid_(grid), xi_(xi) {
    if (!(grid_ > 0.0)) throw UsageError("ConsistentEstimator: grid must be positive");
    if (!(shift_ >= 0.0 && shift_ < grid_)) throw UsageError("ConsistentEstimator: shift must lie in [0, grid)");
    if (!(xi_ >= 0.0 && xi_ < 1.0)) throw UsageError("ConsistentEstimator: xi must lie in [0, 1)");
  }

  static ConsistentEstimator draw(double grid, double xi, Rng& rng) {
    return ConsistentEstimator(rng.uniform() * grid, grid, xi);
  }

  double shift() const noexcept { return shift_; }
  double grid() const noexcept { return grid_; }
  double xi() const noexcept { return xi_; }

  double round(double lambda) const noexcept { return grid_ * std::round((lambda + shift_) / grid_) - shift_; }

  // One estimate, possibly corrupted. Sets *corrupted when given.
  double sample(double lambda, Rng& rng, bool* corrupted = nullptr) const {
    double v = round(lambda);
    bool bad = false;
    if (xi_ > 0.0 && rng.bernoulli(xi_)) {
      v += rng.bernoulli(0.5) ? grid_ : -grid_;
      bad = true;
    }
    if (corrupted) *corrupted = bad;
    return v;
  }

 private:
  double shift_, grid_, xi_;
};

// Dense K with its spectrum; checks the numerical rank against 2 r_K.
inline std::pair<HermitianMatrix, Spectrum> assemble_k(const GibbsSpec& spec) {
  HermitianMatrix k = spec.k();
  Spectrum s = eigh(k);
  const double scale = std::max(1.0, s.eigenvalues.cwiseAbs().maxCoeff());
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.dim(); ++i)
    if (std::abs(s.eigenvalues(i)) > 1e-8 * scale) ++rank;
  if (rank > 2 * spec.rank_bound())
    throw ContractViolation("assemble_k: rank " + std::to_string(rank) + " exceeds 2 * r_K = " +
                            std::to_string(2 * spec.rank_bound()));
  return {std::move(k), std::move(s)};
}

struct EigenSample {
  double lambda_tilde = 0.0;
  Eigen::Index index = 0;
  bool corrupted = false;
  DensityMatrix state;
};

// Born sampling of an eigencomponent followed by rounding of its eigenvalue.
inline EigenSample consistent_eig_sample(const ConsistentEstimator& est, const Spectrum& spectrum,
                                         const DensityMatrix& input, Rng& rng) {
  detail::require_same_dim(spectrum.dim(), input.dim(), "consistent_eig_sample");
  std::vector<double> cdf(spectrum.dim());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < spectrum.dim(); ++i) {
    const Vector v = spectrum.eigenvectors.col(i);
    cdf[i] = (acc += std::max(0.0, v.dot(input.matrix() * v).real()));
  }
  EigenSample out;
  out.index = static_cast<Eigen::Index>(rng.discrete_cumulative(cdf));
  out.lambda_tilde = est.sample(spectrum.eigenvalues(out.index), rng, &out.corrupted);
  out.state = DensityMatrix::pure(spectrum.eigenvectors.col(out.index));
  return out;
}

struct EstimatorReport {
  double value = 0.0;
  std::uint64_t repetitions = 0;
  double target_error = 0.0;
  bool empirical_success = false;
  double mean = 0.0;           // per-draw sample mean
  double second_moment = 0.0;  // per-draw E[X^2]
  double std_error = 0.0;      // of value
  std::map<std::string, double> constants;
};

// Spectral data shared by all samplers of one spec under one estimator.
class GibbsModel {
 public:
  struct Draw {
    Sign sign = Sign::Plus;
    Eigen::Index index = 0;
  };

  GibbsModel(const GibbsSpec& spec, ConsistentEstimator est) : spec_(&spec), est_(est) {
    auto [k, s] = assemble_k(spec);
    k_ = std::move(k);
    spectrum_ = std::move(s);
    const auto n = spectrum_.dim();
    const Matrix kp = spec.part(Sign::Plus), km = spec.part(Sign::Minus);
    wplus_.resize(n);
    wminus_.resize(n);
    rounded_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vector v = spectrum_.eigenvectors.col(i);
      wplus_(i) = std::max(0.0, v.dot(kp * v).real());
      wminus_(i) = std::max(0.0, v.dot(km * v).real());
      rounded_(i) = est_.round(spectrum_.eigenvalues(i));
    }
    trace_ = spec.trace_plus() + spec.trace_minus();
    double acc = 0.0;
    signed_cdf_.resize(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) signed_cdf_[i] = (acc += wplus_(i));
    for (Eigen::Index i = 0; i < n; ++i) signed_cdf_[n + i] = (acc += wminus_(i));
    // members of each rounded-eigenvalue group
    group_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      group_[i].clear();
      for (Eigen::Index j = 0; j < n; ++j)
        if (rounded_(j) == rounded_(i)) group_[i].push_back(j);
    }
  }

  const GibbsSpec& spec() const noexcept { return *spec_; }
  const ConsistentEstimator& estimator() const noexcept { return est_; }
  const HermitianMatrix& k() const noexcept { return k_; }
  const Spectrum& spectrum() const noexcept { return spectrum_; }
  const RealVector& rounded() const noexcept { return rounded_; }
  Eigen::Index dim() const noexcept { return spectrum_.dim(); }
  double delta() const noexcept { return est_.grid(); }
  double trace() const noexcept { return trace_; }
  double weight(Sign s, Eigen::Index i) const { return s == Sign::Plus ? wplus_(i) : wminus_(i); }
  // <v_i| K+ + K- |v_i>
  double mu(Eigen::Index i) const { return wplus_(i) + wminus_(i); }
  const std::vector<Eigen::Index>& group(Eigen::Index i) const { return group_[i]; }

  // Sign coin with P(+) = tr K+ / (tr K+ + tr K-), then Born sampling of the
  // normalized part; drawn jointly from one table.
  Draw draw_signed(Rng& rng) const {
    const std::size_t k = rng.discrete_cumulative(signed_cdf_);
    const auto n = static_cast<std::size_t>(dim());
    return k < n ? Draw{Sign::Plus, static_cast<Eigen::Index>(k)} : Draw{Sign::Minus, static_cast<Eigen::Index>(k - n)};
  }

  // Born sampling of I/n: every eigenvector equally likely.
  Eigen::Index draw_uniform(Rng& rng) const { return static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(dim()))); }

  double observe(Eigen::Index i, Rng& rng, bool* corrupted = nullptr) const {
    if (est_.xi() == 0.0) {
      if (corrupted) *corrupted = false;
      return rounded_(i);
    }
    return est_.sample(spectrum_.eigenvalues(i), rng, corrupted);
  }

  bool is_kernel(double lt) const noexcept { return std::abs(lt) < delta(); }

  // Above-threshold test of the support estimators; an infinite lambda_min
  // (nothing observed) lets every value through.
  bool passes(double lt, double lambda_min) const noexcept {
    if (is_kernel(lt)) return false;
    return std::isinf(lambda_min) || lt >= lambda_min;
  }

  DensityMatrix eigenstate(Eigen::Index i) const { return DensityMatrix::pure(spectrum_.eigenvectors.col(i)); }

  // I/n projected on the group of i and renormalized.
  DensityMatrix group_state(Eigen::Index i) const {
    RealVector w = RealVector::Zero(dim());
    for (auto j : group_[i]) w(j) = 1.0;
    return DensityMatrix::from_spectrum(spectrum_.eigenvectors, w);
  }

  // Sum of e^{-lt} over eigenvalues whose rounded value passes the filters.
  double z_supp_rounded(double lambda_min = std::numeric_limits<double>::infinity()) const {
    double z = 0.0;
    for (Eigen::Index i = 0; i < dim(); ++i)
      if (passes(rounded_(i), lambda_min)) z += std::exp(-rounded_(i));
    return z;
  }

  // Expected value of the Z_supp estimate (xi = 0): sum lambda_i e^{-lt_i} / lt_i.
  double z_supp_expectation(double lambda_min = std::numeric_limits<double>::infinity()) const {
    double z = 0.0;
    for (Eigen::Index i = 0; i < dim(); ++i)
      if (passes(rounded_(i), lambda_min))
        z += spectrum_.eigenvalues(i) * std::exp(-rounded_(i)) / rounded_(i);
    return z;
  }

  double z_supp_exact() const {
    double z = 0.0;
    for (Eigen::Index i = 0; i < dim(); ++i)
      if (std::abs(spectrum_.eigenvalues(i)) >= delta()) z += std::exp(-spectrum_.eigenvalues(i));
    return z;
  }

  Eigen::Index kernel_count_rounded() const {
    Eigen::Index c = 0;
    for (Eigen::Index i = 0; i < dim(); ++i) c += is_kernel(rounded_(i)) ? 1 : 0;
    return c;
  }

 private:
  const GibbsSpec* spec_;
  ConsistentEstimator est_;
  HermitianMatrix k_;
  Spectrum spectrum_;
  RealVector wplus_, wminus_, rounded_;
  double trace_ = 0.0;
  std::vector<double> signed_cdf_;
  std::vector<std::vector<Eigen::Index>> group_;
};

namespace detail {

inline constexpr std::uint64_t kChunk = 1 << 16;

struct Moments {
  double sum = 0.0;
  double sumsq = 0.0;
  std::uint64_t count = 0;
};

// Runs draw(rng) -> double for `reps` repetitions in fixed chunks with one
// child stream per chunk and reduces in chunk order.
template <class Draw>
Moments chunked_moments(std::uint64_t reps, Rng& rng, Draw&& draw) {
  const std::uint64_t chunks = (reps + kChunk - 1) / kChunk;
  std::vector<Moments> parts(chunks);
  const Rng base = rng.split();
  for_each_chunk(chunks, [&](std::size_t c) {
    Rng r = base.child(c);
    const std::uint64_t lo = c * kChunk, hi = std::min(reps, lo + kChunk);
    Moments m;
    for (std::uint64_t t = lo; t < hi; ++t) {
      const double x = draw(r);
      m.sum += x;
      m.sumsq += x * x;
    }
    m.count = hi - lo;
    parts[c] = m;
  });
  Moments total;
  for (const auto& m : parts) {
    total.sum += m.sum;
    total.sumsq += m.sumsq;
    total.count += m.count;
  }
  return total;
}

}  // namespace detail

inline std::uint64_t lambda_min_repetitions(double bound_b, double delta, double gamma) {
  return static_cast<std::uint64_t>(std::ceil(4.0 * std::max(bound_b, 1e-12) / delta * std::log(1.0 / gamma)));
}

// Minimum of the above-threshold estimates seen on sign-mixture draws, or
// +infinity when none was seen.
inline double estimate_lambda_min(const GibbsModel& model, double gamma, Rng& rng) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw UsageError("estimate_lambda_min: gamma must lie in (0, 1)");
  double best = std::numeric_limits<double>::infinity();
  if (model.spec().empty()) return best;
  const std::uint64_t reps = lambda_min_repetitions(model.spec().bound(), model.delta(), gamma);
  for (std::uint64_t t = 0; t < reps; ++t) {
    const auto d = model.draw_signed(rng);
    const double lt = model.observe(d.index, rng);
    if (!model.is_kernel(lt)) best = std::min(best, lt);
  }
  return best;
}

inline double estimate_lambda_min(const GibbsSpec& spec, const ConsistentEstimator& est, double gamma, Rng& rng) {
  return estimate_lambda_min(GibbsModel(spec, est), gamma, rng);
}

inline std::uint64_t z_supp_repetitions(double bound_b, double delta, double eps) {
  return static_cast<std::uint64_t>(std::ceil(16.0 * bound_b * bound_b / (delta * delta * eps * eps)));
}

// X = +e^{-lt}/lt on a plus draw, -e^{-lt}/lt on a minus draw, 0 when lt is
// filtered out; value = mean(X) * (tr K+ + tr K-).
inline EstimatorReport estimate_z_supp(const GibbsModel& model, double eps, Rng& rng,
                                       double lambda_min = std::numeric_limits<double>::infinity()) {
  if (!(eps > 0.0 && eps < 1.0)) throw UsageError("estimate_z_supp: eps must lie in (0, 1)");
  EstimatorReport rep;
  rep.target_error = eps;
  const double delta = model.delta();
  rep.constants = {{"repetition_constant", 16.0}, {"delta", delta}, {"B", model.spec().bound()}};
  if (model.spec().empty()) {
    rep.empirical_success = true;
    return rep;
  }
  const std::uint64_t reps = std::max<std::uint64_t>(1, z_supp_repetitions(model.spec().bound(), delta, eps));
  const auto n = model.dim();
  // per (sign, index) value when no corruption happens
  std::vector<double> value(2 * n);
  auto x_of = [&](Sign s, double lt) {
    if (!model.passes(lt, lambda_min)) return 0.0;
    const double v = std::exp(-lt) / lt;
    return s == Sign::Plus ? v : -v;
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    value[i] = x_of(Sign::Plus, model.rounded()(i));
    value[n + i] = x_of(Sign::Minus, model.rounded()(i));
  }
  const bool noisy = model.estimator().xi() > 0.0;
  const auto m = detail::chunked_moments(reps, rng, [&](Rng& r) {
    const auto d = model.draw_signed(r);
    if (!noisy) return value[(d.sign == Sign::Plus ? 0 : n) + d.index];
    return x_of(d.sign, model.observe(d.index, r));
  });
  const double cnt = static_cast<double>(m.count);
  rep.repetitions = m.count;
  rep.mean = m.sum / cnt;
  rep.second_moment = m.sumsq / cnt;
  const double var = std::max(0.0, rep.second_moment - rep.mean * rep.mean);
  rep.value = rep.mean * model.trace();
  rep.std_error = std::sqrt(var / cnt) * model.trace();
  rep.empirical_success = rep.value > 0.0 && rep.std_error <= eps / 4.0 * std::abs(rep.value);
  return rep;
}

inline EstimatorReport estimate_z_supp(const GibbsSpec& spec, const ConsistentEstimator& est, double eps, Rng& rng,
                                       double lambda_min = std::numeric_limits<double>::infinity()) {
  return estimate_z_supp(GibbsModel(spec, est), eps, rng, lambda_min);
}

inline std::uint64_t kernel_repetitions(int rank_bound, double eps) {
  return static_cast<std::uint64_t>(std::ceil(16.0 * std::max(rank_bound, 1) / (eps * eps)));
}

// n - R: fraction of I/n draws whose estimate falls below delta, times n.
inline EstimatorReport estimate_kernel_dim(const GibbsModel& model, double eps, Rng& rng) {
  if (!(eps > 0.0 && eps < 1.0)) throw UsageError("estimate_kernel_dim: eps must lie in (0, 1)");
  EstimatorReport rep;
  rep.target_error = eps;
  rep.constants = {{"repetition_constant", 16.0}, {"r_K", static_cast<double>(model.spec().rank_bound())}};
  const std::uint64_t reps = kernel_repetitions(model.spec().rank_bound(), eps);
  const auto m = detail::chunked_moments(reps, rng, [&](Rng& r) {
    return model.is_kernel(model.observe(model.draw_uniform(r), r)) ? 1.0 : 0.0;
  });
  const double cnt = static_cast<double>(m.count);
  const double n = static_cast<double>(model.dim());
  rep.repetitions = m.count;
  rep.mean = m.sum / cnt;
  rep.second_moment = m.sumsq / cnt;
  rep.value = rep.mean * n;
  rep.std_error = std::sqrt(std::max(0.0, rep.mean * (1.0 - rep.mean)) / cnt) * n;
  rep.empirical_success = rep.std_error <= eps / 4.0 * std::max(rep.value, 1.0);
  return rep;
}

inline EstimatorReport estimate_kernel_dim(const GibbsSpec& spec, const ConsistentEstimator& est, double eps, Rng& rng) {
  return estimate_kernel_dim(GibbsModel(spec, est), eps, rng);
}

struct SupportOptions {
  double lambda_min = std::numeric_limits<double>::infinity();
  bool safety_halving = false;  // extra factor 1/2 in the acceptance rule
};

struct SupportAttempt {
  std::optional<Eigen::Index> accepted;  // eigencomponent index
  bool clamped = false;                  // acceptance probability exceeded 1
};

// mu rounded to precision sqrt(xi) * delta when xi > 0.
inline double rounded_mu(const GibbsModel& model, Eigen::Index i) {
  const double mu = model.mu(i);
  const double step = std::sqrt(model.estimator().xi()) * model.delta();
  if (step <= 0.0) return mu;
  return std::max(step, step * std::round(mu / step));
}

inline SupportAttempt support_attempt(const GibbsModel& model, double z_supp, double eps, Rng& rng,
                                      const SupportOptions& opt = {}) {
  SupportAttempt a;
  const auto d = model.draw_signed(rng);
  const double lt = model.observe(d.index, rng);
  if (!model.passes(lt, opt.lambda_min)) return a;
  double p = model.delta() / rounded_mu(model, d.index) * (1.0 - eps) * std::exp(-lt) / z_supp;
  if (opt.safety_halving) p /= 2.0;
  if (p > 1.0) {
    a.clamped = true;
    p = 1.0;
  }
  if (rng.bernoulli(p)) a.accepted = d.index;
  return a;
}

inline std::optional<DensityMatrix> sample_rho_supp(const GibbsModel& model, double z_supp_estimate, double eps,
                                                    Rng& rng, const SupportOptions& opt = {}) {
  if (!(z_supp_estimate > 0.0)) throw UsageError("sample_rho_supp: z_supp_estimate must be positive");
  if (model.spec().empty()) return std::nullopt;
  const auto a = support_attempt(model, z_supp_estimate, eps, rng, opt);
  if (!a.accepted) return std::nullopt;
  return model.eigenstate(*a.accepted);
}

inline std::optional<DensityMatrix> sample_rho_supp(const GibbsSpec& spec, const ConsistentEstimator& est,
                                                    double z_supp_estimate, double eps, Rng& rng,
                                                    const SupportOptions& opt = {}) {
  return sample_rho_supp(GibbsModel(spec, est), z_supp_estimate, eps, rng, opt);
}

inline std::uint64_t support_attempt_budget(double bound_b, double delta, double eps) {
  return static_cast<std::uint64_t>(std::ceil(8.0 * bound_b / (delta * (1.0 - eps)) * std::log(1.0 / 0.01)));
}

// Repeats support attempts until one accepts; throws ResourceError once the
// attempt budget is spent.
inline Eigen::Index support_until_accept(const GibbsModel& model, double z_supp, double eps, Rng& rng,
                                         const SupportOptions& opt, std::uint64_t* attempts = nullptr,
                                         std::uint64_t* clamps = nullptr) {
  const std::uint64_t budget = support_attempt_budget(model.spec().bound(), model.delta(), eps);
  if (model.spec().empty())
    throw ResourceError("sample_rho_supp: spec has no support terms (attempt budget " + std::to_string(budget) + ")");
  for (std::uint64_t t = 0; t < budget; ++t) {
    const auto a = support_attempt(model, z_supp, eps, rng, opt);
    if (attempts) ++*attempts;
    if (clamps && a.clamped) ++*clamps;
    if (a.accepted) return *a.accepted;
  }
  throw ResourceError("sample_rho_supp: no acceptance within the attempt budget of " + std::to_string(budget) +
                      " (z_supp estimate " + std::to_string(z_supp) + " inconsistent with spec?)");
}

inline DensityMatrix sample_rho_supp_until_accept(const GibbsModel& model, double z_supp, double eps, Rng& rng,
                                                  const SupportOptions& opt = {}) {
  return model.eigenstate(support_until_accept(model, z_supp, eps, rng, opt));
}

// Draw from I/n, accept iff the estimate lands below delta. The accepted
// state is I/n restricted to the rounded-eigenvalue group of the outcome.
inline std::optional<Eigen::Index> kernel_attempt(const GibbsModel& model, Rng& rng) {
  const auto i = model.draw_uniform(rng);
  if (!model.is_kernel(model.observe(i, rng))) return std::nullopt;
  return i;
}

inline std::optional<DensityMatrix> sample_rho_ker(const GibbsModel& model, Rng& rng) {
  const auto i = kernel_attempt(model, rng);
  if (!i) return std::nullopt;
  return model.group_state(*i);
}

inline std::optional<DensityMatrix> sample_rho_ker(const GibbsSpec& spec, const ConsistentEstimator& est, Rng& rng) {
  return sample_rho_ker(GibbsModel(spec, est), rng);
}

inline DensityMatrix exact_gibbs(const GibbsSpec& spec) { return gibbs_of(spec.k()); }

// (1/Z') (sum_{|l|>=delta} e^{-l} |v><v| + sum_{|l|<delta} |v><v|), true eigenvalues.
inline DensityMatrix ideal_mixture(const GibbsSpec& spec, double delta) {
  const Spectrum s = eigh(spec.k());
  RealVector w(s.dim());
  const double lo = std::min(0.0, s.eigenvalues(0));
  for (Eigen::Index i = 0; i < s.dim(); ++i) {
    const double l = s.eigenvalues(i);
    w(i) = std::abs(l) >= delta ? std::exp(-(l - lo)) : std::exp(lo);
  }
  return DensityMatrix::from_spectrum(s.eigenvectors, w);
}

// Same mixture with rounded eigenvalues and the rounded kernel test.
inline DensityMatrix rounded_mixture(const GibbsModel& model, double lambda_min = std::numeric_limits<double>::infinity()) {
  RealVector w(model.dim());
  for (Eigen::Index i = 0; i < model.dim(); ++i) {
    const double lt = model.rounded()(i);
    w(i) = model.is_kernel(lt) ? 1.0 : (model.passes(lt, lambda_min) ? std::exp(-lt) : 0.0);
  }
  return DensityMatrix::from_spectrum(model.spectrum().eigenvectors, w);
}

struct PrepareOptions {
  double xi = 0.0;
  double gamma = 0.01;           // lambda_min failure probability
  bool safety_halving = false;
  std::optional<double> delta;   // default eps / 8
  std::optional<std::uint64_t> samples;  // default ceil(64 n / eps^2)
};

struct GibbsDiagnostics {
  double delta = 0.0;
  double shift = 0.0;
  double xi = 0.0;
  double lambda_min = std::numeric_limits<double>::infinity();
  EstimatorReport z_supp;
  EstimatorReport kernel;
  double z_prime = 0.0;
  double support_probability = 0.0;
  std::uint64_t samples = 0;
  std::uint64_t support_accepted = 0;
  std::uint64_t support_attempts = 0;
  std::uint64_t kernel_accepted = 0;
  std::uint64_t kernel_attempts = 0;
  std::uint64_t clamps = 0;
  std::uint64_t eigendecompositions = 0;
  bool kernel_only = false;

  double support_acceptance_rate() const {
    return support_attempts ? static_cast<double>(support_accepted) / static_cast<double>(support_attempts) : 0.0;
  }
  double kernel_acceptance_rate() const {
    return kernel_attempts ? static_cast<double>(kernel_accepted) / static_cast<double>(kernel_attempts) : 0.0;
  }
};

struct GibbsPreparation {
  DensityMatrix state;
  GibbsDiagnostics diagnostics;
};

inline std::uint64_t kernel_attempt_budget(Eigen::Index n) {
  return static_cast<std::uint64_t>(std::ceil(8.0 * static_cast<double>(n) * std::log(1.0 / 0.01)));
}

// Mixture of the support and kernel samplers with weights Z_supp/Z' and
// (n - R)/Z', returned as the empirical average of accepted states.
inline GibbsPreparation prepare_gibbs(const GibbsSpec& spec, double eps, Rng& rng, const PrepareOptions& opt = {}) {
  if (!(eps > 0.0 && eps < 1.0)) throw UsageError("prepare_gibbs: eps must lie in (0, 1)");
  const auto n = spec.dim();
  GibbsDiagnostics diag;
  diag.delta = opt.delta.value_or(eps / 8.0);
  diag.xi = opt.xi;
  diag.samples = opt.samples.value_or(
      static_cast<std::uint64_t>(std::ceil(64.0 * static_cast<double>(n) / (eps * eps))));
  const ConsistentEstimator est = ConsistentEstimator::draw(diag.delta, opt.xi, rng);
  diag.shift = est.shift();
  if (spec.empty()) {
    diag.kernel_only = true;
    diag.kernel.value = static_cast<double>(n);
    diag.kernel.empirical_success = true;
    diag.z_prime = static_cast<double>(n);
    return {DensityMatrix::maximally_mixed(n), diag};
  }
  const GibbsModel model(spec, est);
  diag.eigendecompositions = 1;
  diag.lambda_min = estimate_lambda_min(model, opt.gamma, rng);
  diag.z_supp = estimate_z_supp(model, eps, rng, diag.lambda_min);
  diag.kernel = estimate_kernel_dim(model, eps, rng);
  const double zs = std::max(0.0, diag.z_supp.value);
  const double ker = std::max(0.0, diag.kernel.value);
  diag.z_prime = zs + ker;
  if (!(diag.z_prime > 0.0)) throw ResourceError("prepare_gibbs: both mixture weights estimated as zero");
  diag.support_probability = zs / diag.z_prime;

  const SupportOptions sopt{diag.lambda_min, opt.safety_halving};
  RealVector weights = RealVector::Zero(n);
  const std::uint64_t ker_budget = kernel_attempt_budget(n);
  for (std::uint64_t t = 0; t < diag.samples; ++t) {
    if (rng.bernoulli(diag.support_probability)) {
      const auto i = support_until_accept(model, zs, eps, rng, sopt, &diag.support_attempts, &diag.clamps);
      weights(i) += 1.0;
      ++diag.support_accepted;
    } else {
      std::optional<Eigen::Index> i;
      for (std::uint64_t a = 0; a < ker_budget && !i; ++a) {
        ++diag.kernel_attempts;
        i = kernel_attempt(model, rng);
      }
      if (!i) throw ResourceError("sample_rho_ker: no acceptance within the attempt budget of " +
                                  std::to_string(ker_budget));
      const auto& g = model.group(*i);
      for (auto j : g) weights(j) += 1.0 / static_cast<double>(g.size());
      ++diag.kernel_accepted;
    }
  }
  return {DensityMatrix::from_spectrum(model.spectrum().eigenvectors, weights), diag};
}

}  // namespace mmwqsdp

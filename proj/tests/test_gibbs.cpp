#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include <mmwqsdp/fixtures.hpp>
#include <mmwqsdp/gibbs.hpp>

using namespace mmwqsdp;

namespace {

// K = sum_i w_i |i><i| with positive w_i on the plus side, negative on the minus side.
GibbsSpec diagonal_spec(const std::vector<double>& k, double bound = -1.0, int rank = -1) {
  const auto n = static_cast<Eigen::Index>(k.size());
  std::vector<GibbsTerm> plus, minus;
  double total = 0.0;
  int nonzero = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (k[i] == 0.0) continue;
    ++nonzero;
    total += std::abs(k[i]);
    GibbsTerm t{1.0, DensityMatrix::basis(n, i), std::abs(k[i])};
    (k[i] > 0 ? plus : minus).push_back(std::move(t));
  }
  return GibbsSpec(n, std::move(plus), std::move(minus), bound < 0 ? total : bound, rank < 0 ? nonzero : rank);
}

const GibbsSpec& pm_spec() {
  static const GibbsSpec s = diagonal_spec({1.0, -1.0, 0.0, 0.0});
  return s;
}

double diag_entry(const DensityMatrix& r, Eigen::Index i) { return r.matrix()(i, i).real(); }

}  // namespace

TEST(Spec, Validation) {
  const auto st = DensityMatrix::basis(2, 0);
  EXPECT_THROW(GibbsSpec(2, {GibbsTerm{0.0, st, 1.0}}, {}, 1.0, 1), ContractViolation);
  EXPECT_THROW(GibbsSpec(2, {GibbsTerm{1.0, st, -1.0}}, {}, 1.0, 1), ContractViolation);
  EXPECT_THROW(GibbsSpec(2, {GibbsTerm{1.0, st, 1.0}}, {GibbsTerm{1.0, st, 1.0}}, 1.5, 1), ContractViolation);
  EXPECT_THROW(GibbsSpec(3, {GibbsTerm{1.0, st, 1.0}}, {}, 1.0, 1), ContractViolation);
}

TEST(AssembleK, Examples) {
  const auto [k0, s0] = assemble_k(GibbsSpec::empty_spec(3));
  EXPECT_EQ(k0.matrix().cwiseAbs().maxCoeff(), 0.0);

  const auto [k1, s1] = assemble_k(diagonal_spec({1.0, 0.0, 0.0, 0.0}));
  EXPECT_LE((k1.matrix() - HermitianMatrix::diagonal({1.0, 0.0, 0.0, 0.0}).matrix()).norm(), 1e-15);

  const auto [k2, s2] = assemble_k(pm_spec());
  EXPECT_NEAR(s2.eigenvalues(0), -1.0, 1e-14);
  EXPECT_NEAR(s2.eigenvalues(1), 0.0, 1e-14);
  EXPECT_NEAR(s2.eigenvalues(2), 0.0, 1e-14);
  EXPECT_NEAR(s2.eigenvalues(3), 1.0, 1e-14);
}

TEST(AssembleK, RankBoundEnforced) {
  EXPECT_THROW(assemble_k(diagonal_spec({1.0, 0.5, 0.25, 0.0}, -1.0, 1)), ContractViolation);
  EXPECT_NO_THROW(assemble_k(diagonal_spec({1.0, 0.5, 0.0, 0.0}, -1.0, 1)));
}

TEST(ConsistentEstimator, RoundingContract) {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const double delta = rng.uniform(0.01, 0.5);
    const auto est = ConsistentEstimator::draw(delta, 0.0, rng);
    ASSERT_GE(est.shift(), 0.0);
    ASSERT_LT(est.shift(), delta);
    const double lambda = rng.uniform(-5.0, 5.0);
    const double f = est.round(lambda);
    EXPECT_LE(std::abs(f - lambda), delta / 2 + 1e-12);
    EXPECT_EQ(f, est.round(lambda));
    EXPECT_EQ(f, est.sample(lambda, rng));
  }
  EXPECT_THROW(ConsistentEstimator(0.2, 0.1), UsageError);
  EXPECT_THROW(ConsistentEstimator(0.0, 0.0), UsageError);
}

TEST(ConsistentEstimator, CorruptionRate) {
  const ConsistentEstimator est(0.01, 0.1, 0.2);
  Rng rng(2);
  int bad = 0;
  for (int i = 0; i < 20000; ++i) {
    bool c = false;
    const double v = est.sample(0.3, rng, &c);
    bad += c;
    if (c) {
      EXPECT_NEAR(std::abs(v - est.round(0.3)), 0.1, 1e-12);
    }
  }
  EXPECT_NEAR(bad / 20000.0, 0.2, 0.01);
}

TEST(EigSample, ZeroOperatorIsKernel) {
  const GibbsModel model(GibbsSpec::empty_spec(3), ConsistentEstimator(0.03, 0.1));
  EXPECT_TRUE(model.is_kernel(model.rounded()(0)));
  EXPECT_LE(std::abs(model.rounded()(0)), 0.05 + 1e-15);
}

TEST(EigSample, BornFrequencies) {
  const auto spec = diagonal_spec({1.0, -1.0});
  const auto [k, s] = assemble_k(spec);
  const ConsistentEstimator est(0.037, 0.1);
  Rng rng(3);
  int plus = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto e = consistent_eig_sample(est, s, DensityMatrix::maximally_mixed(2), rng);
    ASSERT_TRUE(e.lambda_tilde == est.round(1.0) || e.lambda_tilde == est.round(-1.0));
    plus += e.lambda_tilde == est.round(1.0);
  }
  EXPECT_NEAR(plus / 1000.0, 0.5, 0.05);
}

TEST(EigSample, NearbyEigenvaluesMerge) {
  const double delta = 0.1;
  Rng rng(4);
  int same = 0;
  for (int t = 0; t < 200; ++t) {
    const auto est = ConsistentEstimator::draw(delta, 0.0, rng);
    same += est.round(0.5) == est.round(0.5 + delta / 4);
  }
  EXPECT_GE(same, 140);
}

TEST(ZSupp, ZeroSpecIsZero) {
  Rng rng(1);
  const auto rep = estimate_z_supp(GibbsSpec::empty_spec(4), ConsistentEstimator(0.0, 0.05), 0.1, rng);
  EXPECT_EQ(rep.value, 0.0);
  EXPECT_EQ(rep.repetitions, 0u);
}

TEST(ZSupp, PlusMinusOneWithinTenPercent) {
  const double exact = std::exp(1.0) + std::exp(-1.0);
  int ok = 0;
  const int runs = 20;
  for (int s = 0; s < runs; ++s) {
    Rng rng(100 + s);
    const auto est = ConsistentEstimator::draw(0.05, 0.0, rng);
    const auto rep = estimate_z_supp(pm_spec(), est, 0.1, rng);
    EXPECT_EQ(rep.repetitions, z_supp_repetitions(2.0, 0.05, 0.1));
    ok += std::abs(rep.value - exact) <= 0.1 * exact;
  }
  EXPECT_GE(ok, runs * 9 / 10);
}

TEST(ZSupp, SingleEigenvalue) {
  const auto spec = diagonal_spec({2.0, 0.0});
  Rng rng(5);
  const auto est = ConsistentEstimator::draw(0.05, 0.0, rng);
  const auto rep = estimate_z_supp(spec, est, 0.1, rng);
  // only draws hit lambda = 2, so the estimate is deterministic up to rounding
  EXPECT_NEAR(rep.value, 2.0 * std::exp(-est.round(2.0)) / est.round(2.0), 1e-12);
  EXPECT_NEAR(rep.value / std::exp(-2.0), 1.0, 0.1 + 0.05);
}

TEST(ZSupp, UnbiasedAgainstRoundedSpectrum) {
  Rng g(7);
  for (int t = 0; t < 5; ++t) {
    const auto spec = fixtures::low_rank_gibbs(6, 2, 1, 3.0, 50 + t);
    const auto est = ConsistentEstimator::draw(0.1, 0.0, g);
    const GibbsModel model(spec, est);
    Rng rng(t);
    const auto rep = estimate_z_supp(model, 0.2, rng);
    const double want_mean = model.z_supp_expectation() / model.trace();
    EXPECT_NEAR(rep.mean, want_mean, 4.0 * rep.std_error / model.trace() + 1e-12) << t;
    EXPECT_LE(rep.second_moment, 1.1 * std::pow(rep.value, 2) / std::pow(model.delta(), 2)) << t;
  }
}

TEST(LambdaMin, Examples) {
  Rng rng(8);
  const auto est = ConsistentEstimator::draw(0.05, 0.0, rng);
  int hits = 0;
  for (int t = 0; t < 50; ++t) hits += estimate_lambda_min(pm_spec(), est, 0.01, rng) == est.round(-1.0);
  EXPECT_GE(hits, 49);
  EXPECT_GE(estimate_lambda_min(diagonal_spec({0.7, 0.2, 0.0}), est, 0.01, rng), 0.05 / 2);
  EXPECT_TRUE(std::isinf(estimate_lambda_min(GibbsSpec::empty_spec(3), est, 0.01, rng)));
  EXPECT_THROW(estimate_lambda_min(pm_spec(), est, 1.0, rng), UsageError);
}

TEST(KernelDim, Examples) {
  Rng rng(9);
  const auto est = ConsistentEstimator::draw(0.05, 0.0, rng);
  EXPECT_EQ(estimate_kernel_dim(GibbsSpec::empty_spec(8), est, 0.1, rng).value, 8.0);
  int ok = 0;
  for (int t = 0; t < 100; ++t) ok += std::abs(estimate_kernel_dim(pm_spec(), est, 0.1, rng).value - 2.0) <= 0.2;
  EXPECT_GE(ok, 90);
  EXPECT_EQ(estimate_kernel_dim(diagonal_spec({0.5, -0.5, 0.3, -0.7}), est, 0.1, rng).value, 0.0);
}

TEST(SupportSampler, SinglePassingEigenvalue) {
  const auto spec = diagonal_spec({0.8, 0.0, 0.0});
  Rng rng(10);
  const GibbsModel model(spec, ConsistentEstimator::draw(0.05, 0.0, rng));
  const double z = model.z_supp_rounded();
  int accepted = 0;
  for (int t = 0; t < 2000; ++t) {
    const auto r = sample_rho_supp(model, z, 0.1, rng);
    if (!r) continue;
    ++accepted;
    EXPECT_NEAR(diag_entry(*r, 0), 1.0, 1e-12);
  }
  EXPECT_GT(accepted, 0);
  EXPECT_THROW(sample_rho_supp(model, 0.0, 0.1, rng), UsageError);
}

TEST(SupportSampler, LogTwoMixture) {
  const double l2 = std::log(2.0);
  const auto spec = diagonal_spec({l2, -l2, 0.0, 0.0});
  Rng rng(11);
  const GibbsModel model(spec, ConsistentEstimator::draw(0.05, 0.0, rng));
  const double z = model.z_supp_rounded();
  const double eps = 0.1;
  RealVector w = RealVector::Zero(4);
  std::uint64_t attempts = 0;
  for (int t = 0; t < 5000; ++t) w(support_until_accept(model, z, eps, rng, {}, &attempts)) += 1.0;
  const auto mix = DensityMatrix::from_spectrum(model.spectrum().eigenvectors, w);
  EXPECT_LE(trace_distance(mix, DensityMatrix(HermitianMatrix::diagonal({0.2, 0.8, 0.0, 0.0}))), 0.05);
  const double rate = 5000.0 / static_cast<double>(attempts);
  EXPECT_GE(rate, model.delta() * (1 - eps) / (spec.bound() * (1 + eps)) - 0.02);
}

TEST(SupportSampler, SafetyHalvingHalvesAcceptance) {
  Rng rng(12);
  const GibbsModel model(pm_spec(), ConsistentEstimator::draw(0.05, 0.0, rng));
  const double z = model.z_supp_rounded();
  std::uint64_t full = 0, half = 0;
  for (int t = 0; t < 1000; ++t) {
    support_until_accept(model, z, 0.1, rng, {}, &full);
    support_until_accept(model, z, 0.1, rng, SupportOptions{std::numeric_limits<double>::infinity(), true}, &half);
  }
  EXPECT_NEAR(static_cast<double>(half) / static_cast<double>(full), 2.0, 0.15);
}

TEST(KernelSampler, ZeroOperatorAlwaysAccepts) {
  Rng rng(13);
  const GibbsSpec spec = GibbsSpec::empty_spec(3);
  const auto est = ConsistentEstimator::draw(0.05, 0.0, rng);
  for (int t = 0; t < 50; ++t) {
    const auto r = sample_rho_ker(spec, est, rng);
    ASSERT_TRUE(r);
    EXPECT_LE(trace_distance(*r, DensityMatrix::maximally_mixed(3)), 1e-12);
  }
}

TEST(KernelSampler, PlusMinusOne) {
  Rng rng(14);
  const GibbsModel model(pm_spec(), ConsistentEstimator::draw(0.05, 0.0, rng));
  int acc = 0;
  Matrix mix = Matrix::Zero(4, 4);
  for (int t = 0; t < 2000; ++t) {
    const auto r = sample_rho_ker(model, rng);
    if (!r) continue;
    ++acc;
    mix += r->matrix();
  }
  EXPECT_NEAR(acc / 2000.0, 0.5, 0.03);
  const DensityMatrix avg = DensityMatrix::trusted(mix / acc);
  EXPECT_LE(trace_distance(avg, DensityMatrix(HermitianMatrix::diagonal({0.0, 0.0, 0.5, 0.5}))), 0.05);
}

TEST(KernelSampler, FullRankRejectsUpToCorruption) {
  const auto spec = diagonal_spec({0.5, -0.5, 0.3, -0.7});
  Rng rng(15);
  for (double xi : {0.0, 0.05}) {
    const GibbsModel model(spec, ConsistentEstimator::draw(0.05, xi, rng));
    int acc = 0;
    for (int t = 0; t < 2000; ++t) acc += kernel_attempt(model, rng).has_value();
    EXPECT_LE(acc / 2000.0, xi + 0.01);
  }
}

TEST(Prepare, ZeroOperatorIsExactlyMaximallyMixed) {
  Rng rng(16);
  const auto p = prepare_gibbs(GibbsSpec::empty_spec(5), 0.2, rng);
  EXPECT_EQ((p.state.matrix() - Matrix::Identity(5, 5) / 5.0).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_TRUE(p.diagnostics.kernel_only);
}

TEST(Prepare, PlusMinusOne) {
  const DensityMatrix exact = gibbs_of(pm_spec().k());
  const double e = std::exp(1.0);
  EXPECT_NEAR(diag_entry(exact, 0), 1 / e / (1 / e + e + 2), 1e-14);
  int ok = 0;
  const int runs = 10;
  for (int s = 0; s < runs; ++s) {
    Rng rng(200 + s);
    const auto p = prepare_gibbs(pm_spec(), 0.2, rng);
    ok += trace_distance(p.state, exact) <= 0.2;
    EXPECT_EQ(p.diagnostics.delta, 0.2 / 8);
    EXPECT_EQ(p.diagnostics.samples, static_cast<std::uint64_t>(std::ceil(64 * 4 / 0.04)));
  }
  EXPECT_GE(ok, runs * 9 / 10);
}

TEST(Prepare, RandomRankTwo) {
  const auto spec = fixtures::low_rank_gibbs(16, 2, 2, 4.0, 77);
  const DensityMatrix exact = exact_gibbs(spec);
  int ok = 0;
  for (int s = 0; s < 5; ++s) {
    Rng rng(300 + s);
    ok += trace_distance(prepare_gibbs(spec, 0.25, rng).state, exact) <= 0.25;
  }
  EXPECT_GE(ok, 4);
}

TEST(Prepare, MergedEigenvalues) {
  // eigenvalues 0.5 and 0.5 + delta/8 on the plus side, one negative
  const double delta = 0.2 / 8;
  const auto spec = diagonal_spec({0.5, 0.5 + delta / 8, -0.4, 0.0}, -1.0, 2);
  const DensityMatrix exact = exact_gibbs(spec);
  int ok = 0;
  for (int s = 0; s < 5; ++s) {
    Rng rng(400 + s);
    ok += trace_distance(prepare_gibbs(spec, 0.2, rng).state, exact) <= 0.2;
  }
  EXPECT_GE(ok, 4);
}

TEST(Mixture, IdealWithinFourDelta) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto spec = fixtures::low_rank_gibbs(8, 1 + seed % 3, seed % 4, 0.5 + seed % 4, seed);
    for (double delta : {0.01, 0.025, 0.1}) {
      const double td = trace_distance(ideal_mixture(spec, delta), exact_gibbs(spec));
      EXPECT_LE(td, 4 * delta + 1e-6) << seed << " " << delta;
    }
  }
}

TEST(Mixture, RoundedMatchesSamplerTarget) {
  Rng rng(17);
  const GibbsModel model(pm_spec(), ConsistentEstimator::draw(0.025, 0.0, rng));
  const DensityMatrix r = rounded_mixture(model);
  EXPECT_LE(trace_distance(r, exact_gibbs(pm_spec())), 4 * 0.025 + 0.05);
}

TEST(Prepare, Deterministic) {
  const auto spec = fixtures::low_rank_gibbs(4, 1, 1, 2.0, 3);
  Rng a(5), b(5);
  EXPECT_EQ(prepare_gibbs(spec, 0.25, a).state.matrix(), prepare_gibbs(spec, 0.25, b).state.matrix());
}

#include <cmath>

#include <gtest/gtest.h>

#include <mmwqsdp/fixtures.hpp>
#include <mmwqsdp/mmw.hpp>

using namespace mmwqsdp;

namespace {

HermitianMatrix random_psd_gain(Eigen::Index n, Rng& rng) {
  // spectrum uniform in [0, 1], random eigenbasis
  const Spectrum s = eigh(fixtures::random_hermitian(n, rng));
  RealVector w(n);
  for (Eigen::Index i = 0; i < n; ++i) w(i) = rng.uniform();
  return HermitianMatrix::trusted(s.eigenvectors * w.cast<Complex>().asDiagonal() * s.eigenvectors.adjoint());
}

}  // namespace

TEST(RoundCap, Formula) {
  EXPECT_EQ(round_cap(8, 0.5), 134u);
  EXPECT_EQ(round_cap(16, 0.2), 1110u);
  EXPECT_EQ(round_cap(1, 0.1), 1u);
  EXPECT_EQ(round_cap(2, 0.25), static_cast<std::size_t>(std::ceil(16.0 * std::log(2.0) / 0.0625)));
}

TEST(MwRound, IdentityGainKeepsMaximallyMixed) {
  const MwState s0(3, 0.25);
  const MwState s1 = mw_round(s0, HermitianMatrix::identity(3) * 0.5);
  EXPECT_EQ(s1.round(), 1u);
  EXPECT_LE((s1.rho().matrix() - Matrix::Identity(3, 3) / 3.0).cwiseAbs().maxCoeff(), 1e-15);
}

// The weight grows along gain directions: rho = exp(delta sum M) / tr.
TEST(MwRound, SingleRoundFavoursGainDirection) {
  const MwState s1 = mw_round(MwState(2, 0.5), HermitianMatrix::diagonal({1.0, 0.0}));
  EXPECT_NEAR(s1.rho().matrix()(0, 0).real(), 0.6224593312018546, 1e-12);
  EXPECT_NEAR(s1.rho().matrix()(1, 1).real(), 0.3775406687981454, 1e-12);
  const MwState s2 = mw_round(MwState(2, 0.5), HermitianMatrix::diagonal({0.0, 1.0}));
  EXPECT_NEAR(s2.rho().matrix()(0, 0).real(), 0.3775406687981454, 1e-12);
}

TEST(MwRound, TwoRoundsAdd) {
  const auto g = HermitianMatrix::diagonal({1.0, 0.0});
  const MwState s = mw_round(mw_round(MwState(2, 0.5), g), g);
  EXPECT_EQ(s.round(), 2u);
  EXPECT_NEAR(s.rho().matrix()(0, 0).real(), 0.7310585786300049, 1e-12);
  EXPECT_NEAR(s.rho().matrix()(1, 1).real(), 1.0 - 0.7310585786300049, 1e-12);
}

TEST(MwRound, RejectsGainOutsideUnitInterval) {
  EXPECT_THROW(mw_round(MwState(2, 0.5), HermitianMatrix::diagonal({1.5, 0.0})), ContractViolation);
  EXPECT_THROW(mw_round(MwState(2, 0.5), HermitianMatrix::diagonal({-0.1, 0.0})), ContractViolation);
  EXPECT_THROW(mw_round(MwState(2, 0.5), HermitianMatrix::identity(3)), UsageError);
}

TEST(MwRound, StateMatchesGibbsOfSum) {
  Rng rng(12);
  MwState s(4, 0.3);
  Matrix sum = Matrix::Zero(4, 4);
  for (int t = 0; t < 25; ++t) {
    const HermitianMatrix g = random_psd_gain(4, rng);
    sum += g.matrix();
    s = mw_round(s, g);
  }
  const DensityMatrix want = gibbs_of(HermitianMatrix::trusted(-0.3 * sum));
  EXPECT_LE(trace_distance(s.rho(), want), 1e-9);
}

TEST(Solve, ZeroConstraintFeasibleAtRoundOne) {
  const SdpInstance inst({{HermitianMatrix::zero(3), 0.0}}, 0.1);
  ExactOracle oracle(inst);
  Rng rng(1);
  const auto res = solve_feasibility(inst, oracle, rng);
  EXPECT_EQ(res.verdict, Verdict::Feasible);
  EXPECT_EQ(res.rounds_used, 1u);
  ASSERT_TRUE(res.witness);
  EXPECT_LE((res.witness->matrix() - Matrix::Identity(3, 3) / 3.0).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(res.counters.at("oracle_calls"), 1u);
}

TEST(Solve, LowerBoundFixtureInfeasible) {
  // a_{j*} = -1/2 at the second constraint, i* = 0
  const SdpInstance inst = fixtures::lower_bound(4, 3, 0.25, 0, Eigen::Index{0}, std::size_t{1});
  EXPECT_EQ(inst.constraint(1).bound, -0.5);
  EXPECT_EQ(inst.constraint(0).bound, 0.5);
  ExactOracle oracle(inst);
  Rng rng(1);
  const auto res = solve_feasibility(inst, oracle, rng);
  EXPECT_EQ(res.verdict, Verdict::Infeasible);
  EXPECT_EQ(res.rounds_used, round_cap(4, 0.25));
  EXPECT_FALSE(res.witness);
  for (auto j : res.violated) EXPECT_EQ(j, 1u);
}

TEST(Solve, LowerBoundFamilyInfeasible) {
  for (Eigen::Index n : {2, 5, 16, 64})
    for (std::size_t m : {1u, 7u, 64u}) {
      const SdpInstance inst = fixtures::lower_bound(n, m, 0.25, 100 + n + m);
      ExactOracle oracle(inst);
      Rng rng(2);
      SolveOptions opt;
      opt.record_history = false;
      EXPECT_EQ(solve_feasibility(inst, oracle, rng, opt).verdict, Verdict::Infeasible) << n << " " << m;
    }
}

TEST(Solve, PlantedFeasibleWitnessWithinEps) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto p = fixtures::planted_feasible(6, 10, 0.25, 0.0, seed);
    ExactOracle oracle(p.instance);
    Rng rng(seed);
    const auto res = solve_feasibility(p.instance, oracle, rng);
    ASSERT_EQ(res.verdict, Verdict::Feasible);
    EXPECT_LE(p.instance.max_violation(*res.witness), 0.25);
    EXPECT_NEAR(res.exact_max_violation, p.instance.max_violation(*res.witness), 1e-15);
    EXPECT_EQ(res.violated.size() + 1, res.rounds_used);
  }
}

TEST(Solve, DeltaOverrideIsHonoured) {
  const auto p = fixtures::planted_feasible(4, 5, 0.25, 0.0, 3);
  ExactOracle oracle(p.instance);
  Rng rng(1);
  SolveOptions opt;
  opt.delta = 0.125;
  const auto res = solve_feasibility(p.instance, oracle, rng, opt);
  EXPECT_EQ(res.delta, 0.125);
}

TEST(Regret, EmptyHistory) {
  const auto a = regret_audit({}, 0.25, DensityMatrix::maximally_mixed(4));
  EXPECT_EQ(a.lhs, 0.0);
  EXPECT_NEAR(a.rhs, -std::log(4.0) / 0.25, 1e-15);
  EXPECT_TRUE(a.passes);
}

TEST(Regret, SingleRound) {
  Rng rng(4);
  const auto g = random_psd_gain(3, rng);
  const MwState s(3, 0.2);
  const auto a = regret_audit({{g, s.rho()}}, 0.2, s.rho());
  EXPECT_NEAR(a.lhs, 1.2 * trace_inner(g, s.rho()), 1e-14);
  EXPECT_TRUE(a.passes);
}

TEST(Regret, TwoHundredRandomGains) {
  Rng rng(5);
  MwState s(8, 0.1);
  std::vector<std::pair<HermitianMatrix, DensityMatrix>> h;
  for (int t = 0; t < 200; ++t) {
    auto g = random_psd_gain(8, rng);
    h.emplace_back(g, s.rho());
    s = mw_round(s, g);
  }
  const auto probe = fixtures::random_density(8, 3, rng);
  EXPECT_TRUE(regret_audit(h, 0.1, probe).passes);
  // the top eigenvector of sum M is the tightest probe
  Matrix sum = Matrix::Zero(8, 8);
  for (const auto& [g, r] : h) sum += g.matrix();
  const Spectrum sp = eigh(sum);
  const auto a = regret_audit(h, 0.1, DensityMatrix::pure(sp.eigenvectors.col(7)));
  EXPECT_TRUE(a.passes) << a.slack();
}

TEST(Regret, RejectsIndefiniteGainAndBadDelta) {
  const auto r = DensityMatrix::maximally_mixed(2);
  EXPECT_THROW(regret_audit({{HermitianMatrix::diagonal({0.5, -0.5}), r}}, 0.2, r), ContractViolation);
  EXPECT_THROW(regret_audit({}, 0.7, r), UsageError);
  EXPECT_THROW(regret_audit({}, 0.0, r), UsageError);
  // negative semidefinite gains are weighted by (1 - delta)
  const auto a = regret_audit({{HermitianMatrix::diagonal({-0.5, -0.5}), r}}, 0.2, r);
  EXPECT_NEAR(a.lhs, 0.8 * -0.5, 1e-15);
}

TEST(Regret, SolverRunsPassAuditForProbes) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const SdpInstance inst = seed == 0 ? fixtures::lower_bound(4, 3, 0.25, 9)
                                       : fixtures::planted_feasible(5, 8, 0.1, 0.0, seed).instance;
    ExactOracle oracle(inst);
    Rng rng(seed);
    const auto res = solve_feasibility(inst, oracle, rng);
    const auto h = regret_history(inst, res);
    for (int p = 0; p < 20; ++p)
      EXPECT_TRUE(regret_audit(h, res.delta, fixtures::random_density(inst.dim(), 1 + p % 3, rng)).passes);
    for (Eigen::Index k = 0; k < inst.dim(); ++k)
      EXPECT_TRUE(regret_audit(h, res.delta, DensityMatrix::basis(inst.dim(), k)).passes);
  }
}

TEST(Instance, Validation) {
  EXPECT_THROW(SdpInstance({}, 0.1), ContractViolation);
  EXPECT_THROW(SdpInstance({{HermitianMatrix::diagonal({1.5, 0.0}), 0.0}}, 0.1), ContractViolation);
  EXPECT_THROW(SdpInstance({{HermitianMatrix::zero(2), 0.0}}, 1.5), ContractViolation);
  EXPECT_THROW(SdpInstance({{HermitianMatrix::zero(2), 0.0}, {HermitianMatrix::zero(3), 0.0}}, 0.1),
               ContractViolation);
}

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include <mmwqsdp/fixtures.hpp>
#include <mmwqsdp/orsim.hpp>

using namespace mmwqsdp;

namespace {

// Random diagonal projectors on C^d with a random input state.
OrInstance random_diagonal_instance(std::size_t m, Eigen::Index d, Rng& rng, double eps = 0.25, double phi = 0.0,
                                    double xi = 0.05) {
  std::vector<HermitianMatrix> proj;
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> diag(d);
    for (auto& x : diag) x = rng.bernoulli(0.4) ? 1.0 : 0.0;
    proj.push_back(HermitianMatrix::diagonal(std::span<const double>(diag)));
  }
  return OrInstance(std::move(proj), fixtures::random_density(d, 1 + rng.below(d), rng), eps, phi, xi);
}

// Random rank-r projectors in a random basis.
OrInstance random_dense_instance(std::size_t m, Eigen::Index d, Rng& rng) {
  std::vector<HermitianMatrix> proj;
  for (std::size_t i = 0; i < m; ++i) {
    const Spectrum s = eigh(fixtures::random_hermitian(d, rng));
    const auto r = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(d) + 1));
    const Matrix v = s.eigenvectors.leftCols(r);
    proj.push_back(HermitianMatrix::trusted(v * v.adjoint()));
  }
  return OrInstance(std::move(proj), fixtures::random_density(d, 2, rng), 0.25, 0.0, 0.05);
}

double rate(const OrInstance& inst, std::size_t trials, std::uint64_t seed) {
  Rng rng(seed);
  return static_cast<double>(OrTester(inst).run(trials, rng)) / static_cast<double>(trials);
}

}  // namespace

TEST(OrInstance, Validation) {
  const auto rho = DensityMatrix::maximally_mixed(2);
  EXPECT_THROW(OrInstance({HermitianMatrix::diagonal({0.5, 0.0})}, rho, 0.2, 0.0, 0.05), ContractViolation);
  EXPECT_THROW(OrInstance({HermitianMatrix::diagonal({1.0, 0.0})}, rho, 0.6, 0.0, 0.05), ContractViolation);
  EXPECT_THROW(OrInstance({HermitianMatrix::diagonal({1.0, 0.0})}, rho, 0.2, 0.0, 0.0), ContractViolation);
  EXPECT_THROW(OrInstance({}, rho, 0.2, 0.0, 0.05), ContractViolation);
  const OrInstance ok({HermitianMatrix::diagonal({1.0, 0.0})}, rho, 0.2, 0.01, 0.05);
  EXPECT_NEAR(ok.case1_bound(), 0.64 / 4 - 0.05, 1e-15);
  EXPECT_NEAR(ok.case2_bound(), 0.03 + 0.05, 1e-15);
  EXPECT_TRUE(ok.gap_condition());
}

TEST(GroverSpec, Angles) {
  for (std::size_t m : {1u, 2u, 8u, 100u})
    for (double eps : {0.01, 0.25, 0.5}) {
      const auto g = GroverSpec::make(m, eps);
      EXPECT_NEAR(g.lambda_thresh, (1 - eps) / (2.0 * m), 1e-15);
      EXPECT_GT(g.angle_a, 0.0);
      EXPECT_LT(g.angle_a, g.angle_b);
      EXPECT_LT(g.angle_b, std::numbers::pi / 2);
      EXPECT_GE(g.ancilla_dim, m);
      EXPECT_EQ(g.ancilla_dim & (g.ancilla_dim - 1), 0u);
    }
}

TEST(BuildIterate, SingleIdentityProjector) {
  const OrInstance inst({HermitianMatrix::identity(3)}, DensityMatrix::maximally_mixed(3), 0.25, 0.0, 0.05);
  const auto it = build_iterate(inst);
  EXPECT_EQ(it.ancilla_dim, 1);
  const Matrix dpd = it.delta * it.pi * it.delta;
  EXPECT_LE((dpd - with_ancilla_zero(projector_average(inst), 1)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(BuildIterate, ZeroProjectors) {
  const OrInstance inst({HermitianMatrix::zero(3), HermitianMatrix::zero(3)}, DensityMatrix::maximally_mixed(3), 0.25,
                        0.0, 0.05);
  const auto it = build_iterate(inst);
  EXPECT_EQ(it.pi.cwiseAbs().maxCoeff(), 0.0);
  const Matrix want = Matrix::Identity(6, 6) - 2.0 * it.delta;
  EXPECT_LE((it.g - want).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(BuildIterate, UnitaryAndProjectorAverageIdentity) {
  Rng rng(7);
  for (int t = 0; t < 10; ++t) {
    const auto inst = t % 2 ? random_diagonal_instance(4, 5, rng) : random_dense_instance(3 + t % 4, 4, rng);
    const auto it = build_iterate(inst);
    const auto n = it.g.rows();
    EXPECT_LE((it.g.adjoint() * it.g - Matrix::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((it.pi * it.pi - it.pi).cwiseAbs().maxCoeff(), 1e-10);
    const Matrix dpd = it.delta * it.pi * it.delta;
    EXPECT_LE((dpd - with_ancilla_zero(projector_average(inst), it.ancilla_dim)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(BuildIterate, CapExceeded) {
  const OrInstance inst(std::vector<HermitianMatrix>(5, HermitianMatrix::identity(20)), DensityMatrix::maximally_mixed(20),
                        0.25, 0.0, 0.05);
  try {
    build_iterate(inst, 100);
    FAIL();
  } catch (const ResourceError& e) {
    EXPECT_NE(std::string(e.what()).find("160"), std::string::npos);
  }
}

TEST(PhaseEstimate, IdentityGivesZero) {
  const auto g = Matrix::Identity(3, 3).eval();
  Rng rng(1);
  int zero = 0;
  for (int i = 0; i < 500; ++i) zero += phase_estimate(g, DensityMatrix::maximally_mixed(3), 0.1, 0.05, rng) == 0.0;
  EXPECT_EQ(zero, 500);
}

TEST(PhaseEstimate, QuarterTurnWithinPrecision) {
  Matrix g(1, 1);
  g(0, 0) = Complex(0.0, 1.0);
  const double precision = 0.05, fail = 0.05;
  Rng rng(2);
  int ok = 0;
  const int n = 2000;
  for (int i = 0; i < n; ++i)
    ok += std::abs(phase_estimate(g, DensityMatrix::maximally_mixed(1), precision, fail, rng) - std::numbers::pi / 2) <=
          precision;
  EXPECT_GE(ok / static_cast<double>(n), 1.0 - fail);
}

TEST(PhaseEstimate, OutcomeLawSumsToOne) {
  for (double theta : {0.0, 0.3, -2.0, std::numbers::pi, 1e-9}) {
    double total = 0.0;
    for (std::uint64_t y = 0; y < 64; ++y) total += PhaseEstimator::outcome_probability(theta, y, 6);
    EXPECT_NEAR(total, 1.0, 1e-12) << theta;
  }
}

TEST(PhaseEstimate, EqualMixtureOfZeroAndPi) {
  Matrix g = Matrix::Zero(2, 2);
  g(0, 0) = 1.0;
  g(1, 1) = -1.0;
  Rng rng(3);
  int at_pi = 0;
  for (int i = 0; i < 1000; ++i) {
    const double p = phase_estimate(g, DensityMatrix::maximally_mixed(2), 0.1, 0.05, rng);
    ASSERT_TRUE(p == 0.0 || p == std::numbers::pi) << p;
    at_pi += p == std::numbers::pi;
  }
  EXPECT_NEAR(at_pi / 1000.0, 0.5, 0.05);
}

TEST(PhaseEstimate, BitsFormulaAndBadArguments) {
  EXPECT_EQ(phase_bits(0.1, 0.05), static_cast<int>(std::ceil(std::log2(2 * std::numbers::pi / 0.1)) +
                                                    std::ceil(std::log2(2 + 1 / 0.1))));
  Rng rng(1);
  const Matrix g = Matrix::Identity(1, 1);
  EXPECT_THROW(phase_estimate(g, DensityMatrix::maximally_mixed(1), 0.0, 0.05, rng), UsageError);
  EXPECT_THROW(phase_estimate(g, DensityMatrix::maximally_mixed(1), 0.1, 1.0, rng), UsageError);
  EXPECT_EQ(canonical_phase(-std::numbers::pi), std::numbers::pi);
}

TEST(OrTest, GroverMarkedInputAccepts) {
  const auto inst = fixtures::grover_or(8, 1, 1.0 / 3.0, 0.0, 0.05);
  const double bound = (2.0 / 3.0) * (2.0 / 3.0) / 4.0 - 0.05;
  EXPECT_GE(rate(inst, 2000, 11), bound);
  EXPECT_GE(OrTester(inst).accept_probability(), bound);
}

TEST(OrTest, GroverUnmarkedInputRejects) {
  const auto inst = fixtures::grover_or(8, 9, 1.0 / 3.0, 0.0, 0.05);
  EXPECT_LE(rate(inst, 2000, 12), 0.05 + 0.02);
  EXPECT_LE(OrTester(inst).accept_probability(), 0.05);
}

TEST(OrTest, SingleIdentityProjectorAlwaysAboveBound) {
  Rng g(4);
  const auto rho = fixtures::random_density(3, 2, g);
  const OrInstance inst({HermitianMatrix::identity(3)}, rho, 0.25, 0.0, 0.05);
  EXPECT_GE(rate(inst, 2000, 13), inst.case1_bound());
  Rng r(5);
  int acc = 0;
  for (int i = 0; i < 300; ++i) acc += or_test(inst, r) ? 1 : 0;
  EXPECT_GE(acc / 300.0, inst.case1_bound() - 0.05);
}

TEST(OrTest, RunIsSeedDeterministic) {
  const auto inst = fixtures::grover_or(4, 2, 1.0 / 3.0, 0.0, 0.05);
  EXPECT_EQ(rate(inst, 3000, 99), rate(inst, 3000, 99));
}

TEST(GapVerdict, GroverEmbedding) {
  for (std::size_t k : {1u, 3u, 8u, 9u}) {
    const auto inst = fixtures::grover_or(8, k, 1.0 / 3.0, 0.0, 0.05);
    const OrTester tester(inst);
    int correct = 0;
    for (std::uint64_t s = 0; s < 10; ++s) {
      Rng rng(1000 * k + s);
      correct += gap_verdict(tester, inst, 2000, rng).case1 == (k <= 8);
    }
    EXPECT_GE(correct, 10) << "k=" << k;
  }
}

TEST(GapVerdict, ZeroOverlapIsCaseTwo) {
  // phi = 0 and every tr(Lambda rho) = 0
  std::vector<HermitianMatrix> proj{HermitianMatrix::diagonal({1.0, 0.0, 0.0}), HermitianMatrix::diagonal({0.0, 1.0, 0.0})};
  const OrInstance inst(std::move(proj), DensityMatrix::basis(3, 2), 0.25, 0.0, 0.05);
  Rng rng(6);
  EXPECT_FALSE(gap_verdict(inst, 2000, rng).case1);
}

TEST(GapVerdict, MixedInputSingleProjector) {
  std::vector<double> d(16, 0.0);
  d[1] = 1.0;
  const OrInstance inst({HermitianMatrix::diagonal(std::span<const double>(d))}, DensityMatrix::maximally_mixed(16), 0.05,
                        1.0 / 16.0, 0.01);
  ASSERT_TRUE(inst.gap_condition());
  EXPECT_NEAR(inst.acceptances()[0], 1.0 / 16.0, 1e-15);
  Rng rng(7);
  const auto v = gap_verdict(inst, 2000, rng);
  EXPECT_FALSE(v.case1);
  EXPECT_NEAR(v.threshold, gap_midpoint(inst), 0.0);
}

TEST(GapVerdict, MissingGapIsUsageError) {
  const OrInstance inst({HermitianMatrix::identity(2)}, DensityMatrix::maximally_mixed(2), 0.25, 0.1, 0.05);
  Rng rng(1);
  EXPECT_THROW(gap_verdict(inst, 10, rng), UsageError);
}

TEST(Jordan, DecompositionHolds) {
  Rng rng(31);
  for (int t = 0; t < 8; ++t) {
    const auto inst = t % 2 ? random_diagonal_instance(2 + t, 5, rng) : random_dense_instance(2 + t / 2, 4, rng);
    EXPECT_LE(jordan_defect(inst), 1e-8) << t;
  }
  EXPECT_LE(jordan_defect(fixtures::grover_or(8, 1, 1.0 / 3.0, 0.0, 0.05)), 1e-8);
}

TEST(MassAbove, SquaredGapLowerBound) {
  Rng rng(41);
  for (int t = 0; t < 30; ++t) {
    const std::size_t m = 1 + rng.below(6);
    const auto inst = random_diagonal_instance(m, 6, rng);
    const auto acc = inst.acceptances();
    const double best = *std::max_element(acc.begin(), acc.end());
    for (double lambda : {0.0, 0.01, 0.05, 0.1, 0.2}) {
      const double gap = best - static_cast<double>(m) * lambda;
      if (gap < 0.0) continue;
      EXPECT_GE(mass_above(inst, lambda), gap * gap - 1e-12) << t << " " << lambda;
    }
  }
}

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "mfaoa/exact.hpp"
#include "oracles.hpp"

using namespace mfaoa;

namespace {

IsingProblem single(double h) { return IsingProblem::from_couplings(RowMatrix::Zero(1, 1), Vector::Constant(1, h)); }

IsingProblem zeros(std::size_t n) {
  const auto m = static_cast<Eigen::Index>(n);
  return IsingProblem(RowMatrix::Zero(m, m), Vector::Zero(m), Vector::Ones(m));
}

std::vector<double> grid(int points) {
  std::vector<double> s(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) s[static_cast<std::size_t>(i)] = static_cast<double>(i) / (points - 1);
  return s;
}

}  // namespace

TEST(BruteForce, Trivial) {
  const GroundState g = brute_force_ground(single(1.0));
  EXPECT_EQ(g.energy, -1.0);
  EXPECT_EQ(g.sigma, Bitstring({1}));
  RowMatrix J{{0.0, 1.0}, {1.0, 0.0}};
  const GroundState g2 = brute_force_ground(IsingProblem::from_couplings(J, (Vector(2) << 0.1, 0.0).finished()));
  EXPECT_DOUBLE_EQ(g2.energy, -1.1);
  EXPECT_EQ(g2.sigma, Bitstring({1, 1}));
}

TEST(BruteForce, MatchesEnumerationOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const IsingProblem p = break_symmetry(sk_instance(10, seed));
    const GroundState g = brute_force_ground(p);
    EXPECT_NEAR(g.energy, oracle::ground_energy(p), 1e-12);
    EXPECT_DOUBLE_EQ(g.energy, energy(p, g.sigma));
  }
}

TEST(BruteForce, TiesGoToSmallestIndex) {
  // h = 0: sigma and -sigma are degenerate; the representative has spin 0 up
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const GroundState g = brute_force_ground(sk_instance(8, seed));
    EXPECT_EQ(g.sigma[0], 1);
  }
  const GroundState g = brute_force_ground(zeros(3));
  EXPECT_EQ(g.sigma, Bitstring::all_up(3));
}

TEST(BruteForce, SkTwentyEnsembleDensity) {
  double sum = 0.0;
  const int count = 400;
  for (int seed = 0; seed < count; ++seed) sum += brute_force_ground(sk_instance(20, static_cast<std::uint64_t>(seed))).energy / 20.0;
  const double mean = sum / count;
  RecordProperty("mean_e0_density", std::to_string(mean));
  // finite-size law e(N) = e_inf + 0.7 N^(-2/3) puts N = 20 at about -0.668
  const double expected = -0.763 + 0.7 * std::pow(20.0, -2.0 / 3.0);
  EXPECT_NEAR(mean, expected, 0.03);
}

TEST(BruteForce, BudgetEnforced) {
  try {
    brute_force_ground(zeros(27));
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::budget_exceeded);
  }
}

TEST(Spectrum, ClassicalEndpointIsGroundEnergy) {
  const IsingProblem p = break_symmetry(sk_instance(9, 2));
  const auto spec = adiabatic_spectrum(p, {1.0}, 3);
  EXPECT_NEAR(spec[0].lowest[0], brute_force_ground(p).energy, 1e-10);
}

TEST(Spectrum, DriverEndpoint) {
  const IsingProblem p = break_symmetry(sk_instance(7, 2));
  const auto spec = adiabatic_spectrum(p, {0.0}, 8);
  EXPECT_NEAR(spec[0].lowest[0], -6.0, 1e-10);
  EXPECT_NEAR(spec[0].lowest[1] - spec[0].lowest[0], 2.0, 1e-10);
}

TEST(Spectrum, AscendingAndContinuous) {
  const IsingProblem p = break_symmetry(sk_instance(8, 3));
  const auto s = grid(41);
  const auto spec = adiabatic_spectrum(p, s, 6);
  // ||H_P - H_D|| bounded by the largest diagonal magnitude plus sum(delta)
  const Vector diag = problem_diagonal(p);
  const double bound = diag.cwiseAbs().maxCoeff() + p.driver().sum();
  for (std::size_t k = 0; k < spec.size(); ++k) {
    for (std::size_t l = 1; l < spec[k].lowest.size(); ++l) EXPECT_LE(spec[k].lowest[l - 1], spec[k].lowest[l]);
    if (k == 0) continue;
    for (std::size_t l = 0; l < 6; ++l)
      EXPECT_LE(std::abs(spec[k].lowest[l] - spec[k - 1].lowest[l]), 10.0 * bound * (s[k] - s[k - 1]));
  }
}

TEST(Spectrum, LanczosAgreesWithDenseOnDistinctLevels) {
  const IsingProblem p = break_symmetry(sk_instance(11, 4));
  const Eigen::Index dim = Eigen::Index{1} << p.n();
  const Vector diag = problem_diagonal(p);
  for (double s : {0.2, 0.5, 0.8}) {
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
    for (Eigen::Index a = 0; a < dim; ++a) {
      H(a, a) = s * diag(a);
      for (std::size_t i = 0; i < p.n(); ++i) H(a, a ^ (Eigen::Index{1} << i)) -= (1.0 - s);
    }
    const Vector dense = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H, Eigen::EigenvaluesOnly).eigenvalues();
    const auto krylov = adiabatic_spectrum(p, {s}, 4)[0].lowest;
    ASSERT_EQ(krylov.size(), 4u);
    for (std::size_t l = 0; l < 4; ++l) EXPECT_NEAR(krylov[l], dense(static_cast<Eigen::Index>(l)), 1e-8) << "s=" << s;
  }
}

TEST(Spectrum, LanczosPathEndpoints) {
  const IsingProblem p = break_symmetry(sk_instance(13, 1));
  const auto spec = adiabatic_spectrum(p, {0.0, 1.0}, 2);
  EXPECT_NEAR(spec[0].lowest[0], -12.0, 1e-8);
  EXPECT_NEAR(spec[0].lowest[1], -10.0, 1e-8);
  EXPECT_NEAR(spec[1].lowest[0], brute_force_ground(p).energy, 1e-8);
}

TEST(Spectrum, BudgetEnforced) {
  EXPECT_THROW(adiabatic_spectrum(zeros(15), {0.5}, 1), error);
  EXPECT_THROW(adiabatic_spectrum(zeros(3), {0.5}, 9), error);
}

TEST(Qaoa, SingleSpinMatchesMeanField) {
  for (double h : {1.0, -1.0, 0.3, -0.3}) {
    const IsingProblem p = single(h);
    const Schedule sched = linear_schedule(100, 0.5);
    SpinConfiguration c = initial_configuration(1);
    double worst = 0.0;
    qaoa_statevector(p, sched, [&](std::size_t k, const Statevector& psi) {
      c = step(p, c, sched.gammas[k - 1], sched.betas[k - 1]);
      const auto b = bloch_vector(psi, 1, 0);
      for (int a = 0; a < 3; ++a) worst = std::max(worst, std::abs(b[static_cast<std::size_t>(a)] - c(0, a)));
      const double up = std::norm(psi(0));
      worst = std::max(worst, std::abs(up - factorized_probability(c, Bitstring({1}))));
    });
    EXPECT_LT(worst, 1e-8) << "h=" << h;
  }
}

TEST(Qaoa, EmptyScheduleGivesOffset) {
  const auto inst = partition_instance(5, 3);
  const QaoaResult r = qaoa_statevector(inst.problem, Schedule{});
  EXPECT_NEAR(r.expectation, inst.problem.energy_offset(), 1e-12);
  const IsingProblem sk = break_symmetry(sk_instance(6, 1));
  EXPECT_NEAR(qaoa_statevector(sk, Schedule{}).expectation, 0.0, 1e-12);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(bloch_vector(r.state, 5, i)[0], 1.0, 1e-12);
}

TEST(Qaoa, NormPreservedAndExpectationBySummation) {
  const IsingProblem p = break_symmetry(sk_instance(10, 9));
  const Schedule sched = linear_schedule(8, 0.7);
  double worst = 0.0;
  const QaoaResult r = qaoa_statevector(p, sched, [&](std::size_t, const Statevector& psi) {
    worst = std::max(worst, std::abs(psi.squaredNorm() - 1.0));
  });
  EXPECT_LT(worst, 1e-10);
  double direct = 0.0;
  for (std::uint64_t x = 0; x < (1u << 9); ++x)
    direct += std::norm(r.state(static_cast<Eigen::Index>(x))) * energy(p, Bitstring::from_index(x, 9));
  EXPECT_NEAR(r.expectation, direct, 1e-8);
}

TEST(Qaoa, BudgetEnforced) { EXPECT_THROW(qaoa_statevector(zeros(21), Schedule{}), error); }

TEST(Qaoa, OptimizerNeverWorsens) {
  const auto inst = partition_instance(6, 11);
  const Schedule start = linear_schedule(2, 0.5);
  const double base = qaoa_statevector(inst.problem, start).expectation;
  const QaoaOptimum opt = optimize_qaoa(inst.problem, start, 0.1, 1e-2, 300);
  EXPECT_LE(opt.expectation, base);
  EXPECT_LE(opt.evaluations, 300);
  EXPECT_NEAR(qaoa_statevector(inst.problem, opt.schedule).expectation, opt.expectation, 1e-12);
}

TEST(Factorized, Trivial) {
  SpinConfiguration up = SpinConfiguration::Zero(4, 3);
  up.col(2).setOnes();
  EXPECT_EQ(factorized_probability(up, Bitstring::all_up(4)), 1.0);
  const SpinConfiguration flat = initial_configuration(4);
  for (std::uint64_t x = 0; x < 16; ++x) EXPECT_EQ(factorized_probability(flat, Bitstring::from_index(x, 4)), 1.0 / 16);
  EXPECT_THROW(factorized_probability(flat, Bitstring::all_up(3)), error);
}

TEST(Factorized, SumsToOne) {
  const IsingProblem p = break_symmetry(sk_instance(13, 6));
  const SpinConfiguration c = evolve(p, linear_schedule(300, 0.5)).final_config;
  double total = 0.0;
  for (std::uint64_t x = 0; x < (1u << 12); ++x) total += factorized_probability(c, Bitstring::from_index(x, 12));
  EXPECT_NEAR(total, 1.0, 1e-10);
}

TEST(Spectrum, FeaturesOfSyntheticLevels) {
  // E0 = 0; E1 dips to 0.5 at s = 0.5 and then closes toward 0.001 past s = 0.8
  std::vector<SpectrumSlice> spec;
  for (int k = 0; k <= 100; ++k) {
    const double s = k / 100.0;
    const double g = s < 0.8 ? 0.5 + 4.0 * (s - 0.5) * (s - 0.5) : 0.001;
    spec.push_back({s, {0.0, g}});
  }
  const auto f = spectral_features(spec);
  ASSERT_EQ(f.size(), 3u);
  EXPECT_NEAR(f[0].s, 0.5, 1e-12);
  EXPECT_FALSE(f[0].closing);
  EXPECT_NEAR(f[1].s, 0.8, 1e-12);
  EXPECT_TRUE(f[2].closing || f[1].closing);
  EXPECT_TRUE(spectral_features({}).empty());
}

TEST(Spectrum, SymmetricInstanceGapCloses) {
  const IsingProblem p = sk_instance(9, 5);
  std::vector<double> s;
  for (int k = 0; k <= 50; ++k) s.push_back(k / 50.0);
  const auto f = spectral_features(adiabatic_spectrum(p, s, 4));
  EXPECT_TRUE(std::any_of(f.begin(), f.end(), [](const SpectralFeature& x) { return x.closing && x.s > 0.2; }));
}

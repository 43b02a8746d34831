#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mfaoa/stats.hpp"

using namespace mfaoa;

namespace {

EnsembleRecord record(double e_star, std::optional<double> e_zero) {
  EnsembleRecord r;
  r.e_star = e_star;
  r.e_zero = e_zero;
  return r;
}

EnsembleResult synthetic(std::vector<std::pair<double, double>> energies) {
  EnsembleResult e;
  std::uint64_t seed = 0;
  for (auto [star, zero] : energies) {
    e.records.push_back(record(star, zero));
    e.records.back().seed = seed++;
  }
  return e;
}

// Gamma(m, 1) draws from the standard library, independent of the sampler under test.
std::vector<double> gumbel_reference_samples(std::size_t count, int m, double u, double v, unsigned seed) {
  std::mt19937_64 engine(seed);
  std::gamma_distribution<double> gamma(m, 1.0);
  std::vector<double> x(count);
  for (auto& xi : x) xi = u + v * std::log(gamma(engine) / m);
  return x;
}

}  // namespace

TEST(FitLine, ExactLine) {
  const LineFit f = fit_line({0.0, 1.0, 2.0, 3.0}, {1.0, 3.0, 5.0, 7.0});
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 1.0, 1e-14);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-14);
  EXPECT_THROW(fit_line({1.0}, {1.0}), error);
  EXPECT_THROW(fit_line({2.0, 2.0, 2.0}, {1.0, 2.0, 3.0}), error);
}

TEST(FitScaling, SkRoundTrip) {
  const double c = 0.83, omega = 0.61;
  std::vector<std::pair<double, double>> pts;
  for (double n : {20.0, 30.0, 50.0, 80.0, 120.0, 200.0}) pts.emplace_back(n, parisi_energy + c * std::pow(n, -omega));
  const FitReport r = fit_scaling(pts, ScalingModel::sk_asymptote);
  EXPECT_NEAR(r["c"], c, 1e-6);
  EXPECT_NEAR(r["omega"], omega, 1e-6);
  EXPECT_EQ(r["eps_p"], -0.763);
  EXPECT_NEAR(r.goodness, 1.0, 1e-12);
}

TEST(FitScaling, PartitionAndGrowthRoundTrip) {
  std::vector<std::pair<double, double>> decay, growth;
  for (double n = 6; n <= 15; ++n) {
    decay.emplace_back(n, 3.1 * std::pow(n, -1.9));
    growth.emplace_back(n, 0.02 * std::pow(n, 0.31));
  }
  const FitReport d = fit_scaling(decay, ScalingModel::power_decay);
  EXPECT_NEAR(d["A"], 3.1, 1e-6);
  EXPECT_NEAR(d["omega"], 1.9, 1e-6);
  const FitReport g = fit_scaling(growth, ScalingModel::power_growth);
  EXPECT_NEAR(g["A"], 0.02, 1e-6);
  EXPECT_NEAR(g["omega_prime"], 0.31, 1e-6);
}

TEST(FitScaling, DegenerateInputs) {
  const std::vector<std::pair<double, double>> three{{1, 1}, {2, 1}, {3, 1}};
  EXPECT_THROW(fit_scaling(three, ScalingModel::power_decay), error);
  const std::vector<std::pair<double, double>> same_n{{5, 1}, {5, 2}, {5, 3}, {5, 4}};
  try {
    fit_scaling(same_n, ScalingModel::power_decay);
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::degenerate_data);
  }
  const std::vector<std::pair<double, double>> below{{10, -0.8}, {20, -0.7}, {30, -0.7}, {40, -0.7}};
  EXPECT_THROW(fit_scaling(below, ScalingModel::sk_asymptote), error);
}

TEST(Gumbel, DensityIntegratesToCdf) {
  const int m = 6;
  const double u = 0.2, v = 2.35;
  double acc = 0.0;
  const double h = 1e-3;
  for (double x = u - 40.0; x < u + 5.0; x += h) {
    acc += h * (gumbel_pdf(x, m, u, v) + 4.0 * gumbel_pdf(x + h / 2, m, u, v) + gumbel_pdf(x + h, m, u, v)) / 6.0;
    if (std::abs(x - u) < h / 2 || std::abs(x - (u - 3.0)) < h / 2)
      EXPECT_NEAR(acc, gumbel_cdf(x + h, m, u, v), 1e-8) << x;
  }
  EXPECT_NEAR(acc, 1.0, 1e-8);
}

TEST(Gumbel, SamplerMatchesCdf) {
  Rng rng(2024);
  std::vector<double> x(20000);
  for (auto& xi : x) xi = sample_gumbel(rng, 6, 0.2, 2.35);
  EXPECT_LT(ks_distance(x, 6, 0.2, 2.35), 1.628 / std::sqrt(20000.0));
}

TEST(Gumbel, MaximumLikelihoodRoundTrip) {
  const int m = 6;
  const double u = 0.2, v = 2.35;
  int inside = 0;
  const int trials = 20;
  for (int t = 0; t < trials; ++t) {
    const auto x = gumbel_reference_samples(10000, m, u, v, 100u + static_cast<unsigned>(t));
    const FitReport r = fit_gumbel(x, m);
    ASSERT_TRUE(r.converged);
    EXPECT_LT(r.goodness, 0.03);
    EXPECT_NEAR(r["w"], gumbel_normalization(m, r["v"]), 1e-15);
    if (std::abs(r["u"] - u) < 2 * r.stderr_of("u") && std::abs(r["v"] - v) < 2 * r.stderr_of("v")) ++inside;
  }
  // each parameter covers its truth with probability ~0.95; ask for 80% joint coverage
  EXPECT_GE(inside, 16);
}

TEST(Gumbel, ConstantDataIsDegenerate) {
  try {
    fit_gumbel(std::vector<double>(500, -0.7), 6);
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::degenerate_data);
  }
  EXPECT_THROW(fit_gumbel(std::vector<double>(50, 1.0), 6), error);
}

TEST(Tail, AllOptimalGivesZero) {
  const EnsembleResult e = synthetic({{-3.0, -3.0}, {-2.0, -2.0}, {-4.0, -4.0}});
  const TailResult t = tail_probability(e, {1e-6, 0.1, 0.5});
  for (auto [eps, pf] : t.points) EXPECT_EQ(pf, 0.0) << eps;
  EXPECT_DOUBLE_EQ(t.mean_e_zero, -3.0);
  EXPECT_TRUE(tail_thresholds(e).empty());
}

TEST(Tail, TwoPointStepFunction) {
  // eps* = {0, 0.5}
  const EnsembleResult e = synthetic({{-1.0, -1.0}, {-0.5, -1.0}});
  const TailResult t = tail_probability(e, {0.0, 0.25, 0.4999, 0.5, 0.75});
  const std::vector<double> expected{0.5, 0.5, 0.5, 0.0, 0.0};
  ASSERT_EQ(t.points.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_EQ(t.points[i].second, expected[i]);
}

TEST(Tail, MonotoneAndBounded) {
  std::vector<std::pair<double, double>> energies;
  Rng rng(5);
  for (int i = 0; i < 400; ++i) energies.emplace_back(-10.0 + rng.uniform() * rng.uniform(), -10.0);
  const EnsembleResult e = synthetic(energies);
  const auto thresholds = tail_thresholds(e, 25);
  ASSERT_EQ(thresholds.size(), 25u);
  const TailResult t = tail_probability(e, thresholds);
  for (std::size_t i = 1; i < t.points.size(); ++i) EXPECT_LE(t.points[i].second, t.points[i - 1].second);
  EXPECT_LE(t.points.front().second, 1.0);
  // at least 10 records lie above the largest threshold
  EXPECT_GE(t.points.back().second * 400.0, 10.0);
  EXPECT_LT(t.fit.slope, 0.0);
}

TEST(Tail, MissingGroundEnergy) {
  const EnsembleResult e = synthetic({{-1.0, -1.0}});
  EnsembleResult broken = e;
  broken.records.push_back(record(-1.0, std::nullopt));
  try {
    tail_probability(broken, {0.1});
    FAIL();
  } catch (const error& err) {
    EXPECT_EQ(err.code(), errc::oracle_required);
  }
}

TEST(Ensemble, TrivialInstanceIsSolved) {
  EnsembleSettings s;
  s.kind = ProblemKind::sk;
  s.n = 2;
  s.count = 1;
  s.p = 50;
  s.with_exact = true;
  const EnsembleResult r = run_ensemble(s);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_DOUBLE_EQ(r.records[0].e_star, *r.records[0].e_zero);
  EXPECT_EQ(r.records[0].sigma_star.size(), 2u);
  EXPECT_EQ(r.records[0].sigma_star[1], 1);
}

TEST(Ensemble, DeterministicAndOrdered) {
  EnsembleSettings s;
  s.kind = ProblemKind::sk;
  s.n = 10;
  s.count = 12;
  s.p = 200;
  s.with_exact = true;
  s.seed0 = 40;
  s.threads = 3;
  const EnsembleResult a = run_ensemble(s);
  s.threads = 1;
  const EnsembleResult b = run_ensemble(s);
  ASSERT_EQ(a.records.size(), 12u);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].seed, 40 + i);
    EXPECT_EQ(a.records[i].e_star, b.records[i].e_star);
    EXPECT_EQ(a.records[i].sigma_star, b.records[i].sigma_star);
    EXPECT_GE(a.records[i].e_star, *a.records[i].e_zero - 1e-9);
    EXPECT_DOUBLE_EQ(energy(sk_instance(10, a.records[i].seed), a.records[i].sigma_star), a.records[i].e_star);
  }
  for (double eps : relative_errors(a)) EXPECT_GE(eps, -1e-12);
}

TEST(Ensemble, TwoFlipNeverHurts) {
  EnsembleSettings s;
  s.kind = ProblemKind::partition;
  s.n = 10;
  s.count = 10;
  s.tau = 0.25;
  s.p = 300;
  const EnsembleResult plain = run_ensemble(s);
  s.two_flip = true;
  const EnsembleResult refined = run_ensemble(s);
  for (std::size_t i = 0; i < plain.records.size(); ++i) EXPECT_LE(refined.records[i].e_star, plain.records[i].e_star + 1e-12);
}

TEST(Ensemble, Budgets) {
  EnsembleSettings s;
  s.n = 27;
  s.with_exact = true;
  EXPECT_THROW(run_ensemble(s), error);
  s.n = 10;
  s.count = 0;
  EXPECT_THROW(run_ensemble(s), error);
}

TEST(Histogram, FreedmanDiaconis) {
  std::vector<double> x;
  for (int i = 0; i < 1000; ++i) x.push_back(i / 999.0);
  const Histogram h = histogram(x);
  // IQR = 0.5, width = 2 * 0.5 / 10 = 0.1
  EXPECT_EQ(h.counts.size(), 10u);
  EXPECT_NEAR(h.edges[1] - h.edges[0], 0.1, 1e-12);
  std::size_t total = 0;
  for (auto c : h.counts) total += c;
  EXPECT_EQ(total, 1000u);
  const Histogram flat = histogram(std::vector<double>(7, 2.0));
  ASSERT_EQ(flat.counts.size(), 1u);
  EXPECT_EQ(flat.counts[0], 7u);
  EXPECT_TRUE(histogram({}).counts.empty());
}

#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace cpm1bit;

namespace {

Matrix corr2(double rho) {
  Matrix m(2);
  m(0, 0) = m(1, 1) = 1.0;
  m(0, 1) = m(1, 0) = rho;
  return m;
}

}  // namespace

TEST(Orthant, BivariateClosedForm) {
  for (double rho : {-0.9, -0.5, 0.0, 0.3, 0.5, 0.95}) {
    Rng rng(1);
    const Matrix S = corr2(rho);
    const Matrix L = cholesky(S);
    OrthantQuery q{{0.0, 0.0}, &L, {1, 1}};
    const auto r = orthant_probability(q, rng);
    EXPECT_NEAR(r.probability, oracle::bivariate_positive_orthant(rho), 1e-5) << "rho " << rho;
    EXPECT_TRUE(r.converged);
  }
}

TEST(Orthant, HalfCorrelationIsOneThird) {
  Rng rng(2);
  const Matrix L = cholesky(corr2(0.5));
  const auto r = orthant_probability(OrthantQuery{{0.0, 0.0}, &L, {1, 1}}, rng);
  EXPECT_NEAR(r.probability, 1.0 / 3.0, 1e-4);
}

TEST(Orthant, IndependentProductAndShiftedMean) {
  Rng rng(3);
  const Matrix S = Matrix::identity(4);
  const Matrix L = cholesky(S);
  const std::vector<double> mu{0.3, -0.2, 1.0, 0.0};
  const std::vector<int> sg{1, -1, 1, -1};
  const auto r = orthant_probability(OrthantQuery{mu, &L, sg}, rng);
  double expect = 1.0;
  for (int i = 0; i < 4; ++i) expect *= norm_cdf(sg[i] * mu[i]);
  EXPECT_NEAR(r.probability, expect, 1e-6);
}

TEST(Orthant, OneDimensionIsClosedForm) {
  Rng rng(4);
  Matrix S(1);
  S(0, 0) = 4.0;
  const Matrix L = cholesky(S);
  const auto r = orthant_probability(OrthantQuery{{1.0}, &L, {-1}}, rng);
  EXPECT_DOUBLE_EQ(r.probability, norm_cdf(-0.5));
  EXPECT_EQ(r.error, 0.0);
}

TEST(Orthant, DetectorCovarianceSumsToOne) {
  const FrontendModel model(CpmConfig{}, FilterSpec{}, 0.5);
  const Matrix R = model.covariance();
  const Trellis tr(model.cfg(), model.total_memory());
  const auto& t = tr.transition(77);
  const auto mu = model.window_mean(t.window_beta, t.window);
  std::vector<std::vector<double>> means(64, mu);
  std::vector<std::vector<int>> signs;
  for (int p = 0; p < 64; ++p) signs.push_back(pattern_signs(static_cast<std::uint32_t>(p), 6));
  Rng rng(5);
  const auto res = orthant_probability_batch(R, means, signs, rng);
  double s = 0.0;
  for (const auto& r : res) s += r.probability;
  EXPECT_NEAR(s, 1.0, 1e-3);
}

TEST(Orthant, AgreesWithPlainMonteCarlo) {
  const FrontendModel model(CpmConfig{}, FilterSpec{}, 1.0);
  const Matrix R = model.covariance();
  const Trellis tr(model.cfg(), model.total_memory());
  const auto& t = tr.transition(300);
  const auto mu = model.window_mean(t.window_beta, t.window);
  Rng rng(6), mc(7);
  for (std::uint32_t p : {0u, 5u, 21u, 42u, 63u}) {
    const auto sg = pattern_signs(p, 6);
    const auto q = orthant_probability_batch(R, std::vector<std::vector<double>>{mu},
                                             std::vector<std::vector<int>>{sg}, rng)[0];
    const int n = 400000;
    const double m = oracle::mc_orthant(R, mu, sg, n, mc);
    const double se = std::sqrt(std::max(m * (1 - m), 1e-6) / n);
    EXPECT_NEAR(q.probability, m, 5 * se + 1e-5) << "pattern " << p;
  }
}

TEST(Orthant, ReorderingDoesNotChangeTheValue) {
  const FrontendModel model(CpmConfig{}, FilterSpec{}, 0.3);
  const Matrix R = model.covariance();
  const std::vector<double> mu{0.2, -0.4, 0.1, 0.3, -0.2, 0.05};
  const auto sg = pattern_signs(13, 6);
  Rng a(8), b(8);
  QmcOptions on, off;
  off.reorder = false;
  const auto x = orthant_probability_batch(R, std::vector<std::vector<double>>{mu}, std::vector<std::vector<int>>{sg}, a, on)[0];
  const auto y = orthant_probability_batch(R, std::vector<std::vector<double>>{mu}, std::vector<std::vector<int>>{sg}, b, off)[0];
  EXPECT_NEAR(x.probability, y.probability, 2e-5);
}

TEST(Orthant, BatchIsPermutationEquivariant) {
  const FrontendModel model(CpmConfig{}, FilterSpec{}, 0.8);
  const Matrix R = model.covariance();
  std::vector<std::vector<double>> means;
  std::vector<std::vector<int>> signs;
  for (int i = 0; i < 5; ++i) {
    means.push_back({0.1 * i, -0.1, 0.2, 0.0, 0.3, -0.05 * i});
    signs.push_back(pattern_signs(static_cast<std::uint32_t>(7 * i + 3), 6));
  }
  Rng a(9), b(9);
  const auto r1 = orthant_probability_batch(R, means, signs, a);
  std::reverse(means.begin(), means.end());
  std::reverse(signs.begin(), signs.end());
  const auto r2 = orthant_probability_batch(R, means, signs, b);
  for (int i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(r1[i].probability, r2[4 - i].probability);
}

TEST(Orthant, RejectsBadInput) {
  Matrix S(2);
  S(0, 0) = 1;
  S(1, 1) = -1;
  try {
    cholesky(S);
    FAIL() << "expected NotPositiveDefinite";
  } catch (const NotPositiveDefinite& e) {
    EXPECT_EQ(e.pivot(), 1u);
  }
  Rng rng(1);
  Matrix upper(2);
  upper(0, 0) = upper(1, 1) = 1;
  upper(0, 1) = 0.5;
  EXPECT_THROW(orthant_probability(OrthantQuery{{0, 0}, &upper, {1, 1}}, rng), ConfigError);
  const Matrix L = cholesky(corr2(0.2));
  EXPECT_THROW(orthant_probability(OrthantQuery{{0, 0}, &L, {1, 0}}, rng), ConfigError);
  EXPECT_THROW(orthant_probability(OrthantQuery{{0}, &L, {1, 1}}, rng), ConfigError);
}

TEST(Orthant, BudgetExhaustionIsReported) {
  Rng rng(10);
  const FrontendModel model(CpmConfig{}, FilterSpec{}, 0.5);
  const Matrix L = cholesky(model.covariance());
  OrthantQuery q{{0, 0, 0, 0, 0, 0}, &L, {1, 1, 1, 1, 1, 1}};
  q.target_tol = 1e-12;
  q.max_points = 256;
  const auto r = orthant_probability(q, rng);
  EXPECT_FALSE(r.converged);
  EXPECT_GT(r.probability, 0.0);
}

TEST(NormalFunctions, QuantileInvertsCdf) {
  for (double p : {1e-10, 1e-4, 0.02, 0.3, 0.5, 0.77, 0.999, 1 - 1e-9})
    EXPECT_NEAR(norm_cdf(norm_ppf(p)), p, 1e-12 + 1e-9 * p);
}

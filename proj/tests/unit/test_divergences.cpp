#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "oracles/scalar_min.hpp"

using namespace otmatch;

TEST(Aprox, BalancedIdentity) { EXPECT_EQ(Divergence::balanced().aprox(7.3, 0.01), 7.3); }

TEST(Aprox, KlClosedFormAgainstGoldenSection) {
  EXPECT_DOUBLE_EQ(Divergence::kl(1.0).aprox(3.0, 0.5), 2.0);
  EXPECT_NEAR(oracle::kl_aprox(3.0, 0.5, 1.0), 2.0, 1e-10);
}

TEST(Aprox, ZeroIsFixed) {
  for (double eps : {1e-3, 0.1, 10.0}) EXPECT_EQ(Divergence::kl(1.0).aprox(0.0, eps), 0.0);
}

TEST(Aprox, RejectsNonFinite) {
  EXPECT_THROW(Divergence::kl(1.0).aprox(std::nan(""), 0.1), Error);
  EXPECT_THROW(Divergence::kl(1.0).aprox(INFINITY, 0.1), Error);
  EXPECT_THROW(Divergence::kl(1.0).aprox(1.0, 0.0), Error);
}

TEST(Aprox, RhoLimitAndMonotone) {
  for (double rho : {1e2, 1e4, 1e6}) {
    const auto d = Divergence::kl(rho);
    EXPECT_NEAR(d.aprox(5.0, 0.1), 5.0, 5.0 * 0.1 / rho * 1.0001);
  }
  const auto d = Divergence::kl(0.7);
  double prev = -INFINITY;
  for (int i = 0; i <= 200; ++i) {
    const double v = d.aprox(-10.0 + 0.1 * i, 0.05);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(Phi, ConvexWithZeroAtOne) {
  for (double rho : {0.5, 1.0, 3.0}) {
    const auto d = Divergence::kl(rho);
    EXPECT_EQ(d.phi(1.0), 0.0);
    for (double p = 0.05; p < 5.0; p += 0.05) {
      EXPECT_LE(d.phi(p), 0.5 * (d.phi(p - 0.04) + d.phi(p + 0.04)) + 1e-15);
    }
    // conjugate derivative positive and increasing
    EXPECT_GT(d.phi_conjugate_derivative(-3.0), 0.0);
    EXPECT_LT(d.phi_conjugate_derivative(-1.0), d.phi_conjugate_derivative(1.0));
  }
  EXPECT_EQ(Divergence::balanced().phi(1.0), 0.0);
  EXPECT_TRUE(std::isinf(Divergence::balanced().phi(0.9)));
}

TEST(Phi, FenchelConjugate) {
  // phi*(q) = sup_p p q - phi(p); check by a fine grid sup
  const auto d = Divergence::kl(2.0);
  for (double q : {-1.0, 0.0, 0.7}) {
    double best = -INFINITY;
    for (double p = 1e-4; p < 10.0; p += 1e-4) best = std::max(best, p * q - d.phi(p));
    EXPECT_NEAR(best, d.phi_conjugate(q), 1e-6);
  }
}

TEST(PhiDivergence, Examples) {
  const auto kl = Divergence::kl(1.0);
  const std::vector<double> half{0.5, 0.5};
  EXPECT_EQ(phi_divergence(kl, half, half), 0.0);
  const std::vector<double> mu{1.0, 0.0};
  // direct evaluation: 0.5 (2 ln 2 - 2 + 1) + 0.5 (0 - 0 + 1)
  const double ref = 0.5 * (2.0 * std::log(2.0) - 2.0 + 1.0) + 0.5 * 1.0;
  EXPECT_NEAR(phi_divergence(kl, mu, half), ref, 1e-15);
  EXPECT_NEAR(phi_divergence(kl, mu, half), std::log(2.0), 1e-15);
  const std::vector<double> nu_null{1.0, 0.0}, mu_null{0.5, 0.5};
  EXPECT_TRUE(std::isinf(phi_divergence(kl, mu_null, nu_null)));
  const std::vector<double> neg{-0.1, 1.1};
  EXPECT_THROW(phi_divergence(kl, neg, half), Error);
  EXPECT_EQ(phi_divergence(Divergence::balanced(), half, half), 0.0);
  EXPECT_TRUE(std::isinf(phi_divergence(Divergence::balanced(), mu, half)));
}

TEST(PhiDivergence, ScaledKlMatchesGeneralizedKl) {
  // rho * sum (mu log(mu/nu) - mu + nu)
  const std::vector<double> mu{0.2, 0.3, 0.6}, nu{0.3, 0.3, 0.4};
  double ref = 0.0;
  for (int k = 0; k < 3; ++k) ref += mu[k] * std::log(mu[k] / nu[k]) - mu[k] + nu[k];
  EXPECT_NEAR(phi_divergence(Divergence::kl(2.5), mu, nu), 2.5 * ref, 1e-15);
}

TEST(Divergence, Parse) {
  EXPECT_TRUE(Divergence::parse("balanced").is_balanced());
  EXPECT_EQ(Divergence::parse("kl:0.5").rho(), 0.5);
  EXPECT_THROW(Divergence::parse("kl:"), Error);
  EXPECT_THROW(Divergence::parse("kl:-1"), Error);
  EXPECT_THROW(Divergence::parse("tv"), Error);
  EXPECT_EQ(Divergence::parse(Divergence::kl(1e6).name()).rho(), 1e6);
}

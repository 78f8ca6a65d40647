#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "oracles/brute.hpp"
#include "oracles/irls.hpp"

using namespace otmatch;
using testutil::column;

TEST(Knn, OneAndTwoNeighbours) {
  const auto d = testutil::make_dataset(column({0, 1, 2, 10}), {1, 0, 0, 1}, {0, 5, 9, 4});
  EXPECT_DOUBLE_EQ(knn_impute(d, 1).counterfactual[0], 5.0);
  EXPECT_DOUBLE_EQ(knn_impute(d, 2).counterfactual[0], 7.0);
  EXPECT_DOUBLE_EQ(knn_impute(d, 2).counterfactual[1], 2.0);
  // k may not exceed either arm
  EXPECT_THROW(knn_impute(d, 3), Error);
}

TEST(Knn, TiesGoToLowerIndex) {
  const auto d = testutil::make_dataset(column({0, -1, 1}), {1, 0, 0}, {0, 3, 8});
  EXPECT_DOUBLE_EQ(knn_impute(d, 1).counterfactual[0], 3.0);
  EXPECT_EQ(knn_impute(d, 1).neighbours[0], (std::vector<std::size_t>{1}));
}

TEST(Knn, FullArmGivesMean) {
  const Matrix x = testutil::random_points(12, 2, 3);
  std::vector<int> t(12);
  std::vector<double> y(12);
  double m0 = 0.0;
  for (int i = 0; i < 12; ++i) {
    t[i] = i < 7;
    y[i] = i * 1.5;
    if (!t[i]) m0 += y[i] / 5.0;
  }
  const auto imp = knn_impute(testutil::make_dataset(x, t, y), 5);
  for (int i = 0; i < 12; ++i) {
    if (t[i]) {
      EXPECT_NEAR(imp.counterfactual[i], m0, 1e-12);
    }
  }
}

TEST(Knn, MatchesBruteForce) {
  const Matrix x = testutil::random_points(40, 3, 17);
  std::vector<int> t(40);
  std::vector<double> y(40);
  oracle::Points pool;
  std::vector<std::size_t> pool_rows;
  for (int i = 0; i < 40; ++i) {
    t[i] = i % 4 == 0;
    y[i] = x(i, 0) - x(i, 2);
    if (!t[i]) {
      pool.push_back({x(i, 0), x(i, 1), x(i, 2)});
      pool_rows.push_back(i);
    }
  }
  const auto imp = knn_impute(testutil::make_dataset(x, t, y), 3);
  for (int i = 0; i < 40; i += 4) {
    const auto nn = oracle::knn(pool, {x(i, 0), x(i, 1), x(i, 2)}, 3);
    double ref = 0.0;
    for (auto q : nn) ref += y[pool_rows[q]] / 3.0;
    EXPECT_NEAR(imp.counterfactual[i], ref, 1e-12);
  }
}

TEST(Knn, LalondeKnn1Att) {
  const auto d = standardize(io::read_nsw(OTMATCH_DATA), {"age", "education", "re75"}).dataset;
  EXPECT_NEAR(knn_estimates(d, 1).att, 481.81, 0.05 * 481.81);
}

TEST(Propensity, MatchesIrlsOracle) {
  const Matrix x = (Matrix(6, 1) << 0.5, 1.5, 2.0, 2.5, 3.0, 4.0).finished();
  const std::vector<int> t{0, 0, 1, 0, 1, 1};
  const auto d = testutil::make_dataset(x, t, std::vector<double>(6, 0.0));
  const auto model = fit_propensity(d);
  EXPECT_TRUE(model.converged);
  oracle::Points rows;
  for (int i = 0; i < 6; ++i) rows.push_back({x(i, 0)});
  const auto ref = oracle::irls_logistic(rows, t);
  EXPECT_NEAR(model.coefficients(0), ref[0], 1e-6);
  EXPECT_NEAR(model.coefficients(1), ref[1], 1e-6);
}

TEST(Propensity, NullModel) {
  const Matrix x = testutil::random_points(4000, 2, 5);
  std::vector<int> t(4000);
  CounterRng rng(99);
  int n1 = 0;
  for (auto& v : t) n1 += (v = rng.uniform() < 0.3);
  const auto model = fit_propensity(testutil::make_dataset(x, t, std::vector<double>(4000, 0.0)));
  EXPECT_NEAR(model.coefficients(0), std::log(n1 / (4000.0 - n1)), 0.1);
  EXPECT_NEAR(model.coefficients(1), 0.0, 0.1);
  EXPECT_NEAR(model.coefficients(2), 0.0, 0.1);
}

TEST(Propensity, SeparationError) {
  const auto d = testutil::make_dataset(column({1, 2, 3, 4, 5, 6}), {0, 0, 0, 1, 1, 1}, std::vector<double>(6, 0.0));
  EXPECT_THROW(fit_propensity(d), Error);
  PropensityOptions opt;
  opt.ridge = 1e-8;
  EXPECT_NO_THROW(fit_propensity(d, opt));
}

TEST(Ipw, HorvitzThompsonArithmetic) {
  const auto d = testutil::make_dataset(column({0, 0}), {1, 0}, {3, 1});
  const auto e = ipw_from_scores(d, {0.5, 0.5}, IpwStyle::horvitz_thompson);
  EXPECT_DOUBLE_EQ(e.ate, 2.0);
  EXPECT_THROW(ipw_from_scores(d, {1.0, 0.5}, IpwStyle::hajek), Error);
}

TEST(Ipw, HajekConstantPropensityIsUnadjusted) {
  const Matrix x = testutil::random_points(30, 2, 8);
  std::vector<int> t(30);
  std::vector<double> y(30);
  for (int i = 0; i < 30; ++i) {
    t[i] = (i * 7) % 5 < 2;
    y[i] = std::cos(i) * 10.0;
  }
  const auto d = testutil::make_dataset(x, t, y);
  for (double p : {0.2, 0.5, 0.77}) {
    const auto e = ipw_from_scores(d, std::vector<double>(30, p), IpwStyle::hajek);
    EXPECT_NEAR(e.ate, unadjusted(d), 1e-12);
    EXPECT_NEAR(e.att, unadjusted(d), 1e-12);
  }
  EXPECT_EQ(parse_ipw_style("ht"), IpwStyle::horvitz_thompson);
  EXPECT_THROW(parse_ipw_style("x"), Error);
}

TEST(Unadjusted, Examples) {
  EXPECT_DOUBLE_EQ(unadjusted(testutil::make_dataset(column({0, 0}), {0, 1}, {1, 3})), 2.0);
  const auto lalonde = io::read_nsw(OTMATCH_DATA);
  EXPECT_NEAR(unadjusted(lalonde), 886.3037, 0.01);
  EXPECT_THROW(unadjusted(testutil::make_dataset(column({0, 0}), {0, 0}, {1, 3})), Error);
}

TEST(Baselines, LalondeKnn3) {
  const auto d = standardize(io::read_nsw(OTMATCH_DATA), {"age", "education", "re75"}).dataset;
  const auto e = knn_estimates(d, 3);
  EXPECT_NEAR(e.att, 870.62, 0.05 * 870.62);
  EXPECT_NEAR(e.ate, 722.47, 0.05 * 722.47);
}

// Runs every oracle comparison and prints one report line each.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <vector>

#include "oracles/brute.hpp"
#include "oracles/high_precision.hpp"
#include "oracles/irls.hpp"
#include "oracles/report.hpp"
#include "oracles/scalar_min.hpp"
#include "otmatch/otmatch.hpp"

using namespace otmatch;
using oracle::OracleReport;

namespace {

Matrix gaussian(std::size_t n, std::size_t d, std::uint64_t seed) {
  CounterRng rng(seed);
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) m(i, k) = rng.normal();
  }
  return m;
}

std::vector<OracleReport> verify_all(std::uint64_t seed) {
  std::vector<OracleReport> out;

  {
    double dev = 0.0;
    for (double eps : {1e-3, 1e-2, 1e-1, 1.0}) {
      for (int i = 0; i < 100; ++i) {
        const double p = -10.0 + 20.0 * i / 99.0;
        dev = std::max(dev, std::abs(Divergence::kl(1.0).aprox(p, eps) - oracle::kl_aprox(p, eps, 1.0)));
        dev = std::max(dev, std::abs(Divergence::balanced().aprox(p, eps) - oracle::balanced_aprox(p, eps)));
      }
    }
    out.push_back({"aprox/golden-section", "grid p in [-10,10] x 4 eps", 0.0, 0.0, dev, 1e-10});
  }

  {
    double dev = 0.0, ref = 0.0, main = 0.0;
    for (std::uint64_t k = 0; k < 5; ++k) {
      const std::vector<DiscreteMeasure> ms = {DiscreteMeasure::empirical(gaussian(5, 2, child_seed(seed, 2 * k))),
                                               DiscreteMeasure::empirical(gaussian(5, 2, child_seed(seed, 2 * k + 1)))};
      const auto cost = build_cost(ms);
      SinkhornConfig cfg;
      cfg.epsilon = 1e-4;
      cfg.max_iterations = 200000;
      const auto sol = solve(ms, cost, {Divergence::balanced(), Divergence::balanced()}, cfg);
      std::vector<std::vector<double>> c(5, std::vector<double>(5));
      for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 5; ++j) c[i][j] = cost(i, j);
      }
      ref = oracle::best_permutation(c).value;
      main = transport_cost(sol.coupling, cost);
      dev = std::max(dev, std::abs(ref - main));
    }
    out.push_back({"entropic/exact-LP", "five 5x5 instances, eps=1e-4", ref, main, dev, 5e-3});
  }

  {
    const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 3, 4, 5, 6};
    const auto ref = oracle::welch(a, b);
    const auto r = welch_t(a, b);
    out.push_back({"welch/high-precision", "a=1..5 b=2..6 (p)", ref.p, r.p_value, std::abs(ref.p - r.p_value), 1e-6});
    out.push_back({"welch/high-precision", "a=1..5 b=2..6 (t)", ref.t, r.statistic, std::abs(ref.t - r.statistic), 1e-6});
  }

  {
    std::vector<double> a(50), b(50);
    CounterRng rng(child_seed(seed, 50));
    for (std::size_t i = 0; i < 50; ++i) b[i] = rng.normal();
    for (std::size_t i = 0; i < 50; ++i) a[i] = 2.0 * b[i];
    const double ref = oracle::f_two_sided(4.0, 49, 49);
    const double main = f_variance(a, b).p_value;
    out.push_back({"F/high-precision", "ratio 4, n=50 each", ref, main, std::abs(ref - main), 1e-6});
  }

  {
    CounterRng rng(child_seed(seed, 60));
    std::vector<double> a(100), b(100);
    for (auto& x : a) x = rng.uniform();
    for (auto& x : b) x = 0.3 + rng.uniform();
    const auto r = ks_two_sample(a, b);
    const double d = oracle::ks_distance(a, b);
    const double lambda = (std::sqrt(50.0) + 0.12 + 0.11 / std::sqrt(50.0)) * d;
    const double ref = oracle::kolmogorov_q(lambda);
    out.push_back({"KS/brute-force", "U[0,1] vs U[0.3,1.3] (D)", d, r.statistic, std::abs(d - r.statistic), 1e-12});
    out.push_back({"KS/series", "U[0,1] vs U[0.3,1.3] (p)", ref, r.p_value, std::abs(ref - r.p_value), 1e-6});
  }

  {
    double dev = 0.0;
    for (double l = 0.05; l < 3.0; l += 0.05) dev = std::max(dev, std::abs(special::kolmogorov_q(l) - oracle::kolmogorov_q(l)));
    out.push_back({"kolmogorov/series", "lambda grid 0.05..3", 0.0, 0.0, dev, 1e-12});
  }

  {
    double dev = 0.0;
    for (double a : {0.5, 2.5, 30.0}) {
      for (double b : {0.5, 4.0, 70.0}) {
        for (double x : {0.01, 0.3, 0.6, 0.99}) dev = std::max(dev, std::abs(special::incomplete_beta(a, b, x) - oracle::ibeta(a, b, x)));
      }
    }
    out.push_back({"incomplete-beta/high-precision", "a,b,x grid", 0.0, 0.0, dev, 1e-10});
  }

  {
    Matrix x(6, 1);
    x << 0.5, 1.5, 2.0, 2.5, 3.0, 4.0;
    const std::vector<int> t{0, 0, 1, 0, 1, 1};
    Dataset d;
    d.covariates = x;
    d.treatment = t;
    d.outcome.assign(6, 0.0);
    d.columns = {"x"};
    const auto model = fit_propensity(d);
    const auto ref = oracle::irls_logistic({{0.5}, {1.5}, {2.0}, {2.5}, {3.0}, {4.0}}, t);
    const double dev = std::max(std::abs(ref[0] - model.coefficients(0)), std::abs(ref[1] - model.coefficients(1)));
    out.push_back({"logistic/IRLS", "canned 6-point dataset", ref[1], model.coefficients(1), dev, 1e-6});
  }

  {
    const Matrix x = gaussian(60, 2, child_seed(seed, 70));
    Dataset d;
    d.covariates = x;
    d.columns = {"a", "b"};
    oracle::Points pool;
    std::vector<std::size_t> rows;
    for (int i = 0; i < 60; ++i) {
      d.treatment.push_back(i % 3 == 0);
      d.outcome.push_back(x(i, 0) * 3.0 + i);
      if (i % 3) {
        pool.push_back({x(i, 0), x(i, 1)});
        rows.push_back(i);
      }
    }
    const auto imp = knn_impute(d, 3);
    double dev = 0.0;
    for (int i = 0; i < 60; i += 3) {
      double ref = 0.0;
      for (auto q : oracle::knn(pool, {x(i, 0), x(i, 1)}, 3)) ref += d.outcome[rows[q]] / 3.0;
      dev = std::max(dev, std::abs(ref - imp.counterfactual[i]));
    }
    out.push_back({"knn/brute-force", "60 units, k=3", 0.0, 0.0, dev, 1e-12});
  }

  {
    const std::vector<oracle::IsoComponent> control{{0.5, -1, -1, 2.0}, {0.5, 0.5, 0.5, 1.0}};
    const std::vector<oracle::IsoComponent> treated{{0.5, 1, 1, 2.0}, {0.5, 0.5, 0.5, 1.0}};
    const double mc = (1000.0 * oracle::mc_mean_effect(control, 10'000'000, seed) +
                       100.0 * oracle::mc_mean_effect(treated, 1'000'000, seed + 1)) / 1100.0;
    const double closed = population_ate(SimCase::case1);
    out.push_back({"ATE-truth/Monte-Carlo", "case 1, 1e7 control draws", mc, closed, std::abs(mc - closed), 5e-3});
  }
  return out;
}

}  // namespace

int main() {
  const auto reports = verify_all(20240611);
  oracle::print(reports);
  for (const auto& r : reports) {
    if (!r.pass()) return 1;
  }
  return 0;
}

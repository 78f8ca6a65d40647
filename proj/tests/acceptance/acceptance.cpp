// Acceptance criteria, one PASS/FAIL line each. Arguments select a subset
// by number; no arguments runs all ten.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles/brute.hpp"
#include "oracles/high_precision.hpp"
#include "oracles/scalar_min.hpp"
#include "otmatch/otmatch.hpp"

using namespace otmatch;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;
};

Matrix gaussian(std::size_t n, std::size_t d, std::uint64_t seed, double scale = 1.0) {
  CounterRng rng(seed);
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) m(i, k) = scale * rng.normal();
  }
  return m;
}

std::vector<DiscreteMeasure> random_instance(std::uint64_t seed) {
  CounterRng rng(child_seed(seed, 99));
  const auto n = 2 + rng.below(11), m = 2 + rng.below(11);
  return {DiscreteMeasure::empirical(gaussian(n, 2, child_seed(seed, 0))),
          DiscreteMeasure::empirical(gaussian(m, 2, child_seed(seed, 1)))};
}

std::vector<Divergence> both(const Divergence& d) { return {d, d}; }

Dataset make_dataset(const Matrix& x, std::vector<int> t, std::vector<double> y) {
  Dataset d;
  d.covariates = x;
  d.treatment = std::move(t);
  d.outcome = std::move(y);
  for (Eigen::Index c = 0; c < x.cols(); ++c) d.columns.push_back("x" + std::to_string(c));
  return d;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

constexpr double instance_epsilon = 0.5;

// 1. Solver correctness on random balanced instances.
Outcome solver_correctness() {
  const auto t0 = Clock::now();
  double marg = 0.0, foc = 0.0, gap = 0.0;
  std::size_t unconverged = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto ms = random_instance(seed);
    const auto cost = build_cost(ms);
    SinkhornConfig cfg;
    cfg.epsilon = instance_epsilon;
    const auto divs = both(Divergence::balanced());
    const auto sol = solve(ms, cost, divs, cfg);
    if (!sol.ipfp.converged) ++unconverged;
    marg = std::max(marg, sol.marginal_error);
    foc = std::max(foc, sol.residual);
    gap = std::max(gap, std::abs(primal_objective(sol.coupling, cost, ms, cfg.epsilon, divs) - sol.dual));
  }
  const double t = seconds_since(t0);
  return {unconverged == 0 && marg < 1e-7 && foc < 1e-8 && gap < 1e-6 && t < 10.0,
          "eps=0.5 marginal=" + num(marg) + " foc=" + num(foc) + " gap=" + num(gap) +
              " unconverged=" + std::to_string(unconverged) + " t=" + num(t) + "s"};
}

// 2. Entropic cost approaches the exact optimum.
Outcome lp_limit() {
  const auto t0 = Clock::now();
  double dev = 0.0;
  for (std::uint64_t k = 0; k < 5; ++k) {
    const std::vector<DiscreteMeasure> ms = {DiscreteMeasure::empirical(gaussian(5, 2, child_seed(1000 + k, 0))),
                                             DiscreteMeasure::empirical(gaussian(5, 2, child_seed(1000 + k, 1)))};
    const auto cost = build_cost(ms);
    SinkhornConfig cfg;
    cfg.epsilon = 1e-4;
    cfg.max_iterations = 200000;
    const auto sol = solve(ms, cost, both(Divergence::balanced()), cfg);
    dev = std::max(dev, std::abs(transport_cost(sol.coupling, cost) - exact_ot_bruteforce(ms, cost).value));
  }
  const double t = seconds_since(t0);
  return {dev < 5e-3 && t < 30.0, "max |entropic - exact|=" + num(dev) + " t=" + num(t) + "s"};
}

// 3. aprox closed forms against scalar minimization.
Outcome aprox_grid() {
  const auto t0 = Clock::now();
  double dev = 0.0;
  for (double eps : {1e-3, 1e-2, 1e-1, 1.0}) {
    for (int i = 0; i < 100; ++i) {
      const double p = -10.0 + 20.0 * i / 99.0;
      dev = std::max(dev, std::abs(Divergence::kl(1.0).aprox(p, eps) - oracle::kl_aprox(p, eps, 1.0)));
      dev = std::max(dev, std::abs(Divergence::balanced().aprox(p, eps) - oracle::balanced_aprox(p, eps)));
    }
  }
  const double t = seconds_since(t0);
  return {dev < 1e-10 && t < 1.0, "max dev=" + num(dev) + " t=" + num(t) + "s"};
}

// 4. kl with a large scale reproduces the balanced coupling.
Outcome rho_limit() {
  double dev = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto ms = random_instance(seed);
    const auto cost = build_cost(ms);
    SinkhornConfig cfg;
    cfg.epsilon = instance_epsilon;
    cfg.max_iterations = 100000;
    const auto bal = solve(ms, cost, both(Divergence::balanced()), cfg).coupling.values.values();
    const auto un = solve(ms, cost, both(Divergence::kl(1e6)), cfg).coupling.values.values();
    for (std::size_t k = 0; k < bal.size(); ++k) dev = std::max(dev, std::abs(bal[k] - un[k]));
  }
  return {dev < 1e-3, "max entrywise dev=" + num(dev)};
}

// 5. One treated point far from every control loses its mass.
Outcome outlier_dropping() {
  Matrix controls = gaussian(30, 2, 77, 0.25);
  Matrix treated = gaussian(10, 2, 78, 0.25);
  treated.row(9) << 25.0, 25.0;
  const std::vector<DiscreteMeasure> ms = {DiscreteMeasure::empirical(controls), DiscreteMeasure::empirical(treated)};
  const auto cost = build_cost(ms);
  SinkhornConfig cfg;
  cfg.epsilon = 0.05;
  cfg.max_iterations = 100000;
  const auto sol = solve(ms, cost, both(Divergence::kl(1.0)), cfg);
  const auto& m1 = sol.coupling.marginals[1];
  double inlier = INFINITY;
  for (std::size_t i = 0; i < 9; ++i) inlier = std::min(inlier, m1[i] / 0.1);
  const double outlier = m1[9] / 0.1;
  return {outlier < 0.1 && inlier > 0.9, "outlier kept " + num(outlier) + ", min inlier kept " + num(inlier)};
}

// 6. Simulation table ordering over 20 master seeds.
Outcome simulation_ordering() {
  const auto t0 = Clock::now();
  const std::vector<double> eps = {1e-3, 5e-3, 1e-2, 5e-2};
  // [case][row]: ot per eps, then ipw, knn1
  double ate[2][6] = {}, att[2][6] = {}, sd[2][6] = {};
  std::size_t failures = 0;
  const std::size_t seeds = 20;
  for (std::uint64_t s = 0; s < seeds; ++s) {
    for (int c = 0; c < 2; ++c) {
      SimulationConfig cfg;
      cfg.which = c == 0 ? SimCase::case1 : SimCase::case2;
      cfg.methods = {"ot", "ipw", "knn1"};
      cfg.epsilons = eps;
      cfg.seed = 1 + s;
      const auto rows = run_case(cfg);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        ate[c][r] += rows[r].ate_diff / seeds;
        att[c][r] += rows[r].att_diff / seeds;
        sd[c][r] += rows[r].att_sd_diff / seeds;
        failures += rows[r].failures;
      }
    }
  }
  const double t = seconds_since(t0);
  const bool a = att[1][0] >= 0.05 && att[1][0] <= 0.25 && att[0][0] >= 0.15 && att[0][0] <= 0.40;
  const bool b = ate[0][4] > 10.0 && ate[1][4] > 10.0;
  const bool cc = sd[0][0] < sd[0][5] && sd[1][0] < sd[1][5];
  bool d = true;
  for (std::size_t e = 1; e < eps.size(); ++e) d = d && ate[0][e] >= ate[0][e - 1];
  std::ostringstream o;
  o << "(a " << (a ? "ok" : "FAIL") << ": OT ATT_diff case2=" << num(att[1][0]) << " case1=" << num(att[0][0]) << ")"
    << " (b " << (b ? "ok" : "FAIL") << ": IPW ATE_diff case1=" << num(ate[0][4]) << " case2=" << num(ate[1][4]) << ")"
    << " (c " << (cc ? "ok" : "FAIL") << ": ATT_sd_diff OT/KNN1 case1=" << num(sd[0][0]) << "/" << num(sd[0][5])
    << " case2=" << num(sd[1][0]) << "/" << num(sd[1][5]) << ")"
    << " (d " << (d ? "ok" : "FAIL") << ": case1 OT ATE_diff";
  for (std::size_t e = 0; e < eps.size(); ++e) o << " " << num(ate[0][e]);
  o << ") failures=" << failures << " t=" << num(t) << "s";
  return {a && b && cc && d && t < 900.0, o.str()};
}

// 7. Lalonde estimates.
Outcome lalonde_estimates() {
  const auto t0 = Clock::now();
  LalondeConfig cfg;
  cfg.methods = {"ot", "knn3", "unadjusted"};
  const auto res = lalonde_pipeline(io::read_nsw(OTMATCH_DATA), cfg);
  const auto& ot = res.estimates[0];
  const auto& k3 = res.estimates[1];
  const auto& un = res.estimates[2];
  auto within = [](double v, double ref, double rel) { return std::abs(v - ref) <= rel * ref; };
  const bool ok = within(ot.ate, 760.74, 0.10) && within(ot.att, 828.34, 0.10) && within(k3.ate, 722.47, 0.05) &&
                  within(k3.att, 870.62, 0.05) && std::abs(un.ate - 886.3037) <= 0.01;
  const double t = seconds_since(t0);
  return {ok && t < 120.0, "OT ATE=" + num(ot.ate) + " ATT=" + num(ot.att) + " KNN3 ATE=" + num(k3.ate) +
                               " ATT=" + num(k3.att) + " unadjusted=" + num(un.ate) + " t=" + num(t) + "s"};
}

// 8. Balance diagnostics before matching, and the three tests against oracles.
Outcome balance_diagnostics() {
  const Dataset raw = io::read_nsw(OTMATCH_DATA);
  const std::vector<std::string> std_cols = {"age", "education", "re75"};
  Dataset data = standardize(raw, std_cols).dataset;
  for (auto& c : data.columns) c = balance_name(c, std_cols);
  const auto rows = balance_before(data, data.columns);
  double nodegree = NAN, age = NAN;
  for (const auto& r : rows) {
    if (r.covariate == "nodegree") nodegree = r.t_p;
    if (r.covariate == "age_std") age = r.t_p;
  }
  const bool table = std::abs(nodegree - 0.0092) <= 0.002 && std::abs(age - 0.7216) <= 0.002;
  double dev = 0.0;
  for (std::size_t c = 0; c < data.dim(); ++c) {
    std::vector<double> x[2];
    for (std::size_t i = 0; i < data.size(); ++i) {
      x[data.treatment[i]].push_back(data.covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)));
    }
    dev = std::max(dev, std::abs(welch_t(x[0], x[1]).p_value - oracle::welch(x[0], x[1]).p));
    const auto f = f_variance(x[0], x[1]);
    dev = std::max(dev, std::abs(f.p_value - oracle::f_two_sided(f.statistic, x[0].size() - 1.0, x[1].size() - 1.0)));
    const auto ks = ks_two_sample(x[0], x[1]);
    const double ne = static_cast<double>(x[0].size() * x[1].size()) / static_cast<double>(x[0].size() + x[1].size());
    const double d = oracle::ks_distance(x[0], x[1]);
    dev = std::max(dev, std::abs(ks.statistic - d));
    dev = std::max(dev, std::abs(ks.p_value - oracle::kolmogorov_q((std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d)));
  }
  return {table && dev < 1e-6,
          "nodegree t p=" + num(nodegree) + " age_std t p=" + num(age) + " max oracle dev=" + num(dev)};
}

// Two standard normal arms with a linear outcome and a constant effect.
Dataset overlapped_design(std::size_t n, std::uint64_t seed) {
  const Matrix x = gaussian(2 * n, 2, child_seed(seed, 0));
  CounterRng rng(child_seed(seed, 1));
  std::vector<int> t(2 * n);
  std::vector<double> y(2 * n);
  for (std::size_t i = 0; i < 2 * n; ++i) {
    t[i] = i >= n;
    const auto r = static_cast<Eigen::Index>(i);
    y[i] = x(r, 0) + 0.5 * x(r, 1) + (t[i] ? 1.0 : 0.0) + rng.normal();
  }
  return make_dataset(x, t, y);
}

// 9. Bootstrap reproducibility and root-N scaling of the OT ATT sd.
Outcome bootstrap_contract() {
  OtConfig oc;
  oc.sinkhorn.epsilon = 0.1;
  const auto estimator = [&](const Dataset& d) { return ot_effects(d, oc).att; };
  BootstrapOptions bo;
  bo.replicates = 100;
  bo.seed = 11;
  const Dataset small = overlapped_design(100, 5);
  const auto a = bootstrap(small, estimator, bo);
  bo.threads = 2;
  const auto b = bootstrap(small, estimator, bo);
  const bool same = a.replicates == b.replicates && a.sd == b.sd;
  bo.threads = 1;
  const auto large = bootstrap(overlapped_design(400, 5), estimator, bo);
  const double factor = a.sd / large.sd;
  return {same && factor >= 1.7 && factor <= 2.3,
          std::string("bitwise ") + (same ? "identical" : "DIFFERENT") + ", sd(N=100)/sd(N=400)=" + num(factor)};
}

// 10. Estimator identities.
Outcome estimator_identities() {
  std::ostringstream o;
  bool ok = true;

  // identical arms, treated outcomes shifted by 2
  {
    const Matrix x = gaussian(6, 2, 3);
    Matrix both_x(12, 2);
    both_x << x, x;
    std::vector<int> t(12, 0);
    std::fill(t.begin() + 6, t.end(), 1);
    std::vector<double> y(12);
    for (int i = 0; i < 12; ++i) y[i] = std::sin(both_x(i, 0)) + both_x(i, 1) * both_x(i, 1) + (t[i] ? 2.0 : 0.0);
    const auto arms = split_by_treatment(make_dataset(both_x, t, y));
    OtConfig oc;
    oc.divergence = Divergence::balanced();
    oc.sinkhorn.epsilon = 1e-4;
    oc.sinkhorn.max_iterations = 100000;
    const auto fit = fit_couplings(arms, oc);
    const double dev = std::max(std::abs(att(arms, fit.couplings).point - 2.0), std::abs(ate(arms, fit.couplings).point - 2.0));
    ok = ok && dev < 1e-10;
    o << "shift dev=" << num(dev);
  }

  // small eps and small rho: OT imputation follows the nearest control
  {
    double dev = 0.0;
    std::size_t checked = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const std::size_t n0 = 40, n1 = 15;
      const Matrix x = gaussian(n0 + n1, 2, child_seed(seed, 500));
      std::vector<int> t(n0 + n1, 0);
      std::fill(t.begin() + static_cast<std::ptrdiff_t>(n0), t.end(), 1);
      std::vector<double> y(n0 + n1);
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = 3.0 * x(static_cast<Eigen::Index>(i), 0) + static_cast<double>(i);
      const Dataset d = make_dataset(x, t, y);
      const auto arms = split_by_treatment(d);
      OtConfig oc;
      oc.divergence = Divergence::kl(1e-8);
      oc.sinkhorn.epsilon = 1e-4;
      oc.drop_threshold = 0.0;
      const auto fit = fit_couplings(arms, oc);
      const auto imp = impute_counterfactual(fit.couplings.conditional(1, 0, 0.0), arms[0].outcome);
      const auto nn = knn_impute(d, 1);
      for (std::size_t i = 0; i < n1; ++i) {
        // only units whose nearest control is unique by a clear margin
        std::vector<double> dist;
        for (std::size_t k = 0; k < n0; ++k) {
          dist.push_back((x.row(static_cast<Eigen::Index>(n0 + i)) - x.row(static_cast<Eigen::Index>(k))).squaredNorm());
        }
        std::sort(dist.begin(), dist.end());
        if (dist[1] - dist[0] < 50.0 * oc.sinkhorn.epsilon) continue;
        ++checked;
        dev = std::max(dev, std::abs(imp.values[i] - nn.counterfactual[n0 + i]));
      }
    }
    ok = ok && dev < 1e-6 && checked >= 200;
    o << "; 1-NN dev=" << num(dev) << " over " << checked << " units";
  }

  // Hajek weights with a constant score reduce to the difference in means
  {
    const Matrix x = gaussian(30, 2, 8);
    std::vector<int> t(30);
    std::vector<double> y(30);
    for (int i = 0; i < 30; ++i) {
      t[i] = (i * 7) % 5 < 2;
      y[i] = std::cos(i) * 10.0;
    }
    const auto d = make_dataset(x, t, y);
    double dev = 0.0;
    for (double p : {0.2, 0.5, 0.77}) {
      const auto e = ipw_from_scores(d, std::vector<double>(30, p), IpwStyle::hajek);
      dev = std::max({dev, std::abs(e.ate - unadjusted(d)), std::abs(e.att - unadjusted(d))});
    }
    ok = ok && dev < 1e-12;
    o << "; Hajek dev=" << num(dev);
  }
  return {ok, o.str()};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"solver correctness", solver_correctness},   {"LP limit", lp_limit},
      {"aprox closed forms", aprox_grid},           {"rho limit", rho_limit},
      {"unbalanced dropping", outlier_dropping},    {"simulation ordering", simulation_ordering},
      {"Lalonde estimates", lalonde_estimates},     {"balance diagnostics", balance_diagnostics},
      {"bootstrap contract", bootstrap_contract},   {"estimator identities", estimator_identities},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome r;
    try {
      r = criteria[k].second();
    } catch (const std::exception& e) {
      r = {false, std::string("error: ") + e.what()};
    }
    std::printf("%s %2d %s: %s\n", r.pass ? "PASS" : "FAIL", id, criteria[k].first, r.detail.c_str());
    std::fflush(stdout);
    failed += !r.pass;
  }
  return failed == 0 ? 0 : 1;
}

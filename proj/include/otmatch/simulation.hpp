#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "otmatch/baselines.hpp"
#include "otmatch/error.hpp"
#include "otmatch/matching.hpp"
#include "otmatch/measures.hpp"
#include "otmatch/parallel.hpp"
#include "otmatch/rng.hpp"
#include "otmatch/solver.hpp"

namespace otmatch {

struct MixtureComponent {
  double weight = 1.0;
  Vector mean;
  Matrix covariance;
};

struct MixtureSpec {
  std::vector<MixtureComponent> components;

  std::size_t dim() const { return components.empty() ? 0 : static_cast<std::size_t>(components.front().mean.size()); }

  // Lower Cholesky factors; throws when a covariance is not positive definite.
  std::vector<Eigen::MatrixXd> factors() const {
    if (components.empty()) throw usage_error("mixture has no components");
    double total = 0.0;
    std::vector<Eigen::MatrixXd> out;
    for (const auto& c : components) {
      if (!(c.weight >= 0.0)) throw usage_error("mixture weights must be >= 0");
      total += c.weight;
      const auto d = c.mean.size();
      if (static_cast<std::size_t>(d) != dim() || c.covariance.rows() != d || c.covariance.cols() != d) {
        throw usage_error("mixture component shapes disagree");
      }
      if (!c.covariance.isApprox(c.covariance.transpose(), 1e-12)) throw usage_error("covariance is not symmetric");
      Eigen::LLT<Eigen::MatrixXd> llt(Eigen::MatrixXd(c.covariance));
      if (llt.info() != Eigen::Success) throw numeric_error("covariance is not positive definite");
      out.push_back(llt.matrixL());
    }
    if (std::abs(total - 1.0) > 1e-12) throw usage_error("mixture weights must sum to 1");
    return out;
  }
};

inline MixtureComponent isotropic(double weight, Vector mean, double variance) {
  const auto d = mean.size();
  return {weight, std::move(mean), Matrix::Identity(d, d) * variance};
}

/// n draws: component by inverse CDF of one uniform, then mean + L z.
inline Matrix sample_mixture(const MixtureSpec& spec, std::size_t n, std::uint64_t seed) {
  const auto L = spec.factors();
  const auto d = static_cast<Eigen::Index>(spec.dim());
  CounterRng rng(seed);
  Matrix out(static_cast<Eigen::Index>(n), d);
  Vector z(d);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    std::size_t c = 0;
    double cum = spec.components[0].weight;
    while (u >= cum && c + 1 < spec.components.size()) cum += spec.components[++c].weight;
    // zero-weight trailing components are never reached
    while (spec.components[c].weight == 0.0 && c > 0) --c;
    for (Eigen::Index k = 0; k < d; ++k) z(k) = rng.normal();
    out.row(static_cast<Eigen::Index>(i)) = (spec.components[c].mean + L[c] * z).transpose();
  }
  return out;
}

// Outcome regressions of the two-covariate design.
inline double mean_outcome0(double x1, double x2) { return -1.0 + x1 * x2; }
inline double mean_outcome1(double x1, double x2) { return 2.0 + 2.0 * x1 + x2; }
inline double true_effect(double x1, double x2) { return mean_outcome1(x1, x2) - mean_outcome0(x1, x2); }

/// Y(0) ~ N(-1 + X1 X2, 1), Y(1) ~ N(2 + 2 X1 + X2, 0.5). The second parameter
/// is a variance unless noise_is_sd.
inline std::vector<double> sample_outcomes(const Matrix& X, int arm, std::uint64_t seed, bool noise_is_sd = false) {
  if (X.cols() != 2) throw usage_error("outcome model needs exactly two covariates");
  if (arm != 0 && arm != 1) throw usage_error("outcome model has arms 0 and 1 only");
  const double scale = arm == 0 ? 1.0 : (noise_is_sd ? 0.5 : std::sqrt(0.5));
  CounterRng rng(seed);
  std::vector<double> y(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double m = arm == 0 ? mean_outcome0(X(i, 0), X(i, 1)) : mean_outcome1(X(i, 0), X(i, 1));
    y[static_cast<std::size_t>(i)] = m + scale * rng.normal();
  }
  return y;
}

enum class SimCase { case1, case2, illustration };

inline SimCase parse_case(const std::string& s) {
  if (s == "1" || s == "case1") return SimCase::case1;
  if (s == "2" || s == "case2") return SimCase::case2;
  if (s == "illustration" || s == "illustration3arm") return SimCase::illustration;
  throw usage_error("unknown case '" + s + "' (expected 1, 2 or illustration)");
}

inline MixtureSpec control_spec() {
  return {{isotropic(0.5, Vector::Constant(2, -1.0), 2.0), isotropic(0.5, Vector::Constant(2, 0.5), 1.0)}};
}

inline MixtureSpec treated_spec(SimCase c) {
  if (c == SimCase::case1) {
    return {{isotropic(0.5, Vector::Constant(2, 1.0), 2.0), isotropic(0.5, Vector::Constant(2, 0.5), 1.0)}};
  }
  if (c == SimCase::case2) {
    return {{isotropic(0.5, Vector::Constant(2, 1.0), 0.5), isotropic(0.5, Vector::Constant(2, 0.5), 0.5)}};
  }
  throw usage_error("the illustration has no treated arm");
}

// E[tau(X)] for X ~ spec, using E[X1 X2] = cov12 + m1 m2 per component.
inline double mixture_mean_effect(const MixtureSpec& spec) {
  double s = 0.0;
  for (const auto& c : spec.components) {
    const double m1 = c.mean(0), m2 = c.mean(1);
    s += c.weight * (3.0 + 2.0 * m1 + m2 - (c.covariance(0, 1) + m1 * m2));
  }
  return s;
}

/// Population ATE of the two-arm design with n0 controls and n1 treated.
inline double population_ate(SimCase c, std::size_t n0 = 1000, std::size_t n1 = 100) {
  const double e0 = mixture_mean_effect(control_spec());
  const double e1 = mixture_mean_effect(treated_spec(c));
  return (static_cast<double>(n0) * e0 + static_cast<double>(n1) * e1) / static_cast<double>(n0 + n1);
}

/// One simulated two-arm dataset (controls first) with covariates (x1, x2).
inline Dataset simulate_dataset(SimCase c, std::size_t n0, std::size_t n1, std::uint64_t seed,
                                bool noise_is_sd = false) {
  const Matrix x0 = sample_mixture(control_spec(), n0, child_seed(seed, 0));
  const Matrix x1 = sample_mixture(treated_spec(c), n1, child_seed(seed, 1));
  const auto y0 = sample_outcomes(x0, 0, child_seed(seed, 2), noise_is_sd);
  const auto y1 = sample_outcomes(x1, 1, child_seed(seed, 3), noise_is_sd);
  Dataset d;
  d.columns = {"x1", "x2"};
  d.covariates.resize(static_cast<Eigen::Index>(n0 + n1), 2);
  d.covariates.topRows(static_cast<Eigen::Index>(n0)) = x0;
  d.covariates.bottomRows(static_cast<Eigen::Index>(n1)) = x1;
  d.treatment.assign(n0, 0);
  d.treatment.insert(d.treatment.end(), n1, 1);
  d.outcome = y0;
  d.outcome.insert(d.outcome.end(), y1.begin(), y1.end());
  return d;
}

struct SimulationConfig {
  SimCase which = SimCase::case1;
  std::vector<std::string> methods = {"ot", "ipw", "knn3", "knn1", "unadjusted"};
  std::vector<double> epsilons = {1e-3, 5e-3, 1e-2, 5e-2};
  std::size_t replications = 100;
  std::uint64_t seed = 0;
  std::size_t n0 = 1000;
  std::size_t n1 = 100;
  Divergence divergence = Divergence::kl(1.0);
  double tolerance = 1e-6;
  std::size_t max_iterations = 100000;
  double drop_threshold = 1e-3;
  bool noise_is_sd = false;
  unsigned threads = 1;
};

struct ExperimentRow {
  std::string method;
  std::optional<double> epsilon;  // OT only
  double ate_diff = 0.0;
  double att_diff = 0.0;
  double att_sd_diff = std::numeric_limits<double>::quiet_NaN();
  std::size_t replications = 0;
  std::uint64_t seed = 0;
  std::size_t failures = 0;
};

namespace detail {

struct MethodResult {
  double ate = std::numeric_limits<double>::quiet_NaN();
  double att = std::numeric_limits<double>::quiet_NaN();
  double att_sd = std::numeric_limits<double>::quiet_NaN();
};

inline double sd_of(const std::vector<double>& v) { return v.size() > 1 ? mean_sd(v).second : 0.0; }

inline std::size_t knn_k(const std::string& method) {
  if (method.rfind("knn:", 0) == 0) return static_cast<std::size_t>(std::stoul(method.substr(4)));
  return static_cast<std::size_t>(std::stoul(method.substr(3)));
}

}  // namespace detail

/// Runs the Monte-Carlo protocol: `replications` datasets, every method on
/// each, mean absolute errors against the truths. OT rows are per epsilon and
/// the solves on one dataset are warm-started down the epsilon ladder.
inline std::vector<ExperimentRow> run_case(const SimulationConfig& cfg) {
  if (cfg.which == SimCase::illustration) throw usage_error("run_case handles cases 1 and 2; use run_illustration");
  if (cfg.replications == 0) throw usage_error("need at least one replication");
  for (const auto& m : cfg.methods) {
    if (m != "ot" && m != "ipw" && m != "unadjusted" && m.rfind("knn", 0) != 0) {
      throw usage_error("unknown method '" + m + "'");
    }
  }
  const bool want_ot = std::find(cfg.methods.begin(), cfg.methods.end(), "ot") != cfg.methods.end();
  if (want_ot && cfg.epsilons.empty()) throw usage_error("OT needs at least one epsilon");
  std::vector<std::size_t> eps_order(cfg.epsilons.size());
  for (std::size_t e = 0; e < eps_order.size(); ++e) eps_order[e] = e;
  std::sort(eps_order.begin(), eps_order.end(),
            [&](std::size_t a, std::size_t b) { return cfg.epsilons[a] > cfg.epsilons[b]; });

  // slots: OT per epsilon, then the remaining methods in order
  std::vector<std::string> slot_method;
  std::vector<std::optional<double>> slot_eps;
  for (const auto& m : cfg.methods) {
    if (m == "ot") {
      for (double e : cfg.epsilons) {
        slot_method.push_back(m);
        slot_eps.push_back(e);
      }
    } else {
      slot_method.push_back(m);
      slot_eps.push_back(std::nullopt);
    }
  }
  const double ate_truth = population_ate(cfg.which, cfg.n0, cfg.n1);
  struct Rep {
    double att_truth = 0.0, att_sd_truth = 0.0;
    std::vector<detail::MethodResult> results;
    std::vector<char> failed;
  };
  std::vector<Rep> reps(cfg.replications);

  parallel_for(cfg.replications, cfg.threads, [&](std::size_t r) {
    const Dataset data = simulate_dataset(cfg.which, cfg.n0, cfg.n1, child_seed(cfg.seed, r), cfg.noise_is_sd);
    Rep& rep = reps[r];
    rep.results.resize(slot_method.size());
    rep.failed.assign(slot_method.size(), 0);
    std::vector<double> tau;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.treatment[i] == 1) {
        tau.push_back(true_effect(data.covariates(static_cast<Eigen::Index>(i), 0),
                                  data.covariates(static_cast<Eigen::Index>(i), 1)));
      }
    }
    rep.att_truth = mean_sd(tau).first;
    rep.att_sd_truth = detail::sd_of(tau);

    std::optional<std::vector<Arm>> arms;
    for (std::size_t s = 0; s < slot_method.size(); ++s) {
      const auto& m = slot_method[s];
      auto& out = rep.results[s];
      if (m == "ot") {
        // the epsilon slots are s .. s + E - 1, solved largest epsilon first
        if (!arms) arms = split_by_treatment(data, 2);
        std::optional<std::vector<Potentials>> warm;
        for (std::size_t e : eps_order) {
          OtConfig oc;
          oc.sinkhorn.epsilon = cfg.epsilons[e];
          oc.sinkhorn.tolerance = cfg.tolerance;
          oc.sinkhorn.max_iterations = cfg.max_iterations;
          oc.divergence = cfg.divergence;
          oc.drop_threshold = cfg.drop_threshold;
          auto& slot = rep.results[s + e];
          try {
            const auto fit = fit_couplings(*arms, oc, warm ? &*warm : nullptr);
            warm = std::vector<Potentials>{fit.solves.front().potentials};
            const auto a = att(*arms, fit.couplings, 1, 0, oc.drop_threshold);
            slot.att = a.point;
            slot.att_sd = detail::sd_of(a.unit_effects);
            slot.ate = ate(*arms, fit.couplings, 1, 0, oc.drop_threshold).point;
          } catch (const Error&) {
            rep.failed[s + e] = 1;
          }
        }
        s += cfg.epsilons.size() - 1;
        continue;
      }
      try {
        if (m == "ipw") {
          const auto e = ipw_estimates(data, fit_propensity(data), IpwStyle::horvitz_thompson);
          out.ate = e.ate;
          out.att = e.att;
        } else if (m == "unadjusted") {
          out.ate = out.att = unadjusted(data);
        } else {
          const auto e = knn_estimates(data, detail::knn_k(m));
          out.ate = e.ate;
          out.att = e.att;
          out.att_sd = detail::sd_of(e.treated_effects);
        }
      } catch (const Error&) {
        rep.failed[s] = 1;
      }
    }
  });

  std::vector<ExperimentRow> rows;
  for (std::size_t s = 0; s < slot_method.size(); ++s) {
    ExperimentRow row;
    row.method = slot_method[s];
    row.epsilon = slot_eps[s];
    row.seed = cfg.seed;
    double ate_sum = 0.0, att_sum = 0.0, sd_sum = 0.0;
    std::size_t used = 0;
    for (const auto& rep : reps) {
      if (rep.failed[s]) {
        ++row.failures;
        continue;
      }
      const auto& res = rep.results[s];
      ate_sum += std::abs(res.ate - ate_truth);
      att_sum += std::abs(res.att - rep.att_truth);
      sd_sum += std::abs(res.att_sd - rep.att_sd_truth);
      ++used;
    }
    row.replications = used;
    if (used > 0) {
      row.ate_diff = ate_sum / static_cast<double>(used);
      row.att_diff = att_sum / static_cast<double>(used);
      row.att_sd_diff = sd_sum / static_cast<double>(used);  // NaN for methods without unit effects
    } else {
      row.ate_diff = row.att_diff = row.att_sd_diff = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(row);
  }
  return rows;
}

struct IllustrationResult {
  std::vector<std::size_t> sizes;
  std::size_t cost_entries = 0;
  IpfpResult ipfp;
  std::vector<double> marginal_errors;  // per arm, sup-norm
};

/// The three-arm Gaussian illustration: one joint balanced solve with the
/// sum-of-pairwise squared distance cost.
inline IllustrationResult run_illustration(std::uint64_t seed, double epsilon = 0.1, double tolerance = 1e-9,
                                           std::size_t max_iterations = 10000) {
  Matrix c0(2, 2), c1(2, 2), c2(2, 2);
  c0 << 1.0, 0.0, 0.0, 1.0;
  c1 << 1.0, 0.1, 0.1, 1.0;
  c2 << 0.5, 0.1, 0.1, 0.5;
  const std::vector<MixtureSpec> specs = {
      {{{1.0, (Vector(2) << 1.0, 0.0).finished(), c0}}},
      {{{1.0, (Vector(2) << 0.5, -0.2).finished(), c1}}},
      {{{1.0, (Vector(2) << 0.7, -0.2).finished(), c2}}},
  };
  const std::size_t sizes[] = {70, 60, 80};
  std::vector<DiscreteMeasure> ms;
  for (std::size_t a = 0; a < 3; ++a) ms.push_back(DiscreteMeasure::empirical(sample_mixture(specs[a], sizes[a], child_seed(seed, a))));
  const auto cost = build_cost(ms);
  SinkhornConfig sc;
  sc.epsilon = epsilon;
  sc.tolerance = tolerance;
  sc.max_iterations = max_iterations;
  IllustrationResult out;
  out.sizes.assign(std::begin(sizes), std::end(sizes));
  out.cost_entries = cost.size();
  out.ipfp = ipfp(ms, cost, std::vector<Divergence>(3, Divergence::balanced()), sc);
  const auto coupling = assemble_coupling(out.ipfp.potentials, cost, ms, epsilon);
  for (std::size_t a = 0; a < 3; ++a) {
    double e = 0.0;
    for (std::size_t k = 0; k < ms[a].size(); ++k) e = std::max(e, std::abs(coupling.marginals[a][k] - ms[a].weights()[k]));
    out.marginal_errors.push_back(e);
  }
  return out;
}

}  // namespace otmatch

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "otmatch/baselines.hpp"
#include "otmatch/diagnostics.hpp"
#include "otmatch/inference.hpp"
#include "otmatch/io.hpp"
#include "otmatch/matching.hpp"
#include "otmatch/measures.hpp"

namespace otmatch {

struct LalondeConfig {
  double epsilon = 1e-3;
  Divergence divergence = Divergence::kl(1.0);
  double tolerance = 1e-9;
  std::size_t max_iterations = 100000;
  double drop_threshold = 1e-3;
  std::vector<std::string> standardize = {"age", "education", "re75"};
  std::vector<std::string> methods = {"ot", "ipw", "knn3", "knn1", "unadjusted"};
  std::size_t bootstrap = 0;  // replicates for the sd column; 0 skips it
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct MethodEstimate {
  std::string method;
  double ate = 0.0;
  double att = 0.0;
  std::optional<double> ate_sd;
  std::optional<double> att_sd;
  std::size_t dropped = 0;  // OT: units dropped by the unbalanced coupling
};

struct SummaryRow {
  std::string variable;
  double mean_treated = 0.0;
  double mean_control = 0.0;
};

struct LalondeResult {
  std::size_t n_control = 0;
  std::size_t n_treated = 0;
  std::vector<SummaryRow> summary;
  std::vector<MethodEstimate> estimates;
  std::vector<BalanceRow> balance_before;
  std::vector<BalanceRow> balance_after;
  IpfpResult solve;
};

// Report names used in the balance table.
inline std::string balance_name(const std::string& column, const std::vector<std::string>& standardized) {
  for (const auto& s : standardized) {
    if (s == column) return column == "education" ? "edu_std" : column + "_std";
  }
  return column;
}

struct OtEffects {
  double ate = 0.0;
  double att = 0.0;
  std::size_t dropped = 0;
};

inline OtEffects ot_effects(const std::vector<Arm>& arms, const CouplingSet& couplings, const OtConfig& oc) {
  const auto a = att(arms, couplings, 1, 0, oc.drop_threshold, oc.weighting);
  const auto e = ate(arms, couplings, 1, 0, oc.drop_threshold);
  return {e.point, a.point, (a.n_arm[1] - a.n_used[1]) + (e.n_arm[0] - e.n_used[0])};
}

inline OtEffects ot_effects(const Dataset& data, const OtConfig& oc) {
  const auto arms = split_by_treatment(data, 2);
  return ot_effects(arms, fit_couplings(arms, oc).couplings, oc);
}

/// Standardization, every estimator, optional bootstrap sd, and balance tables.
inline LalondeResult lalonde_pipeline(const Dataset& raw, const LalondeConfig& cfg) {
  LalondeResult res;
  for (int t : raw.treatment) (t == 1 ? res.n_treated : res.n_control) += 1;
  for (std::size_t c = 0; c <= raw.dim(); ++c) {
    SummaryRow row;
    row.variable = c < raw.dim() ? raw.columns[c] : "re78";
    double s[2] = {0, 0};
    for (std::size_t i = 0; i < raw.size(); ++i) {
      s[raw.treatment[i]] += c < raw.dim() ? raw.covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c))
                                           : raw.outcome[i];
    }
    row.mean_treated = s[1] / static_cast<double>(res.n_treated);
    row.mean_control = s[0] / static_cast<double>(res.n_control);
    res.summary.push_back(row);
  }

  const Dataset data = standardize(raw, cfg.standardize).dataset;
  OtConfig oc;
  oc.sinkhorn.epsilon = cfg.epsilon;
  oc.sinkhorn.tolerance = cfg.tolerance;
  oc.sinkhorn.max_iterations = cfg.max_iterations;
  oc.divergence = cfg.divergence;
  oc.drop_threshold = cfg.drop_threshold;

  const auto arms = split_by_treatment(data, 2);
  const auto fit = fit_couplings(arms, oc);
  res.solve = fit.solves.front();

  BootstrapOptions bo;
  bo.replicates = cfg.bootstrap;
  bo.seed = cfg.seed;
  bo.threads = cfg.threads;

  for (const auto& m : cfg.methods) {
    MethodEstimate est;
    est.method = m;
    std::function<std::pair<double, double>(const Dataset&)> run;
    if (m == "ot") {
      run = [&](const Dataset& d) {
        const auto e = ot_effects(d, oc);
        return std::make_pair(e.ate, e.att);
      };
      const auto e = ot_effects(arms, fit.couplings, oc);
      est.ate = e.ate;
      est.att = e.att;
      est.dropped = e.dropped;
    } else if (m == "ipw") {
      run = [](const Dataset& d) {
        const auto e = ipw_estimates(d, fit_propensity(d));
        return std::make_pair(e.ate, e.att);
      };
    } else if (m == "unadjusted") {
      run = [](const Dataset& d) { return std::make_pair(unadjusted(d), unadjusted(d)); };
    } else if (m.rfind("knn", 0) == 0) {
      const std::size_t k = static_cast<std::size_t>(std::stoul(m.substr(m.find_first_of("0123456789"))));
      run = [k](const Dataset& d) {
        const auto e = knn_estimates(d, k);
        return std::make_pair(e.ate, e.att);
      };
    } else {
      throw usage_error("unknown method '" + m + "'");
    }
    if (m != "ot") std::tie(est.ate, est.att) = run(data);
    if (cfg.bootstrap >= 2) {
      const auto bs = bootstrap_multi(
          data,
          [&](const Dataset& d) {
            const auto [a, t] = run(d);
            return std::vector<double>{a, t};
          },
          bo);
      est.ate_sd = bs[0].sd;
      est.att_sd = bs[1].sd;
    }
    res.estimates.push_back(est);
  }

  // Balance on the covariates with standardized columns under their _std names.
  Dataset named = data;
  for (auto& c : named.columns) c = balance_name(c, cfg.standardize);
  std::vector<std::string> cols = named.columns;
  res.balance_before = balance_before(named, cols);
  const auto w = fit.couplings.conditional(1, 0, oc.drop_threshold);
  // 0/1 flags are reported rounded; standardized columns stay continuous.
  std::set<std::string> rounded;
  for (const auto& c : cols) {
    if (c.find("_std") == std::string::npos) rounded.insert(c);
  }
  res.balance_after = balance_after(named, arms, w, cols, rounded);
  return res;
}

}  // namespace otmatch

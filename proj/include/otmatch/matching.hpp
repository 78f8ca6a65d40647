#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "otmatch/divergences.hpp"
#include "otmatch/error.hpp"
#include "otmatch/measures.hpp"
#include "otmatch/solver.hpp"

namespace otmatch {

/// Row-stochastic match weights from arm `source` to arm `target`.
struct ConditionalWeights {
  std::size_t source = 0;
  std::size_t target = 0;
  Matrix weights;                     // N_source x N_target
  std::vector<double> retained_mass;  // row masses before normalization
  std::vector<bool> dropped;
  double cutoff = 0.0;

  std::size_t rows() const noexcept { return retained_mass.size(); }
  std::size_t retained() const noexcept {
    std::size_t r = 0;
    for (bool d : dropped) r += d ? 0 : 1;
    return r;
  }
};

/// Row i of the (t, j) marginal of `coupling`, normalized. Rows with mass at or
/// below drop_threshold * total_mass / N_t are zeroed and flagged.
inline ConditionalWeights conditional_weights(const Coupling& coupling, std::size_t t, std::size_t j,
                                              double drop_threshold = 1e-3) {
  if (t == j) throw usage_error("conditional weights need two different arms");
  if (t >= coupling.arms() || j >= coupling.arms()) throw usage_error("arm index out of range");
  if (!(drop_threshold >= 0.0)) throw usage_error("drop threshold must be >= 0");
  ConditionalWeights out;
  out.source = t;
  out.target = j;
  out.weights = coupling.pair_marginal(t, j);
  const auto n = static_cast<std::size_t>(out.weights.rows());
  out.cutoff = drop_threshold * coupling.total_mass / static_cast<double>(n);
  out.retained_mass.resize(n);
  out.dropped.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = out.weights.row(static_cast<Eigen::Index>(i));
    const double mass = row.sum();
    out.retained_mass[i] = mass;
    if (mass <= out.cutoff || !(mass > 0.0)) {
      out.dropped[i] = true;
      row.setZero();
    } else {
      out.dropped[i] = false;
      row /= mass;
    }
  }
  return out;
}

struct Imputed {
  std::vector<double> values;  // NaN on dropped rows
  std::vector<bool> dropped;
};

/// imputed[i] = sum_k W[i,k] Y_k for every retained row.
inline Imputed impute_counterfactual(const ConditionalWeights& w, const std::vector<double>& target_outcomes) {
  if (target_outcomes.size() != static_cast<std::size_t>(w.weights.cols())) {
    throw usage_error("outcome vector length does not match the target arm");
  }
  if (w.retained() == 0) throw numeric_error("no overlap: every unit was dropped by the coupling");
  Imputed out;
  out.dropped = w.dropped;
  out.values.assign(w.rows(), std::numeric_limits<double>::quiet_NaN());
  const Eigen::Map<const Vector> y(target_outcomes.data(), static_cast<Eigen::Index>(target_outcomes.size()));
  for (std::size_t i = 0; i < w.rows(); ++i) {
    if (!w.dropped[i]) out.values[i] = w.weights.row(static_cast<Eigen::Index>(i)).dot(y);
  }
  return out;
}

enum class Weighting { uniform, mass };

inline Weighting parse_weighting(const std::string& s) {
  if (s == "uniform") return Weighting::uniform;
  if (s == "mass") return Weighting::mass;
  throw usage_error("unknown weighting '" + s + "' (expected uniform or mass)");
}

struct CausalEstimate {
  std::string estimand;  // "ate", "att", "epo:<j>"
  double point = 0.0;
  // Unnormalized variant: dropped units still counted in the denominator.
  double raw = 0.0;
  std::vector<std::size_t> n_used;
  std::vector<std::size_t> n_arm;
  // ATT: per retained treated unit effect Y_i - Yhat_i(0).
  std::vector<double> unit_effects;
  std::optional<double> sd;
  std::optional<std::pair<double, double>> interval;
  std::size_t bootstrap_failures = 0;
};

/// Couplings between arm pairs: either one joint multimarginal coupling or
/// one two-marginal coupling per unordered pair (t < j).
class CouplingSet {
public:
  static CouplingSet joint(Coupling c) {
    CouplingSet s;
    s.joint_ = std::move(c);
    return s;
  }
  static CouplingSet pairwise(std::map<std::pair<std::size_t, std::size_t>, Coupling> pairs) {
    CouplingSet s;
    s.pairs_ = std::move(pairs);
    return s;
  }

  bool is_joint() const noexcept { return joint_.has_value(); }

  ConditionalWeights conditional(std::size_t t, std::size_t j, double drop_threshold) const {
    if (joint_) return conditional_weights(*joint_, t, j, drop_threshold);
    const bool swap = t > j;
    const auto key = swap ? std::make_pair(j, t) : std::make_pair(t, j);
    const auto it = pairs_.find(key);
    if (it == pairs_.end()) {
      throw usage_error("no coupling for arms " + std::to_string(key.first) + " and " + std::to_string(key.second));
    }
    return conditional_weights(it->second, swap ? 1 : 0, swap ? 0 : 1, drop_threshold);
  }

  const Coupling& pair(std::size_t t, std::size_t j) const {
    const auto it = pairs_.find({std::min(t, j), std::max(t, j)});
    if (it == pairs_.end()) throw usage_error("no pairwise coupling stored");
    return it->second;
  }
  const std::optional<Coupling>& joint_coupling() const noexcept { return joint_; }

private:
  std::optional<Coupling> joint_;
  std::map<std::pair<std::size_t, std::size_t>, Coupling> pairs_;
};

/// Sample version of E{Y(j)}: observed arm-j outcomes plus imputed values for
/// every retained member of the other arms, over the count of contributors.
inline CausalEstimate expected_potential_outcome(const std::vector<Arm>& arms, const CouplingSet& couplings,
                                                 std::size_t j, double drop_threshold = 1e-3) {
  if (j >= arms.size()) throw usage_error("arm index out of range");
  CausalEstimate est;
  est.estimand = "epo:" + std::to_string(j);
  double total = 0.0;
  std::size_t contributors = 0, population = 0;
  est.n_used.assign(arms.size(), 0);
  for (std::size_t a = 0; a < arms.size(); ++a) {
    est.n_arm.push_back(arms[a].outcome.size());
    population += arms[a].outcome.size();
  }
  for (double y : arms[j].outcome) total += y;
  contributors += arms[j].outcome.size();
  est.n_used[j] = arms[j].outcome.size();
  for (std::size_t t = 0; t < arms.size(); ++t) {
    if (t == j) continue;
    const auto imp = impute_counterfactual(couplings.conditional(t, j, drop_threshold), arms[j].outcome);
    for (std::size_t i = 0; i < imp.values.size(); ++i) {
      if (imp.dropped[i]) continue;
      total += imp.values[i];
      ++contributors;
      ++est.n_used[t];
    }
  }
  est.point = total / static_cast<double>(contributors);
  est.raw = total / static_cast<double>(population);
  return est;
}

/// E{Y(1)} - E{Y(0)} from two expected potential outcomes.
inline CausalEstimate ate(const std::vector<Arm>& arms, const CouplingSet& couplings, std::size_t treated = 1,
                          std::size_t control = 0, double drop_threshold = 1e-3) {
  const auto e1 = expected_potential_outcome(arms, couplings, treated, drop_threshold);
  const auto e0 = expected_potential_outcome(arms, couplings, control, drop_threshold);
  CausalEstimate est;
  est.estimand = "ate";
  est.point = e1.point - e0.point;
  est.raw = e1.raw - e0.raw;
  est.n_arm = e1.n_arm;
  est.n_used.resize(arms.size());
  for (std::size_t a = 0; a < arms.size(); ++a) est.n_used[a] = std::min(e1.n_used[a], e0.n_used[a]);
  return est;
}

/// Mean over retained treated units of Y_i - Yhat_i(0).
inline CausalEstimate att(const std::vector<Arm>& arms, const CouplingSet& couplings, std::size_t treated = 1,
                          std::size_t control = 0, double drop_threshold = 1e-3,
                          Weighting weighting = Weighting::uniform) {
  if (treated >= arms.size() || control >= arms.size() || treated == control) throw usage_error("bad arm indices");
  const auto w = couplings.conditional(treated, control, drop_threshold);
  if (w.retained() == 0) throw numeric_error("no retained treated units");
  const auto imp = impute_counterfactual(w, arms[control].outcome);
  CausalEstimate est;
  est.estimand = "att";
  for (const auto& a : arms) est.n_arm.push_back(a.outcome.size());
  est.n_used.assign(arms.size(), 0);
  est.n_used[control] = arms[control].outcome.size();
  double sum = 0.0, weight = 0.0, raw = 0.0;
  for (std::size_t i = 0; i < imp.values.size(); ++i) {
    if (imp.dropped[i]) continue;
    const double effect = arms[treated].outcome[i] - imp.values[i];
    const double wi = weighting == Weighting::uniform ? 1.0 : w.retained_mass[i];
    sum += wi * effect;
    weight += wi;
    raw += effect;
    est.unit_effects.push_back(effect);
    ++est.n_used[treated];
  }
  est.point = sum / weight;
  est.raw = raw / static_cast<double>(imp.values.size());
  return est;
}

/// Plug-in smoothing bias of the imputation: mean over retained treated units
/// of Yhat_i(0), minus the control-arm mean of Y under its own weights.
inline double bias_diagnostic(const Coupling& coupling, const DiscreteMeasure& control,
                              const std::vector<double>& control_outcomes, std::size_t treated_axis = 1,
                              std::size_t control_axis = 0, double drop_threshold = 1e-3) {
  const auto w = conditional_weights(coupling, treated_axis, control_axis, drop_threshold);
  const auto imp = impute_counterfactual(w, control_outcomes);
  double imputed = 0.0;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < imp.values.size(); ++i) {
    if (!imp.dropped[i]) {
      imputed += imp.values[i];
      ++kept;
    }
  }
  double base = 0.0;
  const auto& cw = control.weights();
  for (std::size_t k = 0; k < cw.size(); ++k) base += cw[k] * control_outcomes[k];
  return imputed / static_cast<double>(kept) - base / control.total_mass();
}

/// Everything the OT estimator needs besides the data.
struct OtConfig {
  SinkhornConfig sinkhorn;
  Divergence divergence = Divergence::kl(1.0);
  CostSpec cost;
  double drop_threshold = 1e-3;
  Weighting weighting = Weighting::uniform;
  bool joint = false;
};

struct OtFit {
  CouplingSet couplings;
  std::vector<IpfpResult> solves;
};

/// Solves the couplings for all arm pairs (or jointly). `warm` optionally holds
/// starting potentials per solve, in the same order as the returned solves.
inline OtFit fit_couplings(const std::vector<Arm>& arms, const OtConfig& cfg,
                           const std::vector<Potentials>* warm = nullptr) {
  if (arms.size() < 2) throw usage_error("need at least two arms");
  OtFit fit;
  std::size_t solve_index = 0;
  auto run = [&](const std::vector<DiscreteMeasure>& ms) {
    const auto cost = build_cost(ms, cfg.cost);
    const std::vector<Divergence> divs(ms.size(), cfg.divergence);
    const Potentials* init = warm && solve_index < warm->size() ? &(*warm)[solve_index] : nullptr;
    ++solve_index;
    auto res = ipfp(ms, cost, divs, cfg.sinkhorn, init);
    auto coupling = assemble_coupling(res.potentials, cost, ms, cfg.sinkhorn.epsilon);
    fit.solves.push_back(std::move(res));
    return coupling;
  };
  if (cfg.joint) {
    std::vector<DiscreteMeasure> ms;
    for (const auto& a : arms) ms.push_back(a.measure);
    fit.couplings = CouplingSet::joint(run(ms));
    return fit;
  }
  std::map<std::pair<std::size_t, std::size_t>, Coupling> pairs;
  for (std::size_t t = 0; t < arms.size(); ++t) {
    for (std::size_t j = t + 1; j < arms.size(); ++j) pairs.emplace(std::make_pair(t, j), run({arms[t].measure, arms[j].measure}));
  }
  fit.couplings = CouplingSet::pairwise(std::move(pairs));
  return fit;
}

/// One row of the per-unit match table.
struct MatchEntry {
  std::size_t unit = 0;     // source row in the dataset
  std::size_t matched = 0;  // target row in the dataset
  double weight = 0.0;
  double retained_mass = 0.0;
};

/// Long-format match table; weights below `min_weight` are omitted, dropped
/// units get one entry with matched = SIZE_MAX and weight 0.
inline std::vector<MatchEntry> match_table(const ConditionalWeights& w, const Arm& source, const Arm& target,
                                           double min_weight = 1e-6) {
  std::vector<MatchEntry> out;
  for (std::size_t i = 0; i < w.rows(); ++i) {
    if (w.dropped[i]) {
      out.push_back({source.rows[i], static_cast<std::size_t>(-1), 0.0, w.retained_mass[i]});
      continue;
    }
    for (Eigen::Index k = 0; k < w.weights.cols(); ++k) {
      const double v = w.weights(static_cast<Eigen::Index>(i), k);
      if (v >= min_weight) out.push_back({source.rows[i], target.rows[static_cast<std::size_t>(k)], v, w.retained_mass[i]});
    }
  }
  return out;
}

}  // namespace otmatch

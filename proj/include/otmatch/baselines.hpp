#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "otmatch/error.hpp"
#include "otmatch/measures.hpp"

namespace otmatch {

// k nearest neighbours in `pool` (rows) of point `x`, Euclidean, ties to the lower index.
inline std::vector<std::size_t> nearest(const Matrix& pool, const Eigen::Ref<const Eigen::RowVectorXd>& x,
                                        std::size_t k) {
  const auto n = static_cast<std::size_t>(pool.rows());
  std::vector<std::pair<double, std::size_t>> d(n);
  for (std::size_t r = 0; r < n; ++r) d[r] = {(pool.row(static_cast<Eigen::Index>(r)) - x).squaredNorm(), r};
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  std::vector<std::size_t> out(k);
  for (std::size_t q = 0; q < k; ++q) out[q] = d[q].second;
  return out;
}

struct KnnImputation {
  // Imputed opposite-arm outcome for every dataset row.
  std::vector<double> counterfactual;
  // Neighbour rows (dataset indices) per dataset row.
  std::vector<std::vector<std::size_t>> neighbours;
};

/// Matching with replacement: each unit's counterfactual is the mean outcome of
/// its k nearest units in the other arm. Binary treatment only.
inline KnnImputation knn_impute(const Dataset& data, std::size_t k) {
  data.validate();
  if (k == 0) throw usage_error("k must be positive");
  std::vector<std::size_t> rows[2];
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int t = data.treatment[i];
    if (t > 1) throw usage_error("knn matching needs a binary treatment");
    rows[t].push_back(i);
  }
  for (int a = 0; a < 2; ++a) {
    if (rows[a].size() < k) {
      throw usage_error("k=" + std::to_string(k) + " exceeds the size of arm " + std::to_string(a) + " (" +
                        std::to_string(rows[a].size()) + ")");
    }
  }
  Matrix pools[2];
  for (int a = 0; a < 2; ++a) {
    pools[a].resize(static_cast<Eigen::Index>(rows[a].size()), data.covariates.cols());
    for (std::size_t r = 0; r < rows[a].size(); ++r) {
      pools[a].row(static_cast<Eigen::Index>(r)) = data.covariates.row(static_cast<Eigen::Index>(rows[a][r]));
    }
  }
  KnnImputation out;
  out.counterfactual.resize(data.size());
  out.neighbours.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int other = 1 - data.treatment[i];
    const auto nn = nearest(pools[other], data.covariates.row(static_cast<Eigen::Index>(i)), k);
    double s = 0.0;
    for (std::size_t q : nn) {
      const std::size_t row = rows[other][q];
      s += data.outcome[row];
      out.neighbours[i].push_back(row);
    }
    out.counterfactual[i] = s / static_cast<double>(k);
  }
  return out;
}

struct EffectPair {
  double ate = 0.0;
  double att = 0.0;
  std::vector<double> treated_effects;  // per treated unit, for dispersion summaries
};

// ATE averages Y(1) - Y(0) over all units, ATT over treated units only.
inline EffectPair effects_from_imputation(const Dataset& data, const std::vector<double>& counterfactual) {
  EffectPair e;
  double all = 0.0, treated = 0.0;
  std::size_t n1 = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double diff = data.treatment[i] == 1 ? data.outcome[i] - counterfactual[i] : counterfactual[i] - data.outcome[i];
    all += diff;
    if (data.treatment[i] == 1) {
      treated += diff;
      ++n1;
      e.treated_effects.push_back(diff);
    }
  }
  e.ate = all / static_cast<double>(data.size());
  e.att = treated / static_cast<double>(n1);
  return e;
}

inline EffectPair knn_estimates(const Dataset& data, std::size_t k) {
  return effects_from_imputation(data, knn_impute(data, k).counterfactual);
}

struct PropensityModel {
  Vector coefficients;  // intercept first
  bool converged = false;
  int iterations = 0;

  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    const double z = coefficients(0) + x.dot(coefficients.tail(coefficients.size() - 1));
    return 1.0 / (1.0 + std::exp(-z));
  }
};

struct PropensityOptions {
  double gradient_tolerance = 1e-8;
  int max_iterations = 100;
  // Ridge penalty on the slopes; 0 disables it and makes separation an error.
  double ridge = 0.0;
};

/// Logistic regression of treatment on covariates by Newton-Raphson.
inline PropensityModel fit_propensity(const Dataset& data, const PropensityOptions& opt = {}) {
  data.validate();
  const auto n = static_cast<Eigen::Index>(data.size());
  const Eigen::Index p = data.covariates.cols() + 1;
  Eigen::MatrixXd X(n, p);
  X.col(0).setOnes();
  X.rightCols(p - 1) = data.covariates;
  Vector t(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int ti = data.treatment[static_cast<std::size_t>(i)];
    if (ti > 1) throw usage_error("propensity model needs a binary treatment");
    t(i) = ti;
  }
  const double n1 = t.sum();
  if (n1 == 0.0 || n1 == static_cast<double>(n)) throw usage_error("propensity model needs both arms");

  PropensityModel model;
  model.coefficients = Vector::Zero(p);
  model.coefficients(0) = std::log(n1 / (static_cast<double>(n) - n1));
  Vector ridge = Vector::Constant(p, opt.ridge);
  ridge(0) = 0.0;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    const Vector eta = X * model.coefficients;
    const Vector prob = eta.unaryExpr([](double z) { return 1.0 / (1.0 + std::exp(-z)); });
    const Vector grad = X.transpose() * (t - prob) - ridge.cwiseProduct(model.coefficients);
    model.iterations = it - 1;
    if (grad.lpNorm<Eigen::Infinity>() < opt.gradient_tolerance) {
      model.converged = true;
      break;
    }
    const Vector w = prob.cwiseProduct(Vector::Ones(n) - prob);
    Eigen::MatrixXd H = X.transpose() * w.asDiagonal() * X;
    H.diagonal() += ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) throw numeric_error("propensity Hessian is singular");
    model.coefficients += ldlt.solve(grad);
    model.iterations = it;
  }
  if (opt.ridge == 0.0) {
    // Separation sends the fitted probabilities to 0/1 while the likelihood keeps improving.
    const Vector prob = (X * model.coefficients).unaryExpr([](double z) { return 1.0 / (1.0 + std::exp(-z)); });
    const double pinned = std::min(prob.minCoeff(), 1.0 - prob.maxCoeff());
    const double worst = (t - prob).cwiseAbs().maxCoeff();
    if (pinned < 1e-10 || worst < 1e-6) {
      throw numeric_error("perfect separation in the propensity model (enable the ridge penalty)");
    }
  }
  if (!model.coefficients.allFinite()) throw numeric_error("propensity fit diverged");
  return model;
}

enum class IpwStyle { horvitz_thompson, hajek };

inline IpwStyle parse_ipw_style(const std::string& s) {
  if (s == "ht" || s == "horvitz-thompson") return IpwStyle::horvitz_thompson;
  if (s == "hajek") return IpwStyle::hajek;
  throw usage_error("unknown ipw style '" + s + "' (expected ht or hajek)");
}

/// Inverse propensity weighting given fitted scores e_i.
inline EffectPair ipw_from_scores(const Dataset& data, const std::vector<double>& e, IpwStyle style) {
  double s1 = 0.0, w1 = 0.0, s0 = 0.0, w0 = 0.0;  // ATE sums
  double t1 = 0.0, c0 = 0.0, cw = 0.0;              // ATT sums
  double n1 = 0.0;
  const auto n = static_cast<double>(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!(e[i] > 0.0 && e[i] < 1.0)) throw numeric_error("propensity score of unit " + std::to_string(i) + " is 0 or 1");
    const double y = data.outcome[i];
    if (data.treatment[i] == 1) {
      s1 += y / e[i];
      w1 += 1.0 / e[i];
      t1 += y;
      n1 += 1.0;
    } else {
      const double odds = e[i] / (1.0 - e[i]);
      s0 += y / (1.0 - e[i]);
      w0 += 1.0 / (1.0 - e[i]);
      c0 += y * odds;
      cw += odds;
    }
  }
  EffectPair out;
  if (style == IpwStyle::horvitz_thompson) {
    out.ate = (s1 - s0) / n;
    out.att = (t1 - c0) / n1;
  } else {
    out.ate = s1 / w1 - s0 / w0;
    out.att = t1 / n1 - c0 / cw;
  }
  return out;
}

inline EffectPair ipw_estimates(const Dataset& data, const PropensityModel& model,
                                IpwStyle style = IpwStyle::horvitz_thompson) {
  std::vector<double> e(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) e[i] = model.predict(data.covariates.row(static_cast<Eigen::Index>(i)));
  return ipw_from_scores(data, e, style);
}

/// mean(Y | T=1) - mean(Y | T=0).
inline double unadjusted(const Dataset& data) {
  double s[2] = {0.0, 0.0};
  double c[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int t = data.treatment[i];
    if (t > 1 || t < 0) throw usage_error("unadjusted difference needs a binary treatment");
    s[t] += data.outcome[i];
    c[t] += 1.0;
  }
  if (c[0] == 0.0 || c[1] == 0.0) throw usage_error("both arms must be non-empty");
  return s[1] / c[1] - s[0] / c[0];
}

}  // namespace otmatch

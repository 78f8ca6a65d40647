#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "otmatch/error.hpp"
#include "otmatch/matching.hpp"
#include "otmatch/measures.hpp"
#include "otmatch/special_functions.hpp"

namespace otmatch {

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  double df = 0.0;  // Welch only
};

namespace detail {

inline void sample_moments(const std::vector<double>& x, double& mean, double& var) {
  const auto [m, sd] = mean_sd(x);
  mean = m;
  var = sd * sd;
}

}  // namespace detail

/// Welch two-sample t-test with Satterthwaite degrees of freedom.
inline TestResult welch_t(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw usage_error("t-test needs at least two observations per sample");
  double ma, va, mb, vb;
  detail::sample_moments(a, ma, va);
  detail::sample_moments(b, mb, vb);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double sa = va / na, sb = vb / nb;
  const double se2 = sa + sb;
  TestResult r;
  if (se2 == 0.0) {
    r.statistic = ma == mb ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), ma - mb);
    r.p_value = ma == mb ? 1.0 : 0.0;
    r.df = na + nb - 2.0;
    return r;
  }
  r.statistic = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  r.p_value = special::student_t_two_sided(r.statistic, r.df);
  return r;
}

/// Variance-ratio F test, ratio var(a)/var(b), p = 2 min(lower, upper tail).
inline TestResult f_variance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw usage_error("F test needs at least two observations per sample");
  double ma, va, mb, vb;
  detail::sample_moments(a, ma, va);
  detail::sample_moments(b, mb, vb);
  if (!(va > 0.0) || !(vb > 0.0)) throw numeric_error("F test on a sample with zero variance");
  TestResult r;
  r.statistic = va / vb;
  const double d1 = static_cast<double>(a.size()) - 1.0, d2 = static_cast<double>(b.size()) - 1.0;
  // upper tail via the mirrored distribution keeps the small tail accurate
  const double lower = special::f_cdf(r.statistic, d1, d2);
  const double upper = special::f_cdf(1.0 / r.statistic, d2, d1);
  r.p_value = std::min(1.0, 2.0 * std::min(lower, upper));
  return r;
}

/// Two-sample Kolmogorov-Smirnov with the asymptotic distribution.
inline TestResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw usage_error("KS test needs non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  TestResult r;
  r.statistic = d;
  const double ne = na * nb / (na + nb);
  const double root = std::sqrt(ne);
  r.p_value = special::kolmogorov_q((root + 0.12 + 0.11 / root) * d);
  return r;
}

struct BalanceRow {
  std::string covariate;
  double mean0 = 0.0;
  double mean1 = 0.0;
  double t_p = 1.0;
  double var_ratio = 1.0;
  double f_p = 1.0;
  double ks_p = 1.0;
};

inline BalanceRow balance_row(const std::string& name, const std::vector<double>& x0, const std::vector<double>& x1) {
  BalanceRow row;
  row.covariate = name;
  row.mean0 = mean_sd(x0).first;
  row.mean1 = mean_sd(x1).first;
  row.t_p = welch_t(x0, x1).p_value;
  const double v0 = mean_sd(x0).second, v1 = mean_sd(x1).second;
  if (v0 > 0.0 && v1 > 0.0) {
    const auto f = f_variance(x0, x1);
    row.var_ratio = f.statistic;
    row.f_p = f.p_value;
  } else {
    // Degenerate column (e.g. a flag constant after rounding): report the trivial comparison.
    row.var_ratio = v0 == v1 ? 1.0 : std::numeric_limits<double>::quiet_NaN();
    row.f_p = v0 == v1 ? 1.0 : 0.0;
  }
  row.ks_p = ks_two_sample(x0, x1).p_value;
  return row;
}

/// Arm 0 against arm 1 for each listed covariate.
inline std::vector<BalanceRow> balance_before(const Dataset& data, const std::vector<std::string>& covariates) {
  std::vector<BalanceRow> rows;
  for (const auto& name : covariates) {
    const auto c = data.column_index(name);
    std::vector<double> x[2];
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.treatment[i] > 1) throw usage_error("balance report needs a binary treatment");
      x[data.treatment[i]].push_back(data.covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)));
    }
    rows.push_back(balance_row(name, x[0], x[1]));
  }
  return rows;
}

/// Arm 0 against the matched representation of arm 1: every retained treated
/// unit i is replaced by sum_k W[i,k] x_k over controls, with columns in
/// `rounded` rounded to the nearest integer.
inline std::vector<BalanceRow> balance_after(const Dataset& data, const std::vector<Arm>& arms,
                                             const ConditionalWeights& treated_to_control,
                                             const std::vector<std::string>& covariates,
                                             const std::set<std::string>& rounded = {}) {
  if (arms.size() != 2) throw usage_error("balance report needs a binary treatment");
  std::vector<BalanceRow> rows;
  for (const auto& name : covariates) {
    const auto c = static_cast<Eigen::Index>(data.column_index(name));
    std::vector<double> x0, matched;
    const auto& ctrl = arms[0].measure.points();
    for (Eigen::Index k = 0; k < ctrl.rows(); ++k) x0.push_back(ctrl(k, c));
    for (std::size_t i = 0; i < treated_to_control.rows(); ++i) {
      if (treated_to_control.dropped[i]) continue;
      double v = treated_to_control.weights.row(static_cast<Eigen::Index>(i)).dot(ctrl.col(c));
      if (rounded.count(name)) v = std::round(v);
      matched.push_back(v);
    }
    rows.push_back(balance_row(name, x0, matched));
  }
  return rows;
}

}  // namespace otmatch

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "otmatch/divergences.hpp"
#include "otmatch/error.hpp"
#include "otmatch/measures.hpp"

namespace otmatch {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

/// Streaming log-sum-exp with a running maximum; -inf terms are ignored.
class LogSumExp {
public:
  void add(double x) noexcept {
    if (x == neg_inf) return;
    if (x <= max_) {
      sum_ += std::exp(x - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - x) + 1.0;
      max_ = x;
    }
  }

  double value() const noexcept { return max_ == neg_inf ? neg_inf : max_ + std::log(sum_); }

private:
  double max_ = neg_inf;
  double sum_ = 0.0;
};

struct Potentials;

struct SinkhornConfig {
  double epsilon = 1e-2;
  std::size_t max_iterations = 10000;
  // Stop when the sup-norm change of all potentials over one sweep drops below this.
  double tolerance = 1e-9;
  // Feasibility bound checked for balanced couplings.
  double marginal_tolerance = 1e-7;
  // Two-arm problems only: restrict each log-sum-exp to the terms within
  // `active_window` (in log units) of its maximum. The window is rebuilt before
  // the potentials can drift far enough for a dropped term to exceed
  // exp(-(active_window - active_margin)) relative to the kept maximum, so the
  // truncation stays below double rounding. Converged solves finish with exact
  // dense sweeps.
  bool active_set = true;
  double active_window = 50.0;
  double active_margin = 10.0;
  // Called after each completed sweep with the sweep index (1-based).
  std::function<void(std::size_t, const Potentials&)> on_sweep;

  void validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw usage_error("epsilon must be a positive finite number");
    if (max_iterations == 0) throw usage_error("max_iterations must be positive");
    if (!(tolerance > 0.0)) throw usage_error("tolerance must be positive");
    if (!(marginal_tolerance > 0.0)) throw usage_error("marginal tolerance must be positive");
    if (!(active_margin > 0.0) || !(active_window > active_margin)) throw usage_error("bad active-set window");
  }
};

/// One dual vector per arm, entry k of arm j pairs with point k of measure j.
struct Potentials {
  std::vector<std::vector<double>> arms;

  static Potentials zeros(const std::vector<DiscreteMeasure>& measures) {
    Potentials p;
    for (const auto& m : measures) p.arms.emplace_back(m.size(), 0.0);
    return p;
  }

  std::size_t size() const noexcept { return arms.size(); }
  std::vector<double>& operator[](std::size_t j) noexcept { return arms[j]; }
  const std::vector<double>& operator[](std::size_t j) const noexcept { return arms[j]; }

  bool all_finite() const noexcept {
    for (const auto& a : arms) {
      for (double v : a) {
        if (!std::isfinite(v)) return false;
      }
    }
    return true;
  }
};

/// Nonnegative J-way coupling with its axis marginals.
struct Coupling {
  Tensor values;
  std::vector<std::vector<double>> marginals;
  double total_mass = 0.0;

  std::size_t arms() const noexcept { return values.order(); }

  // Largest |marginal_j - target_j| over arms.
  double marginal_error(const std::vector<DiscreteMeasure>& measures) const {
    double err = 0.0;
    for (std::size_t j = 0; j < marginals.size(); ++j) {
      for (std::size_t k = 0; k < marginals[j].size(); ++k) {
        err = std::max(err, std::abs(marginals[j][k] - measures[j].weights()[k]));
      }
    }
    return err;
  }

  // Sum over all axes except (a, b); rows indexed by axis a.
  Matrix pair_marginal(std::size_t a, std::size_t b) const {
    const auto& shape = values.shape();
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(shape[a]), static_cast<Eigen::Index>(shape[b]));
    if (values.order() == 2) {
      for (std::size_t i = 0; i < shape[0]; ++i) {
        for (std::size_t k = 0; k < shape[1]; ++k) {
          const double v = values(i, k);
          if (a == 0) {
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v;
          } else {
            out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = v;
          }
        }
      }
      return out;
    }
    std::vector<std::size_t> idx;
    const auto& vals = values.values();
    for (std::size_t flat = 0; flat < vals.size(); ++flat) {
      values.unravel(flat, idx);
      out(static_cast<Eigen::Index>(idx[a]), static_cast<Eigen::Index>(idx[b])) += vals[flat];
    }
    return out;
  }
};

struct IpfpResult {
  Potentials potentials;
  std::size_t iterations = 0;
  bool converged = false;
  double last_change = 0.0;
  std::size_t active_set_rebuilds = 0;
};

namespace detail {

inline void check_problem(const std::vector<DiscreteMeasure>& measures, const CostTensor& cost,
                          const std::vector<Divergence>* divergences = nullptr) {
  if (measures.size() < 2) throw usage_error("need at least two measures");
  if (cost.order() != measures.size()) throw usage_error("cost tensor order does not match the number of measures");
  for (std::size_t j = 0; j < measures.size(); ++j) {
    if (cost.shape()[j] != measures[j].size()) {
      throw usage_error("cost axis " + std::to_string(j) + " has extent " + std::to_string(cost.shape()[j]) +
                        " but measure has " + std::to_string(measures[j].size()) + " points");
    }
  }
  if (divergences && divergences->size() != measures.size()) throw usage_error("need one divergence per arm");
}

inline void check_potentials(const Potentials& p, const std::vector<DiscreteMeasure>& measures) {
  if (p.size() != measures.size()) throw usage_error("potentials do not match the number of arms");
  for (std::size_t j = 0; j < measures.size(); ++j) {
    if (p[j].size() != measures[j].size()) throw usage_error("potential length mismatch on arm " + std::to_string(j));
  }
  if (!p.all_finite()) throw numeric_error("potentials contain non-finite values");
}

// a_i[x] = phi_i[x] / eps + log mu_i[x]
inline std::vector<std::vector<double>> scaled_terms(const Potentials& p, const std::vector<DiscreteMeasure>& measures,
                                                     double eps) {
  std::vector<std::vector<double>> out(measures.size());
  for (std::size_t j = 0; j < measures.size(); ++j) {
    const auto& w = measures[j].weights();
    out[j].resize(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) out[j][k] = p[j][k] / eps + std::log(w[k]);
  }
  return out;
}

// log of integral over the other axes of exp((sum_{i != axis} phi_i - c) / eps) d(prod mu_i),
// one value per point on `axis`. Dense two-pass log-sum-exp.
inline std::vector<double> log_integral(const std::vector<std::vector<double>>& terms, const CostTensor& cost,
                                        std::size_t axis, double eps) {
  const auto& shape = cost.shape();
  const auto& c = cost.values();
  const double inv_eps = 1.0 / eps;
  std::vector<double> mx(shape[axis], neg_inf);
  std::vector<double> sum(shape[axis], 0.0);

  if (cost.order() == 2) {
    const std::size_t n = shape[0], m = shape[1];
    if (axis == 0) {
      const auto& b = terms[1];
      for (std::size_t i = 0; i < n; ++i) {
        const double* row = c.data() + i * m;
        double best = neg_inf;
        for (std::size_t k = 0; k < m; ++k) best = std::max(best, b[k] - row[k] * inv_eps);
        double s = 0.0;
        if (best != neg_inf) {
          for (std::size_t k = 0; k < m; ++k) s += std::exp(b[k] - row[k] * inv_eps - best);
        }
        mx[i] = best;
        sum[i] = s;
      }
    } else {
      const auto& a = terms[0];
      for (std::size_t i = 0; i < n; ++i) {
        const double* row = c.data() + i * m;
        for (std::size_t k = 0; k < m; ++k) mx[k] = std::max(mx[k], a[i] - row[k] * inv_eps);
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (a[i] == neg_inf) continue;
        const double* row = c.data() + i * m;
        for (std::size_t k = 0; k < m; ++k) sum[k] += std::exp(a[i] - row[k] * inv_eps - mx[k]);
      }
    }
  } else {
    const std::size_t J = cost.order();
    std::vector<std::size_t> idx(J, 0);
    const std::size_t total = c.size();
    std::vector<double> z(total);
    for (std::size_t flat = 0; flat < total; ++flat) {
      double v = -c[flat] * inv_eps;
      for (std::size_t i = 0; i < J; ++i) {
        if (i != axis) v += terms[i][idx[i]];
      }
      z[flat] = v;
      mx[idx[axis]] = std::max(mx[idx[axis]], v);
      for (std::size_t a = J; a-- > 0;) {
        if (++idx[a] < shape[a]) break;
        idx[a] = 0;
      }
    }
    const std::size_t stride = cost.strides()[axis];
    for (std::size_t flat = 0; flat < total; ++flat) {
      const std::size_t x = (flat / stride) % shape[axis];
      if (mx[x] != neg_inf && z[flat] != neg_inf) sum[x] += std::exp(z[flat] - mx[x]);
    }
  }

  std::vector<double> out(shape[axis]);
  for (std::size_t x = 0; x < out.size(); ++x) out[x] = mx[x] == neg_inf ? neg_inf : mx[x] + std::log(sum[x]);
  return out;
}

inline double sup_change(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a[k] - b[k]));
  return d;
}

inline double spread(const std::vector<double>& now, const std::vector<double>& base) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t k = 0; k < now.size(); ++k) {
    if (!std::isfinite(base[k])) continue;
    const double d = now[k] - base[k];
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return now.empty() ? 0.0 : hi - lo;
}

// Truncated kernel for the two-arm solver. Row o keeps the columns k whose
// term base[k] - c(o,k)/eps is within `window` of the row maximum best[o], and
// stores them as kernel = exp(term - best[o]) in [exp(-window), 1]. For updated
// terms t = base + d the row log-integral is best[o] + s + log sum kernel * exp(d - s),
// s = max d. The caller rebuilds once max d - min d exceeds the margin, so every
// dropped term stays more than window - margin below the row maximum.
struct ActiveList {
  std::vector<std::size_t> start;
  std::vector<std::uint32_t> index;
  std::vector<double> kernel;
  std::vector<double> best;
  std::vector<double> base;
  std::vector<double> scratch;

  void build(const std::vector<double>& terms, const std::vector<double>& c, std::size_t outer, std::size_t inner,
             bool transpose, double inv_eps, double window) {
    base = terms;
    start.assign(outer + 1, 0);
    best.assign(outer, neg_inf);
    index.clear();
    kernel.clear();
    if (!transpose) {
      // c is outer x inner
      for (std::size_t o = 0; o < outer; ++o) {
        const double* row = c.data() + o * inner;
        double b = neg_inf;
        for (std::size_t k = 0; k < inner; ++k) b = std::max(b, terms[k] - row[k] * inv_eps);
        best[o] = b;
        for (std::size_t k = 0; k < inner; ++k) {
          const double z = terms[k] - row[k] * inv_eps - b;
          if (z >= -window) {
            index.push_back(static_cast<std::uint32_t>(k));
            kernel.push_back(std::exp(z));
          }
        }
        start[o + 1] = index.size();
      }
      return;
    }
    // c is inner x outer
    for (std::size_t k = 0; k < inner; ++k) {
      const double* row = c.data() + k * outer;
      for (std::size_t o = 0; o < outer; ++o) best[o] = std::max(best[o], terms[k] - row[o] * inv_eps);
    }
    std::vector<std::size_t> counts(outer, 0);
    for (std::size_t k = 0; k < inner; ++k) {
      const double* row = c.data() + k * outer;
      for (std::size_t o = 0; o < outer; ++o) {
        if (terms[k] - row[o] * inv_eps - best[o] >= -window) ++counts[o];
      }
    }
    for (std::size_t o = 0; o < outer; ++o) start[o + 1] = start[o] + counts[o];
    index.resize(start[outer]);
    kernel.resize(start[outer]);
    std::vector<std::size_t> fill(start.begin(), start.end() - 1);
    for (std::size_t k = 0; k < inner; ++k) {
      const double* row = c.data() + k * outer;
      for (std::size_t o = 0; o < outer; ++o) {
        const double z = terms[k] - row[o] * inv_eps - best[o];
        if (z >= -window) {
          index[fill[o]] = static_cast<std::uint32_t>(k);
          kernel[fill[o]] = std::exp(z);
          ++fill[o];
        }
      }
    }
  }

  // Largest minus smallest drift of `terms` from the build point.
  double drift(const std::vector<double>& terms) const { return spread(terms, base); }

  void log_integral(const std::vector<double>& terms, std::vector<double>& out) {
    const std::size_t inner = base.size();
    const std::size_t outer = best.size();
    scratch.resize(inner);
    double s = neg_inf;
    for (std::size_t k = 0; k < inner; ++k) {
      if (base[k] != neg_inf) s = std::max(s, terms[k] - base[k]);
    }
    for (std::size_t k = 0; k < inner; ++k) scratch[k] = base[k] == neg_inf ? 0.0 : std::exp(terms[k] - base[k] - s);
    out.resize(outer);
    for (std::size_t o = 0; o < outer; ++o) {
      double acc = 0.0;
      for (std::size_t e = start[o]; e < start[o + 1]; ++e) acc += kernel[e] * scratch[index[e]];
      out[o] = best[o] + s + std::log(acc);
    }
  }
};

}  // namespace detail

/// Soft-min on `axis`: -eps log of the integral over the other axes of
/// exp((sum_{i != axis} phi_i - c) / eps) against the product of the other measures.
inline std::vector<double> softmin(const Potentials& potentials, const CostTensor& cost,
                                   const std::vector<DiscreteMeasure>& measures, std::size_t axis, double eps) {
  detail::check_problem(measures, cost);
  detail::check_potentials(potentials, measures);
  if (axis >= measures.size()) throw usage_error("softmin axis out of range");
  if (!(eps > 0.0)) throw usage_error("epsilon must be positive");
  for (double v : cost.values()) {
    if (!std::isfinite(v)) throw numeric_error("cost contains non-finite values");
  }
  const auto terms = detail::scaled_terms(potentials, measures, eps);
  auto li = detail::log_integral(terms, cost, axis, eps);
  for (double& v : li) v = -eps * v;
  return li;
}

/// Right-hand side of the generalized Sinkhorn system for arm `axis`:
/// -aprox(eps log integral ...).
inline std::vector<double> sinkhorn_map(const Potentials& potentials, const CostTensor& cost,
                                        const std::vector<DiscreteMeasure>& measures, const Divergence& div,
                                        std::size_t axis, double eps) {
  auto s = softmin(potentials, cost, measures, axis, eps);
  for (double& v : s) v = -div.aprox_unchecked(-v, eps);
  return s;
}

namespace detail {

inline bool all_balanced(const std::vector<Divergence>& divs) {
  return std::all_of(divs.begin(), divs.end(), [](const Divergence& d) { return d.is_balanced(); });
}

// Zero mu_j-mean on arms 0..J-2, the removed constants absorbed into arm J-1.
inline void normalize_balanced(Potentials& p, const std::vector<DiscreteMeasure>& measures) {
  const std::size_t J = p.size();
  double shift = 0.0;
  for (std::size_t j = 0; j + 1 < J; ++j) {
    const auto& w = measures[j].weights();
    double mass = 0.0, mean = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      mean += w[k] * p[j][k];
      mass += w[k];
    }
    mean /= mass;
    for (double& v : p[j]) v -= mean;
    shift += mean;
  }
  for (double& v : p[J - 1]) v += shift;
}

inline void apply_aprox(std::vector<double>& phi, const std::vector<double>& log_int, const Divergence& div,
                        double eps, std::size_t arm, std::size_t sweep) {
  for (std::size_t k = 0; k < phi.size(); ++k) {
    const double v = -div.aprox_unchecked(eps * log_int[k], eps);
    if (!std::isfinite(v)) {
      throw numeric_error("non-finite potential on arm " + std::to_string(arm) + " at iteration " +
                          std::to_string(sweep));
    }
    phi[k] = v;
  }
}

}  // namespace detail

/// Generalized Sinkhorn / IPFP: cyclic Gauss-Seidel updates
/// phi_j <- -aprox(eps log integral exp((sum_{i != j} phi_i - c) / eps) d(prod mu_i))
/// for j = 0..J-1, until the sup-norm change over a sweep falls below tolerance.
///
/// Returns the last iterate with converged = false when the budget runs out.
inline IpfpResult ipfp(const std::vector<DiscreteMeasure>& measures, const CostTensor& cost,
                       const std::vector<Divergence>& divergences, const SinkhornConfig& config,
                       const Potentials* initial = nullptr) {
  config.validate();
  detail::check_problem(measures, cost, &divergences);
  for (double v : cost.values()) {
    if (!std::isfinite(v)) throw numeric_error("cost contains non-finite values");
  }
  const double eps = config.epsilon;
  const std::size_t J = measures.size();
  const bool balanced = detail::all_balanced(divergences);

  IpfpResult result;
  result.potentials = initial ? *initial : Potentials::zeros(measures);
  detail::check_potentials(result.potentials, measures);
  auto& phi = result.potentials;

  std::vector<std::vector<double>> log_w(J);
  for (std::size_t j = 0; j < J; ++j) log_w[j] = measures[j].log_weights();

  const bool use_active = config.active_set && J == 2;
  detail::ActiveList row_list, col_list;  // rows update arm 0, cols update arm 1
  bool have_lists = false;
  const double inv_eps = 1.0 / eps;
  std::vector<std::vector<double>> terms(J), before(J);
  std::vector<double> li;

  auto fill_terms = [&](std::size_t j) {
    terms[j].resize(phi[j].size());
    for (std::size_t k = 0; k < phi[j].size(); ++k) terms[j][k] = phi[j][k] * inv_eps + log_w[j][k];
  };

  // Dense sweeps run every term; active sweeps use the truncated kernels.
  auto sweep = [&](std::size_t s, bool dense) {
    for (std::size_t j = 0; j < J; ++j) before[j] = phi[j];
    if (!dense) {
      const std::size_t n = cost.shape()[0], m = cost.shape()[1];
      fill_terms(1);
      if (!have_lists || row_list.drift(terms[1]) > config.active_margin) {
        row_list.build(terms[1], cost.values(), n, m, false, inv_eps, config.active_window);
        ++result.active_set_rebuilds;
      }
      row_list.log_integral(terms[1], li);
      detail::apply_aprox(phi[0], li, divergences[0], eps, 0, s);
      fill_terms(0);
      if (!have_lists || col_list.drift(terms[0]) > config.active_margin) {
        col_list.build(terms[0], cost.values(), m, n, true, inv_eps, config.active_window);
        ++result.active_set_rebuilds;
      }
      have_lists = true;
      col_list.log_integral(terms[0], li);
      detail::apply_aprox(phi[1], li, divergences[1], eps, 1, s);
    } else {
      for (std::size_t j = 0; j < J; ++j) {
        for (std::size_t i = 0; i < J; ++i) {
          if (i != j) fill_terms(i);
        }
        detail::apply_aprox(phi[j], detail::log_integral(terms, cost, j, eps), divergences[j], eps, j, s);
      }
    }
    if (balanced) detail::normalize_balanced(phi, measures);
    double change = 0.0;
    for (std::size_t j = 0; j < J; ++j) change = std::max(change, detail::sup_change(phi[j], before[j]));
    return change;
  };

  std::size_t s = 0;
  bool polishing = !use_active;
  while (s < config.max_iterations) {
    ++s;
    const double change = sweep(s, polishing);
    result.last_change = change;
    if (config.on_sweep) config.on_sweep(s, phi);
    if (change < config.tolerance) {
      // a window that kept every entry already was a dense sweep
      const std::size_t full = use_active ? cost.shape()[0] * cost.shape()[1] : 0;
      const bool untruncated = use_active && row_list.index.size() == full && col_list.index.size() == full;
      if (polishing || untruncated) {
        result.converged = true;
        break;
      }
      polishing = true;  // confirm with exact dense sweeps
    }
  }
  result.iterations = s;
  return result;
}

/// Coupling exp((sum_j phi_j - c) / eps) * prod_j mu_j, evaluated in log domain.
inline Coupling assemble_coupling(const Potentials& potentials, const CostTensor& cost,
                                  const std::vector<DiscreteMeasure>& measures, double eps) {
  detail::check_problem(measures, cost);
  detail::check_potentials(potentials, measures);
  if (!(eps > 0.0)) throw usage_error("epsilon must be positive");
  const auto terms = detail::scaled_terms(potentials, measures, eps);
  Coupling out{Tensor(cost.shape()), {}, 0.0};
  auto& vals = out.values.values();
  const auto& c = cost.values();
  const std::size_t J = measures.size();
  std::vector<std::size_t> idx(J, 0);
  const auto& shape = cost.shape();
  for (std::size_t flat = 0; flat < vals.size(); ++flat) {
    double z = -c[flat] / eps;
    for (std::size_t j = 0; j < J; ++j) z += terms[j][idx[j]];
    const double v = std::exp(z);
    if (!std::isfinite(v)) {
      throw numeric_error("coupling overflow at entry " + std::to_string(flat) + "; use a larger epsilon");
    }
    vals[flat] = v;
    for (std::size_t a = J; a-- > 0;) {
      if (++idx[a] < shape[a]) break;
      idx[a] = 0;
    }
  }
  for (std::size_t j = 0; j < J; ++j) out.marginals.push_back(out.values.axis_sums(j));
  for (double v : out.marginals.front()) out.total_mass += v;
  return out;
}

/// max_j || phi_j - RHS_j(phi) ||_inf for the generalized Sinkhorn system, where
/// every RHS_j is evaluated at the same potentials.
inline double foc_residual(const Potentials& potentials, const CostTensor& cost,
                           const std::vector<DiscreteMeasure>& measures, double eps,
                           const std::vector<Divergence>& divergences) {
  detail::check_problem(measures, cost, &divergences);
  double r = 0.0;
  for (std::size_t j = 0; j < measures.size(); ++j) {
    const auto rhs = sinkhorn_map(potentials, cost, measures, divergences[j], j, eps);
    r = std::max(r, detail::sup_change(potentials[j], rhs));
  }
  return r;
}

/// Dual functional
/// F(phi) = -sum_j <phi*(-phi_j), mu_j> - eps <exp((sum phi - c)/eps) - 1, prod mu>.
inline double dual_objective(const Potentials& potentials, const CostTensor& cost,
                             const std::vector<DiscreteMeasure>& measures, double eps,
                             const std::vector<Divergence>& divergences) {
  detail::check_problem(measures, cost, &divergences);
  detail::check_potentials(potentials, measures);
  double value = 0.0;
  double product_mass = 1.0;
  for (std::size_t j = 0; j < measures.size(); ++j) {
    const auto& w = measures[j].weights();
    double mass = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      value -= w[k] * divergences[j].phi_conjugate(-potentials[j][k]);
      mass += w[k];
    }
    product_mass *= mass;
  }
  const auto terms = detail::scaled_terms(potentials, measures, eps);
  const auto li = detail::log_integral(terms, cost, 0, eps);
  LogSumExp total;
  for (std::size_t k = 0; k < li.size(); ++k) total.add(li[k] + terms[0][k]);
  value -= eps * (std::exp(total.value()) - product_mass);
  return value;
}

/// Primal objective <c, gamma> + eps KL(gamma || prod mu) + sum_j D_phi(pi_j gamma || mu_j).
/// Balanced arms contribute 0 when the marginal matches within `marginal_tolerance`, else +inf.
inline double primal_objective(const Coupling& coupling, const CostTensor& cost,
                               const std::vector<DiscreteMeasure>& measures, double eps,
                               const std::vector<Divergence>& divergences, double marginal_tolerance = 1e-7) {
  detail::check_problem(measures, cost, &divergences);
  const std::size_t J = measures.size();
  const auto& vals = coupling.values.values();
  const auto& c = cost.values();
  const auto& shape = cost.shape();
  std::vector<std::size_t> idx(J, 0);
  double transport = 0.0, entropy = 0.0, gamma_mass = 0.0, ref_mass = 1.0;
  for (const auto& m : measures) ref_mass *= m.total_mass();
  for (std::size_t flat = 0; flat < vals.size(); ++flat) {
    const double g = vals[flat];
    if (g > 0.0) {
      double log_ref = 0.0;
      for (std::size_t j = 0; j < J; ++j) log_ref += std::log(measures[j].weights()[idx[j]]);
      transport += c[flat] * g;
      entropy += g * (std::log(g) - log_ref);
      gamma_mass += g;
    }
    for (std::size_t a = J; a-- > 0;) {
      if (++idx[a] < shape[a]) break;
      idx[a] = 0;
    }
  }
  double value = transport + eps * (entropy - gamma_mass + ref_mass);
  for (std::size_t j = 0; j < J; ++j) {
    const auto& target = measures[j].weights();
    if (divergences[j].is_balanced()) {
      for (std::size_t k = 0; k < target.size(); ++k) {
        if (std::abs(coupling.marginals[j][k] - target[k]) > marginal_tolerance) {
          return std::numeric_limits<double>::infinity();
        }
      }
    } else {
      value += phi_divergence(divergences[j], coupling.marginals[j], target);
    }
  }
  return value;
}

/// Transport cost <c, gamma>.
inline double transport_cost(const Coupling& coupling, const CostTensor& cost) {
  double s = 0.0;
  const auto& v = coupling.values.values();
  for (std::size_t k = 0; k < v.size(); ++k) s += v[k] * cost.values()[k];
  return s;
}

/// Result bundle for a full solve.
struct Solution {
  IpfpResult ipfp;
  Coupling coupling;
  double residual = 0.0;
  double dual = 0.0;
  double marginal_error = 0.0;
};

inline Solution solve(const std::vector<DiscreteMeasure>& measures, const CostTensor& cost,
                      const std::vector<Divergence>& divergences, const SinkhornConfig& config) {
  Solution out;
  out.ipfp = ipfp(measures, cost, divergences, config);
  out.coupling = assemble_coupling(out.ipfp.potentials, cost, measures, config.epsilon);
  out.residual = foc_residual(out.ipfp.potentials, cost, measures, config.epsilon, divergences);
  out.dual = dual_objective(out.ipfp.potentials, cost, measures, config.epsilon, divergences);
  out.marginal_error = out.coupling.marginal_error(measures);
  return out;
}

}  // namespace otmatch

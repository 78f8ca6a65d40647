#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <string_view>

#include "otmatch/error.hpp"

namespace otmatch {

enum class DivergenceKind { balanced, kl };

/// Entropy function phi used to penalize marginal deviations.
///
/// `balanced` is the indicator of {p = 1} (hard marginal constraints);
/// `kl(rho)` is phi(p) = rho (p log p - p + 1) with conjugate
/// phi*(q) = rho (exp(q / rho) - 1). Larger rho enforces the marginals harder.
class Divergence {
public:
  static Divergence balanced() { return Divergence(DivergenceKind::balanced, 0.0); }

  static Divergence kl(double rho) {
    if (!(rho > 0.0) || !std::isfinite(rho)) throw usage_error("kl divergence needs a finite scale rho > 0");
    return Divergence(DivergenceKind::kl, rho);
  }

  // Accepts "balanced" or "kl:<rho>".
  static Divergence parse(std::string_view text) {
    if (text == "balanced") return balanced();
    if (text.substr(0, 3) == "kl:") {
      const std::string num(text.substr(3));
      std::size_t used = 0;
      double rho = 0.0;
      try {
        rho = std::stod(num, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != num.size()) throw usage_error("bad divergence scale in '" + std::string(text) + "'");
      return kl(rho);
    }
    throw usage_error("unknown divergence '" + std::string(text) + "' (expected balanced or kl:<rho>)");
  }

  DivergenceKind kind() const noexcept { return kind_; }
  bool is_balanced() const noexcept { return kind_ == DivergenceKind::balanced; }
  double rho() const noexcept { return rho_; }

  std::string name() const {
    if (is_balanced()) return "balanced";
    char buf[64];
    std::snprintf(buf, sizeof buf, "kl:%.17g", rho_);
    return buf;
  }

  double phi(double p) const noexcept {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (p < 0.0) return inf;
    if (is_balanced()) return p == 1.0 ? 0.0 : inf;
    if (p == 0.0) return rho_;
    return rho_ * (p * std::log(p) - p + 1.0);
  }

  double phi_conjugate(double q) const noexcept {
    if (is_balanced()) return q;
    return rho_ * std::expm1(q / rho_);
  }

  double phi_conjugate_derivative(double q) const noexcept {
    if (is_balanced()) return 1.0;
    return std::exp(q / rho_);
  }

  // Recession constant phi'_inf.
  double recession() const noexcept { return std::numeric_limits<double>::infinity(); }

  /// argmin_q eps * exp((p - q) / eps) + phi*(q).
  double aprox(double p, double eps) const {
    if (!std::isfinite(p)) throw numeric_error("aprox: non-finite argument");
    if (!(eps > 0.0)) throw usage_error("aprox: epsilon must be positive");
    return aprox_unchecked(p, eps);
  }

  // Hot-loop variant; callers guarantee finite p and eps > 0.
  double aprox_unchecked(double p, double eps) const noexcept {
    if (is_balanced()) return p;
    return rho_ * p / (rho_ + eps);
  }

  // Multiplier of the linear aprox map (1 for balanced).
  double aprox_factor(double eps) const noexcept { return is_balanced() ? 1.0 : rho_ / (rho_ + eps); }

private:
  Divergence(DivergenceKind kind, double rho) : kind_(kind), rho_(rho) {}

  DivergenceKind kind_;
  double rho_;
};

/// D_phi(mu || nu) for discrete measures on a common support.
inline double phi_divergence(const Divergence& div, std::span<const double> mu, std::span<const double> nu) {
  if (mu.size() != nu.size()) throw usage_error("phi_divergence: length mismatch");
  for (std::size_t k = 0; k < mu.size(); ++k) {
    if (mu[k] < 0.0 || nu[k] < 0.0) throw usage_error("phi_divergence: negative weight");
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (div.is_balanced()) {
    for (std::size_t k = 0; k < mu.size(); ++k) {
      if (mu[k] != nu[k]) return inf;
    }
    return 0.0;
  }
  double total = 0.0;
  for (std::size_t k = 0; k < mu.size(); ++k) {
    if (nu[k] > 0.0) {
      total += nu[k] * div.phi(mu[k] / nu[k]);
    } else if (mu[k] > 0.0) {
      return div.recession();  // singular part
    }
  }
  return total;
}

}  // namespace otmatch

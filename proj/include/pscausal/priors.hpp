#pragma once

#include <cmath>
#include <limits>

#include "pscausal/errors.hpp"

namespace pscausal {

struct InverseGammaPrior {
  double shape = 0.1;
  double rate = 0.1;
  double log_density(double v) const {
    return shape * std::log(rate) - std::lgamma(shape) - (shape + 1) * std::log(v) - rate / v;
  }
};

/// Prior on a range or smoothness parameter. A fixed prior pins the value and disables its update.
struct HyperPrior {
  enum class Family { uniform, log_normal, fixed };
  Family family = Family::uniform;
  double a = 0.0;  ///< lower bound, log-scale mean, or fixed value
  double b = 0.5;  ///< upper bound or log-scale SD

  static HyperPrior uniform(double lo, double hi) { return {Family::uniform, lo, hi}; }
  static HyperPrior log_normal(double mu, double sd) { return {Family::log_normal, mu, sd}; }
  static HyperPrior fixed(double v) { return {Family::fixed, v, v}; }

  bool is_fixed() const { return family == Family::fixed; }

  /// Log density on the natural scale; -inf outside the support. Fixed priors contribute 0.
  double log_density(double v) const {
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    switch (family) {
      case Family::uniform:
        return (v > a && v < b) ? -std::log(b - a) : neg_inf;
      case Family::log_normal: {
        if (!(v > 0.0)) return neg_inf;
        const double z = (std::log(v) - a) / b;
        return -0.5 * z * z - std::log(b) - 0.5 * std::log(2 * M_PI) - std::log(v);
      }
      case Family::fixed:
        return 0.0;
    }
    return neg_inf;
  }

  /// Starting value: midpoint, median, or the fixed value.
  double initial_value() const {
    switch (family) {
      case Family::uniform: return 0.5 * (a + b);
      case Family::log_normal: return std::exp(a);
      case Family::fixed: return a;
    }
    return a;
  }

  void validate(const char* name) const {
    const bool ok = family == Family::uniform      ? (a >= 0.0 && b > a && std::isfinite(b))
                    : family == Family::log_normal ? (std::isfinite(a) && b > 0.0)
                                                   : (a > 0.0 && std::isfinite(a));
    if (!ok) throw InvalidArgument(std::string("invalid prior for ") + name);
  }
};

struct PriorSpec {
  // Gaussian prior variances, all centred at zero.
  double c2_alpha = 100.0, c2_beta = 100.0, c2_eta = 100.0, c2_delta = 100.0, c2_phi = 100.0,
         c2_gamma = 100.0;
  InverseGammaPrior tau2, sigma2_u, sigma2_v, tau2_psi;
  HyperPrior rho_u = HyperPrior::uniform(0.0, 0.5);
  HyperPrior rho_v = HyperPrior::uniform(0.0, 0.5);
  HyperPrior kappa_u = HyperPrior::fixed(0.5);
  HyperPrior kappa_v = HyperPrior::fixed(0.5);
  double kappa_max = 10.0;

  void validate() const {
    for (double c : {c2_alpha, c2_beta, c2_eta, c2_delta, c2_phi, c2_gamma})
      if (!(c > 0.0)) throw InvalidArgument("prior variances must be positive");
    for (const auto* ig : {&tau2, &sigma2_u, &sigma2_v, &tau2_psi})
      if (!(ig->shape > 0.0) || !(ig->rate > 0.0))
        throw InvalidArgument("inverse-gamma shapes and rates must be positive");
    rho_u.validate("rho_u");
    rho_v.validate("rho_v");
    kappa_u.validate("kappa_u");
    kappa_v.validate("kappa_v");
    if (!(kappa_max > 0.0)) throw InvalidArgument("kappa_max must be positive");
  }
};

inline double normal_log_density(double x, double var) {
  return -0.5 * std::log(2 * M_PI * var) - 0.5 * x * x / var;
}

}  // namespace pscausal

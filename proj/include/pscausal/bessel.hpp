#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include "pscausal/errors.hpp"

namespace pscausal {

namespace detail {

/// 1/Gamma(1+mu) and 1/Gamma(1-mu) together with Temme's gamma1, gamma2 for |mu| <= 1/2.
template <typename Scalar>
void temme_gammas(Scalar mu, Scalar& gam1, Scalar& gam2, Scalar& gampl, Scalar& gammi) {
  using std::abs;
  if (abs(mu) < Scalar(1e-3)) {
    // Taylor coefficients of 1/Gamma(1+z) = sum c_k z^k.
    const Scalar c1 = 0.5772156649015328606, c2 = -0.6558780715202538811,
                 c3 = -0.0420026350340952355, c4 = 0.1665386113822914895,
                 c5 = -0.0421977345555443367;
    const Scalar m2 = mu * mu;
    const Scalar even = 1 + m2 * (c2 + m2 * c4);
    const Scalar odd = mu * (c1 + m2 * (c3 + m2 * c5));
    gampl = even + odd;
    gammi = even - odd;
    gam1 = -(c1 + m2 * (c3 + m2 * c5));
    gam2 = even;
    return;
  }
  gampl = 1 / std::tgamma(1 + mu);
  gammi = 1 / std::tgamma(1 - mu);
  gam1 = (gammi - gampl) / (2 * mu);
  gam2 = (gammi + gampl) / 2;
}

/// K_mu(x) and K_{mu+1}(x) for |mu| <= 1/2, both multiplied by e^x.
template <typename Scalar>
void bessel_k_pair_scaled(Scalar mu, Scalar x, Scalar& kmu, Scalar& kmu1) {
  using std::abs;
  constexpr Scalar eps = std::numeric_limits<Scalar>::epsilon();
  constexpr int max_iter = 100000;
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar mu2 = mu * mu;
  if (x < 2) {
    const Scalar x2 = x / 2;
    const Scalar pimu = pi * mu;
    const Scalar fact = abs(pimu) < eps ? Scalar(1) : pimu / std::sin(pimu);
    Scalar d = -std::log(x2);
    Scalar e = mu * d;
    const Scalar fact2 = abs(e) < eps ? Scalar(1) : std::sinh(e) / e;
    Scalar gam1, gam2, gampl, gammi;
    temme_gammas(mu, gam1, gam2, gampl, gammi);
    Scalar ff = fact * (gam1 * std::cosh(e) + gam2 * fact2 * d);
    Scalar sum = ff;
    e = std::exp(e);
    Scalar p = 0.5 * e / gampl;
    Scalar q = 0.5 / (e * gammi);
    Scalar c = 1;
    d = x2 * x2;
    Scalar sum1 = p;
    for (int i = 1; i <= max_iter; ++i) {
      ff = (i * ff + p + q) / (Scalar(i) * i - mu2);
      c *= d / i;
      p /= i - mu;
      q /= i + mu;
      const Scalar del = c * ff;
      sum += del;
      sum1 += c * (p - i * ff);
      if (abs(del) < abs(sum) * eps) break;
    }
    const Scalar ex = std::exp(x);
    kmu = sum * ex;
    kmu1 = sum1 * (2 / x) * ex;
    return;
  }
  // Steed's method for the continued fraction CF2.
  Scalar b = 2 * (1 + x);
  Scalar d = 1 / b;
  Scalar h = d, delh = d;
  Scalar q1 = 0, q2 = 1;
  const Scalar a1 = Scalar(0.25) - mu2;
  Scalar q = a1, c = a1, a = -a1;
  Scalar s = 1 + q * delh;
  for (int i = 2; i <= max_iter; ++i) {
    a -= 2 * (i - 1);
    c = -a * c / i;
    const Scalar qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2;
    d = 1 / (b + a * d);
    delh = (b * d - 1) * delh;
    h += delh;
    const Scalar dels = q * delh;
    s += dels;
    if (abs(dels / s) < eps) break;
  }
  h *= a1;
  kmu = std::sqrt(pi / (2 * x)) / s;
  kmu1 = kmu * (mu + x + Scalar(0.5) - h) / x;
}

}  // namespace detail

/// e^x K_nu(x): finite for large x where K_nu itself underflows.
template <typename Scalar>
Scalar bessel_k_scaled(Scalar nu, Scalar x) {
  if (!(x > 0)) throw InvalidArgument("bessel_k requires x > 0");
  nu = std::abs(nu);
  const int nl = static_cast<int>(nu + Scalar(0.5));
  const Scalar mu = nu - nl;
  Scalar kmu, kmu1;
  detail::bessel_k_pair_scaled(mu, x, kmu, kmu1);
  for (int i = 1; i <= nl; ++i) {
    const Scalar next = (mu + i) * (2 / x) * kmu1 + kmu;
    kmu = kmu1;
    kmu1 = next;
  }
  return kmu;
}

/// Modified Bessel function of the second kind, real order.
template <typename Scalar>
Scalar bessel_k(Scalar nu, Scalar x) {
  return bessel_k_scaled(nu, x) * std::exp(-x);
}

}  // namespace pscausal

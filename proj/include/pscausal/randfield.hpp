#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include "pscausal/bessel.hpp"
#include "pscausal/errors.hpp"
#include "pscausal/rng.hpp"

namespace pscausal {

struct MaternParams {
  double rho = 0.1;
  double kappa = 0.5;
};

inline void check_matern(const MaternParams& p) {
  if (!(p.rho > 0.0) || !std::isfinite(p.rho) || !(p.kappa > 0.0) || !std::isfinite(p.kappa))
    throw InvalidArgument("Matern range and smoothness must be positive and finite");
}

/// Matern correlation through the Bessel function for any smoothness.
template <typename Scalar>
Scalar matern_correlation_bessel(Scalar h, Scalar rho, Scalar kappa) {
  if (h == 0) return Scalar(1);
  const Scalar x = h / rho;
  // log of 2^{1-k}/Gamma(k) x^k K_k(x), with K_k(x) = e^{-x} * scaled.
  const Scalar log_r = (1 - kappa) * std::log(Scalar(2)) - std::lgamma(kappa) + kappa * std::log(x) +
                       std::log(bessel_k_scaled(kappa, x)) - x;
  const Scalar r = std::exp(log_r);
  return r > 1 ? Scalar(1) : r;
}

/// R(h; rho, kappa); kappa = 1/2 takes the exponential shortcut.
template <typename Scalar>
Scalar matern_correlation(Scalar h, const MaternParams& p) {
  check_matern(p);
  if (h < 0) throw InvalidArgument("distance must be nonnegative");
  if (p.kappa == 0.5) return std::exp(-h / Scalar(p.rho));
  return matern_correlation_bessel<Scalar>(h, p.rho, p.kappa);
}

/// Distinct entries of a distance matrix; kernels are evaluated once per distinct lag.
struct DistanceClasses {
  std::vector<double> lags;
  Eigen::MatrixXi index;

  explicit DistanceClasses(const Eigen::MatrixXd& distances);
  Eigen::MatrixXd correlation(const MaternParams& p) const;
};

Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& distances, const MaternParams& p);

/// Lower Cholesky factor of variance*R + jitter*I.
struct CovarianceFactor {
  Eigen::MatrixXd lower;
  double jitter = 0.0;
  Eigen::Index dimension() const { return lower.rows(); }
};

/// Escalation sequence after the requested jitter fails (absolute, unit-variance scale).
inline constexpr double kJitterLadder[] = {1e-10, 1e-8, 1e-6};

/// Factor of a symmetric matrix, escalating jitter*scale on the diagonal until positive definite.
CovarianceFactor factor_with_jitter(const Eigen::MatrixXd& sigma, double jitter, double scale,
                                    const char* block);

CovarianceFactor build_covariance(const Eigen::MatrixXd& distances, double variance,
                                  const MaternParams& p, double jitter = 0.0);

Eigen::VectorXd sample_mvn(const CovarianceFactor& factor, Rng& rng);

inline Eigen::VectorXd standard_normal_vector(Eigen::Index n, Rng& rng) {
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.normal();
  return z;
}

struct LmcSpec {
  double sigma2_0 = 1.0;
  double sigma2_1 = 1.0;
  double gamma = 0.0;
};

/// (u0, u1) = (u0~, u1~ + gamma u0~).
template <typename D0, typename D1>
std::pair<Eigen::VectorXd, Eigen::VectorXd> lmc_compose(const Eigen::MatrixBase<D0>& u0_tilde,
                                                        const Eigen::MatrixBase<D1>& u1_tilde,
                                                        double gamma) {
  if (u0_tilde.size() != u1_tilde.size()) throw InvalidArgument("lmc_compose: length mismatch");
  return {u0_tilde, u1_tilde + gamma * u0_tilde};
}

struct LmcMoments {
  double var0, var1, cov, corr;
};

LmcMoments lmc_cross_moments(const LmcSpec& spec);

/// Chain-local cache of a correlation matrix (jitter included), its factor and log determinant.
class CorrelationCache {
 public:
  CorrelationCache() = default;
  CorrelationCache(const DistanceClasses* classes, const MaternParams& p, const char* block);

  const MaternParams& params() const { return params_; }
  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const Eigen::MatrixXd& lower() const { return factor_.lower; }
  double jitter() const { return factor_.jitter; }
  double log_det() const { return log_det_; }
  Eigen::Index size() const { return factor_.lower.rows(); }
  /// L^{-1} x for R = L L'.
  Eigen::VectorXd whiten(const Eigen::VectorXd& x) const;
  /// x' R^{-1} x through the triangular factor.
  double quad_form(const Eigen::VectorXd& x) const;
  /// Dense inverse, built on first use; the sampler itself never needs it.
  const Eigen::MatrixXd& inverse() const;

 private:
  MaternParams params_;
  Eigen::MatrixXd matrix_;
  CovarianceFactor factor_;
  double log_det_ = 0.0;
  mutable Eigen::MatrixXd inverse_;
  mutable bool have_inverse_ = false;
};

}  // namespace pscausal

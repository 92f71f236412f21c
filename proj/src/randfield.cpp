#include "pscausal/randfield.hpp"

#include <algorithm>
#include <map>

namespace pscausal {

DistanceClasses::DistanceClasses(const Eigen::MatrixXd& distances) {
  const Eigen::Index n = distances.rows();
  if (distances.cols() != n) throw InvalidArgument("distance matrix must be square");
  // Lags that agree to ~1e-12 relative share a kernel evaluation.
  std::map<double, int> seen;
  index.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j; i < n; ++i) {
      const double h = distances(i, j);
      auto it = seen.lower_bound(h * (1 - 1e-12) - 1e-300);
      int k;
      if (it != seen.end() && it->first <= h * (1 + 1e-12) + 1e-300) {
        k = it->second;
      } else {
        k = static_cast<int>(lags.size());
        lags.push_back(h);
        seen.emplace(h, k);
      }
      index(i, j) = index(j, i) = k;
    }
}

Eigen::MatrixXd DistanceClasses::correlation(const MaternParams& p) const {
  check_matern(p);
  std::vector<double> r(lags.size());
  std::transform(lags.begin(), lags.end(), r.begin(),
                 [&](double h) { return matern_correlation<double>(h, p); });
  return index.unaryExpr([&](int k) { return r[k]; });
}

Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& distances, const MaternParams& p) {
  check_matern(p);
  return distances.unaryExpr([&](double h) { return matern_correlation<double>(h, p); });
}

// Roundoff can leave a tiny positive pivot on an exactly singular matrix.
static bool usable(const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::MatrixXd& a) {
  if (llt.info() != Eigen::Success) return false;
  const double floor = 1e-12 * a.diagonal().maxCoeff();
  return llt.matrixLLT().diagonal().array().square().minCoeff() > floor;
}

CovarianceFactor factor_with_jitter(const Eigen::MatrixXd& sigma, double jitter, double scale,
                                    const char* block) {
  std::vector<double> ladder{jitter};
  for (double j : kJitterLadder)
    if (j > jitter) ladder.push_back(j);
  for (double j : ladder) {
    Eigen::MatrixXd a = sigma;
    a.diagonal().array() += j * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (usable(llt, a)) return {llt.matrixL(), j * scale};
  }
  throw NumericalFailure(block, "matrix not positive definite after jitter escalation");
}

CovarianceFactor build_covariance(const Eigen::MatrixXd& distances, double variance,
                                  const MaternParams& p, double jitter) {
  if (!(variance > 0.0)) throw InvalidArgument("variance must be positive");
  if (jitter < 0.0) throw InvalidArgument("jitter must be nonnegative");
  Eigen::MatrixXd sigma = variance * correlation_matrix(distances, p);
  // Requested jitter is absolute; the ladder is relative to unit variance.
  Eigen::MatrixXd a = sigma;
  a.diagonal().array() += jitter;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (usable(llt, a)) return {llt.matrixL(), jitter};
  return factor_with_jitter(sigma, 0.0, variance, "covariance");
}

Eigen::VectorXd sample_mvn(const CovarianceFactor& factor, Rng& rng) {
  return factor.lower.triangularView<Eigen::Lower>() * standard_normal_vector(factor.dimension(), rng);
}

LmcMoments lmc_cross_moments(const LmcSpec& s) {
  if (!(s.sigma2_0 > 0.0) || !(s.sigma2_1 > 0.0)) throw InvalidArgument("LMC variances must be positive");
  const double var0 = s.sigma2_0;
  const double var1 = s.sigma2_1 + s.gamma * s.gamma * s.sigma2_0;
  const double cov = s.gamma * s.sigma2_0;
  return {var0, var1, cov, cov / std::sqrt(var0 * var1)};
}

CorrelationCache::CorrelationCache(const DistanceClasses* classes, const MaternParams& p,
                                   const char* block)
    : params_(p), matrix_(classes->correlation(p)) {
  factor_ = factor_with_jitter(matrix_, 0.0, 1.0, block);
  matrix_.diagonal().array() += factor_.jitter;
  log_det_ = 2.0 * factor_.lower.diagonal().array().log().sum();
}

Eigen::VectorXd CorrelationCache::whiten(const Eigen::VectorXd& x) const {
  return factor_.lower.triangularView<Eigen::Lower>().solve(x);
}

double CorrelationCache::quad_form(const Eigen::VectorXd& x) const { return whiten(x).squaredNorm(); }

const Eigen::MatrixXd& CorrelationCache::inverse() const {
  if (!have_inverse_) {
    const Eigen::Index n = size();
    Eigen::MatrixXd linv = Eigen::MatrixXd::Identity(n, n);
    factor_.lower.triangularView<Eigen::Lower>().solveInPlace(linv);
    inverse_.noalias() = linv.transpose() * linv;
    have_inverse_ = true;
  }
  return inverse_;
}

}  // namespace pscausal

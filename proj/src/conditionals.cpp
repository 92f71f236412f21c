#include "pscausal/conditionals.hpp"

#include <array>
#include <cmath>

#include "pscausal/errors.hpp"

namespace pscausal {

namespace {

/// alpha_a + X_S beta_a at every site.
Vec outcome_linear(int a, const FitData& d, const ModelParams& m) {
  return (d.xs * m.beta[a]).array() + m.alpha[a];
}

/// eta_a + X_G delta_a at every cell.
Vec intensity_linear(int a, const FitData& d, const ModelParams& m) {
  return (d.xg * m.delta[a]).array() + m.eta[a];
}

struct Direction {
  double alpha = 0.0, eta = 0.0, phi = 0.0;
  std::array<Vec, 2> u, v;  // empty means no move
};

Direction ridge_direction(Ridge r, int a, const ChainState& s, const ModelSpec& spec) {
  const ModelParams& m = s.params;
  const Eigen::Index G = s.latent.u_tilde[0].size();
  if (r != Ridge::u_level && !spec.full()) throw InvalidArgument("intensity ridge moves need the full model");
  Direction d;
  switch (r) {
    case Ridge::u_level:
      d.alpha = 1.0;
      if (spec.full()) d.eta = m.phi[a];
      d.u[a] = Vec::Constant(G, -1.0);
      if (a == 0) d.u[1] = Vec::Constant(G, m.gamma_u);
      break;
    case Ridge::v_level:
      d.eta = 1.0;
      d.v[a] = Vec::Constant(G, -1.0);
      if (a == 0) d.v[1] = Vec::Constant(G, m.gamma_v);
      break;
    case Ridge::phi_v: {
      d.phi = 1.0;
      const Vec u = s.latent.u(a, m.gamma_u);
      d.v[a] = -u;
      if (a == 0) d.v[1] = m.gamma_v * u;
      break;
    }
  }
  return d;
}

}  // namespace

VectorNormal::VectorNormal(Vec b_, Mat c_, const char* block) : b(std::move(b_)), c(std::move(c_)), llt_(c) {
  if (llt_.info() != Eigen::Success) throw NumericalFailure(block, "conditional precision not positive definite");
  mean_ = llt_.solve(b);
}

Vec VectorNormal::sample(Rng& rng) const {
  // If C = K K', then K'^{-1} z has covariance C^{-1}.
  return mean_ + llt_.matrixU().solve(standard_normal_vector(b.size(), rng));
}

double VectorNormal::log_density(const Vec& x) const {
  const Vec z = x - mean_;
  const double log_det = 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
  return -0.5 * b.size() * std::log(2 * M_PI) + 0.5 * log_det - 0.5 * z.dot(c * z);
}

FieldNormal::FieldNormal(Vec d, Vec b, double sigma2, const CorrelationCache& corr, const char* block)
    : d_(std::move(d)), b_(std::move(b)), sigma2_(sigma2), corr_(&corr) {
  const Eigen::Index n = d_.size();
  sqrt_d_ = d_.cwiseMax(0.0).cwiseSqrt();
  Mat s = (sigma2_ * sqrt_d_.asDiagonal()) * corr.matrix() * sqrt_d_.asDiagonal();
  s.diagonal().array() += 1.0;
  s_llt_.compute(s);
  if (s_llt_.info() != Eigen::Success) throw NumericalFailure(block, "field conditional factorization failed");
  Vec z(n);
  for (Eigen::Index g = 0; g < n; ++g) z[g] = sqrt_d_[g] > 0.0 ? b_[g] / sqrt_d_[g] : 0.0;
  mean_ = sigma2_ * (corr.matrix() * sqrt_d_.cwiseProduct(s_llt_.solve(z)));
  log_det_precision_ = 2.0 * s_llt_.matrixLLT().diagonal().array().log().sum() - n * std::log(sigma2_) -
                       corr.log_det();
}

Vec FieldNormal::sample(Rng& rng) const {
  const Eigen::Index n = d_.size();
  const Vec xi = standard_normal_vector(n, rng);
  const Vec prior = std::sqrt(sigma2_) * Vec(corr_->lower().triangularView<Eigen::Lower>() * xi);
  const Vec noise = standard_normal_vector(n, rng);
  Vec z(n);
  for (Eigen::Index g = 0; g < n; ++g) z[g] = sqrt_d_[g] > 0.0 ? b_[g] / sqrt_d_[g] : 0.0;
  const Vec innovation = z - sqrt_d_.cwiseProduct(prior) - noise;
  return prior + sigma2_ * (corr_->matrix() * sqrt_d_.cwiseProduct(s_llt_.solve(innovation)));
}

double FieldNormal::log_density(const Vec& x) const {
  const double quad = x.dot(d_.cwiseProduct(x)) + corr_->quad_form(x) / sigma2_ - 2.0 * b_.dot(x) + b_.dot(mean_);
  return -0.5 * d_.size() * std::log(2 * M_PI) + 0.5 * log_det_precision_ - 0.5 * quad;
}

Mat FieldNormal::precision() const {
  Mat c = corr_->inverse() / sigma2_;
  c.diagonal() += d_;
  return c;
}

ScalarNormal alpha_conditional(int a, const FitData& d, const ChainState& s, const PriorSpec& pr,
                               Outcomes layer) {
  const ModelParams& m = s.params;
  const Vec w = outcome_weights(a, d, layer);
  const Vec r = d.complete_outcome(a, s.latent.y_miss) - d.xs * m.beta[a] - d.gather(s.latent.u(a, m.gamma_u));
  return {w.dot(r) / m.tau2[a], w.sum() / m.tau2[a] + 1.0 / pr.c2_alpha};
}

VectorNormal beta_conditional(int a, const FitData& d, const ChainState& s, const PriorSpec& pr,
                              const ModelSpec& spec, Outcomes layer) {
  const ModelParams& m = s.params;
  Vec b = Vec::Zero(d.p);
  Mat c = Mat::Identity(d.p, d.p) / pr.c2_beta;
  for (int arm = 0; arm < 2; ++arm) {
    if (!spec.pooled && arm != a) continue;
    const Vec r = (d.complete_outcome(arm, s.latent.y_miss) - d.gather(s.latent.u(arm, m.gamma_u))).array() -
                  m.alpha[arm];
    if (layer == Outcomes::complete) {
      b += d.xs.transpose() * r / m.tau2[arm];
      c += d.xs_gram / m.tau2[arm];
    } else {
      const Vec w = outcome_weights(arm, d, layer);
      b += d.xs.transpose() * w.cwiseProduct(r) / m.tau2[arm];
      c += d.xs.transpose() * w.asDiagonal() * d.xs / m.tau2[arm];
    }
  }
  return VectorNormal(std::move(b), std::move(c), "gibbs_beta");
}

ScalarNormal eta_conditional(int a, const FitData& d, const ChainState& s, const PriorSpec& pr) {
  const ModelParams& m = s.params;
  const LatentState& l = s.latent;
  const Vec r = l.log_lambda[a] - d.xg * m.delta[a] - l.v(a, m.gamma_v) - m.phi[a] * l.u(a, m.gamma_u);
  const double t = s.cov.tau2_psi[a];
  return {r.sum() / t, d.cells / t + 1.0 / pr.c2_eta};
}

VectorNormal delta_conditional(int a, const FitData& d, const ChainState& s, const PriorSpec& pr,
                               const ModelSpec& spec) {
  const ModelParams& m = s.params;
  const LatentState& l = s.latent;
  Vec b = Vec::Zero(d.p);
  Mat c = Mat::Identity(d.p, d.p) / pr.c2_delta;
  for (int arm = 0; arm < 2; ++arm) {
    if (!spec.pooled && arm != a) continue;
    const double t = s.cov.tau2_psi[arm];
    const Vec r = (l.log_lambda[arm] - l.v(arm, m.gamma_v) - m.phi[arm] * l.u(arm, m.gamma_u)).array() - m.eta[arm];
    b += d.xg.transpose() * r / t;
    c += d.xg_gram / t;
  }
  return VectorNormal(std::move(b), std::move(c), "gibbs_delta");
}

ScalarNormal phi_conditional(int a, const FitData& d, const ChainState& s, const PriorSpec& pr) {
  const ModelParams& m = s.params;
  const LatentState& l = s.latent;
  const Vec u = l.u(a, m.gamma_u);
  const Vec r = l.log_lambda[a] - intensity_linear(a, d, m) - l.v(a, m.gamma_v);
  const double t = s.cov.tau2_psi[a];
  return {u.dot(r) / t, u.squaredNorm() / t + 1.0 / pr.c2_phi};
}

ScalarNormal gamma_u_conditional(const FitData& d, const ChainState& s, const PriorSpec& pr,
                                 const ModelSpec& spec, Outcomes layer) {
  const ModelParams& m = s.params;
  const LatentState& l = s.latent;
  const Vec h0 = d.gather(l.u_tilde[0]).cwiseProduct(outcome_weights(1, d, layer));
  const Vec r1 = d.complete_outcome(1, l.y_miss) - outcome_linear(1, d, m) - d.gather(l.u_tilde[1]);
  double b = h0.dot(r1) / m.tau2[1];
  double c = h0.squaredNorm() / m.tau2[1] + 1.0 / pr.c2_gamma;
  if (spec.full()) {
    const double t = s.cov.tau2_psi[1];
    const Vec q1 = l.log_lambda[1] - intensity_linear(1, d, m) - l.v(1, m.gamma_v) - m.phi[1] * l.u_tilde[1];
    b += m.phi[1] * l.u_tilde[0].dot(q1) / t;
    c += m.phi[1] * m.phi[1] * l.u_tilde[0].squaredNorm() / t;
  }
  return {b, c};
}

ScalarNormal gamma_v_conditional(const FitData& d, const ChainState& s, const PriorSpec& pr) {
  const ModelParams& m = s.params;
  const LatentState& l = s.latent;
  const double t = s.cov.tau2_psi[1];
  const Vec q = l.log_lambda[1] - intensity_linear(1, d, m) - l.v_tilde[1] - m.phi[1] * l.u(1, m.gamma_u);
  return {l.v_tilde[0].dot(q) / t, l.v_tilde[0].squaredNorm() / t + 1.0 / pr.c2_gamma};
}

FieldNormal field_u_conditional(int a, const FitData& d, const ChainState& s, const ModelSpec& spec,
                                const CorrelationCache& corr_u, Outcomes layer) {
  const ModelParams& m = s.params;
  const CovParams& cv = s.cov;
  const LatentState& l = s.latent;
  const double g = m.gamma_u;
  const Vec w0 = outcome_weights(0, d, layer), w1 = outcome_weights(1, d, layer);
  // Sites per cell contributing to each arm's outcome layer.
  const Vec n0 = layer == Outcomes::complete ? d.obs_per_cell : d.counts[0];
  const Vec n1 = layer == Outcomes::complete ? d.obs_per_cell : d.counts[1];
  const Vec r1 = d.complete_outcome(1, l.y_miss) - outcome_linear(1, d, m);
  Vec diag, b;
  if (a == 0) {
    const Vec r0 = d.complete_outcome(0, l.y_miss) - outcome_linear(0, d, m);
    diag = n0 / m.tau2[0] + n1 * (g * g / m.tau2[1]);
    b = d.scatter(w0.cwiseProduct(r0)) / m.tau2[0] +
        g * d.scatter(w1.cwiseProduct(r1 - d.gather(l.u_tilde[1]))) / m.tau2[1];
  } else {
    diag = n1 / m.tau2[1];
    b = d.scatter(w1.cwiseProduct(r1 - g * d.gather(l.u_tilde[0]))) / m.tau2[1];
  }
  if (spec.full()) {
    const double t0 = cv.tau2_psi[0], t1 = cv.tau2_psi[1];
    const Vec q1 = l.log_lambda[1] - intensity_linear(1, d, m) - l.v(1, m.gamma_v);
    if (a == 0) {
      const Vec q0 = l.log_lambda[0] - intensity_linear(0, d, m) - l.v(0, m.gamma_v);
      diag.array() += m.phi[0] * m.phi[0] / t0 + m.phi[1] * m.phi[1] * g * g / t1;
      b += m.phi[0] * q0 / t0 + m.phi[1] * g * (q1 - m.phi[1] * l.u_tilde[1]) / t1;
    } else {
      diag.array() += m.phi[1] * m.phi[1] / t1;
      b += m.phi[1] * (q1 - m.phi[1] * g * l.u_tilde[0]) / t1;
    }
  }
  return FieldNormal(std::move(diag), std::move(b), cv.sigma2_u[a], corr_u,
                     a == 0 ? "gibbs_field_u0" : "gibbs_field_u1");
}

FieldNormal field_v_conditional(int a, const FitData& d, const ChainState& s, const CorrelationCache& corr_v) {
  const ModelParams& m = s.params;
  const CovParams& cv = s.cov;
  const LatentState& l = s.latent;
  const double t0 = cv.tau2_psi[0], t1 = cv.tau2_psi[1], g = m.gamma_v;
  const Vec q1 = l.log_lambda[1] - intensity_linear(1, d, m) - m.phi[1] * l.u(1, m.gamma_u);
  Vec diag, b;
  if (a == 0) {
    const Vec q0 = l.log_lambda[0] - intensity_linear(0, d, m) - m.phi[0] * l.u_tilde[0];
    diag = Vec::Constant(d.cells, 1.0 / t0 + g * g / t1);
    b = q0 / t0 + g * (q1 - l.v_tilde[1]) / t1;
  } else {
    diag = Vec::Constant(d.cells, 1.0 / t1);
    b = (q1 - g * l.v_tilde[0]) / t1;
  }
  return FieldNormal(std::move(diag), std::move(b), cv.sigma2_v[a], corr_v,
                     a == 0 ? "gibbs_field_v0" : "gibbs_field_v1");
}

InverseGamma sigma2_u_conditional(int a, const ChainState& s, const PriorSpec& pr, const CorrelationCache& corr_u) {
  const Vec& u = s.latent.u_tilde[a];
  return {0.5 * u.size() + pr.sigma2_u.shape, 0.5 * corr_u.quad_form(u) + pr.sigma2_u.rate};
}

InverseGamma sigma2_v_conditional(int a, const ChainState& s, const PriorSpec& pr, const CorrelationCache& corr_v) {
  const Vec& v = s.latent.v_tilde[a];
  return {0.5 * v.size() + pr.sigma2_v.shape, 0.5 * corr_v.quad_form(v) + pr.sigma2_v.rate};
}

InverseGamma tau2_psi_conditional(int a, const FitData& d, const ChainState& s, const PriorSpec& pr) {
  const Vec psi = s.latent.log_lambda[a] - log_intensity_means(a, s.params, s.latent, d.xg);
  return {0.5 * d.cells + pr.tau2_psi.shape, 0.5 * psi.squaredNorm() + pr.tau2_psi.rate};
}

InverseGamma tau2_conditional(int a, const FitData& d, const ChainState& s, const PriorSpec& pr,
                              Outcomes layer) {
  const ModelParams& m = s.params;
  const Vec w = outcome_weights(a, d, layer);
  const Vec r = d.complete_outcome(a, s.latent.y_miss) - outcome_linear(a, d, m) -
                d.gather(s.latent.u(a, m.gamma_u));
  return {0.5 * w.sum() + pr.tau2.shape, 0.5 * w.dot(r.cwiseAbs2()) + pr.tau2.rate};
}

ScalarNormal ridge_conditional(Ridge r, int a, const ChainState& s, const PriorSpec& pr, const ModelSpec& spec,
                               const CorrelationCache& corr) {
  const Direction dir = ridge_direction(r, a, s, spec);
  const ModelParams& m = s.params;
  ScalarNormal q{0.0, 0.0};
  // -(x + c d)^2 / 2v contributes d^2/v to the precision and -x d/v to the canonical term.
  auto scalar = [&](double x, double d, double v) {
    q.c += d * d / v;
    q.b -= x * d / v;
  };
  auto field = [&](const Vec& x, const Vec& d, double sigma2) {
    if (d.size() == 0) return;
    const Vec w = corr.whiten(d);
    q.c += w.squaredNorm() / sigma2;
    q.b -= w.dot(corr.whiten(x)) / sigma2;
  };
  if (dir.alpha != 0.0) scalar(m.alpha[a], dir.alpha, pr.c2_alpha);
  if (dir.eta != 0.0) scalar(m.eta[a], dir.eta, pr.c2_eta);
  if (dir.phi != 0.0) scalar(m.phi[a], dir.phi, pr.c2_phi);
  for (int k = 0; k < 2; ++k) {
    field(s.latent.u_tilde[k], dir.u[k], s.cov.sigma2_u[k]);
    field(s.latent.v_tilde[k], dir.v[k], s.cov.sigma2_v[k]);
  }
  return q;
}

void apply_ridge(Ridge r, int a, double c, ChainState& s, const ModelSpec& spec) {
  const Direction dir = ridge_direction(r, a, s, spec);
  ModelParams& m = s.params;
  m.alpha[a] += c * dir.alpha;
  m.eta[a] += c * dir.eta;
  m.phi[a] += c * dir.phi;
  for (int k = 0; k < 2; ++k) {
    if (dir.u[k].size()) s.latent.u_tilde[k] += c * dir.u[k];
    if (dir.v[k].size()) s.latent.v_tilde[k] += c * dir.v[k];
  }
}

namespace {

// Prior of the second field evaluated at F_1 - gamma F_0, times the gamma prior.
ScalarNormal interweaved(const Vec& f0, const Vec& f1, double sigma2_1, double c2_gamma,
                         const CorrelationCache& corr) {
  const Vec w0 = corr.whiten(f0);
  return {w0.dot(corr.whiten(f1)) / sigma2_1, w0.squaredNorm() / sigma2_1 + 1.0 / c2_gamma};
}

}  // namespace

ScalarNormal gamma_u_interweaved(const ChainState& s, const PriorSpec& pr, const CorrelationCache& corr_u) {
  const LatentState& l = s.latent;
  return interweaved(l.u_tilde[0], l.u(1, s.params.gamma_u), s.cov.sigma2_u[1], pr.c2_gamma, corr_u);
}

ScalarNormal gamma_v_interweaved(const ChainState& s, const PriorSpec& pr, const CorrelationCache& corr_v) {
  const LatentState& l = s.latent;
  return interweaved(l.v_tilde[0], l.v(1, s.params.gamma_v), s.cov.sigma2_v[1], pr.c2_gamma, corr_v);
}

void set_gamma_u_holding_fields(double gamma, ChainState& s) {
  s.latent.u_tilde[1] += (s.params.gamma_u - gamma) * s.latent.u_tilde[0];
  s.params.gamma_u = gamma;
}

void set_gamma_v_holding_fields(double gamma, ChainState& s) {
  s.latent.v_tilde[1] += (s.params.gamma_v - gamma) * s.latent.v_tilde[0];
  s.params.gamma_v = gamma;
}

void impute_counterfactuals(const FitData& d, ChainState& s, Rng& rng) {
  const ModelParams& m = s.params;
  const std::array<Vec, 2> u{s.latent.u(0, m.gamma_u), s.latent.u(1, m.gamma_u)};
  const std::array<double, 2> sd{std::sqrt(m.tau2[0]), std::sqrt(m.tau2[1])};
  if (s.latent.y_miss.size() != d.n) s.latent.y_miss = Vec::Zero(d.n);
  for (int i = 0; i < d.n; ++i) {
    const int b = 1 - d.treatment[i];
    const double mu = outcome_mean(b, d.xs.row(i).transpose(), u[b][d.cell[i]], m);
    s.latent.y_miss[i] = rng.normal(mu, sd[b]);
  }
}

}  // namespace pscausal

#include "pscausal/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pscausal/errors.hpp"

namespace pscausal {

namespace {

struct LeastSquares {
  double intercept = 0.0;
  Vec slope;
  double residual_variance = 1.0;
};

/// Ridge-stabilised least squares of y on [1, X]; degenerate inputs fall back to the mean.
LeastSquares least_squares(const Mat& x, const Vec& y) {
  const Eigen::Index n = y.size(), p = x.cols();
  LeastSquares out;
  out.slope = Vec::Zero(p);
  if (n == 0) return out;
  if (n <= p + 1) {
    out.intercept = y.mean();
    out.residual_variance = n > 1 ? (y.array() - y.mean()).square().sum() / (n - 1) : 1.0;
    return out;
  }
  Mat design(n, p + 1);
  design << Vec::Ones(n), x;
  Mat gram = design.transpose() * design;
  gram.diagonal().array() += 1e-8 * std::max(1.0, gram.diagonal().maxCoeff());
  const Vec coef = gram.llt().solve(design.transpose() * y);
  out.intercept = coef[0];
  out.slope = coef.tail(p);
  out.residual_variance = (y - design * coef).squaredNorm() / static_cast<double>(n - p - 1);
  return out;
}

double clamp_variance(double v) { return std::isfinite(v) ? std::max(0.5 * v, 1e-2) : 1.0; }

const HyperPrior& prior_of(Hyper h, const PriorSpec& p) {
  switch (h) {
    case Hyper::rho_u: return p.rho_u;
    case Hyper::rho_v: return p.rho_v;
    case Hyper::kappa_u: return p.kappa_u;
    case Hyper::kappa_v: return p.kappa_v;
  }
  return p.rho_u;
}

double& value_of(Hyper h, CovParams& c) {
  switch (h) {
    case Hyper::rho_u: return c.rho_u;
    case Hyper::rho_v: return c.rho_v;
    case Hyper::kappa_u: return c.kappa_u;
    case Hyper::kappa_v: return c.kappa_v;
  }
  return c.rho_u;
}

bool is_u(Hyper h) { return h == Hyper::rho_u || h == Hyper::kappa_u; }
bool is_kappa(Hyper h) { return h == Hyper::kappa_u || h == Hyper::kappa_v; }

/// GP log density of both fields sharing one correlation matrix, up to 2*pi terms.
double field_pair_log_lik(const ChainState& s, Hyper h, const CorrelationCache& corr) {
  double out = 0.0;
  for (int a = 0; a < 2; ++a) {
    const Vec& f = is_u(h) ? s.latent.u_tilde[a] : s.latent.v_tilde[a];
    const double sigma2 = is_u(h) ? s.cov.sigma2_u[a] : s.cov.sigma2_v[a];
    out -= 0.5 * (f.size() * std::log(sigma2) + corr.log_det() + corr.quad_form(f) / sigma2);
  }
  return out;
}

}  // namespace

void McmcConfig::validate() const {
  const bool empty = n_iter == 0 && burn_in == 0;
  if (n_iter < 0 || burn_in < 0 || (!empty && burn_in >= n_iter))
    throw InvalidArgument("MCMC config requires 0 <= burn_in < n_iter");
  if (thin < 1) throw InvalidArgument("thin must be at least 1");
  if (!(hmc.step_size > 0.0) || hmc.leapfrog_steps < 1 || !(hmc.mass_scale > 0.0))
    throw InvalidArgument("HMC step size, leapfrog steps and mass scale must be positive");
  if (!(mh.log_rho_sd >= 0.0) || !(mh.log_kappa_sd >= 0.0)) throw InvalidArgument("MH proposal SDs must be >= 0");
}

bool mh_update_range_smoothness(Hyper which, ChainState& s, CorrelationCache& cache, const DistanceClasses& classes,
                                const PriorSpec& priors, double proposal_sd, Rng& rng) {
  const HyperPrior& prior = prior_of(which, priors);
  if (prior.is_fixed()) return false;
  double& value = value_of(which, s.cov);
  const double proposal = value * std::exp(proposal_sd * rng.normal());
  const double log_u = std::log(rng.uniform());
  const double prior_new = prior.log_density(proposal);
  if (!std::isfinite(prior_new) || !std::isfinite(proposal) || (is_kappa(which) && proposal > priors.kappa_max))
    return false;

  MaternParams mp = cache.params();
  (is_kappa(which) ? mp.kappa : mp.rho) = proposal;
  CorrelationCache candidate;
  try {
    candidate = CorrelationCache(&classes, mp, "mh_range_smoothness");
  } catch (const NumericalFailure&) {
    return false;  // a non-factorizable proposal has zero density under the jitter ladder
  }
  const double current = field_pair_log_lik(s, which, cache) + prior.log_density(value) + std::log(value);
  const double next = field_pair_log_lik(s, which, candidate) + prior_new + std::log(proposal);
  if (log_u < next - current) {
    value = proposal;
    cache = std::move(candidate);
    return true;
  }
  return false;
}

ChainState initial_state(const FitData& d, const PriorSpec& priors, const ModelSpec& spec) {
  ChainState s;
  s.params = ModelParams::zeros(d.p);
  s.latent = LatentState::zeros(d.cells, d.n);

  std::array<LeastSquares, 2> fit;
  for (int a = 0; a < 2; ++a) {
    std::vector<int> rows;
    for (int i = 0; i < d.n; ++i)
      if (d.treatment[i] == a) rows.push_back(i);
    Mat x(rows.size(), d.p);
    Vec y(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      x.row(k) = d.xs.row(rows[k]);
      y[k] = d.y[rows[k]];
    }
    fit[a] = least_squares(x, y);
    s.params.alpha[a] = fit[a].intercept;
    s.params.beta[a] = fit[a].slope;
    s.params.tau2[a] = clamp_variance(fit[a].residual_variance);
    s.cov.sigma2_u[a] = clamp_variance(fit[a].residual_variance);
  }
  if (spec.pooled) s.params.beta[0] = s.params.beta[1] = 0.5 * (fit[0].slope + fit[1].slope);
  for (int i = 0; i < d.n; ++i) {
    const int b = 1 - d.treatment[i];
    s.latent.y_miss[i] = s.params.alpha[b] + d.xs.row(i).dot(s.params.beta[b]);
  }

  s.cov.rho_u = priors.rho_u.initial_value();
  s.cov.kappa_u = priors.kappa_u.initial_value();
  s.cov.rho_v = priors.rho_v.initial_value();
  s.cov.kappa_v = priors.kappa_v.initial_value();
  if (!spec.full()) return s;

  std::array<LeastSquares, 2> lfit;
  for (int a = 0; a < 2; ++a) {
    s.latent.log_lambda[a] = ((d.counts[a].array() + 0.5) / d.cell_area).log().matrix();
    lfit[a] = least_squares(d.xg, s.latent.log_lambda[a]);
    s.params.eta[a] = lfit[a].intercept;
    s.params.delta[a] = lfit[a].slope;
    s.cov.tau2_psi[a] = clamp_variance(lfit[a].residual_variance);
    s.cov.sigma2_v[a] = clamp_variance(lfit[a].residual_variance);
  }
  if (spec.pooled) s.params.delta[0] = s.params.delta[1] = 0.5 * (lfit[0].slope + lfit[1].slope);
  return s;
}

ChainRunner::ChainRunner(FitData data, PriorSpec priors, McmcConfig config, ModelSpec spec)
    : data_(std::move(data)),
      priors_(std::move(priors)),
      config_(std::move(config)),
      spec_(spec),
      adapt_{DualAveraging(config_.hmc.step_size), DualAveraging(config_.hmc.step_size)},
      log_mh_sd_{std::log(config_.mh.log_rho_sd), std::log(config_.mh.log_rho_sd), std::log(config_.mh.log_kappa_sd),
                 std::log(config_.mh.log_kappa_sd)} {
  priors_.validate();
  config_.validate();
  classes_ = std::make_unique<DistanceClasses>(data_.distances);
  set_state(initial_state(data_, priors_, spec_));
}

void ChainRunner::set_state(const ChainState& s) {
  state_ = s;
  refresh_caches();
}

void ChainRunner::replace_data(FitData data) {
  if (data.cells != data_.cells) throw InvalidArgument("replace_data: grid changed");
  data_ = std::move(data);
}

void ChainRunner::refresh_caches() {
  corr_u_ = CorrelationCache(classes_.get(), state_.cov.matern_u(), "covariance_u");
  if (spec_.full()) corr_v_ = CorrelationCache(classes_.get(), state_.cov.matern_v(), "covariance_v");
}

void ChainRunner::end_adaptation() {
  for (auto& da : adapt_) da.finish();
}

void ChainRunner::ridge_sweep(Rng& rng) {
  ChainState& s = state_;
  set_gamma_u_holding_fields(gamma_u_interweaved(s, priors_, corr_u_).sample(rng), s);
  for (int a = 0; a < 2; ++a)
    apply_ridge(Ridge::u_level, a, ridge_conditional(Ridge::u_level, a, s, priors_, spec_, corr_u_).sample(rng), s,
                spec_);
  if (spec_.full()) {
    set_gamma_v_holding_fields(gamma_v_interweaved(s, priors_, corr_v_).sample(rng), s);
    for (const Ridge r : {Ridge::v_level, Ridge::phi_v})
      for (int a = 0; a < 2; ++a)
        apply_ridge(r, a, ridge_conditional(r, a, s, priors_, spec_, corr_v_).sample(rng), s, spec_);
  }
}

void ChainRunner::sweep(Rng& rng, bool adapting) {
  ChainState& s = state_;
  ModelParams& m = s.params;
  const FitData& d = data_;

  // Ridge moves first: the data only pin sums such as alpha_a + U_a, so plain Gibbs crawls along them.
  if (config_.ridge_moves) ridge_sweep(rng);

  const bool collapsed = config_.collapse_counterfactuals;
  const Outcomes layer = collapsed ? Outcomes::observed : Outcomes::complete;
  if (!collapsed) impute_counterfactuals(d, s, rng);

  for (int a = 0; a < 2; ++a)
    m.alpha[a] = alpha_conditional(a, d, s, priors_, layer).sample(rng, config_.faults.alpha_variance_scale);
  if (spec_.pooled) {
    m.beta[0] = m.beta[1] = beta_conditional(0, d, s, priors_, spec_, layer).sample(rng);
  } else {
    for (int a = 0; a < 2; ++a) m.beta[a] = beta_conditional(a, d, s, priors_, spec_, layer).sample(rng);
  }

  for (int a = 0; a < 2; ++a)
    s.latent.u_tilde[a] = field_u_conditional(a, d, s, spec_, corr_u_, layer).sample(rng);
  for (int a = 0; a < 2; ++a) m.tau2[a] = tau2_conditional(a, d, s, priors_, layer).sample(rng);

  if (spec_.full()) {
    for (int a = 0; a < 2; ++a) {
      const Vec mean = log_intensity_means(a, m, s.latent, d.xg);
      HmcSettings hs = config_.hmc;
      hs.step_size = adapt_[a].step_size();
      const LogIntensityTarget target{d.counts[a], mean, s.cov.tau2_psi[a], d.cell_area,
                                      config_.faults.gradient_bias};
      const HmcStep step = hmc_update_log_intensity(s.latent.log_lambda[a], target, hs, rng);
      ++counters_.hmc_total[a];
      counters_.hmc_accept[a] += step.accepted;
      counters_.non_finite += step.non_finite;
      if (adapting) adapt_[a].update(step.accept_prob);
    }
    for (int a = 0; a < 2; ++a) m.eta[a] = eta_conditional(a, d, s, priors_).sample(rng);
    if (spec_.pooled) {
      m.delta[0] = m.delta[1] = delta_conditional(0, d, s, priors_, spec_).sample(rng);
    } else {
      for (int a = 0; a < 2; ++a) m.delta[a] = delta_conditional(a, d, s, priors_, spec_).sample(rng);
    }
    for (int a = 0; a < 2; ++a) m.phi[a] = phi_conditional(a, d, s, priors_).sample(rng);
    for (int a = 0; a < 2; ++a) s.latent.v_tilde[a] = field_v_conditional(a, d, s, corr_v_).sample(rng);
    m.gamma_u = gamma_u_conditional(d, s, priors_, spec_, layer).sample(rng);
    m.gamma_v = gamma_v_conditional(d, s, priors_).sample(rng);
    for (int a = 0; a < 2; ++a) s.cov.tau2_psi[a] = tau2_psi_conditional(a, d, s, priors_).sample(rng);
    for (int a = 0; a < 2; ++a) s.cov.sigma2_v[a] = sigma2_v_conditional(a, s, priors_, corr_v_).sample(rng);
  } else {
    m.gamma_u = gamma_u_conditional(d, s, priors_, spec_, layer).sample(rng);
  }

  for (int a = 0; a < 2; ++a) s.cov.sigma2_u[a] = sigma2_u_conditional(a, s, priors_, corr_u_).sample(rng);
  if (collapsed) impute_counterfactuals(d, s, rng);

  const Hyper order[4] = {Hyper::rho_u, Hyper::kappa_u, Hyper::rho_v, Hyper::kappa_v};
  for (int k = 0; k < 4; ++k) {
    const Hyper h = order[k];
    if (!spec_.full() && !is_u(h)) continue;
    if (prior_of(h, priors_).is_fixed()) continue;
    const int slot = static_cast<int>(h);
    const bool acc = mh_update_range_smoothness(h, s, is_u(h) ? corr_u_ : corr_v_, *classes_, priors_,
                                                std::exp(log_mh_sd_[slot]), rng);
    ++counters_.mh_total[slot];
    counters_.mh_accept[slot] += acc;
    if (adapting) {
      ++mh_steps_[slot];
      log_mh_sd_[slot] += ((acc ? 1.0 : 0.0) - config_.mh.target_accept) / std::pow(mh_steps_[slot], 0.6);
    }
  }
}

ChainOutput run_chain(const FitData& data, const PriorSpec& priors, const McmcConfig& config, const ModelSpec& spec) {
  config.validate();
  ChainOutput out;
  out.spec = spec;
  out.config = config;
  out.p = data.p;
  out.active = data.active;
  if (config.n_iter == 0) return out;

  ChainRunner runner(data, priors, config, spec);
  Rng rng = Rng::derive(config.seed, "chain");
  const long kept = config.retained();
  out.draws.reserve(kept);
  if (config.record_local) {
    out.delta_local.resize(kept, data.cells);
    if (spec.full()) out.propensity.resize(kept, data.cells);
  }
  long row = 0;
  for (long iter = 0; iter < config.n_iter; ++iter) {
    const bool adapting = config.adapt && iter < config.burn_in;
    runner.sweep(rng, adapting);
    if (iter + 1 == config.burn_in) {
      if (config.adapt) runner.end_adaptation();
      runner.counters().reset();
    }
    if (iter < config.burn_in || (iter - config.burn_in + 1) % config.thin != 0) continue;
    const ChainState& s = runner.state();
    const CausalSummary cs = local_effects(s.params, s.latent, data.xg, {}, spec.full() && config.record_local);
    out.draws.push_back({iter, s.params, s.cov, cs.delta_bar});
    if (config.record_local) {
      out.delta_local.row(row) = cs.delta_local.transpose();
      if (spec.full()) out.propensity.row(row) = cs.propensity.transpose();
    }
    ++row;
  }
  const auto& c = runner.counters();
  auto rate = [](long acc, long tot) { return tot > 0 ? static_cast<double>(acc) / tot : 0.0; };
  out.acceptance.hmc = {rate(c.hmc_accept[0], c.hmc_total[0]), rate(c.hmc_accept[1], c.hmc_total[1])};
  out.acceptance.rho_u = rate(c.mh_accept[0], c.mh_total[0]);
  out.acceptance.rho_v = rate(c.mh_accept[1], c.mh_total[1]);
  out.acceptance.kappa_u = rate(c.mh_accept[2], c.mh_total[2]);
  out.acceptance.kappa_v = rate(c.mh_accept[3], c.mh_total[3]);
  out.non_finite_energy = c.non_finite;
  out.step_size = runner.step_sizes();
  return out;
}

}  // namespace pscausal

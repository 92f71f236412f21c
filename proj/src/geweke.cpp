#include "pscausal/geweke.hpp"

#include <cmath>

#include "pscausal/errors.hpp"

namespace pscausal {

namespace {

double draw_hyper(const HyperPrior& h, Rng& rng) {
  switch (h.family) {
    case HyperPrior::Family::uniform: return rng.uniform(h.a, h.b);
    case HyperPrior::Family::log_normal: return std::exp(rng.normal(h.a, h.b));
    case HyperPrior::Family::fixed: return h.a;
  }
  return h.a;
}

Vec normal_vector(int p, double var, Rng& rng) {
  Vec v(p);
  for (int j = 0; j < p; ++j) v[j] = rng.normal(0.0, std::sqrt(var));
  return v;
}

}  // namespace

GewekeConfig geweke_toy_config() {
  GewekeConfig c;
  c.grid = build_grid({{0.0, 3.0}, {0.0, 3.0}}, 2, 2);
  c.grid_x.resize(4, 1);
  c.grid_x << -1.0, -0.3, 0.4, 0.9;
  PriorSpec& p = c.priors;
  p.c2_alpha = 1.0;
  p.c2_beta = 1.0;
  p.c2_eta = 0.25;
  p.c2_delta = 0.25;
  p.c2_phi = 0.25;
  p.c2_gamma = 0.25;
  p.tau2 = {6.0, 5.0};
  p.sigma2_u = {6.0, 2.5};
  p.sigma2_v = {6.0, 1.0};
  p.tau2_psi = {6.0, 0.5};
  p.rho_u = HyperPrior::uniform(0.5, 3.0);
  p.rho_v = HyperPrior::uniform(0.5, 3.0);
  p.kappa_u = HyperPrior::fixed(0.5);
  p.kappa_v = HyperPrior::fixed(0.5);
  c.mcmc.n_iter = 1;
  c.mcmc.burn_in = 0;
  c.mcmc.adapt = false;
  c.mcmc.hmc.step_size = 0.1;
  c.mcmc.hmc.leapfrog_steps = 10;
  c.mcmc.mh.log_rho_sd = 0.5;
  return c;
}

ChainState draw_from_prior(const GridGeometry& grid, const Mat& grid_x, const PriorSpec& pr, bool pooled, Rng& rng) {
  const int G = grid.size();
  const int p = static_cast<int>(grid_x.cols());
  ChainState s;
  ModelParams& m = s.params;
  CovParams& c = s.cov;
  m = ModelParams::zeros(p);
  for (int a = 0; a < 2; ++a) {
    m.alpha[a] = rng.normal(0.0, std::sqrt(pr.c2_alpha));
    m.beta[a] = (pooled && a == 1) ? m.beta[0] : normal_vector(p, pr.c2_beta, rng);
    m.eta[a] = rng.normal(0.0, std::sqrt(pr.c2_eta));
    m.delta[a] = (pooled && a == 1) ? m.delta[0] : normal_vector(p, pr.c2_delta, rng);
    m.phi[a] = rng.normal(0.0, std::sqrt(pr.c2_phi));
    m.tau2[a] = rng.inverse_gamma(pr.tau2.shape, pr.tau2.rate);
    c.sigma2_u[a] = rng.inverse_gamma(pr.sigma2_u.shape, pr.sigma2_u.rate);
    c.sigma2_v[a] = rng.inverse_gamma(pr.sigma2_v.shape, pr.sigma2_v.rate);
    c.tau2_psi[a] = rng.inverse_gamma(pr.tau2_psi.shape, pr.tau2_psi.rate);
  }
  m.gamma_u = rng.normal(0.0, std::sqrt(pr.c2_gamma));
  m.gamma_v = rng.normal(0.0, std::sqrt(pr.c2_gamma));
  c.rho_u = draw_hyper(pr.rho_u, rng);
  c.kappa_u = draw_hyper(pr.kappa_u, rng);
  c.rho_v = draw_hyper(pr.rho_v, rng);
  c.kappa_v = draw_hyper(pr.kappa_v, rng);

  const Mat dist = pairwise_centroid_distances(grid);
  const CovarianceFactor fu = build_covariance(dist, 1.0, c.matern_u());
  const CovarianceFactor fv = build_covariance(dist, 1.0, c.matern_v());
  LatentState& l = s.latent;
  l = LatentState::zeros(G, 0);
  for (int a = 0; a < 2; ++a) l.u_tilde[a] = std::sqrt(c.sigma2_u[a]) * sample_mvn(fu, rng);
  for (int a = 0; a < 2; ++a) l.v_tilde[a] = std::sqrt(c.sigma2_v[a]) * sample_mvn(fv, rng);
  for (int a = 0; a < 2; ++a) {
    l.log_lambda[a] = log_intensity_means(a, m, l, grid_x);
    for (int g = 0; g < G; ++g) l.log_lambda[a][g] += rng.normal(0.0, std::sqrt(c.tau2_psi[a]));
  }
  return s;
}

Dataset draw_data(const GridGeometry& grid, const Mat& grid_x, ChainState& s, Rng& rng) {
  const int G = grid.size();
  const ModelParams& m = s.params;
  const LatentState& l = s.latent;
  std::vector<int> cell, arm;
  for (int g = 0; g < G; ++g)
    for (int a = 0; a < 2; ++a) {
      const long count = rng.poisson(grid.cell_area * std::exp(l.log_lambda[a][g]));
      for (long k = 0; k < count; ++k) {
        cell.push_back(g);
        arm.push_back(a);
      }
    }
  const int n = static_cast<int>(cell.size());
  Dataset d;
  d.grid = grid;
  d.grid_x = grid_x;
  d.sites = grid.centroids(cell, Eigen::all);
  d.treatment = Eigen::Map<const Eigen::VectorXi>(arm.data(), n);
  d.x = grid_x(cell, Eigen::all);
  d.y.resize(n);
  s.latent.y_miss.resize(n);
  const std::array<Vec, 2> u{l.u(0, m.gamma_u), l.u(1, m.gamma_u)};
  for (int i = 0; i < n; ++i) {
    std::array<double, 2> y;
    for (int a = 0; a < 2; ++a)
      y[a] = outcome_mean(a, d.x.row(i).transpose(), u[a][cell[i]], m) + rng.normal(0.0, std::sqrt(m.tau2[a]));
    d.y[i] = y[arm[i]];
    s.latent.y_miss[i] = y[1 - arm[i]];
  }
  return d;
}

std::vector<std::string> geweke_statistic_names() {
  return {"alpha0",        "alpha1",       "beta0",        "beta1",        "eta0",
          "eta1",          "delta0",       "delta1",       "phi0",         "phi1",
          "gamma_u",       "gamma_v",      "log_tau2_0",   "log_tau2_1",   "log_sigma2_u0",
          "log_sigma2_v0", "log_tau2_psi0", "rho_u",       "alpha0_sq",    "alpha1_sq"};
}

std::vector<double> geweke_statistics(const ChainState& s) {
  const ModelParams& m = s.params;
  const CovParams& c = s.cov;
  return {m.alpha[0],
          m.alpha[1],
          m.beta[0][0],
          m.beta[1][0],
          m.eta[0],
          m.eta[1],
          m.delta[0][0],
          m.delta[1][0],
          m.phi[0],
          m.phi[1],
          m.gamma_u,
          m.gamma_v,
          std::log(m.tau2[0]),
          std::log(m.tau2[1]),
          std::log(c.sigma2_u[0]),
          std::log(c.sigma2_v[0]),
          std::log(c.tau2_psi[0]),
          c.rho_u,
          m.alpha[0] * m.alpha[0],
          m.alpha[1] * m.alpha[1]};
}

double GewekeReport::max_abs_z() const {
  double z = 0.0;
  for (const auto& s : statistics) z = std::max(z, std::abs(s.z));
  return z;
}

GewekeReport geweke_validate(const GewekeConfig& cfg) {
  if (cfg.rounds < 2 * cfg.batches || cfg.batches < 2) throw InvalidArgument("Geweke needs rounds >= 2 * batches >= 4");
  if (cfg.grid_x.cols() != 1) throw InvalidArgument("Geweke statistics assume one covariate");
  const ModelSpec spec{Variant::full, cfg.pooled};
  const std::size_t k = geweke_statistic_names().size();

  // Marginal-conditional path: independent forward draws.
  Rng fwd = Rng::derive(cfg.seed, "geweke/forward");
  std::vector<double> f_sum(k, 0.0), f_sq(k, 0.0);
  for (long r = 0; r < cfg.rounds; ++r) {
    const auto st = geweke_statistics(draw_from_prior(cfg.grid, cfg.grid_x, cfg.priors, cfg.pooled, fwd));
    for (std::size_t j = 0; j < k; ++j) {
      f_sum[j] += st[j];
      f_sq[j] += st[j] * st[j];
    }
  }

  // Successive-conditional path: alternate one sampler sweep with a fresh data draw.
  Rng suc = Rng::derive(cfg.seed, "geweke/successive");
  McmcConfig mc = cfg.mcmc;
  mc.adapt = false;
  ChainState state = draw_from_prior(cfg.grid, cfg.grid_x, cfg.priors, cfg.pooled, suc);
  Dataset data = draw_data(cfg.grid, cfg.grid_x, state, suc);
  ChainRunner runner(make_fit_data(data), cfg.priors, mc, spec);
  runner.set_state(state);
  const long per_batch = cfg.rounds / cfg.batches;
  const long used = per_batch * cfg.batches;
  std::vector<std::vector<double>> batch(k, std::vector<double>(cfg.batches, 0.0));
  for (long r = 0; r < used; ++r) {
    runner.sweep(suc, false);
    state = runner.state();
    const auto st = geweke_statistics(state);
    for (std::size_t j = 0; j < k; ++j) batch[j][r / per_batch] += st[j] / per_batch;
    data = draw_data(cfg.grid, cfg.grid_x, state, suc);
    runner.replace_data(make_fit_data(data));
    runner.set_state(state);
  }

  GewekeReport rep;
  const auto names = geweke_statistic_names();
  const double nf = static_cast<double>(cfg.rounds);
  for (std::size_t j = 0; j < k; ++j) {
    const double fm = f_sum[j] / nf;
    const double fv = (f_sq[j] - nf * fm * fm) / (nf - 1.0);
    double sm = 0.0;
    for (double b : batch[j]) sm += b;
    sm /= cfg.batches;
    double bv = 0.0;
    for (double b : batch[j]) bv += (b - sm) * (b - sm);
    bv /= cfg.batches - 1;  // variance of a batch mean
    const double se = std::sqrt(fv / nf + bv / cfg.batches);
    rep.statistics.push_back({names[j], fm, sm, se > 0.0 ? (fm - sm) / se : 0.0});
  }
  return rep;
}

}  // namespace pscausal

#include "pscausal/simgen.hpp"

#include <cmath>

#include "pscausal/errors.hpp"

namespace pscausal {

namespace {

Vec draw_field(const CovarianceFactor& unit, double sigma2, Rng& rng) {
  return std::sqrt(sigma2) * sample_mvn(unit, rng);
}

}  // namespace

ScenarioSpec scenario(int id) {
  struct Row {
    double phi, rho, lambda;
    bool gaussian, stationary;
  };
  static const Row menu[8] = {
      {0.0, 0.1, 5, true, true},       {1.0 / 3, 0.1, 5, true, true}, {2.0 / 3, 0.1, 5, true, true},
      {1.0, 0.1, 5, true, true},       {2.0 / 3, 0.2, 5, true, true}, {2.0 / 3, 0.1, 10, true, true},
      {2.0 / 3, 0.1, 5, true, false},  {2.0 / 3, 0.1, 5, false, true},
  };
  if (id < 1 || id > 8) throw InvalidArgument("scenario id must be in 1..8");
  const Row& r = menu[id - 1];
  ScenarioSpec s;
  s.id = id;
  s.lambda_star = r.lambda;
  s.gaussian = r.gaussian;
  s.stationary = r.stationary;
  ModelParams& m = s.truth;
  m = ModelParams::zeros(2);
  m.alpha = {2.0, 4.0};
  m.beta = {Vec::Constant(2, 1.0), Vec::Constant(2, -1.0)};
  m.delta = {Vec::Constant(2, 1.0), Vec::Constant(2, -1.0)};
  m.phi = {r.phi, 1.5 * r.phi};
  m.tau2 = {0.1, 0.1};
  m.gamma_u = -0.5;
  m.gamma_v = 0.5;
  CovParams& c = s.cov;
  c.rho_u = c.rho_v = r.rho;
  c.kappa_u = c.kappa_v = 0.5;
  c.sigma2_u = {1.0, 1.0};
  c.sigma2_v = {1.0, 1.0};
  c.tau2_psi = {0.1, 0.1};
  return s;
}

Mat generate_covariates(const GridGeometry& grid, Rng& rng, int p, double variance, double range) {
  const CovarianceFactor f = build_covariance(pairwise_centroid_distances(grid), variance, {range, 0.5});
  Mat x(grid.size(), p);
  for (int j = 0; j < p; ++j) x.col(j) = sample_mvn(f, rng);
  return x;
}

Points nonstationary_field_transform(const GridGeometry& grid) {
  Points c = grid.centroids;
  c.col(1) = c.col(1).array().square().matrix();
  return c;
}

Vec nongaussian_intensity(const Vec& u, double phi, double gamma_u, double sigma2) {
  const double centre = std::sqrt((1.0 + gamma_u * gamma_u) * sigma2 / (2 * M_PI));
  return phi * (u.cwiseMax(0.0).array() - centre).matrix();
}

Simulation generate_dataset(const ScenarioSpec& spec, Rng& rng, const std::optional<Mat>& covariates) {
  if (!(spec.lambda_star > 0.0)) throw InvalidArgument("lambda_star must be positive");
  const GridGeometry grid = build_grid(spec.domain, spec.nx, spec.ny);
  const int G = grid.size();
  Simulation sim;
  Dataset& data = sim.data;
  SimTruth& truth = sim.truth;
  data.grid = grid;
  if (covariates) {
    if (covariates->rows() != G) throw InvalidArgument("frozen covariates must have one row per cell");
    data.grid_x = *covariates;
  } else {
    data.grid_x = generate_covariates(grid, rng, spec.p, spec.covariate_variance, spec.covariate_range);
  }
  const int p = static_cast<int>(data.grid_x.cols());
  if (spec.truth.beta[0].size() != p || spec.truth.delta[0].size() != p)
    throw InvalidArgument("truth coefficient length must equal covariate dimension");

  truth.scenario = spec.id;
  truth.cov = spec.cov;
  ModelParams& m = truth.params;
  m = spec.truth;
  for (int a = 0; a < 2; ++a) {
    truth.delta_star[a] = spec.truth.delta[a];
    m.delta[a] = spec.truth.delta[a] + m.phi[a] * m.beta[a];
  }

  const Eigen::MatrixXd dist = pairwise_centroid_distances(grid);
  const CovarianceFactor unit_u = build_covariance(dist, 1.0, spec.cov.matern_u());
  const CovarianceFactor unit_v =
      build_covariance(spec.stationary ? dist : pairwise_distances(nonstationary_field_transform(grid)), 1.0,
                       spec.cov.matern_v());
  LatentState& f = truth.fields;
  f = LatentState::zeros(G, 0);
  for (int a = 0; a < 2; ++a) f.u_tilde[a] = draw_field(unit_u, spec.cov.sigma2_u[a], rng);
  for (int a = 0; a < 2; ++a) f.v_tilde[a] = draw_field(unit_v, spec.cov.sigma2_v[a], rng);

  const double area = grid.cell_area;
  for (int a = 0; a < 2; ++a) {
    const Vec u = f.u(a, m.gamma_u);
    const Vec pref = spec.gaussian ? Vec(m.phi[a] * u)
                                   : nongaussian_intensity(u, m.phi[a], a == 0 ? 0.0 : m.gamma_u, spec.cov.sigma2_u[0]);
    Vec base = data.grid_x * m.delta[a] + f.v(a, m.gamma_v) + pref;
    const double sd_psi = std::sqrt(spec.cov.tau2_psi[a]);
    for (int g = 0; g < G; ++g) base[g] += rng.normal(0.0, sd_psi);
    const double shift = base.maxCoeff();
    const double total = (base.array() - shift).exp().sum();
    m.eta[a] = std::log(spec.lambda_star * G / (area * total)) - shift;
    f.log_lambda[a] = base.array() + m.eta[a];
  }

  std::vector<std::array<double, 2>> sites;
  std::vector<int> arms, site_cells;
  for (int g = 0; g < G; ++g) {
    const int ix = g % grid.nx, iy = g / grid.nx;
    for (int a = 0; a < 2; ++a) {
      const long count = rng.poisson(area * std::exp(f.log_lambda[a][g]));
      for (long k = 0; k < count; ++k) {
        double sx = grid.domain.x.lo + (ix + rng.uniform()) * grid.cell_width();
        double sy = grid.domain.y.lo + (iy + rng.uniform()) * grid.cell_height();
        if (locate(grid, {sx, sy}) != g) {  // rounding onto a neighbouring edge
          sx = grid.centroids(g, 0);
          sy = grid.centroids(g, 1);
        }
        sites.push_back({sx, sy});
        arms.push_back(a);
        site_cells.push_back(g);
      }
    }
  }
  const int n = static_cast<int>(sites.size());
  data.sites.resize(n, 2);
  data.treatment.resize(n);
  data.y.resize(n);
  data.x.resize(n, p);
  const std::array<Vec, 2> u{f.u(0, m.gamma_u), f.u(1, m.gamma_u)};
  for (int i = 0; i < n; ++i) {
    const int a = arms[i], g = site_cells[i];
    data.sites(i, 0) = sites[i][0];
    data.sites(i, 1) = sites[i][1];
    data.treatment[i] = a;
    data.x.row(i) = data.grid_x.row(g);
    data.y[i] = outcome_mean(a, data.x.row(i).transpose(), u[a][g], m) + rng.normal(0.0, std::sqrt(m.tau2[a]));
  }
  truth.delta_bar = local_effects(m, f, data.grid_x, {}, false).delta_bar;
  return sim;
}

}  // namespace pscausal

#include "pscausal/model.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "pscausal/errors.hpp"

namespace pscausal {

namespace {

double expit(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

double gaussian_prior(const Vec& x, double var) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) s += normal_log_density(x[i], var);
  return s;
}

double field_log_density(const Vec& f, double sigma2, const CorrelationCache& corr) {
  const double g = static_cast<double>(f.size());
  return -0.5 * (g * std::log(2 * M_PI * sigma2) + corr.log_det() + corr.quad_form(f) / sigma2);
}

}  // namespace

ModelParams ModelParams::zeros(int p) {
  ModelParams m;
  m.beta = {Vec::Zero(p), Vec::Zero(p)};
  m.delta = {Vec::Zero(p), Vec::Zero(p)};
  return m;
}

LatentState LatentState::zeros(int cells, int n) {
  LatentState s;
  for (int a = 0; a < 2; ++a) {
    s.u_tilde[a] = Vec::Zero(cells);
    s.v_tilde[a] = Vec::Zero(cells);
    s.log_lambda[a] = Vec::Zero(cells);
  }
  s.y_miss = Vec::Zero(n);
  return s;
}

Eigen::VectorXi Dataset::cells() const {
  Eigen::VectorXi c(n());
  for (int i = 0; i < n(); ++i) c[i] = locate(grid, sites.row(i).transpose());
  return c;
}

Eigen::MatrixXi Dataset::counts() const {
  Eigen::MatrixXi N = Eigen::MatrixXi::Zero(grid.size(), 2);
  const Eigen::VectorXi c = cells();
  for (int i = 0; i < n(); ++i) ++N(c[i], treatment[i]);
  return N;
}

void Dataset::validate() const {
  const int G = grid.size();
  if (grid_x.rows() != G) throw InvalidArgument("grid covariates must have one row per cell");
  if (!mask.empty() && static_cast<int>(mask.size()) != G) throw InvalidArgument("mask length must equal G");
  const int nobs = n();
  if (sites.rows() != nobs || treatment.size() != nobs || x.rows() != nobs)
    throw InvalidArgument("observation arrays have inconsistent lengths");
  if (x.cols() != grid_x.cols()) throw InvalidArgument("site and grid covariate dimensions differ");
  if (!grid_x.allFinite() || !x.allFinite() || !y.allFinite() || !sites.allFinite())
    throw InvalidArgument("non-finite values in dataset");
  for (int i = 0; i < nobs; ++i) {
    if (treatment[i] != 0 && treatment[i] != 1)
      throw InvalidArgument("treatment must be 0 or 1 (observation " + std::to_string(i) + ")");
    const int g = locate(grid, sites.row(i).transpose());
    if (!active(g)) throw InvalidArgument("observation " + std::to_string(i) + " lies in a masked cell");
  }
}

Vec FitData::complete_outcome(int a, const Vec& y_miss) const {
  Vec out(n);
  for (int i = 0; i < n; ++i) out[i] = treatment[i] == a ? y[i] : y_miss[i];
  return out;
}

Vec FitData::gather(const Vec& u) const {
  Vec out(n);
  for (int i = 0; i < n; ++i) out[i] = u[cell[i]];
  return out;
}

Vec FitData::scatter(const Vec& r) const {
  Vec out = Vec::Zero(cells);
  for (int i = 0; i < n; ++i) out[cell[i]] += r[i];
  return out;
}

FitData make_fit_data(const Dataset& data) {
  data.validate();
  FitData f;
  const int G = data.grid.size();
  f.active = active_cells(data.mask, G);
  std::vector<int> compact(G, -1);
  for (int k = 0; k < static_cast<int>(f.active.size()); ++k) compact[f.active[k]] = k;

  f.n = data.n();
  f.p = data.p();
  f.cells = static_cast<int>(f.active.size());
  f.cell_area = data.grid.cell_area;
  f.xs = data.x;
  f.treatment = data.treatment;
  f.y = data.y;
  f.cell.resize(f.n);
  const Eigen::VectorXi full_cells = data.cells();
  for (int i = 0; i < f.n; ++i) f.cell[i] = compact[full_cells[i]];

  f.xg.resize(f.cells, f.p);
  Points centroids(f.cells, 2);
  for (int k = 0; k < f.cells; ++k) {
    f.xg.row(k) = data.grid_x.row(f.active[k]);
    centroids.row(k) = data.grid.centroids.row(f.active[k]);
  }
  f.distances = pairwise_distances(centroids);

  f.counts = {Vec::Zero(f.cells), Vec::Zero(f.cells)};
  for (int i = 0; i < f.n; ++i) f.counts[f.treatment[i]][f.cell[i]] += 1.0;
  f.obs_per_cell = f.counts[0] + f.counts[1];
  f.xs_gram = f.xs.transpose() * f.xs;
  f.xg_gram = f.xg.transpose() * f.xg;
  return f;
}

double outcome_mean(int a, const Eigen::Ref<const Vec>& x, double u_cell, const ModelParams& params) {
  return params.alpha[a] + x.dot(params.beta[a]) + u_cell;
}

double log_intensity_mean(int a, int g, const ModelParams& params, const LatentState& state,
                          const Mat& grid_x) {
  const LatentState& s = state;
  const double u = a == 0 ? s.u_tilde[0][g] : s.u_tilde[1][g] + params.gamma_u * s.u_tilde[0][g];
  const double v = a == 0 ? s.v_tilde[0][g] : s.v_tilde[1][g] + params.gamma_v * s.v_tilde[0][g];
  return params.eta[a] + grid_x.row(g).dot(params.delta[a]) + v + params.phi[a] * u;
}

Vec log_intensity_means(int a, const ModelParams& params, const LatentState& state, const Mat& grid_x) {
  return (params.eta[a] + (grid_x * params.delta[a]).array()).matrix() + state.v(a, params.gamma_v) +
         params.phi[a] * state.u(a, params.gamma_u);
}

double propensity(int g, const ModelParams& params, const LatentState& state, const Mat& grid_x) {
  return expit(log_intensity_mean(1, g, params, state, grid_x) -
               log_intensity_mean(0, g, params, state, grid_x));
}

CausalSummary local_effects(const ModelParams& params, const LatentState& state, const Mat& grid_x,
                            const CellMask& mask, bool with_propensity) {
  const Eigen::Index G = grid_x.rows();
  if (state.u_tilde[0].size() != G || state.u_tilde[1].size() != G)
    throw InvalidArgument("local_effects: field length must match grid covariates");
  if (!mask.empty() && static_cast<Eigen::Index>(mask.size()) != G)
    throw InvalidArgument("local_effects: mask length must match grid covariates");
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  CausalSummary out;
  const Vec diff = ((params.alpha[1] - params.alpha[0]) +
                    (grid_x * (params.beta[1] - params.beta[0])).array()).matrix() +
                   state.u_tilde[1] + (params.gamma_u - 1.0) * state.u_tilde[0];
  out.delta_local = Vec::Constant(G, nan);
  double sum = 0.0;
  int active = 0;
  for (Eigen::Index g = 0; g < G; ++g) {
    if (!mask.empty() && !mask[g]) continue;
    out.delta_local[g] = diff[g];
    sum += diff[g];
    ++active;
  }
  out.delta_bar = active > 0 ? sum / active : nan;
  if (with_propensity) {
    const Vec d = log_intensity_means(1, params, state, grid_x) - log_intensity_means(0, params, state, grid_x);
    out.propensity = Vec::Constant(G, nan);
    for (Eigen::Index g = 0; g < G; ++g)
      if (mask.empty() || mask[g]) out.propensity[g] = expit(d[g]);
  }
  return out;
}

double LogJointTerms::total() const {
  double s = prior_gamma_u + prior_gamma_v + prior_rho_u + prior_rho_v + prior_kappa_u + prior_kappa_v;
  for (int a = 0; a < 2; ++a)
    s += outcome[a] + counts[a] + psi[a] + field_u[a] + field_v[a] + prior_alpha[a] + prior_beta[a] +
         prior_eta[a] + prior_delta[a] + prior_phi[a] + prior_tau2[a] + prior_tau2_psi[a] +
         prior_sigma2_u[a] + prior_sigma2_v[a];
  return s;
}

Vec outcome_weights(int a, const FitData& data, Outcomes layer) {
  if (layer == Outcomes::complete) return Vec::Ones(data.n);
  return (data.treatment.array() == a).cast<double>().matrix();
}

LogJointTerms log_joint_terms(const FitData& data, const ChainState& st, const PriorSpec& priors,
                              const ModelSpec& spec, Outcomes layer) {
  const ModelParams& m = st.params;
  const CovParams& c = st.cov;
  const LatentState& s = st.latent;
  const int G = data.cells;
  for (int a = 0; a < 2; ++a) {
    if (s.u_tilde[a].size() != G || m.beta[a].size() != data.p)
      throw InvalidArgument("log_joint: state dimensions do not match the dataset");
    if (spec.full() && (s.v_tilde[a].size() != G || s.log_lambda[a].size() != G || m.delta[a].size() != data.p))
      throw InvalidArgument("log_joint: state dimensions do not match the dataset");
  }
  if (s.y_miss.size() != data.n) throw InvalidArgument("log_joint: y_miss length must equal n");

  LogJointTerms t;
  const DistanceClasses classes(data.distances);
  const CorrelationCache corr_u(&classes, c.matern_u(), "log_joint");
  for (int a = 0; a < 2; ++a) {
    const Vec r = data.complete_outcome(a, s.y_miss) - data.xs * m.beta[a] -
                  data.gather(s.u(a, m.gamma_u)) - Vec::Constant(data.n, m.alpha[a]);
    const Vec w = outcome_weights(a, data, layer);
    t.outcome[a] = -0.5 * w.sum() * std::log(2 * M_PI * m.tau2[a]) - 0.5 * w.dot(r.cwiseAbs2()) / m.tau2[a];
    t.field_u[a] = field_log_density(s.u_tilde[a], c.sigma2_u[a], corr_u);
    t.prior_alpha[a] = normal_log_density(m.alpha[a], priors.c2_alpha);
    if (a == 0 || !spec.pooled) t.prior_beta[a] = gaussian_prior(m.beta[a], priors.c2_beta);
    t.prior_tau2[a] = priors.tau2.log_density(m.tau2[a]);
    t.prior_sigma2_u[a] = priors.sigma2_u.log_density(c.sigma2_u[a]);
  }
  t.prior_gamma_u = normal_log_density(m.gamma_u, priors.c2_gamma);
  t.prior_rho_u = priors.rho_u.log_density(c.rho_u);
  t.prior_kappa_u = priors.kappa_u.log_density(c.kappa_u);
  if (!spec.full()) return t;

  const CorrelationCache corr_v(&classes, c.matern_v(), "log_joint");
  for (int a = 0; a < 2; ++a) {
    const Vec& L = s.log_lambda[a];
    const Vec& N = data.counts[a];
    double cnt = 0.0;
    for (int g = 0; g < G; ++g)
      cnt += N[g] * (std::log(data.cell_area) + L[g]) - data.cell_area * std::exp(L[g]) - std::lgamma(N[g] + 1.0);
    t.counts[a] = cnt;
    const Vec psi = L - log_intensity_means(a, m, s, data.xg);
    t.psi[a] = -0.5 * G * std::log(2 * M_PI * c.tau2_psi[a]) - 0.5 * psi.squaredNorm() / c.tau2_psi[a];
    t.field_v[a] = field_log_density(s.v_tilde[a], c.sigma2_v[a], corr_v);
    t.prior_eta[a] = normal_log_density(m.eta[a], priors.c2_eta);
    if (a == 0 || !spec.pooled) t.prior_delta[a] = gaussian_prior(m.delta[a], priors.c2_delta);
    t.prior_phi[a] = normal_log_density(m.phi[a], priors.c2_phi);
    t.prior_tau2_psi[a] = priors.tau2_psi.log_density(c.tau2_psi[a]);
    t.prior_sigma2_v[a] = priors.sigma2_v.log_density(c.sigma2_v[a]);
  }
  t.prior_gamma_v = normal_log_density(m.gamma_v, priors.c2_gamma);
  t.prior_rho_v = priors.rho_v.log_density(c.rho_v);
  t.prior_kappa_v = priors.kappa_v.log_density(c.kappa_v);
  return t;
}

double log_joint(const FitData& data, const ChainState& state, const PriorSpec& priors, const ModelSpec& spec,
                 Outcomes layer) {
  return log_joint_terms(data, state, priors, spec, layer).total();
}

double sampling_bias(const ModelParams& m, const CovParams& c, const Mat& grid_x) {
  auto tilted_mean = [&](const Vec& delta) {
    const Vec lin = grid_x * delta;
    const Vec w = (lin.array() - lin.maxCoeff()).exp().matrix();
    return Vec(grid_x.transpose() * w / w.sum());
  };
  const Vec xbar0 = tilted_mean(m.delta[0]);
  const Vec xbar1 = tilted_mean(m.delta[1]);
  const double var_u1 = c.sigma2_u[1] + m.gamma_u * m.gamma_u * c.sigma2_u[0];
  return (m.alpha[1] - m.alpha[0]) + (xbar1.dot(m.beta[1]) - xbar0.dot(m.beta[0])) +
         (m.phi[1] * var_u1 - m.phi[0] * c.sigma2_u[0]);
}

MomentIdentities moment_identities(const ModelParams& m, const CovParams& c) {
  const double su0 = c.sigma2_u[0], su1 = c.sigma2_u[1];
  const double sv0 = c.sigma2_v[0], sv1 = c.sigma2_v[1];
  const double gu = m.gamma_u, gv = m.gamma_v, p0 = m.phi[0], p1 = m.phi[1];
  return {p0 * su0,
          gu * su0,
          sv0 + p0 * p0 * su0,
          gv * sv0 + gu * p0 * p1 * su0,
          sv1 + gv * gv * sv0 + p1 * p1 * (su1 + gu * gu * su0)};
}

}  // namespace pscausal

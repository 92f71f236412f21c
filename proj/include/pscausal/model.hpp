#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "pscausal/geometry.hpp"
#include "pscausal/priors.hpp"
#include "pscausal/randfield.hpp"

namespace pscausal {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class Variant { full, naive };

struct ModelSpec {
  Variant variant = Variant::full;
  bool pooled = false;  ///< beta_0 = beta_1 and delta_0 = delta_1
  bool full() const { return variant == Variant::full; }
};

/// Parameters of interest, indexed by treatment arm where they come in pairs.
struct ModelParams {
  std::array<double, 2> alpha{0.0, 0.0};
  std::array<Vec, 2> beta;
  std::array<double, 2> eta{0.0, 0.0};
  std::array<Vec, 2> delta;
  std::array<double, 2> phi{0.0, 0.0};
  std::array<double, 2> tau2{1.0, 1.0};
  double gamma_u = 0.0;
  double gamma_v = 0.0;

  static ModelParams zeros(int p);
  int p() const { return static_cast<int>(beta[0].size()); }
};

/// Covariance hyperparameters, with the psi nugget variances housed here.
struct CovParams {
  double rho_u = 0.1, rho_v = 0.1;
  double kappa_u = 0.5, kappa_v = 0.5;
  std::array<double, 2> sigma2_u{1.0, 1.0};
  std::array<double, 2> sigma2_v{1.0, 1.0};
  std::array<double, 2> tau2_psi{0.1, 0.1};

  MaternParams matern_u() const { return {rho_u, kappa_u}; }
  MaternParams matern_v() const { return {rho_v, kappa_v}; }
};

struct LatentState {
  std::array<Vec, 2> u_tilde;
  std::array<Vec, 2> v_tilde;
  std::array<Vec, 2> log_lambda;
  Vec y_miss;

  static LatentState zeros(int cells, int n);
  /// LMC-composed U_a.
  Vec u(int a, double gamma_u) const { return a == 0 ? u_tilde[0] : Vec(u_tilde[1] + gamma_u * u_tilde[0]); }
  Vec v(int a, double gamma_v) const { return a == 0 ? v_tilde[0] : Vec(v_tilde[1] + gamma_v * v_tilde[0]); }
};

struct ChainState {
  ModelParams params;
  CovParams cov;
  LatentState latent;
};

/// Observations on the full rectangular grid, with an optional active-cell mask.
struct Dataset {
  GridGeometry grid;
  CellMask mask;
  Mat grid_x;                ///< G x p
  Points sites;              ///< n x 2
  Eigen::VectorXi treatment; ///< n, entries in {0, 1}
  Vec y;                     ///< n
  Mat x;                     ///< n x p

  int n() const { return static_cast<int>(y.size()); }
  int p() const { return static_cast<int>(grid_x.cols()); }
  bool active(int g) const { return mask.empty() || mask[g]; }
  /// Cell of every observation.
  Eigen::VectorXi cells() const;
  /// G x 2 matrix of N_{a,g}.
  Eigen::MatrixXi counts() const;
  void validate() const;
};

/// Compact view over active cells, as consumed by the sampler.
struct FitData {
  int n = 0, p = 0, cells = 0;
  double cell_area = 1.0;
  Mat xs;                       ///< n x p site covariates
  Eigen::VectorXi cell;         ///< compact cell per observation
  Eigen::VectorXi treatment;
  Vec y;                        ///< observed outcome
  Mat xg;                       ///< active cells x p
  std::array<Vec, 2> counts;    ///< N_{a,g}
  Vec obs_per_cell;             ///< diagonal of H'H
  Mat distances;
  std::vector<int> active;      ///< compact index -> grid index
  Mat xs_gram, xg_gram;

  /// Arm-a outcome for every site: observed where A = a, imputed otherwise.
  Vec complete_outcome(int a, const Vec& y_miss) const;
  /// H u: the cell value at every site.
  Vec gather(const Vec& u) const;
  /// H' r: per-cell sums of a site vector.
  Vec scatter(const Vec& r) const;
};

FitData make_fit_data(const Dataset& data);

double outcome_mean(int a, const Eigen::Ref<const Vec>& x, double u_cell, const ModelParams& params);

/// eta_a + X_g delta_a + V_a + phi_a U_a, with LMC-composed fields; psi excluded.
double log_intensity_mean(int a, int g, const ModelParams& params, const LatentState& state,
                          const Mat& grid_x);
Vec log_intensity_means(int a, const ModelParams& params, const LatentState& state, const Mat& grid_x);

double propensity(int g, const ModelParams& params, const LatentState& state, const Mat& grid_x);

struct CausalSummary {
  double delta_bar = 0.0;
  Vec delta_local;  ///< NaN at masked cells
  Vec propensity;   ///< NaN at masked cells; empty when not requested
};

CausalSummary local_effects(const ModelParams& params, const LatentState& state, const Mat& grid_x,
                            const CellMask& mask = {}, bool with_propensity = true);

/// Which outcomes enter the outcome likelihood: every site under both arms, with the imputed
/// counterfactuals, or only the arm each site was observed under. The second is the first with
/// the counterfactuals integrated out.
enum class Outcomes { complete, observed };

/// Log joint density split by likelihood layer and prior block.
struct LogJointTerms {
  std::array<double, 2> outcome{}, counts{}, psi{}, field_u{}, field_v{};
  std::array<double, 2> prior_alpha{}, prior_beta{}, prior_eta{}, prior_delta{}, prior_phi{},
      prior_tau2{}, prior_tau2_psi{}, prior_sigma2_u{}, prior_sigma2_v{};
  double prior_gamma_u = 0, prior_gamma_v = 0, prior_rho_u = 0, prior_rho_v = 0, prior_kappa_u = 0,
         prior_kappa_v = 0;
  double total() const;
};

LogJointTerms log_joint_terms(const FitData& data, const ChainState& state, const PriorSpec& priors,
                              const ModelSpec& spec = {}, Outcomes layer = Outcomes::complete);
double log_joint(const FitData& data, const ChainState& state, const PriorSpec& priors,
                 const ModelSpec& spec = {}, Outcomes layer = Outcomes::complete);
/// Per-site weight of the arm-a outcome: all ones, or the indicator of A_i = a.
Vec outcome_weights(int a, const FitData& data, Outcomes layer);

/// E{Y_1 - Y_0} at preferentially sampled sites, first-order expansion with grid-sum covariate means.
double sampling_bias(const ModelParams& params, const CovParams& cov, const Mat& grid_x);

struct MomentIdentities {
  double cov_y0_l0, cov_y0_y1, var_l0, cov_l0_l1, var_l1;
};
MomentIdentities moment_identities(const ModelParams& params, const CovParams& cov);

/// Cross-arm correlation of the composed U (or V) fields.
inline double field_correlation(double sigma2_0, double sigma2_1, double gamma) {
  return lmc_cross_moments({sigma2_0, sigma2_1, gamma}).corr;
}

}  // namespace pscausal

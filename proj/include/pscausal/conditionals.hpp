#pragma once

#include "pscausal/model.hpp"
#include "pscausal/rng.hpp"

namespace pscausal {

/// Normal with precision c and canonical term b: N(b/c, 1/c).
struct ScalarNormal {
  double b = 0.0;
  double c = 1.0;
  double mean() const { return b / c; }
  double variance() const { return 1.0 / c; }
  double sample(Rng& rng, double variance_scale = 1.0) const {
    return rng.normal(mean(), std::sqrt(variance_scale * variance()));
  }
  double log_density(double x) const {
    const double z = x - mean();
    return 0.5 * std::log(c / (2 * M_PI)) - 0.5 * c * z * z;
  }
};

/// MVN(C^{-1} b, C^{-1}) for small dense blocks.
struct VectorNormal {
  Vec b;
  Mat c;
  VectorNormal(Vec b_, Mat c_, const char* block);
  const Vec& mean() const { return mean_; }
  Vec sample(Rng& rng) const;
  double log_density(const Vec& x) const;

 private:
  Eigen::LLT<Mat> llt_;
  Vec mean_;
};

struct InverseGamma {
  double shape = 1.0;
  double rate = 1.0;
  double sample(Rng& rng) const { return rng.inverse_gamma(shape, rate); }
  double log_density(double v) const { return InverseGammaPrior{shape, rate}.log_density(v); }
};

/// Field conditional with precision D + R^{-1}/sigma2, D diagonal, drawn with Matheron's rule.
/// Only the cached factor of R and one factorization of I + D^{1/2} Sigma D^{1/2} are needed.
class FieldNormal {
 public:
  FieldNormal(Vec d, Vec b, double sigma2, const CorrelationCache& corr, const char* block);
  const Vec& precision_diagonal() const { return d_; }
  const Vec& b() const { return b_; }
  const Vec& mean() const { return mean_; }
  Vec sample(Rng& rng) const;
  double log_density(const Vec& x) const;
  /// Dense precision, for checks only.
  Mat precision() const;

 private:
  Vec d_, b_, sqrt_d_;
  double sigma2_;
  const CorrelationCache* corr_;
  Eigen::LLT<Mat> s_llt_;
  Vec mean_;
  double log_det_precision_ = 0.0;
};

// Each builder returns the exact full conditional at the current state. The outcome-layer
// builders take the likelihood layer; with Outcomes::observed they are conditionals of the
// posterior with the counterfactuals integrated out.
ScalarNormal alpha_conditional(int a, const FitData& d, const ChainState& s, const PriorSpec& pr,
                               Outcomes layer = Outcomes::complete);
VectorNormal beta_conditional(int a, const FitData& d, const ChainState& s, const PriorSpec& pr,
                              const ModelSpec& spec, Outcomes layer = Outcomes::complete);
ScalarNormal eta_conditional(int a, const FitData& d, const ChainState& s, const PriorSpec& pr);
VectorNormal delta_conditional(int a, const FitData& d, const ChainState& s, const PriorSpec& pr,
                               const ModelSpec& spec);
ScalarNormal phi_conditional(int a, const FitData& d, const ChainState& s, const PriorSpec& pr);
ScalarNormal gamma_u_conditional(const FitData& d, const ChainState& s, const PriorSpec& pr,
                                 const ModelSpec& spec, Outcomes layer = Outcomes::complete);
ScalarNormal gamma_v_conditional(const FitData& d, const ChainState& s, const PriorSpec& pr);
FieldNormal field_u_conditional(int a, const FitData& d, const ChainState& s, const ModelSpec& spec,
                                const CorrelationCache& corr_u, Outcomes layer = Outcomes::complete);
FieldNormal field_v_conditional(int a, const FitData& d, const ChainState& s, const CorrelationCache& corr_v);
InverseGamma sigma2_u_conditional(int a, const ChainState& s, const PriorSpec& pr, const CorrelationCache& corr_u);
InverseGamma sigma2_v_conditional(int a, const ChainState& s, const PriorSpec& pr, const CorrelationCache& corr_v);
InverseGamma tau2_psi_conditional(int a, const FitData& d, const ChainState& s, const PriorSpec& pr);
InverseGamma tau2_conditional(int a, const FitData& d, const ChainState& s, const PriorSpec& pr,
                              Outcomes layer = Outcomes::complete);

/// Directions along which every likelihood term is constant, so only the Gaussian priors
/// of the shifted blocks vary and the step length c has a normal law (c = 0 is the current
/// state). They break the slow ridges between intercepts, field levels and phi.
///   u_level: alpha_a + c, U_a - c, eta_a + phi_a c (U_1 held fixed when a = 0)
///   v_level: eta_a + c, V_a - c (V_1 held fixed when a = 0)
///   phi_v:   phi_a + c, V_a - c U_a (V_1 held fixed when a = 0)
enum class Ridge { u_level, v_level, phi_v };

ScalarNormal ridge_conditional(Ridge r, int a, const ChainState& s, const PriorSpec& pr, const ModelSpec& spec,
                               const CorrelationCache& corr);
void apply_ridge(Ridge r, int a, double c, ChainState& s, const ModelSpec& spec);

/// Law of gamma with the composed fields U_0, U_1 (or V_0, V_1) held fixed.
ScalarNormal gamma_u_interweaved(const ChainState& s, const PriorSpec& pr, const CorrelationCache& corr_u);
ScalarNormal gamma_v_interweaved(const ChainState& s, const PriorSpec& pr, const CorrelationCache& corr_v);
/// Sets gamma and rewrites the second independent field so the composed fields are unchanged.
void set_gamma_u_holding_fields(double gamma, ChainState& s);
void set_gamma_v_holding_fields(double gamma, ChainState& s);

/// Draws Y_{1-a} for every site observed under arm a.
void impute_counterfactuals(const FitData& d, ChainState& s, Rng& rng);

}  // namespace pscausal

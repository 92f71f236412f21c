#pragma once

#include <cmath>
#include <algorithm>
#include <functional>
#include <memory>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "pscausal/conditionals.hpp"
#include "pscausal/simgen.hpp"

namespace pscausal::testing {

// Small scenario-3 style dataset, 5x5 grid, used wherever a realistic FitData is needed.
inline Simulation small_simulation(std::uint64_t seed, double lambda_star = 4.0) {
  ScenarioSpec spec = scenario(3);
  spec.nx = spec.ny = 5;
  spec.lambda_star = lambda_star;
  Rng rng(seed);
  return generate_dataset(spec, rng);
}

inline ChainState truth_state(const Simulation& sim, const FitData& d) {
  ChainState s;
  s.params = sim.truth.params;
  s.cov = sim.truth.cov;
  s.latent = sim.truth.fields;
  s.latent.y_miss = Vec::Zero(d.n);
  for (int i = 0; i < d.n; ++i) {
    const int a = 1 - d.treatment[i];
    s.latent.y_miss[i] = outcome_mean(a, d.xs.row(i).transpose(), s.latent.u(a, s.params.gamma_u)[d.cell[i]], s.params);
  }
  return s;
}

// Jitters every unknown so that the "rest" of the state is generic.
inline void perturb(ChainState& s, Rng& rng, double scale = 0.1) {
  auto vec = [&](Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += scale * rng.normal();
  };
  auto pos = [&](double& x) { x *= std::exp(scale * rng.normal()); };
  ModelParams& m = s.params;
  for (int a = 0; a < 2; ++a) {
    m.alpha[a] += scale * rng.normal();
    m.eta[a] += scale * rng.normal();
    m.phi[a] += scale * rng.normal();
    vec(m.beta[a]);
    vec(m.delta[a]);
    pos(m.tau2[a]);
    pos(s.cov.sigma2_u[a]);
    pos(s.cov.sigma2_v[a]);
    pos(s.cov.tau2_psi[a]);
    vec(s.latent.u_tilde[a]);
    vec(s.latent.v_tilde[a]);
    vec(s.latent.log_lambda[a]);
  }
  m.gamma_u += scale * rng.normal();
  m.gamma_v += scale * rng.normal();
  pos(s.cov.rho_u);
  pos(s.cov.rho_v);
  vec(s.latent.y_miss);
}

// One conditional family: given a state, draws a new block value into a copy and
// returns log q(new | rest) - log q(old | rest).
struct Family {
  std::string name;
  std::function<double(const FitData&, ChainState&, const PriorSpec&, Rng&)> move;
};

inline std::vector<Family> conditional_families() {
  const ModelSpec spec;
  auto caches = [](const FitData& d, const ChainState& s) {
    auto classes = std::make_shared<DistanceClasses>(d.distances);
    return std::make_tuple(classes, CorrelationCache(classes.get(), s.cov.matern_u(), "u"),
                           CorrelationCache(classes.get(), s.cov.matern_v(), "v"));
  };
  std::vector<Family> f;
  f.push_back({"alpha", [](const FitData& d, ChainState& s, const PriorSpec& pr, Rng& rng) {
    double r = 0;
    for (int a = 0; a < 2; ++a) {
      const ScalarNormal q = alpha_conditional(a, d, s, pr);
      const double x = q.sample(rng);
      r += q.log_density(x) - q.log_density(s.params.alpha[a]);
      s.params.alpha[a] = x;
    }
    return r;
  }});
  f.push_back({"beta", [spec](const FitData& d, ChainState& s, const PriorSpec& pr, Rng& rng) {
    double r = 0;
    for (int a = 0; a < 2; ++a) {
      const VectorNormal q = beta_conditional(a, d, s, pr, spec);
      const Vec x = q.sample(rng);
      r += q.log_density(x) - q.log_density(s.params.beta[a]);
      s.params.beta[a] = x;
    }
    return r;
  }});
  f.push_back({"eta", [](const FitData& d, ChainState& s, const PriorSpec& pr, Rng& rng) {
    double r = 0;
    for (int a = 0; a < 2; ++a) {
      const ScalarNormal q = eta_conditional(a, d, s, pr);
      const double x = q.sample(rng);
      r += q.log_density(x) - q.log_density(s.params.eta[a]);
      s.params.eta[a] = x;
    }
    return r;
  }});
  f.push_back({"delta", [spec](const FitData& d, ChainState& s, const PriorSpec& pr, Rng& rng) {
    double r = 0;
    for (int a = 0; a < 2; ++a) {
      const VectorNormal q = delta_conditional(a, d, s, pr, spec);
      const Vec x = q.sample(rng);
      r += q.log_density(x) - q.log_density(s.params.delta[a]);
      s.params.delta[a] = x;
    }
    return r;
  }});
  f.push_back({"phi", [](const FitData& d, ChainState& s, const PriorSpec& pr, Rng& rng) {
    double r = 0;
    for (int a = 0; a < 2; ++a) {
      const ScalarNormal q = phi_conditional(a, d, s, pr);
      const double x = q.sample(rng);
      r += q.log_density(x) - q.log_density(s.params.phi[a]);
      s.params.phi[a] = x;
    }
    return r;
  }});
  f.push_back({"gamma_u", [spec](const FitData& d, ChainState& s, const PriorSpec& pr, Rng& rng) {
    const ScalarNormal q = gamma_u_conditional(d, s, pr, spec);
    const double x = q.sample(rng);
    const double r = q.log_density(x) - q.log_density(s.params.gamma_u);
    s.params.gamma_u = x;
    return r;
  }});
  f.push_back({"gamma_v", [](const FitData& d, ChainState& s, const PriorSpec& pr, Rng& rng) {
    const ScalarNormal q = gamma_v_conditional(d, s, pr);
    const double x = q.sample(rng);
    const double r = q.log_density(x) - q.log_density(s.params.gamma_v);
    s.params.gamma_v = x;
    return r;
  }});
  for (int a = 0; a < 2; ++a) {
    f.push_back({"u" + std::to_string(a), [a, spec, caches](const FitData& d, ChainState& s, const PriorSpec&, Rng& rng) {
      const auto [classes, cu, cv] = caches(d, s);
      const FieldNormal q = field_u_conditional(a, d, s, spec, cu);
      const Vec x = q.sample(rng);
      const double r = q.log_density(x) - q.log_density(s.latent.u_tilde[a]);
      s.latent.u_tilde[a] = x;
      return r;
    }});
    f.push_back({"v" + std::to_string(a), [a, caches](const FitData& d, ChainState& s, const PriorSpec&, Rng& rng) {
      const auto [classes, cu, cv] = caches(d, s);
      const FieldNormal q = field_v_conditional(a, d, s, cv);
      const Vec x = q.sample(rng);
      const double r = q.log_density(x) - q.log_density(s.latent.v_tilde[a]);
      s.latent.v_tilde[a] = x;
      return r;
    }});
  }
  f.push_back({"sigma2_uv", [caches](const FitData& d, ChainState& s, const PriorSpec& pr, Rng& rng) {
    const auto [classes, cu, cv] = caches(d, s);
    double r = 0;
    for (int a = 0; a < 2; ++a) {
      const InverseGamma qu = sigma2_u_conditional(a, s, pr, cu);
      const InverseGamma qv = sigma2_v_conditional(a, s, pr, cv);
      const double xu = qu.sample(rng), xv = qv.sample(rng);
      r += qu.log_density(xu) - qu.log_density(s.cov.sigma2_u[a]);
      r += qv.log_density(xv) - qv.log_density(s.cov.sigma2_v[a]);
      s.cov.sigma2_u[a] = xu;
      s.cov.sigma2_v[a] = xv;
    }
    return r;
  }});
  f.push_back({"tau2_psi", [](const FitData& d, ChainState& s, const PriorSpec& pr, Rng& rng) {
    double r = 0;
    for (int a = 0; a < 2; ++a) {
      const InverseGamma q = tau2_psi_conditional(a, d, s, pr);
      const double x = q.sample(rng);
      r += q.log_density(x) - q.log_density(s.cov.tau2_psi[a]);
      s.cov.tau2_psi[a] = x;
    }
    return r;
  }});
  f.push_back({"tau2", [](const FitData& d, ChainState& s, const PriorSpec& pr, Rng& rng) {
    double r = 0;
    for (int a = 0; a < 2; ++a) {
      const InverseGamma q = tau2_conditional(a, d, s, pr);
      const double x = q.sample(rng);
      r += q.log_density(x) - q.log_density(s.params.tau2[a]);
      s.params.tau2[a] = x;
    }
    return r;
  }});
  return f;
}

// Outcome-layer conditionals with the counterfactuals integrated out; compare against
// log_joint with Outcomes::observed.
inline std::vector<Family> observed_layer_families() {
  const ModelSpec spec;
  const Outcomes obs = Outcomes::observed;
  std::vector<Family> f;
  f.push_back({"alpha_observed", [obs](const FitData& d, ChainState& s, const PriorSpec& pr, Rng& rng) {
    double r = 0;
    for (int a = 0; a < 2; ++a) {
      const ScalarNormal q = alpha_conditional(a, d, s, pr, obs);
      const double x = q.sample(rng);
      r += q.log_density(x) - q.log_density(s.params.alpha[a]);
      s.params.alpha[a] = x;
    }
    return r;
  }});
  f.push_back({"beta_observed", [spec, obs](const FitData& d, ChainState& s, const PriorSpec& pr, Rng& rng) {
    double r = 0;
    for (int a = 0; a < 2; ++a) {
      const VectorNormal q = beta_conditional(a, d, s, pr, spec, obs);
      const Vec x = q.sample(rng);
      r += q.log_density(x) - q.log_density(s.params.beta[a]);
      s.params.beta[a] = x;
    }
    return r;
  }});
  f.push_back({"gamma_u_observed", [spec, obs](const FitData& d, ChainState& s, const PriorSpec& pr, Rng& rng) {
    const ScalarNormal q = gamma_u_conditional(d, s, pr, spec, obs);
    const double x = q.sample(rng);
    const double r = q.log_density(x) - q.log_density(s.params.gamma_u);
    s.params.gamma_u = x;
    return r;
  }});
  for (int a = 0; a < 2; ++a)
    f.push_back({"u" + std::to_string(a) + "_observed",
                 [a, spec, obs](const FitData& d, ChainState& s, const PriorSpec&, Rng& rng) {
                   const DistanceClasses classes(d.distances);
                   const CorrelationCache cu(&classes, s.cov.matern_u(), "u");
                   const FieldNormal q = field_u_conditional(a, d, s, spec, cu, obs);
                   const Vec x = q.sample(rng);
                   const double r = q.log_density(x) - q.log_density(s.latent.u_tilde[a]);
                   s.latent.u_tilde[a] = x;
                   return r;
                 }});
  f.push_back({"tau2_observed", [obs](const FitData& d, ChainState& s, const PriorSpec& pr, Rng& rng) {
    double r = 0;
    for (int a = 0; a < 2; ++a) {
      const InverseGamma q = tau2_conditional(a, d, s, pr, obs);
      const double x = q.sample(rng);
      r += q.log_density(x) - q.log_density(s.params.tau2[a]);
      s.params.tau2[a] = x;
    }
    return r;
  }});
  return f;
}

// Ridge moves: the law is over the step c (current state at c = 0) or the new gamma.
inline std::vector<Family> ridge_families() {
  const ModelSpec spec;
  auto cache = [](const FitData& d, const MaternParams& p) {
    auto classes = std::make_shared<DistanceClasses>(d.distances);
    return std::make_pair(classes, CorrelationCache(classes.get(), p, "ridge"));
  };
  std::vector<Family> f;
  const std::pair<Ridge, const char*> ridges[] = {
      {Ridge::u_level, "ridge_u_level"}, {Ridge::v_level, "ridge_v_level"}, {Ridge::phi_v, "ridge_phi_v"}};
  for (const auto& [r, name] : ridges)
    for (int a = 0; a < 2; ++a)
      f.push_back({std::string(name) + std::to_string(a),
                   [r, a, spec, cache](const FitData& d, ChainState& s, const PriorSpec& pr, Rng& rng) {
                     const auto [classes, corr] = cache(d, r == Ridge::u_level ? s.cov.matern_u() : s.cov.matern_v());
                     const ScalarNormal q = ridge_conditional(r, a, s, pr, spec, corr);
                     const double c = q.sample(rng);
                     apply_ridge(r, a, c, s, spec);
                     return q.log_density(c) - q.log_density(0.0);
                   }});
  f.push_back({"interweave_gamma_u", [cache](const FitData& d, ChainState& s, const PriorSpec& pr, Rng& rng) {
    const auto [classes, corr] = cache(d, s.cov.matern_u());
    const ScalarNormal q = gamma_u_interweaved(s, pr, corr);
    const double g = q.sample(rng), r = q.log_density(g) - q.log_density(s.params.gamma_u);
    set_gamma_u_holding_fields(g, s);
    return r;
  }});
  f.push_back({"interweave_gamma_v", [cache](const FitData& d, ChainState& s, const PriorSpec& pr, Rng& rng) {
    const auto [classes, corr] = cache(d, s.cov.matern_v());
    const ScalarNormal q = gamma_v_interweaved(s, pr, corr);
    const double g = q.sample(rng), r = q.log_density(g) - q.log_density(s.params.gamma_v);
    set_gamma_v_holding_fields(g, s);
    return r;
  }});
  return f;
}

struct FamilyDiscrepancy {
  std::string name;
  double max_error = 0.0;  ///< |conditional ratio - joint ratio| / max(1, |joint ratio|)
};

// The Ũ and Ṽ families are tested per arm; sigma2 covers both field variances.
inline std::vector<FamilyDiscrepancy> conditional_joint_discrepancies(int pairs, std::uint64_t seed,
                                                                     const std::vector<Family>& families =
                                                                         conditional_families(),
                                                                     Outcomes layer = Outcomes::complete) {
  const Simulation sim = small_simulation(seed);
  const FitData d = make_fit_data(sim.data);
  const PriorSpec pr;
  const ChainState base = truth_state(sim, d);
  Rng rng(seed + 1);
  std::vector<FamilyDiscrepancy> out;
  for (const Family& fam : families) {
    FamilyDiscrepancy fd{fam.name, 0.0};
    for (int k = 0; k < pairs; ++k) {
      ChainState s = base;
      perturb(s, rng);
      const double before = log_joint(d, s, pr, {}, layer);
      const double cond = fam.move(d, s, pr, rng);
      const double joint = log_joint(d, s, pr, {}, layer) - before;
      fd.max_error = std::max(fd.max_error, std::abs(cond - joint) / std::max(1.0, std::abs(joint)));
    }
    out.push_back(fd);
  }
  return out;
}

}  // namespace pscausal::testing

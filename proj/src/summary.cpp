#include "pscausal/summary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pscausal/errors.hpp"

namespace pscausal {

namespace {

void push_vector(std::vector<std::string>& out, const std::string& stem, int p) {
  for (int j = 1; j <= p; ++j) out.push_back(stem + "_" + std::to_string(j));
}

}  // namespace

std::vector<std::string> parameter_names(int p, const ModelSpec& spec) {
  std::vector<std::string> n{"alpha0", "alpha1"};
  if (spec.pooled) {
    push_vector(n, "beta", p);
  } else {
    push_vector(n, "beta0", p);
    push_vector(n, "beta1", p);
  }
  if (spec.full()) {
    n.insert(n.end(), {"eta0", "eta1"});
    if (spec.pooled) {
      push_vector(n, "delta", p);
    } else {
      push_vector(n, "delta0", p);
      push_vector(n, "delta1", p);
    }
    n.insert(n.end(), {"phi0", "phi1"});
  }
  n.insert(n.end(), {"tau2_0", "tau2_1", "gamma_u"});
  if (spec.full()) n.push_back("gamma_v");
  n.insert(n.end(), {"rho_u", "kappa_u", "sigma2_u0", "sigma2_u1"});
  if (spec.full()) n.insert(n.end(), {"rho_v", "kappa_v", "sigma2_v0", "sigma2_v1", "tau2_psi0", "tau2_psi1"});
  return n;
}

std::vector<double> parameter_values(const DrawRecord& d, const ModelSpec& spec) {
  const ModelParams& m = d.params;
  const CovParams& c = d.cov;
  std::vector<double> v{m.alpha[0], m.alpha[1]};
  auto push = [&](const Vec& x) { v.insert(v.end(), x.data(), x.data() + x.size()); };
  push(m.beta[0]);
  if (!spec.pooled) push(m.beta[1]);
  if (spec.full()) {
    v.insert(v.end(), {m.eta[0], m.eta[1]});
    push(m.delta[0]);
    if (!spec.pooled) push(m.delta[1]);
    v.insert(v.end(), {m.phi[0], m.phi[1]});
  }
  v.insert(v.end(), {m.tau2[0], m.tau2[1], m.gamma_u});
  if (spec.full()) v.push_back(m.gamma_v);
  v.insert(v.end(), {c.rho_u, c.kappa_u, c.sigma2_u[0], c.sigma2_u[1]});
  if (spec.full()) v.insert(v.end(), {c.rho_v, c.kappa_v, c.sigma2_v[0], c.sigma2_v[1], c.tau2_psi[0], c.tau2_psi[1]});
  return v;
}

double quantile_sorted(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) throw InvalidArgument("quantile of empty sample");
  const double pos = prob * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

ScalarSummary summarize_values(std::string name, std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("cannot summarize an empty chain");
  ScalarSummary s;
  s.name = std::move(name);
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::sort(values.begin(), values.end());
  s.lower = quantile_sorted(values, 0.025);
  s.upper = quantile_sorted(values, 0.975);
  return s;
}

double effective_sample_size(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 4) return static_cast<double>(n);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - mean) * (x[i + lag] - mean);
    return s / n;
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0)) return static_cast<double>(n);
  double sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
    if (pair <= 0.0) break;
    pair = std::min(pair, prev);
    sum += pair;
    prev = pair;
  }
  const double tau = std::max(-1.0 + 2.0 * sum, 1.0 / std::log10(static_cast<double>(n)));
  return n / tau;
}

PosteriorSummary summarize(const ChainOutput& chain) {
  if (chain.draws.empty()) throw InvalidArgument("cannot summarize an empty chain");
  const ModelSpec& spec = chain.spec;
  const std::size_t m = chain.draws.size();
  const auto names = parameter_names(chain.p, spec);
  std::vector<std::vector<double>> cols(names.size(), std::vector<double>(m));
  std::vector<double> delta(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto vals = parameter_values(chain.draws[i], spec);
    for (std::size_t j = 0; j < vals.size(); ++j) cols[j][i] = vals[j];
    delta[i] = chain.draws[i].delta_bar;
  }
  PosteriorSummary out;
  for (std::size_t j = 0; j < names.size(); ++j) out.parameters.push_back(summarize_values(names[j], cols[j]));
  out.delta = summarize_values("delta", delta);
  out.ess_delta = effective_sample_size(delta);

  std::vector<double> ru(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& d = chain.draws[i];
    ru[i] = field_correlation(d.cov.sigma2_u[0], d.cov.sigma2_u[1], d.params.gamma_u);
  }
  out.r_u = summarize_values("r_u", ru);

  if (spec.full()) {
    std::vector<double> diff(m), rv(m);
    long negative = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const auto& d = chain.draws[i];
      diff[i] = d.params.phi[1] - d.params.phi[0];
      negative += diff[i] < 0.0;
      rv[i] = field_correlation(d.cov.sigma2_v[0], d.cov.sigma2_v[1], d.params.gamma_v);
    }
    out.phi_diff = summarize_values("phi1_minus_phi0", diff);
    out.r_v = summarize_values("r_v", rv);
    out.prob_phi_diff_negative = static_cast<double>(negative) / m;
  }

  auto per_cell = [&](const Mat& draws, const char* stem, std::vector<ScalarSummary>& dst) {
    if (draws.rows() != static_cast<Eigen::Index>(m)) return;
    for (Eigen::Index g = 0; g < draws.cols(); ++g) {
      std::vector<double> v(draws.col(g).data(), draws.col(g).data() + m);
      dst.push_back(summarize_values(std::string(stem) + "_" + std::to_string(chain.active[g]), std::move(v)));
    }
  };
  per_cell(chain.delta_local, "delta", out.delta_local);
  per_cell(chain.propensity, "propensity", out.propensity);
  return out;
}

}  // namespace pscausal

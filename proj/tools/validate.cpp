#include "validate.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <utility>
#include <vector>

#include "pscausal/bessel.hpp"
#include "pscausal/geweke.hpp"
#include "pscausal/hmc.hpp"
#include "pscausal/model.hpp"
#include "pscausal/randfield.hpp"
#include "pscausal/reference_tables.hpp"
#include "pscausal/simgen.hpp"

namespace pscausal::cli {

namespace {

struct SuiteResult {
  bool passed = false;
  std::string detail;
};

SuiteResult bessel_suite() {
  std::istringstream in(bessel_k_reference_csv());
  std::string line;
  std::getline(in, line);
  double worst = 0.0;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double nu, x, k;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &nu, &x, &k) != 3) return {false, "bad reference row: " + line};
    worst = std::max(worst, std::abs(bessel_k(nu, x) / k - 1.0));
    ++rows;
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "%d points, max rel err %.2e", rows, worst);
  return {rows > 0 && worst <= 1e-10, buf};
}

SuiteResult matern_suite() {
  double worst = 0.0;
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 25; ++j) {
      const double rho = 0.02 + 0.05 * i, h = 0.04 * j;
      const double exact = std::exp(-h / rho);
      worst = std::max(worst, std::abs(matern_correlation_bessel(h, rho, 0.5) - exact));
      worst = std::max(worst, std::abs(matern_correlation(h, MaternParams{rho, 0.5}) - exact));
    }
  char buf[96];
  std::snprintf(buf, sizeof buf, "1000 lattice points, max abs err %.2e", worst);
  return {worst <= 1e-12, buf};
}

SuiteResult gradient_suite(double bias, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, "validate/gradient");
  const int G = 25;
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd counts(G), mean(G), L(G);
    for (int g = 0; g < G; ++g) {
      counts[g] = static_cast<double>(rng.poisson(3.0));
      mean[g] = rng.normal(0.5, 1.0);
      L[g] = rng.normal(0.5, 1.0);
    }
    const LogIntensityTarget target{counts, mean, 0.3 + rng.uniform(), 0.04 * (1 + rep % 3), bias};
    const Eigen::VectorXd grad = target.gradient(L);
    for (int g = 0; g < G; ++g) {
      const double h = 1e-5 * std::max(1.0, std::abs(L[g]));
      Eigen::VectorXd lp = L, lm = L;
      lp[g] += h;
      lm[g] -= h;
      const double fd = (target.potential(lp) - target.potential(lm)) / (2 * h);
      worst = std::max(worst, std::abs(grad[g] - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "max rel err %.2e vs central differences", worst);
  return {worst <= 1e-6, buf};
}

SuiteResult moment_suite(std::uint64_t seed) {
  // Single-cell draws from the scenario-3 truth, compared with the closed-form moments.
  const ScenarioSpec spec = scenario(3);
  const ModelParams& m = spec.truth;
  const CovParams& c = spec.cov;
  const MomentIdentities mi = moment_identities(m, c);
  Rng rng = Rng::derive(seed, "validate/moments");
  const long draws = 20000;
  std::vector<std::array<double, 4>> s(draws);
  for (long i = 0; i < draws; ++i) {
    const double u0 = rng.normal(0, std::sqrt(c.sigma2_u[0])), u1t = rng.normal(0, std::sqrt(c.sigma2_u[1]));
    const double v0 = rng.normal(0, std::sqrt(c.sigma2_v[0])), v1t = rng.normal(0, std::sqrt(c.sigma2_v[1]));
    const double u1 = u1t + m.gamma_u * u0, v1 = v1t + m.gamma_v * v0;
    const double y0 = u0 + rng.normal(0, std::sqrt(m.tau2[0]));
    const double y1 = u1 + rng.normal(0, std::sqrt(m.tau2[1]));
    const double l0 = v0 + m.phi[0] * u0;  // mean part only; psi is excluded
    const double l1 = v1 + m.phi[1] * u1;
    s[i] = {y0, y1, l0, l1};
  }
  auto cov = [&](int a, int b, double& se) {
    double ma = 0, mb = 0;
    for (const auto& r : s) ma += r[a], mb += r[b];
    ma /= draws;
    mb /= draws;
    std::vector<double> prod(draws);
    double mean = 0;
    for (long i = 0; i < draws; ++i) mean += (prod[i] = (s[i][a] - ma) * (s[i][b] - mb));
    mean /= draws;
    double var = 0;
    for (double p : prod) var += (p - mean) * (p - mean);
    se = std::sqrt(var / (draws - 1) / draws);
    return mean;
  };
  const std::array<std::tuple<int, int, double>, 5> pairs{
      {{0, 2, mi.cov_y0_l0}, {0, 1, mi.cov_y0_y1}, {2, 2, mi.var_l0}, {2, 3, mi.cov_l0_l1}, {3, 3, mi.var_l1}}};
  double worst = 0.0;
  for (const auto& [a, b, expected] : pairs) {
    double se = 0.0;
    const double got = cov(a, b, se);
    worst = std::max(worst, std::abs(got - expected) / se);
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "max deviation %.2f Monte Carlo SEs", worst);
  return {worst < 4.0, buf};
}

SuiteResult geweke_suite(long rounds, double alpha_scale, std::uint64_t seed) {
  GewekeConfig cfg = geweke_toy_config();
  cfg.rounds = rounds;
  cfg.seed = seed;
  cfg.mcmc.faults.alpha_variance_scale = alpha_scale;
  // A corrupted alpha kernel is run without ridge moves, which partly repair its draws.
  std::vector<std::pair<bool, bool>> variants{{false, true}};  // ridge moves, collapsed outcomes
  if (alpha_scale == 1.0) variants = {{true, true}, {false, true}, {false, false}};
  bool passed = true;
  std::string worst;
  double z = 0.0;
  for (const auto& [ridge, collapsed] : variants) {
    cfg.mcmc.ridge_moves = ridge;
    cfg.mcmc.collapse_counterfactuals = collapsed;
    const GewekeReport rep = geweke_validate(cfg);
    passed = passed && rep.passed();
    for (const auto& s : rep.statistics)
      if (std::abs(s.z) >= z)
        z = std::abs(s.z), worst = s.name + (ridge ? ", ridge moves" : "") + (collapsed ? "" : ", complete outcomes");
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "%ld rounds, max |z| %.2f (%s)", rounds, z, worst.c_str());
  return {passed, buf};
}

}  // namespace

bool run_validation(const ValidateOptions& opts) {
  const double gradient_bias = opts.inject == "gradient" ? 1e-3 : 0.0;
  const double alpha_scale = opts.inject == "alpha" ? 2.0 : 1.0;
  std::vector<std::pair<std::string, std::function<SuiteResult()>>> suites{
      {"bessel", bessel_suite},
      {"matern", matern_suite},
      {"gradient", [&] { return gradient_suite(gradient_bias, opts.seed); }},
      {"moments", [&] { return moment_suite(opts.seed); }},
  };
  if (!opts.skip_geweke)
    suites.emplace_back("geweke", [&] { return geweke_suite(opts.geweke_rounds, alpha_scale, opts.seed); });

  bool all = true;
  for (const auto& [name, run] : suites) {
    const auto t0 = std::chrono::steady_clock::now();
    const SuiteResult r = run();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%-9s %s  %s  [%.1fs]\n", name.c_str(), r.passed ? "PASS" : "FAIL", r.detail.c_str(), secs);
    std::fflush(stdout);
    all = all && r.passed;
  }
  return all;
}

}  // namespace pscausal::cli

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pscausal/hmc.hpp"
#include "pscausal/io.hpp"
#include "pscausal/sampler.hpp"
#include "pscausal/summary.hpp"
#include "support.hpp"

using namespace pscausal;

TEST_CASE("equal-tailed interval and moments") {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  const ScalarSummary s = summarize_values("x", v);
  CHECK(s.mean == doctest::Approx(50.5));
  CHECK(s.lower == doctest::Approx(3.475));
  CHECK(s.upper == doctest::Approx(97.525));
  const ScalarSummary c = summarize_values("c", std::vector<double>(40, 2.5));
  CHECK(c.sd == 0.0);
  CHECK(c.lower == 2.5);
  CHECK(c.upper == 2.5);
  CHECK_THROWS_AS(summarize_values("e", {}), InvalidArgument);
}

TEST_CASE("effective sample size") {
  Rng rng(4);
  std::vector<double> iid(5000), ar(5000);
  double x = 0;
  for (int i = 0; i < 5000; ++i) {
    iid[i] = rng.normal();
    x = 0.9 * x + rng.normal();
    ar[i] = x;
  }
  CHECK(effective_sample_size(iid) == doctest::Approx(5000).epsilon(0.15));
  // AR(1) with coefficient 0.9 has integrated time (1 + 0.9) / (1 - 0.9) = 19.
  CHECK(effective_sample_size(ar) == doctest::Approx(5000.0 / 19).epsilon(0.35));
}

namespace {

struct Toy {
  Eigen::VectorXd counts, mean;
  LogIntensityTarget target() const { return {counts, mean, 0.3, 0.04}; }
};

Toy random_toy(Rng& rng, int G) {
  Toy t{Eigen::VectorXd(G), Eigen::VectorXd(G)};
  for (int g = 0; g < G; ++g) {
    t.counts[g] = static_cast<double>(rng.poisson(4.0));
    t.mean[g] = std::log(100.0) + rng.normal();
  }
  return t;
}

}  // namespace

TEST_CASE("potential gradient against central differences") {
  Rng rng(8);
  double worst = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const Toy toy = random_toy(rng, 25);
    const LogIntensityTarget t = toy.target();
    Eigen::VectorXd L = toy.mean + 0.5 * standard_normal_vector(25, rng);
    const Eigen::VectorXd grad = t.gradient(L);
    for (int g = 0; g < 25; ++g) {
      const double h = 1e-5 * std::max(1.0, std::abs(L[g]));
      Eigen::VectorXd lp = L, lm = L;
      lp[g] += h;
      lm[g] -= h;
      const double fd = (t.potential(lp) - t.potential(lm)) / (2 * h);
      worst = std::max(worst, std::abs(fd - grad[g]) / std::max(1.0, std::abs(grad[g])));
    }
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("gradient vanishes at the stationary point") {
  Eigen::VectorXd m(3), n(3);
  m << 0.1, 1.0, 2.0;
  n = 0.5 * m.array().exp();
  const LogIntensityTarget t{n, m, 0.2, 0.5};
  CHECK(t.gradient(m).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("leapfrog is time reversible") {
  Rng rng(9);
  const Toy toy = random_toy(rng, 25);
  const LogIntensityTarget t = toy.target();
  const Eigen::VectorXd q0 = toy.mean;
  const Eigen::VectorXd p0 = standard_normal_vector(25, rng);
  Eigen::VectorXd q = q0, p = p0;
  leapfrog(t, q, p, 0.01, 10, 0.3);
  p = -p;
  leapfrog(t, q, p, 0.01, 10, 0.3);
  CHECK((q - q0).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((p + p0).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("tiny steps are accepted") {
  Rng rng(10);
  const Toy toy = random_toy(rng, 9);
  Eigen::VectorXd L = toy.mean;
  const HmcStep s = hmc_update_log_intensity(L, toy.target(), {1e-7, 1, 1.0}, rng);
  CHECK(s.accept_prob > 1 - 1e-6);
  CHECK_FALSE(s.non_finite);
}

TEST_CASE("hmc rejects non-finite trajectories and leaves the state alone") {
  Eigen::VectorXd n = Eigen::VectorXd::Zero(2), m = Eigen::VectorXd::Constant(2, 700.0);
  const LogIntensityTarget t{n, m, 1.0, 1.0};
  Eigen::VectorXd L = m;
  Rng rng(1);
  const HmcStep s = hmc_update_log_intensity(L, t, {0.5, 5, 1.0}, rng);
  CHECK(s.non_finite);
  CHECK_FALSE(s.accepted);
  CHECK(L == m);
}

TEST_CASE("dual averaging settles on the target acceptance") {
  DualAveraging da(1.0, 0.75);
  for (int i = 0; i < 5000; ++i) da.update(std::exp(-da.step_size()));
  da.finish();
  CHECK(da.step_size() == doctest::Approx(-std::log(0.75)).epsilon(0.05));
}

namespace {

struct RangeToy {
  DistanceClasses classes{Mat(Eigen::Matrix2d{{0.0, 0.1}, {0.1, 0.0}})};
  ChainState s;
  PriorSpec pr;

  RangeToy() {
    s.latent = LatentState::zeros(2, 0);
    s.latent.u_tilde[0] << 0.5, 0.3;
    s.latent.u_tilde[1] << -0.2, 0.1;
    s.cov.rho_u = 0.2;
  }
  double log_lik(double rho) const {
    const CorrelationCache c(&classes, {rho, 0.5}, "toy");
    double out = 0;
    for (int a = 0; a < 2; ++a) out -= 0.5 * (c.log_det() + c.quad_form(s.latent.u_tilde[a]));
    return out;
  }
};

double ks_distance(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

}  // namespace

TEST_CASE("range update respects the prior support") {
  RangeToy toy;
  toy.s.cov.rho_u = 0.49;
  CorrelationCache cache(&toy.classes, toy.s.cov.matern_u(), "toy");
  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    mh_update_range_smoothness(Hyper::rho_u, toy.s, cache, toy.classes, toy.pr, 1.0, rng);
    REQUIRE(toy.s.cov.rho_u < 0.5);
    CHECK(cache.params().rho == toy.s.cov.rho_u);
  }
}

TEST_CASE("vanishing proposal scale is always accepted") {
  RangeToy toy;
  CorrelationCache cache(&toy.classes, toy.s.cov.matern_u(), "toy");
  Rng rng(4);
  int acc = 0;
  for (int i = 0; i < 500; ++i) acc += mh_update_range_smoothness(Hyper::rho_u, toy.s, cache, toy.classes, toy.pr, 1e-9, rng);
  CHECK(acc >= 499);
  CHECK_FALSE(mh_update_range_smoothness(Hyper::kappa_u, toy.s, cache, toy.classes, toy.pr, 0.3, rng));
}

TEST_CASE("range random walk targets the same law as an independence sampler") {
  RangeToy toy;
  CorrelationCache cache(&toy.classes, toy.s.cov.matern_u(), "toy");
  Rng rng(12);
  const int n = 400000;
  std::vector<double> walk(n), indep(n);
  for (int i = 0; i < n; ++i) {
    mh_update_range_smoothness(Hyper::rho_u, toy.s, cache, toy.classes, toy.pr, 1.0, rng);
    walk[i] = toy.s.cov.rho_u;
  }
  // Independence sampler proposing from the uniform prior.
  double cur = 0.25, cur_ll = toy.log_lik(cur);
  for (int i = 0; i < n; ++i) {
    const double prop = rng.uniform(0.0, 0.5);
    const double ll = prop > 0 ? toy.log_lik(prop) : -INFINITY;
    if (std::log(rng.uniform()) < ll - cur_ll) {
      cur = prop;
      cur_ll = ll;
    }
    indep[i] = cur;
  }
  CHECK(ks_distance(walk, indep) < 0.02);
}

TEST_CASE("chain control") {
  const Simulation sim = testing::small_simulation(3);
  const FitData d = make_fit_data(sim.data);
  McmcConfig cfg;
  cfg.n_iter = 0;
  cfg.burn_in = 0;
  const ChainOutput empty = run_chain(d, {}, cfg, {});
  CHECK(empty.draws.empty());

  cfg.n_iter = 60;
  cfg.burn_in = 20;
  cfg.thin = 3;
  cfg.seed = 77;
  for (Variant v : {Variant::full, Variant::naive}) {
    const ChainOutput a = run_chain(d, {}, cfg, {v});
    const ChainOutput b = run_chain(d, {}, cfg, {v});
    CHECK(a.draws.size() == 13);
    CHECK(a.delta_local.rows() == 13);
    std::ostringstream sa, sb;
    write_chain_csv(sa, a);
    write_chain_csv(sb, b);
    CHECK(sa.str() == sb.str());
    for (double r : {a.acceptance.hmc[0], a.acceptance.hmc[1], a.acceptance.rho_u, a.acceptance.rho_v})
      CHECK((r >= 0.0 && r <= 1.0));
    if (v == Variant::naive)
      for (const auto& dr : a.draws) CHECK(dr.params.phi == std::array<double, 2>{0.0, 0.0});
  }
  cfg.burn_in = 60;
  CHECK_THROWS_AS(run_chain(d, {}, cfg, {}), InvalidArgument);
}

TEST_CASE("summary exposes the variant's parameter blocks") {
  const auto naive = parameter_names(2, {Variant::naive});
  CHECK(std::find(naive.begin(), naive.end(), "phi0") == naive.end());
  CHECK(std::find(naive.begin(), naive.end(), "eta0") == naive.end());
  const auto pooled = parameter_names(2, {Variant::full, true});
  CHECK(std::find(pooled.begin(), pooled.end(), "beta_1") != pooled.end());
  CHECK(std::find(pooled.begin(), pooled.end(), "beta1_1") == pooled.end());
}

#include <doctest.h>

#include <cmath>

#include "pscausal/conditionals.hpp"
#include "support.hpp"

using namespace pscausal;

namespace {

// Two observations in one cell, arm 0, p = 1, everything except the outcome set to zero.
struct TwoObs {
  FitData d;
  ChainState s;
  PriorSpec pr;

  TwoObs(double x) {
    d.n = 2;
    d.p = 1;
    d.cells = 1;
    d.xs = Mat::Constant(2, 1, x);
    d.cell = Eigen::VectorXi::Zero(2);
    d.treatment = Eigen::VectorXi::Zero(2);
    d.y = Vec(Eigen::Vector2d(1.0, 3.0));
    d.xg = Mat::Zero(1, 1);
    d.counts = {Vec::Constant(1, 2.0), Vec::Zero(1)};
    d.obs_per_cell = Vec::Constant(1, 2.0);
    d.distances = Mat::Zero(1, 1);
    d.xs_gram = d.xs.transpose() * d.xs;
    d.xg_gram = Mat::Zero(1, 1);
    s.params = ModelParams::zeros(1);
    s.latent = LatentState::zeros(1, 2);
    pr.c2_alpha = pr.c2_beta = 1.0;
  }
};

}  // namespace

TEST_CASE("alpha conditional hand example") {
  TwoObs t(0.0);
  const ScalarNormal q = alpha_conditional(0, t.d, t.s, t.pr);
  CHECK(q.mean() == doctest::Approx(4.0 / 3));
  CHECK(q.variance() == doctest::Approx(1.0 / 3));

  t.pr.c2_alpha = 1e12;
  CHECK(alpha_conditional(0, t.d, t.s, t.pr).mean() == doctest::Approx(2.0));

  t.d.y.setZero();
  t.pr.c2_alpha = 1e-8;
  const ScalarNormal tight = alpha_conditional(0, t.d, t.s, t.pr);
  CHECK(tight.mean() == 0.0);
  CHECK(tight.variance() < 1e-7);
}

TEST_CASE("beta conditional hand example") {
  TwoObs t(1.0);
  const VectorNormal q = beta_conditional(0, t.d, t.s, t.pr, {});
  CHECK(q.mean()[0] == doctest::Approx(4.0 / 3));
  CHECK(q.c(0, 0) == doctest::Approx(3.0));

  // OLS limit with one observation x = 1, r = 2.
  TwoObs one(1.0);
  one.d.n = 1;
  one.d.xs = Mat::Ones(1, 1);
  one.d.xs_gram = Mat::Ones(1, 1);
  one.d.y = Vec::Constant(1, 2.0);
  one.d.cell = Eigen::VectorXi::Zero(1);
  one.d.treatment = Eigen::VectorXi::Zero(1);
  one.s.latent.y_miss = Vec::Zero(1);
  one.pr.c2_beta = 1e12;
  CHECK(beta_conditional(0, one.d, one.s, one.pr, {}).mean()[0] == doctest::Approx(2.0));

  t.d.y.setZero();
  CHECK(beta_conditional(0, t.d, t.s, t.pr, {}).mean()[0] == 0.0);
}

TEST_CASE("vector normal sampling moments") {
  Mat c(2, 2);
  c << 2.0, 0.6, 0.6, 1.0;
  const VectorNormal q(Vec(Eigen::Vector2d(1.0, -1.0)), c, "test");
  const Mat cov = c.inverse();
  Rng rng(2);
  Vec m = Vec::Zero(2);
  Mat s = Mat::Zero(2, 2);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Vec x = q.sample(rng);
    m += x;
    s += (x - q.mean()) * (x - q.mean()).transpose();
  }
  m /= n;
  s /= n;
  CHECK((m - q.mean()).cwiseAbs().maxCoeff() < 4 * std::sqrt(cov.diagonal().maxCoeff() / n));
  CHECK((s - cov).norm() / cov.norm() < 0.02);
  CHECK_THROWS_AS(VectorNormal(Vec::Zero(2), Mat::Zero(2, 2), "singular"), NumericalFailure);
}

TEST_CASE("variance conditionals") {
  const DistanceClasses classes(Mat::Zero(1, 1));
  const CorrelationCache corr(&classes, {0.1, 0.5}, "one");
  ChainState s;
  s.latent = LatentState::zeros(1, 0);
  s.latent.u_tilde[0][0] = 2.0;
  PriorSpec pr;
  const InverseGamma q = sigma2_u_conditional(0, s, pr, corr);
  CHECK(q.shape == doctest::Approx(0.6));
  CHECK(q.rate == doctest::Approx(2.1));

  TwoObs t(0.0);
  t.s.params.alpha[0] = 2.0;
  t.d.y = Vec::Constant(2, 2.0);
  const InverseGamma zero = tau2_conditional(0, t.d, t.s, t.pr);
  CHECK(zero.rate == t.pr.tau2.rate);
  CHECK(zero.shape == doctest::Approx(1.0 + t.pr.tau2.shape));
}

TEST_CASE("phi, eta and gamma degenerate cases") {
  const Simulation sim = testing::small_simulation(31);
  const FitData d = make_fit_data(sim.data);
  ChainState s = testing::truth_state(sim, d);
  const PriorSpec pr;

  ChainState zero_u = s;
  zero_u.latent.u_tilde[0].setZero();
  zero_u.latent.u_tilde[1].setZero();
  const ScalarNormal phi = phi_conditional(1, d, zero_u, pr);
  CHECK(phi.b == 0.0);
  CHECK(phi.c == doctest::Approx(1.0 / pr.c2_phi));

  ChainState zero_u0 = s;
  zero_u0.latent.u_tilde[0].setZero();
  const ScalarNormal gu = gamma_u_conditional(d, zero_u0, pr, {});
  CHECK(gu.b == 0.0);
  CHECK(gu.c == doctest::Approx(1.0 / pr.c2_gamma));

  // With phi_1 = 0 the intensity layer drops out of gamma_u entirely.
  ChainState no_phi = s;
  no_phi.params.phi[1] = 0.0;
  const ScalarNormal full = gamma_u_conditional(d, no_phi, pr, {});
  const ScalarNormal naive = gamma_u_conditional(d, no_phi, pr, {Variant::naive});
  CHECK(full.b == doctest::Approx(naive.b).epsilon(1e-14));
  CHECK(full.c == doctest::Approx(naive.c).epsilon(1e-14));

  ChainState zero_v0 = s;
  zero_v0.latent.v_tilde[0].setZero();
  CHECK(gamma_v_conditional(d, zero_v0, pr).b == 0.0);

  double prev = 1e300;
  for (double t2 : {1.0, 0.5, 0.1, 0.01}) {
    s.cov.tau2_psi[0] = t2;
    const double v = eta_conditional(0, d, s, pr).variance();
    const double vp = phi_conditional(0, d, s, pr).variance();
    CHECK(v < prev);
    CHECK(vp > 0);
    prev = v;
  }
}

TEST_CASE("eta and phi on a two-cell system by hand") {
  FitData d;
  d.n = 0;
  d.p = 1;
  d.cells = 2;
  d.xg = Mat(2, 1);
  d.xg << 0.5, -1.0;
  ChainState s;
  s.params = ModelParams::zeros(1);
  s.params.delta[0][0] = 0.4;
  s.params.phi[0] = 0.3;
  s.cov.tau2_psi[0] = 0.2;
  s.latent = LatentState::zeros(2, 0);
  s.latent.log_lambda[0] = Vec(Eigen::Vector2d(1.0, 0.2));
  s.latent.u_tilde[0] = Vec(Eigen::Vector2d(0.5, -0.5));
  s.latent.v_tilde[0] = Vec(Eigen::Vector2d(0.1, 0.3));
  PriorSpec pr;
  pr.c2_eta = 4.0;
  pr.c2_phi = 2.0;
  // eta residuals: L - x delta - v - phi u
  const double r0 = 1.0 - 0.2 - 0.1 - 0.15, r1 = 0.2 + 0.4 - 0.3 + 0.15;
  const ScalarNormal eta = eta_conditional(0, d, s, pr);
  CHECK(eta.c == doctest::Approx(2 / 0.2 + 0.25));
  CHECK(eta.mean() == doctest::Approx(((r0 + r1) / 0.2) / (2 / 0.2 + 0.25)));
  // phi residuals: L - eta - x delta - v
  const double q0 = 1.0 - 0.2 - 0.1, q1 = 0.2 + 0.4 - 0.3;
  const ScalarNormal phi = phi_conditional(0, d, s, pr);
  const double c = (0.25 + 0.25) / 0.2 + 0.5;
  CHECK(phi.c == doctest::Approx(c));
  CHECK(phi.mean() == doctest::Approx(((0.5 * q0 - 0.5 * q1) / 0.2) / c));
}

TEST_CASE("field conditional on a two-cell grid") {
  Mat dist(2, 2);
  dist << 0, 0.1, 0.1, 0;
  const DistanceClasses classes(dist);
  const CorrelationCache corr(&classes, {0.1, 0.5}, "two");
  const double r = std::exp(-1.0);
  const Vec dg(Eigen::Vector2d(1.0, 2.0)), b(Eigen::Vector2d(1.0, 0.5));
  const FieldNormal q(dg, b, 1.0, corr, "two");
  // C = R^{-1} + D, solved by hand.
  const double k = 1.0 / (1 - r * r);
  const double c11 = k + 1, c12 = -k * r, c22 = k + 2;
  const double det = c11 * c22 - c12 * c12;
  CHECK(q.mean()[0] == doctest::Approx((c22 * 1.0 - c12 * 0.5) / det).epsilon(1e-12));
  CHECK(q.mean()[1] == doctest::Approx((c11 * 0.5 - c12 * 1.0) / det).epsilon(1e-12));
  const Mat prec = q.precision();
  CHECK(prec(0, 0) == doctest::Approx(c11));
  CHECK(prec(0, 1) == doctest::Approx(c12));
  CHECK(prec(1, 1) == doctest::Approx(c22));
}

TEST_CASE("field conditional sampler matches its moments") {
  const GridGeometry g = build_grid({}, 3, 3);
  const DistanceClasses classes(pairwise_centroid_distances(g));
  const CorrelationCache corr(&classes, {0.3, 0.5}, "grid");
  Vec dg(9), b(9);
  dg << 2, 0, 1, 4, 0.5, 0, 3, 1, 2;
  b << 1, 0, -1, 2, 0.3, 0, -2, 0.5, 1;
  const FieldNormal q(dg, b, 0.8, corr, "grid");
  const Mat cov = q.precision().inverse();
  CHECK((q.precision() * q.mean() - b).cwiseAbs().maxCoeff() < 1e-10);

  Rng rng(17);
  const int n = 60000;
  Vec m = Vec::Zero(9);
  Mat s = Mat::Zero(9, 9);
  for (int i = 0; i < n; ++i) {
    const Vec x = q.sample(rng);
    m += x;
    s += (x - q.mean()) * (x - q.mean()).transpose();
  }
  m /= n;
  s /= n;
  for (int i = 0; i < 9; ++i) CHECK(std::abs(m[i] - q.mean()[i]) < 4 * std::sqrt(cov(i, i) / n));
  CHECK((s - cov).norm() / cov.norm() < 0.03);

  // Cells with no data: the posterior mean is the GP interpolant of the others.
  const Mat R = corr.matrix();
  for (int k : {1, 5}) {
    std::vector<int> others;
    for (int i = 0; i < 9; ++i)
      if (i != k) others.push_back(i);
    Mat roo(8, 8);
    Vec rko(8), mo(8);
    for (int i = 0; i < 8; ++i) {
      rko[i] = R(k, others[i]);
      mo[i] = q.mean()[others[i]];
      for (int j = 0; j < 8; ++j) roo(i, j) = R(others[i], others[j]);
    }
    CHECK(q.mean()[k] == doctest::Approx(rko.dot(roo.ldlt().solve(mo))).epsilon(1e-9));
  }
}

TEST_CASE("U1 field ignores the intensity layer when phi and gamma vanish") {
  const Simulation sim = testing::small_simulation(5);
  const FitData d = make_fit_data(sim.data);
  ChainState s = testing::truth_state(sim, d);
  s.params.phi = {0.0, 0.0};
  s.params.gamma_u = 0.0;
  const DistanceClasses classes(d.distances);
  const CorrelationCache corr(&classes, s.cov.matern_u(), "u");
  const FieldNormal full = field_u_conditional(1, d, s, {}, corr);
  const FieldNormal naive = field_u_conditional(1, d, s, {Variant::naive}, corr);
  CHECK((full.b() - naive.b()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((full.precision_diagonal() - naive.precision_diagonal()).cwiseAbs().maxCoeff() < 1e-12);
  s.latent.log_lambda[1].array() += 3.0;
  CHECK((field_u_conditional(1, d, s, {}, corr).mean() - full.mean()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("conditional densities agree with log_joint ratios") {
  for (const auto& f : testing::conditional_joint_discrepancies(5, 99)) {
    INFO(f.name);
    CHECK(f.max_error < 1e-8);
  }
}

TEST_CASE("observed-layer conditionals agree with the collapsed log_joint") {
  const auto fams = testing::observed_layer_families();
  for (const auto& f : testing::conditional_joint_discrepancies(5, 55, fams, Outcomes::observed)) {
    INFO(f.name);
    CHECK(f.max_error < 1e-8);
  }
}

TEST_CASE("collapsed log_joint drops exactly the counterfactual terms") {
  const Simulation sim = testing::small_simulation(21);
  const FitData d = make_fit_data(sim.data);
  ChainState s = testing::truth_state(sim, d);
  const PriorSpec pr;
  const double before = log_joint(d, s, pr, {}, Outcomes::observed);
  const double complete = log_joint(d, s, pr);
  for (int i = 0; i < d.n; ++i) s.latent.y_miss[i] += 0.3 * (i % 5);
  CHECK(log_joint(d, s, pr, {}, Outcomes::observed) == doctest::Approx(before).epsilon(1e-14));
  CHECK(log_joint(d, s, pr) != doctest::Approx(complete));
  CHECK(outcome_weights(1, d, Outcomes::observed).sum() == doctest::Approx(d.counts[1].sum()));
  CHECK(outcome_weights(0, d, Outcomes::complete).sum() == d.n);
}

TEST_CASE("ridge moves agree with log_joint ratios") {
  const auto fams = testing::ridge_families();
  CHECK(fams.size() == 8);
  for (const auto& f : testing::conditional_joint_discrepancies(5, 77, fams)) {
    INFO(f.name);
    CHECK(f.max_error < 1e-8);
  }
}

TEST_CASE("ridge moves leave every likelihood input unchanged") {
  const Simulation sim = testing::small_simulation(13);
  const FitData d = make_fit_data(sim.data);
  ChainState s = testing::truth_state(sim, d);
  const ModelSpec spec;
  auto inputs = [&](const ChainState& t) {
    Vec out(0);
    auto cat = [&](const Vec& v) {
      Vec w(out.size() + v.size());
      w << out, v;
      out = w;
    };
    for (int a = 0; a < 2; ++a) {
      cat(log_intensity_means(a, t.params, t.latent, d.xg));
      cat((t.latent.u(a, t.params.gamma_u).array() + t.params.alpha[a]).matrix());
    }
    return out;
  };
  const Vec before = inputs(s);
  for (const Ridge r : {Ridge::u_level, Ridge::v_level, Ridge::phi_v})
    for (int a = 0; a < 2; ++a) apply_ridge(r, a, 0.37 - 0.2 * a, s, spec);
  set_gamma_u_holding_fields(s.params.gamma_u + 0.8, s);
  set_gamma_v_holding_fields(s.params.gamma_v - 0.6, s);
  CHECK((inputs(s) - before).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(s.params.alpha[0] != sim.truth.params.alpha[0]);

  ChainState n = testing::truth_state(sim, d);
  const ModelSpec naive{.variant = Variant::naive};
  CHECK_THROWS_AS(apply_ridge(Ridge::phi_v, 0, 0.1, n, naive), InvalidArgument);
  const double eta = n.params.eta[0];
  apply_ridge(Ridge::u_level, 0, 0.5, n, naive);
  CHECK(n.params.eta[0] == eta);
}

TEST_CASE("counterfactual imputation") {
  const Simulation sim = testing::small_simulation(41);
  const FitData d = make_fit_data(sim.data);
  ChainState s = testing::truth_state(sim, d);
  const Vec y_before = d.y;
  const Vec mean = s.latent.y_miss;  // truth_state stores the conditional means

  s.params.tau2 = {1e-20, 1e-20};
  Rng rng(1);
  impute_counterfactuals(d, s, rng);
  CHECK((s.latent.y_miss - mean).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(d.y == y_before);

  s.params.tau2 = {0.4, 0.2};
  Vec acc = Vec::Zero(d.n);
  const int reps = 10000;
  for (int k = 0; k < reps; ++k) {
    impute_counterfactuals(d, s, rng);
    acc += s.latent.y_miss;
  }
  acc /= reps;
  for (int i = 0; i < d.n; ++i) {
    const double se = std::sqrt(s.params.tau2[1 - d.treatment[i]] / reps);
    CHECK(std::abs(acc[i] - mean[i]) < 4.5 * se);
  }
}

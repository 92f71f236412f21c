#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <sstream>

#include "pscausal/geometry.hpp"
#include "pscausal/randfield.hpp"
#include "pscausal/reference_tables.hpp"

using namespace pscausal;

TEST_CASE("bessel_k against the high-precision fixture") {
  std::istringstream in(bessel_k_reference_csv());
  std::string line;
  std::getline(in, line);
  CHECK(line == "nu,x,k");
  int rows = 0;
  while (std::getline(in, line)) {
    double nu, x, k;
    REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf", &nu, &x, &k) == 3);
    CHECK(std::abs(bessel_k(nu, x) / k - 1.0) < 1e-12);
    ++rows;
  }
  CHECK(rows == 205);
}

TEST_CASE("bessel_k half-integer closed form and recurrence") {
  for (double x : {1e-3, 0.1, 0.7, 1.9999, 2.0, 2.0001, 5.0, 25.0}) {
    const double k_half = std::sqrt(M_PI / (2 * x)) * std::exp(-x);
    CHECK(bessel_k(0.5, x) == doctest::Approx(k_half).epsilon(1e-13));
    CHECK(bessel_k(1.5, x) == doctest::Approx(k_half * (1 + 1 / x)).epsilon(1e-13));
    for (double nu : {0.2, 0.9, 1.7, 3.3}) {
      // K_{nu+1} = K_{nu-1} + (2 nu / x) K_nu
      const double lhs = bessel_k(nu + 1, x);
      const double rhs = bessel_k(std::abs(nu - 1), x) + 2 * nu / x * bessel_k(nu, x);
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
  }
}

TEST_CASE("bessel_k is even in the order") {
  CHECK(bessel_k(-0.3, 1.2) == doctest::Approx(bessel_k(0.3, 1.2)).epsilon(1e-15));
}

TEST_CASE("matern special cases") {
  for (double rho : {0.05, 0.1, 0.37, 2.0})
    for (double h : {0.0, 1e-6, 0.01, 0.3, 1.0, 4.0}) {
      const double x = h / rho;
      CHECK(std::abs(matern_correlation(h, MaternParams{rho, 0.5}) - std::exp(-x)) < 1e-14);
      CHECK(std::abs(matern_correlation_bessel(h, rho, 0.5) - std::exp(-x)) < 1e-13);
      CHECK(std::abs(matern_correlation(h, MaternParams{rho, 1.5}) - (1 + x) * std::exp(-x)) < 1e-12);
      CHECK(std::abs(matern_correlation(h, MaternParams{rho, 2.5}) - (1 + x + x * x / 3) * std::exp(-x)) < 1e-12);
    }
}

TEST_CASE("matern is one at the origin and decreases with distance") {
  for (double kappa : {0.3, 0.5, 1.0, 2.7, 9.5}) {
    const MaternParams p{0.2, kappa};
    CHECK(matern_correlation(0.0, p) == 1.0);
    double prev = 1.0;
    for (int i = 1; i <= 60; ++i) {
      const double r = matern_correlation(0.02 * i, p);
      CHECK(r <= prev);
      CHECK(r > 0.0);
      prev = r;
    }
  }
  CHECK_THROWS_AS(matern_correlation(0.1, MaternParams{0.0, 0.5}), InvalidArgument);
  CHECK_THROWS_AS(matern_correlation(0.1, MaternParams{0.1, -1.0}), InvalidArgument);
  CHECK_THROWS_AS(matern_correlation(-0.1, MaternParams{0.1, 0.5}), InvalidArgument);
}

TEST_CASE("distance classes reproduce the direct correlation matrix") {
  const GridGeometry g = build_grid({}, 6, 5);
  const Eigen::MatrixXd d = pairwise_centroid_distances(g);
  const DistanceClasses classes(d);
  CHECK(classes.lags.size() < static_cast<std::size_t>(d.size()));
  for (double kappa : {0.5, 1.3}) {
    const MaternParams p{0.15, kappa};
    const Eigen::MatrixXd direct = correlation_matrix(d, p);
    CHECK((classes.correlation(p) - direct).cwiseAbs().maxCoeff() < 1e-15);
    for (int i = 0; i < d.rows(); ++i)
      for (int j = 0; j < d.cols(); ++j) CHECK(direct(i, j) == matern_correlation(d(i, j), p));
  }
}

TEST_CASE("correlation cache log determinant and quadratic form") {
  const GridGeometry g = build_grid({}, 5, 5);
  const DistanceClasses classes(pairwise_centroid_distances(g));
  const CorrelationCache cache(&classes, {0.2, 1.0}, "test");
  const Eigen::MatrixXd r = cache.matrix();
  CHECK(cache.jitter() == 0.0);
  CHECK(cache.log_det() == doctest::Approx(std::log(r.fullPivLu().determinant())).epsilon(1e-10));
  Rng rng(3);
  const Eigen::VectorXd x = standard_normal_vector(25, rng);
  CHECK(cache.quad_form(x) == doctest::Approx(x.dot(r.fullPivLu().solve(x))).epsilon(1e-10));
  CHECK((cache.inverse() * r - Eigen::MatrixXd::Identity(25, 25)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("jitter escalates for a singular covariance") {
  Points pts(3, 2);
  pts << 0.1, 0.1, 0.1, 0.1, 0.5, 0.5;  // repeated site
  const CovarianceFactor f = build_covariance(pairwise_distances(pts), 2.0, {0.3, 0.5});
  CHECK(f.jitter > 0.0);
  CHECK(f.jitter <= 2.0 * 1e-6);
  const Eigen::MatrixXd rebuilt = f.lower * f.lower.transpose();
  CHECK(rebuilt(0, 0) == doctest::Approx(2.0 + f.jitter));
  CHECK_THROWS_AS(build_covariance(pairwise_distances(pts), 0.0, {0.3, 0.5}), InvalidArgument);
}

TEST_CASE("requested jitter is honoured exactly when it suffices") {
  const GridGeometry g = build_grid({}, 3, 3);
  const CovarianceFactor f = build_covariance(pairwise_centroid_distances(g), 1.0, {0.2, 0.5}, 1e-4);
  CHECK(f.jitter == 1e-4);
  CHECK((f.lower * f.lower.transpose()).diagonal().maxCoeff() == doctest::Approx(1.0 + 1e-4));
}

TEST_CASE("lmc composition and cross moments") {
  Eigen::VectorXd u0(3), u1(3);
  u0 << 1, -2, 0.5;
  u1 << 0, 1, 1;
  const auto [a, b] = lmc_compose(u0, u1, -0.5);
  CHECK(a == u0);
  CHECK(b(0) == doctest::Approx(-0.5));
  CHECK(b(1) == doctest::Approx(2.0));
  CHECK_THROWS_AS(lmc_compose(u0, Eigen::VectorXd(2), 1.0), InvalidArgument);

  // sigma2 = 1 each, gamma = -0.5: var1 = 1.25, cov = -0.5
  const LmcMoments m = lmc_cross_moments({1.0, 1.0, -0.5});
  CHECK(m.var0 == 1.0);
  CHECK(m.var1 == doctest::Approx(1.25));
  CHECK(m.cov == doctest::Approx(-0.5));
  CHECK(m.corr == doctest::Approx(-0.5 / std::sqrt(1.25)));
  CHECK(lmc_cross_moments({2.0, 3.0, 0.0}).corr == 0.0);
}

TEST_CASE("lmc empirical covariance matches the closed form") {
  Rng rng(11);
  const int n = 200000;
  const double gamma = 0.7, s0 = 0.8, s1 = 1.6;
  double c00 = 0, c01 = 0, c11 = 0;
  for (int i = 0; i < n; ++i) {
    const double z0 = std::sqrt(s0) * rng.normal(), z1 = std::sqrt(s1) * rng.normal();
    const double u1 = z1 + gamma * z0;
    c00 += z0 * z0;
    c01 += z0 * u1;
    c11 += u1 * u1;
  }
  const LmcMoments m = lmc_cross_moments({s0, s1, gamma});
  CHECK(c00 / n == doctest::Approx(m.var0).epsilon(0.02));
  CHECK(c01 / n == doctest::Approx(m.cov).epsilon(0.02));
  CHECK(c11 / n == doctest::Approx(m.var1).epsilon(0.02));
}

TEST_CASE("sample_mvn reproduces the target covariance") {
  Points pts(3, 2);
  pts << 0.0, 0.0, 0.1, 0.0, 0.4, 0.3;
  const Eigen::MatrixXd d = pairwise_distances(pts);
  const CovarianceFactor f = build_covariance(d, 1.5, {0.2, 0.5});
  const Eigen::MatrixXd target = 1.5 * correlation_matrix(d, {0.2, 0.5});
  Rng rng(5);
  const int n = 100000;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(3, 3);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd z = sample_mvn(f, rng);
    acc += z * z.transpose();
  }
  acc /= n;
  // Entrywise SE is at most sqrt(2) * 1.5 / sqrt(n) ~ 0.0067.
  CHECK((acc - target).cwiseAbs().maxCoeff() < 0.03);
}

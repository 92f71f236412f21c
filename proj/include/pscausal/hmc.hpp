#pragma once

#include <Eigen/Dense>

#include "pscausal/rng.hpp"

namespace pscausal {

struct HmcSettings {
  double step_size = 0.05;
  int leapfrog_steps = 10;
  double mass_scale = 1.0;  ///< mass matrix is (mass_scale / tau2_psi) I
};

/// Negative log conditional of one arm's log intensities given everything else.
struct LogIntensityTarget {
  const Eigen::VectorXd& counts;
  const Eigen::VectorXd& mean;
  double tau2_psi;
  double cell_area;
  double gradient_bias = 0.0;  ///< fault injection for self-tests; zero in normal use

  double potential(const Eigen::VectorXd& L) const {
    return -(counts.dot(L) - cell_area * L.array().exp().sum()) + 0.5 * (L - mean).squaredNorm() / tau2_psi;
  }
  Eigen::VectorXd gradient(const Eigen::VectorXd& L) const {
    return (cell_area * L.array().exp() - counts.array() + (L - mean).array() / tau2_psi + gradient_bias).matrix();
  }
};

/// Leapfrog integration of (q, p) with scalar inverse mass.
void leapfrog(const LogIntensityTarget& target, Eigen::VectorXd& q, Eigen::VectorXd& p, double step_size,
              int steps, double inverse_mass);

struct HmcStep {
  bool accepted = false;
  bool non_finite = false;
  double accept_prob = 0.0;
};

HmcStep hmc_update_log_intensity(Eigen::VectorXd& L, const LogIntensityTarget& target, const HmcSettings& settings,
                                 Rng& rng);

/// Nesterov dual averaging of log step size toward a target acceptance rate.
class DualAveraging {
 public:
  explicit DualAveraging(double initial_step, double target = 0.75);
  double step_size() const { return step_; }
  void update(double accept_prob);
  /// Freeze at the averaged iterate.
  void finish() { step_ = std::exp(log_step_bar_); }

 private:
  double mu_, target_, h_bar_ = 0.0, log_step_bar_ = 0.0, step_;
  long t_ = 0;
  static constexpr double gamma_ = 0.05, t0_ = 10.0, kappa_ = 0.75;
};

}  // namespace pscausal

#include "pscausal/hmc.hpp"

#include <cmath>

#include "pscausal/randfield.hpp"

namespace pscausal {

void leapfrog(const LogIntensityTarget& target, Eigen::VectorXd& q, Eigen::VectorXd& p, double step_size,
              int steps, double inverse_mass) {
  p -= 0.5 * step_size * target.gradient(q);
  for (int i = 0; i < steps; ++i) {
    q += step_size * inverse_mass * p;
    if (i + 1 < steps) p -= step_size * target.gradient(q);
  }
  p -= 0.5 * step_size * target.gradient(q);
}

HmcStep hmc_update_log_intensity(Eigen::VectorXd& L, const LogIntensityTarget& target, const HmcSettings& settings,
                                 Rng& rng) {
  const double mass = settings.mass_scale / target.tau2_psi;
  const double inverse_mass = 1.0 / mass;
  Eigen::VectorXd p = std::sqrt(mass) * standard_normal_vector(L.size(), rng);
  const double h0 = target.potential(L) + 0.5 * inverse_mass * p.squaredNorm();
  Eigen::VectorXd q = L;
  leapfrog(target, q, p, settings.step_size, settings.leapfrog_steps, inverse_mass);
  const double h1 = target.potential(q) + 0.5 * inverse_mass * p.squaredNorm();
  HmcStep out;
  if (!std::isfinite(h1) || !q.allFinite()) {
    out.non_finite = true;
    rng.uniform();  // keep the stream aligned with the finite path
    return out;
  }
  out.accept_prob = std::min(1.0, std::exp(h0 - h1));
  if (rng.uniform() < out.accept_prob) {
    L = q;
    out.accepted = true;
  }
  return out;
}

DualAveraging::DualAveraging(double initial_step, double target)
    : mu_(std::log(10.0 * initial_step)), target_(target), log_step_bar_(std::log(initial_step)), step_(initial_step) {}

void DualAveraging::update(double accept_prob) {
  ++t_;
  const double t = static_cast<double>(t_);
  h_bar_ = (1.0 - 1.0 / (t + t0_)) * h_bar_ + (target_ - accept_prob) / (t + t0_);
  const double log_step = mu_ - std::sqrt(t) / gamma_ * h_bar_;
  const double w = std::pow(t, -kappa_);
  log_step_bar_ = w * log_step + (1.0 - w) * log_step_bar_;
  step_ = std::exp(log_step);
}

}  // namespace pscausal

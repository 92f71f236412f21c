#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "pscausal/conditionals.hpp"
#include "pscausal/hmc.hpp"
#include "pscausal/model.hpp"

namespace pscausal {

/// Bumped whenever a change alters the draws produced for a given seed.
inline constexpr int kSamplerRevision = 2;

struct MhSettings {
  double log_rho_sd = 0.3;
  double log_kappa_sd = 0.3;
  double target_accept = 0.44;
};

/// Deliberate kernel defects used by the self-validation suites.
struct FaultInjection {
  double alpha_variance_scale = 1.0;
  double gradient_bias = 0.0;
};

struct McmcConfig {
  long n_iter = 20000;
  long burn_in = 5000;
  long thin = 1;
  HmcSettings hmc;
  MhSettings mh;
  bool adapt = true;  ///< tune HMC step and MH scales during burn-in
  std::uint64_t seed = 0;
  bool record_local = true;  ///< keep per-draw Delta_g and propensity
  bool ridge_moves = true;   ///< joint shifts along likelihood-flat directions, see conditionals.hpp
  /// Update the outcome layer with the counterfactuals integrated out, imputing them last.
  bool collapse_counterfactuals = true;
  FaultInjection faults;

  void validate() const;
  long retained() const { return n_iter > burn_in ? (n_iter - burn_in) / thin : 0; }
};

enum class Hyper { rho_u, rho_v, kappa_u, kappa_v };

/// Log-scale random-walk Metropolis on one range/smoothness parameter. Refreshes cache on accept.
bool mh_update_range_smoothness(Hyper which, ChainState& s, CorrelationCache& cache, const DistanceClasses& classes,
                                const PriorSpec& priors, double proposal_sd, Rng& rng);

struct DrawRecord {
  long iter = 0;
  ModelParams params;
  CovParams cov;
  double delta_bar = 0.0;
};

struct AcceptanceRates {
  std::array<double, 2> hmc{0.0, 0.0};
  double rho_u = 0.0, rho_v = 0.0, kappa_u = 0.0, kappa_v = 0.0;
};

struct ChainOutput {
  ModelSpec spec;
  McmcConfig config;
  int p = 0;
  std::vector<int> active;  ///< grid index of each column of delta_local / propensity
  std::vector<DrawRecord> draws;
  Mat delta_local;          ///< draws x active cells
  Mat propensity;           ///< draws x active cells (full variant)
  AcceptanceRates acceptance;
  long non_finite_energy = 0;
  std::array<double, 2> step_size{0.0, 0.0};
};

/// Starting values from least squares on outcomes and log counts.
ChainState initial_state(const FitData& data, const PriorSpec& priors, const ModelSpec& spec);

/// One chain's workspace: state, covariance caches and adaptation.
class ChainRunner {
 public:
  ChainRunner(FitData data, PriorSpec priors, McmcConfig config, ModelSpec spec);

  const FitData& data() const { return data_; }
  const ChainState& state() const { return state_; }
  void set_state(const ChainState& s);
  /// Swap the observed data; the grid must be unchanged.
  void replace_data(FitData data);

  /// One full sweep in the fixed block order.
  void sweep(Rng& rng, bool adapting);
  /// Freeze adapted HMC step sizes at their averaged values.
  void end_adaptation();

  struct Counters {
    std::array<long, 2> hmc_accept{0, 0}, hmc_total{0, 0};
    std::array<long, 4> mh_accept{0, 0, 0, 0}, mh_total{0, 0, 0, 0};
    long non_finite = 0;
    void reset() { *this = Counters{}; }
  };
  Counters& counters() { return counters_; }
  std::array<double, 2> step_sizes() const { return {adapt_[0].step_size(), adapt_[1].step_size()}; }

 private:
  void refresh_caches();
  void ridge_sweep(Rng& rng);

  FitData data_;
  PriorSpec priors_;
  McmcConfig config_;
  ModelSpec spec_;
  ChainState state_;
  std::unique_ptr<DistanceClasses> classes_;
  CorrelationCache corr_u_, corr_v_;
  std::array<DualAveraging, 2> adapt_;
  std::array<double, 4> log_mh_sd_;
  std::array<long, 4> mh_steps_{0, 0, 0, 0};
  Counters counters_;
};

ChainOutput run_chain(const FitData& data, const PriorSpec& priors, const McmcConfig& config, const ModelSpec& spec);

}  // namespace pscausal

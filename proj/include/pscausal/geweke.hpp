#pragma once

#include <string>
#include <vector>

#include "pscausal/sampler.hpp"

namespace pscausal {

/// Small full-model problem for the joint-distribution test.
struct GewekeConfig {
  long rounds = 10000;
  int batches = 50;  ///< batch-means blocks for the successive-conditional chain
  GridGeometry grid;
  Mat grid_x;
  PriorSpec priors;
  McmcConfig mcmc;  ///< adaptation is forced off
  bool pooled = false;
  std::uint64_t seed = 1;
};

/// Four-cell toy with priors tight enough that forward draws give moderate counts.
GewekeConfig geweke_toy_config();

struct GewekeStatistic {
  std::string name;
  double forward_mean = 0.0, successive_mean = 0.0, z = 0.0;
};

struct GewekeReport {
  std::vector<GewekeStatistic> statistics;
  double max_abs_z() const;
  bool passed(double threshold = 4.0) const { return max_abs_z() < threshold; }
};

/// Draw (theta, latent) from the prior and data given them.
ChainState draw_from_prior(const GridGeometry& grid, const Mat& grid_x, const PriorSpec& priors, bool pooled, Rng& rng);
/// Draw counts, sites and both potential outcomes given the state; y_miss is overwritten.
Dataset draw_data(const GridGeometry& grid, const Mat& grid_x, ChainState& state, Rng& rng);

/// Names of the twenty monitored statistics, in report order.
std::vector<std::string> geweke_statistic_names();
std::vector<double> geweke_statistics(const ChainState& s);

GewekeReport geweke_validate(const GewekeConfig& cfg);

}  // namespace pscausal

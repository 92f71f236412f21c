#pragma once

#include <string>
#include <vector>

#include "pscausal/sampler.hpp"

namespace pscausal {

/// Column names of one draw: theta_M then theta_C, skipping blocks the variant does not sample.
std::vector<std::string> parameter_names(int p, const ModelSpec& spec);
std::vector<double> parameter_values(const DrawRecord& draw, const ModelSpec& spec);

struct ScalarSummary {
  std::string name;
  double mean = 0.0, sd = 0.0, lower = 0.0, upper = 0.0;
};

/// Linear-interpolation quantile of sorted data (R type 7).
double quantile_sorted(const std::vector<double>& sorted, double prob);
ScalarSummary summarize_values(std::string name, std::vector<double> values);
/// Geyer initial-positive-sequence estimate.
double effective_sample_size(const std::vector<double>& values);

struct PosteriorSummary {
  std::vector<ScalarSummary> parameters;
  ScalarSummary delta;
  double ess_delta = 0.0;
  // Full variant only.
  ScalarSummary phi_diff, r_u, r_v;
  double prob_phi_diff_negative = 0.0;
  std::vector<ScalarSummary> delta_local, propensity;
};

PosteriorSummary summarize(const ChainOutput& chain);

}  // namespace pscausal

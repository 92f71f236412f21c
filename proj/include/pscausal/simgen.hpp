#pragma once

#include <optional>

#include "pscausal/model.hpp"
#include "pscausal/rng.hpp"

namespace pscausal {

/// Generating configuration. truth.delta holds delta*; the stored truth uses delta* + phi*beta.
struct ScenarioSpec {
  int id = 0;  ///< 1-8 for the standard menu, 0 for a custom truth
  double lambda_star = 5.0;
  bool gaussian = true;
  bool stationary = true;
  Domain domain;
  int nx = 20, ny = 20;
  int p = 2;
  double covariate_variance = 0.5;
  double covariate_range = 0.05;
  ModelParams truth;
  CovParams cov;
};

/// Scenario 1-8 of the simulation study.
ScenarioSpec scenario(int id);

struct SimTruth {
  int scenario = 0;
  ModelParams params;  ///< delta already reparametrized, eta calibrated
  CovParams cov;
  std::array<Vec, 2> delta_star;
  LatentState fields;  ///< fields and realized log intensities (psi included)
  double delta_bar = 0.0;
};

struct Simulation {
  Dataset data;
  SimTruth truth;
};

/// p independent exponential-kernel GP columns at the centroids.
Mat generate_covariates(const GridGeometry& grid, Rng& rng, int p = 2, double variance = 0.5, double range = 0.05);

/// Centroids with squared y coordinate, for the nonstationary V fields.
Points nonstationary_field_transform(const GridGeometry& grid);

/// phi * (U 1{U > 0} - sqrt((1 + gamma^2) sigma2 / 2 pi)); pass gamma = 0 for arm 0.
Vec nongaussian_intensity(const Vec& u, double phi, double gamma_u, double sigma2);

/// Draw one dataset. Supplying covariates freezes them instead of drawing new ones.
Simulation generate_dataset(const ScenarioSpec& spec, Rng& rng, const std::optional<Mat>& covariates = std::nullopt);

}  // namespace pscausal

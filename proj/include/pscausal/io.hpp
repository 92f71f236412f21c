#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "pscausal/harness.hpp"
#include "pscausal/model.hpp"
#include "pscausal/sampler.hpp"
#include "pscausal/simgen.hpp"

namespace pscausal {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Shortest text that reads back to the same double.
std::string format_double(double v);

/// Grid given in a run config; when absent it is inferred from the grid CSV centroids.
struct GridSpec {
  Domain domain;
  int nx = 0, ny = 0;
};

void write_observations_csv(std::ostream& out, const Dataset& data);
void write_grid_csv(std::ostream& out, const Dataset& data);
/// observations.csv and grid.csv under dir.
void write_dataset(const std::string& dir, const Dataset& data);

/// Reads both CSVs; a mask file, if given, replaces the grid CSV mask column.
Dataset read_dataset(const std::string& observations_path, const std::string& grid_path,
                     const std::optional<GridSpec>& grid = std::nullopt, const std::string& mask_path = "");

struct Standardization {
  Vec mean, sd;
};
/// Z-score each covariate jointly over site and grid values.
Standardization standardize_covariates(Dataset& data);

void to_json(Json& j, const PriorSpec& p);
void from_json(const Json& j, PriorSpec& p);
void to_json(Json& j, const McmcConfig& c);
void from_json(const Json& j, McmcConfig& c);
void to_json(Json& j, const ModelParams& m);
void from_json(const Json& j, ModelParams& m);
void to_json(Json& j, const CovParams& c);
void from_json(const Json& j, CovParams& c);

/// Everything that determines a study's fitted estimates; keys a StudyJournal.
Json study_to_json(const StudyConfig& cfg);
std::string study_fingerprint(const StudyConfig& cfg);

Json truth_to_json(const SimTruth& truth, std::uint64_t seed);

void write_chain_csv(std::ostream& out, const ChainOutput& chain);
/// Wide per-cell file: iter, delta_<g>..., propensity_<g>...
void write_local_csv(std::ostream& out, const ChainOutput& chain);
Json acceptance_to_json(const ChainOutput& chain);

void write_text_file(const std::string& path, const std::string& text);
Json read_json_file(const std::string& path);

}  // namespace pscausal

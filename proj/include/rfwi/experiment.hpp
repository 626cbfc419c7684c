// SPDX-License-Identifier: Apache-2.0

#ifndef RFWI_EXPERIMENT_HPP
#define RFWI_EXPERIMENT_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "rfwi/config.hpp"
#include "rfwi/fwi_objective.hpp"
#include "rfwi/models.hpp"
#include "rfwi/optimize.hpp"

namespace rfwi
{

/// Environment variable that replaces output.dir when set.
inline constexpr const char *kOutputDirEnv = "RFWI_OUTPUT_DIR";

//
// Models, calibrated acquisition and masked data for one configuration. Source weights
// are scaled so that the median clean datum magnitude equals config.data_scale.
//
struct ExperimentSetup
{
  ExperimentConfig config;
  ModelPair models;
  SyntheticData data;
  double source_scale = 1.0;
};

ExperimentSetup prepare_experiment(const ExperimentConfig &config);

/// Penalty from the config; an unset Huber mu is mu_fraction times the median nonzero
/// residual component at the initial model.
Penalty resolve_penalty(const ExperimentConfig &config, const ExperimentSetup &setup);

struct ExperimentResult
{
  RunRecord record;
  Penalty penalty = Penalty::least_squares();
  Histogram hist_initial;
  Histogram hist_final;
  Histogram hist_true;
  double initial_model_error = 0.0;
  double final_model_error = 0.0;
  double initial_misfit = 0.0;
  double final_misfit = 0.0;  // full objective, average over experiments
  std::vector<ScheduleRow> schedule;
  std::filesystem::path output_dir;
  std::filesystem::path manifest;
};

/// Output directory after the environment override and the optional label subdirectory.
std::filesystem::path output_directory(const ExperimentConfig &config);

//
// Runs the configured solver and writes run.csv, residual_hist.csv, model_final.csv,
// schedule.csv (growing-sample with a schedule) and manifest.json. On failure a manifest
// with status "error" is written and the exception is rethrown.
//
ExperimentResult run_experiment(const ExperimentConfig &config);

/// Artifacts whose checksum no longer matches the manifest (empty when all match).
std::vector<std::string> verify_manifest(const std::filesystem::path &manifest);

struct ComparisonTables
{
  std::string by_iteration;
  std::string by_evaluations;
};

//
// Merges run.csv files of several manifests, aligned on iteration and on cumulative
// single evaluations. Checksums are verified and runs on different grids are rejected.
//
ComparisonTables compare_runs(const std::vector<std::filesystem::path> &manifests);

}  // namespace rfwi

#endif  // RFWI_EXPERIMENT_HPP

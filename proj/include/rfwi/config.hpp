// SPDX-License-Identifier: Apache-2.0

#ifndef RFWI_CONFIG_HPP
#define RFWI_CONFIG_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rfwi/helmholtz.hpp"

namespace rfwi
{

/// Gaussian velocity anomaly: center (m), radius (m), relative velocity amplitude.
struct Anomaly
{
  double z = 0.0;
  double x = 0.0;
  double radius = 0.0;
  double amplitude = 0.0;

  bool operator==(const Anomaly &) const = default;
};

//
// Everything that defines one experiment. Parsed from flat "key = value" text with dotted
// section names; '#' starts a comment. Unknown keys are rejected.
//
struct ExperimentConfig
{
  Grid2D grid{51, 76, 20.0};

  std::vector<double> frequencies_hz{3.0, 4.0, 5.0, 6.0, 7.0};
  Index num_sources = 25;
  Index source_depth = 1;  // grid rows below the top boundary
  Index num_receivers = 74;
  Index receiver_depth = 1;
  // Median |clean datum| after source calibration; 0 keeps unit source weights.
  double data_scale = 1.0;

  std::string penalty = "students-t";
  std::optional<double> huber_mu;  // unset: mu_fraction * median |residual component|
  double mu_fraction = 0.1;
  double nu = 0.01;

  std::string solver = "lbfgs";  // lbfgs | growing-sample | incremental | stochastic-gradient
  int max_iter = 50;
  int memory = 4;
  double grad_tol = 1e-8;
  double step = 1e-6;
  std::string step_policy = "fixed";
  Index initial_sample = 1;
  Index increment = 1;
  bool use_schedule = false;  // growing-sample sizes from the without-replacement bound
  double schedule_rate = 0.9;
  bool cyclic = false;
  int record_every = 1;
  bool monitor_full = false;

  std::string sample_kind = "without-replacement";
  Index sample_size = 1;
  std::string granularity = "pair";  // pair | source

  double corruption = 0.5;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: OpenMP default

  std::string output_dir = "out";
  std::string label;
  bool wall_time = false;

  double v_top = 1500.0;
  double v_bottom = 3000.0;
  int layers = 4;
  std::vector<Anomaly> anomalies{{400.0, 500.0, 120.0, 0.25}, {600.0, 1050.0, 120.0, -0.2}};
  double v_min = 1000.0;
  double v_max = 5000.0;
  double smoothing = 6.0;  // Gaussian sigma of the initial model, in cells
  Index fixed_rows = 3;    // top rows held at the initial model during inversion

  double hist_min = -3.0;
  double hist_max = 3.0;
  int hist_bins = 61;

  void validate() const;
};

ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string &path);

/// Canonical key/value form; parse_config(to_text(c)) reproduces c.
std::map<std::string, std::string> config_entries(const ExperimentConfig &config);
std::string to_text(const ExperimentConfig &config);

}  // namespace rfwi

#endif  // RFWI_CONFIG_HPP

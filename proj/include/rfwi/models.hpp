// SPDX-License-Identifier: Apache-2.0

#ifndef RFWI_MODELS_HPP
#define RFWI_MODELS_HPP

#include <vector>

#include "rfwi/config.hpp"
#include "rfwi/helmholtz.hpp"
#include "rfwi/random.hpp"

namespace rfwi
{

struct ModelPair
{
  SlownessModel truth;
  SlownessModel initial;
};

/// Layered background with Gaussian anomalies; the initial model is the truth smoothed by
/// a Gaussian of config.smoothing cells (a copy when the radius is 0).
ModelPair make_models(const ExperimentConfig &config);

/// Separable Gaussian blur with replicated edges, sigma in cells.
SlownessModel smooth(const SlownessModel &model, double sigma);

/// Evenly spaced surface sources and receivers with unit weights and no data.
Acquisition make_acquisition(const ExperimentConfig &config);

/// One flag per (source, frequency, receiver) datum; true means the datum is zeroed.
struct CorruptionMask
{
  std::vector<std::vector<bool>> zeroed;  // [pair][receiver]
  double fraction = 0.0;
  std::uint64_t seed = 0;

  Index count_zeroed() const;
  Index count_total() const;
};

CorruptionMask make_mask(const Acquisition &acq, double fraction, RandomStream &rng);

/// Observed data plus the clean copy and the mask, which only diagnostics may read.
struct SyntheticData
{
  Acquisition observed;
  std::vector<ComplexVector> clean;
  CorruptionMask mask;
};

/// d = mask .* F(x_true) q for every (source, frequency) pair.
SyntheticData make_data(const SlownessModel &truth, const Acquisition &acq,
                        const CorruptionMask &mask);

/// Predicted data for all pairs at one model, indexed like Acquisition::data.
std::vector<ComplexVector> forward_all(const SlownessModel &model, const Acquisition &acq);

//
// Normalized histogram of real residual components (real parts, then imaginary parts).
// Values outside [lo, hi) land in the edge bins, so masses always sum to one.
//
struct Histogram
{
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> mass;

  int bin_of(double v) const;
  double bin_lo(int b) const;
  double bin_hi(int b) const;
};

Histogram residual_histogram(const std::vector<ComplexVector> &residuals, double lo, double hi,
                             int bins);

}  // namespace rfwi

#endif  // RFWI_MODELS_HPP

// SPDX-License-Identifier: Apache-2.0

#ifndef RFWI_SAMPLING_HPP
#define RFWI_SAMPLING_HPP

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rfwi/errors.hpp"
#include "rfwi/random.hpp"

namespace rfwi
{

using Index = Eigen::Index;
using RealVector = Eigen::VectorXd;

/// Objective value and gradient at one point.
struct Evaluation
{
  double value = 0.0;
  RealVector gradient;
};

//
// A fixed population of m subfunctions phi_i with phi = (1/m) sum_i phi_i. Evaluations
// must be deterministic in (i, x).
//
// Populations that share one forward operator across experiments and use a least-squares
// misfit phi_i = |r_i|^2 may also expose the residual matrix R(x) = [r_1 ... r_m] through
// averaged(): the value |R(x) w|^2 and its gradient for a weight vector w of length m.
//
class Population
{
public:
  virtual ~Population() = default;

  virtual Index size() const = 0;
  virtual Evaluation evaluate(Index i, const RealVector &x) const = 0;

  // Evaluations in the order given. Override to share work across indices.
  virtual std::vector<Evaluation> evaluate_batch(std::span<const Index> indices,
                                                 const RealVector &x) const;

  virtual bool shared_operator() const { return false; }
  virtual bool least_squares() const { return false; }
  virtual Evaluation averaged(const RealVector &weights, const RealVector &x) const;
};

enum class SampleKind
{
  WithoutReplacement,
  WithReplacement,
  DataAveraging
};

enum class WeightDistribution
{
  Rademacher,
  Gaussian
};

struct SamplePlan
{
  SampleKind kind = SampleKind::WithoutReplacement;
  Index size = 1;
  WeightDistribution weights = WeightDistribution::Rademacher;

  static SamplePlan without_replacement(Index s) { return {SampleKind::WithoutReplacement, s}; }
  static SamplePlan with_replacement(Index s) { return {SampleKind::WithReplacement, s}; }
  static SamplePlan data_averaging(Index s, WeightDistribution w)
  {
    return {SampleKind::DataAveraging, s, w};
  }

  void validate(Index m) const;
  std::string name() const;
};

SamplePlan parse_sample_plan(const std::string &kind, Index size);

/// Index sample (sorted ascending) for index plans, m x s weight matrix for data averaging.
struct SampleDraw
{
  std::vector<Index> indices;
  Eigen::MatrixXd weights;
};

SampleDraw draw(const SamplePlan &plan, Index m, RandomStream &rng);

/// Sample average (1/s) sum_{i in S} phi_i and its gradient over a drawn sample. For data
/// averaging, (1/(s m)) sum_j |R(x) w_j|^2, which is unbiased for phi.
Evaluation sample_misfit(const Population &pop, const SamplePlan &plan, const RealVector &x,
                         RandomStream &rng);
Evaluation sample_misfit(const Population &pop, const SamplePlan &plan, const SampleDraw &sample,
                         const RealVector &x);

/// Full average (1/m) sum_i phi_i.
Evaluation full_misfit(const Population &pop, const RealVector &x);

/// Sample variance (1/(m-1)) sum_i |g_i - mean|^2 of the columns of a gradient matrix.
template <typename Derived>
double gradient_variance(const Eigen::MatrixBase<Derived> &gradients)
{
  const Index m = gradients.cols();
  if (m < 2)
    throw ValidationError("gradient variance needs at least two members");
  const auto mean = gradients.rowwise().mean();
  return (gradients.colwise() - mean).squaredNorm() / static_cast<double>(m - 1);
}

/// sigma_g^2 of the population gradients at x.
double population_gradient_variance(const Population &pop, const RealVector &x);

struct VarianceEstimate
{
  double value = 0.0;
  double standard_error = 0.0;
};

/// Monte Carlo estimate of the variance of the averaged-data gradient population, the
/// variance of grad (1/m)|R(x) w|^2 over random w.
VarianceEstimate averaged_gradient_variance(const Population &pop, WeightDistribution weights,
                                            const RealVector &x, int draws, RandomStream &rng);

/// Expected squared gradient error of a sample average: (1/s)(1 - s/m) sigma2 without
/// replacement, sigma2 / s with replacement or data averaging (sigma2 is then the
/// averaged-data variance).
double predicted_error(const SamplePlan &plan, Index m, double sigma2);

//
// Sample-size schedules that drive the gradient-error bound down linearly at a given
// rate, for uniform sampling without replacement, with replacement, and deterministic
// (first s of m) selection.
//
struct ScheduleParams
{
  Index m = 0;
  double rate = 0.9;
  double beta1 = 1.0;
  double beta2 = 1.0;
  double lipschitz = 1.0;
  int iterations = 0;
  // Optional phi(x_k) - phi(x*) per iteration; without it beta_k stays at beta_0.
  std::vector<double> misfit_gap;

  void validate() const;
  double beta(int k) const;
};

enum class ScheduleStrategy
{
  WithoutReplacement,
  WithReplacement,
  Deterministic
};

double schedule_bound(ScheduleStrategy strategy, Index m, Index s, double beta);

struct ScheduleRow
{
  int k = 0;
  Index s_without = 0;
  Index s_with = 0;
  Index s_deterministic = 0;
  Index cum_without = 0;
  Index cum_with = 0;
  Index cum_deterministic = 0;
  // Bound unreachable below m; size clamped to m.
  bool clamped_without = false;
  bool clamped_with = false;
  bool clamped_deterministic = false;
};

std::vector<ScheduleRow> schedule(const ScheduleParams &params);

/// Sizes for one strategy.
std::vector<Index> schedule_sizes(const ScheduleParams &params, ScheduleStrategy strategy);

}  // namespace rfwi

#endif  // RFWI_SAMPLING_HPP

// SPDX-License-Identifier: Apache-2.0

#include "rfwi/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace rfwi
{

std::vector<Evaluation> Population::evaluate_batch(std::span<const Index> indices,
                                                   const RealVector &x) const
{
  std::vector<Evaluation> out;
  out.reserve(indices.size());
  for (Index i : indices)
    out.push_back(evaluate(i, x));
  return out;
}

Evaluation Population::averaged(const RealVector &, const RealVector &) const
{
  throw ValidationError("population does not expose a residual matrix for data averaging");
}

void SamplePlan::validate(Index m) const
{
  if (m < 1)
    throw ValidationError("population must have at least one member");
  if (size < 1)
    throw ValidationError("sample size must be at least 1");
  if (kind == SampleKind::WithoutReplacement && size > m)
    throw ValidationError("sample without replacement cannot exceed the population size (s = " +
                          std::to_string(size) + ", m = " + std::to_string(m) + ")");
}

std::string SamplePlan::name() const
{
  switch (kind)
  {
  case SampleKind::WithoutReplacement:
    return "without-replacement";
  case SampleKind::WithReplacement:
    return "with-replacement";
  case SampleKind::DataAveraging:
    return weights == WeightDistribution::Rademacher ? "rademacher" : "gaussian";
  }
  return "unknown";
}

SamplePlan parse_sample_plan(const std::string &kind, Index size)
{
  if (kind == "without-replacement")
    return SamplePlan::without_replacement(size);
  if (kind == "with-replacement")
    return SamplePlan::with_replacement(size);
  if (kind == "rademacher")
    return SamplePlan::data_averaging(size, WeightDistribution::Rademacher);
  if (kind == "gaussian")
    return SamplePlan::data_averaging(size, WeightDistribution::Gaussian);
  throw ValidationError("unknown sample kind '" + kind + "'");
}

SampleDraw draw(const SamplePlan &plan, Index m, RandomStream &rng)
{
  plan.validate(m);
  auto &engine = rng.engine();
  SampleDraw out;
  switch (plan.kind)
  {
  case SampleKind::WithoutReplacement:
  {
    // Partial Fisher-Yates.
    std::vector<Index> pool(static_cast<std::size_t>(m));
    std::iota(pool.begin(), pool.end(), Index{0});
    for (Index j = 0; j < plan.size; ++j)
    {
      std::uniform_int_distribution<Index> pick(j, m - 1);
      std::swap(pool[static_cast<std::size_t>(j)], pool[static_cast<std::size_t>(pick(engine))]);
    }
    out.indices.assign(pool.begin(), pool.begin() + plan.size);
    break;
  }
  case SampleKind::WithReplacement:
  {
    std::uniform_int_distribution<Index> pick(0, m - 1);
    out.indices.resize(static_cast<std::size_t>(plan.size));
    for (auto &i : out.indices)
      i = pick(engine);
    break;
  }
  case SampleKind::DataAveraging:
  {
    out.weights.resize(m, plan.size);
    if (plan.weights == WeightDistribution::Rademacher)
    {
      std::bernoulli_distribution coin(0.5);
      for (Index j = 0; j < plan.size; ++j)
        for (Index i = 0; i < m; ++i)
          out.weights(i, j) = coin(engine) ? 1.0 : -1.0;
    }
    else
    {
      std::normal_distribution<double> normal(0.0, 1.0);
      for (Index j = 0; j < plan.size; ++j)
        for (Index i = 0; i < m; ++i)
          out.weights(i, j) = normal(engine);
    }
    break;
  }
  }
  // Summation order is then independent of draw order, so s = m reproduces the full sum.
  std::sort(out.indices.begin(), out.indices.end());
  return out;
}

namespace
{

Evaluation average(const std::vector<Evaluation> &parts, Index dim, double scale)
{
  Evaluation total{0.0, RealVector::Zero(dim)};
  for (const auto &e : parts)
  {
    total.value += e.value;
    total.gradient += e.gradient;
  }
  total.value *= scale;
  total.gradient *= scale;
  return total;
}

void require_data_averaging(const Population &pop)
{
  if (!pop.least_squares())
    throw ValidationError("data averaging is only valid for the least-squares misfit");
  if (!pop.shared_operator())
    throw ValidationError("data averaging needs one forward operator shared by all experiments");
}

}  // namespace

Evaluation sample_misfit(const Population &pop, const SamplePlan &plan, const SampleDraw &sample,
                         const RealVector &x)
{
  plan.validate(pop.size());
  const double s = static_cast<double>(plan.size);
  if (plan.kind == SampleKind::DataAveraging)
  {
    require_data_averaging(pop);
    if (sample.weights.rows() != pop.size() || sample.weights.cols() != plan.size)
      throw ValidationError("weight matrix shape does not match plan");
    std::vector<Evaluation> parts;
    parts.reserve(static_cast<std::size_t>(plan.size));
    for (Index j = 0; j < plan.size; ++j)
      parts.push_back(pop.averaged(sample.weights.col(j), x));
    return average(parts, x.size(), 1.0 / (s * static_cast<double>(pop.size())));
  }
  if (static_cast<Index>(sample.indices.size()) != plan.size)
    throw ValidationError("index sample size does not match plan");
  return average(pop.evaluate_batch(sample.indices, x), x.size(), 1.0 / s);
}

Evaluation sample_misfit(const Population &pop, const SamplePlan &plan, const RealVector &x,
                         RandomStream &rng)
{
  if (plan.kind == SampleKind::DataAveraging)
    require_data_averaging(pop);
  return sample_misfit(pop, plan, draw(plan, pop.size(), rng), x);
}

Evaluation full_misfit(const Population &pop, const RealVector &x)
{
  std::vector<Index> all(static_cast<std::size_t>(pop.size()));
  std::iota(all.begin(), all.end(), Index{0});
  return average(pop.evaluate_batch(all, x), x.size(), 1.0 / static_cast<double>(pop.size()));
}

double population_gradient_variance(const Population &pop, const RealVector &x)
{
  const Index m = pop.size();
  std::vector<Index> all(static_cast<std::size_t>(m));
  std::iota(all.begin(), all.end(), Index{0});
  const auto parts = pop.evaluate_batch(all, x);
  Eigen::MatrixXd grads(x.size(), m);
  for (Index i = 0; i < m; ++i)
    grads.col(i) = parts[static_cast<std::size_t>(i)].gradient;
  return gradient_variance(grads);
}

VarianceEstimate averaged_gradient_variance(const Population &pop, WeightDistribution weights,
                                            const RealVector &x, int draws, RandomStream &rng)
{
  require_data_averaging(pop);
  if (draws < 2)
    throw ValidationError("variance estimate needs at least two draws");
  const Index m = pop.size();
  const SamplePlan plan = SamplePlan::data_averaging(1, weights);
  Eigen::MatrixXd grads(x.size(), draws);
  for (int j = 0; j < draws; ++j)
  {
    const SampleDraw d = draw(plan, m, rng);
    grads.col(j) = pop.averaged(d.weights.col(0), x).gradient / static_cast<double>(m);
  }
  const RealVector mean = grads.rowwise().mean();
  RealVector sq(draws);
  for (int j = 0; j < draws; ++j)
    sq[j] = (grads.col(j) - mean).squaredNorm();
  VarianceEstimate est;
  est.value = sq.sum() / static_cast<double>(draws - 1);
  const double spread = std::sqrt((sq.array() - sq.mean()).square().sum() / (draws - 1));
  est.standard_error = spread / std::sqrt(static_cast<double>(draws));
  return est;
}

double predicted_error(const SamplePlan &plan, Index m, double sigma2)
{
  plan.validate(m);
  if (sigma2 < 0.0)
    throw ValidationError("variance must be non-negative");
  const double s = static_cast<double>(plan.size);
  if (plan.kind == SampleKind::WithoutReplacement)
    return (1.0 / s) * (1.0 - s / static_cast<double>(m)) * sigma2;
  return sigma2 / s;
}

//
// Schedules
//

void ScheduleParams::validate() const
{
  if (m < 2)
    throw ValidationError("schedule needs a population of at least 2");
  if (!(rate > 0.0 && rate < 1.0))
    throw ValidationError("schedule rate must lie in (0, 1)");
  if (beta1 < 0.0 || beta2 < 1.0)
    throw ValidationError("schedule needs beta1 >= 0 and beta2 >= 1");
  if (iterations < 0)
    throw ValidationError("iteration count must be non-negative");
}

double ScheduleParams::beta(int k) const
{
  if (misfit_gap.empty())
    return beta1;
  const auto idx = std::min<std::size_t>(static_cast<std::size_t>(k), misfit_gap.size() - 1);
  return beta1 + 2.0 * beta2 * lipschitz * misfit_gap[idx];
}

double schedule_bound(ScheduleStrategy strategy, Index m, Index s, double beta)
{
  const double md = static_cast<double>(m);
  const double sd = static_cast<double>(s);
  switch (strategy)
  {
  case ScheduleStrategy::WithoutReplacement:
    return (1.0 / sd) * (1.0 - sd / md) * (md / (md - 1.0)) * beta;
  case ScheduleStrategy::WithReplacement:
    return (1.0 / sd) * (md / (md - 1.0)) * beta;
  case ScheduleStrategy::Deterministic:
  {
    const double frac = (md - sd) / md;
    return 4.0 * frac * frac * beta;
  }
  }
  return 0.0;
}

namespace
{

// Smallest s in [1, m] with bound(s) <= target; bounds decrease in s.
std::pair<Index, bool> smallest_size(ScheduleStrategy strategy, Index m, double beta,
                                     double target)
{
  if (schedule_bound(strategy, m, m, beta) > target)
    return {m, true};
  Index lo = 1;
  Index hi = m;
  while (lo < hi)
  {
    const Index mid = lo + (hi - lo) / 2;
    if (schedule_bound(strategy, m, mid, beta) <= target)
      hi = mid;
    else
      lo = mid + 1;
  }
  return {lo, false};
}

}  // namespace

std::vector<Index> schedule_sizes(const ScheduleParams &params, ScheduleStrategy strategy)
{
  params.validate();
  std::vector<Index> sizes;
  sizes.reserve(static_cast<std::size_t>(params.iterations));
  const double initial = schedule_bound(strategy, params.m, 1, params.beta(0));
  for (int k = 0; k < params.iterations; ++k)
  {
    const double target = std::pow(params.rate, k) * initial;
    sizes.push_back(smallest_size(strategy, params.m, params.beta(k), target).first);
  }
  return sizes;
}

std::vector<ScheduleRow> schedule(const ScheduleParams &params)
{
  params.validate();
  const ScheduleStrategy strategies[3] = {ScheduleStrategy::WithoutReplacement,
                                          ScheduleStrategy::WithReplacement,
                                          ScheduleStrategy::Deterministic};
  double initial[3];
  for (int j = 0; j < 3; ++j)
    initial[j] = schedule_bound(strategies[j], params.m, 1, params.beta(0));

  std::vector<ScheduleRow> rows;
  rows.reserve(static_cast<std::size_t>(params.iterations));
  Index cum[3] = {0, 0, 0};
  for (int k = 0; k < params.iterations; ++k)
  {
    Index size[3];
    bool clamped[3];
    for (int j = 0; j < 3; ++j)
    {
      const double target = std::pow(params.rate, k) * initial[j];
      std::tie(size[j], clamped[j]) =
          smallest_size(strategies[j], params.m, params.beta(k), target);
      cum[j] += size[j];
    }
    rows.push_back({k, size[0], size[1], size[2], cum[0], cum[1], cum[2], clamped[0], clamped[1],
                    clamped[2]});
  }
  return rows;
}

}  // namespace rfwi

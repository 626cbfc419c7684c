// SPDX-License-Identifier: Apache-2.0

#include "rfwi/fwi_objective.hpp"

#include <limits>
#include <optional>

namespace rfwi
{

FwiPopulation::FwiPopulation(Grid2D grid, Acquisition observed, Penalty penalty,
                             Granularity granularity, double parameter_scale)
  : grid_(grid), acq_(std::move(observed)), penalty_(penalty), granularity_(granularity),
    scale_(parameter_scale), active_(RealVector::Ones(grid.size()))
{
  grid_.validate();
  acq_.validate(grid_);
  if (acq_.data.empty())
    throw ValidationError("FWI objective needs observed data");
  if (!(scale_ > 0.0))
    throw ValidationError("parameter scale must be positive");
}

Index FwiPopulation::size() const
{
  return granularity_ == Granularity::Pair ? acq_.num_sources() * acq_.num_frequencies()
                                           : acq_.num_sources();
}

std::vector<std::pair<Index, Index>> FwiPopulation::pairs_of(Index i) const
{
  if (i < 0 || i >= size())
    throw ValidationError("experiment index out of range");
  if (granularity_ == Granularity::Pair)
    return {{i / acq_.num_frequencies(), i % acq_.num_frequencies()}};
  std::vector<std::pair<Index, Index>> out;
  for (Index f = 0; f < acq_.num_frequencies(); ++f)
    out.emplace_back(i, f);
  return out;
}

void FwiPopulation::fix_top_rows(Index rows)
{
  if (rows < 0 || rows >= grid_.nz)
    throw ValidationError("fixed rows must lie in [0, nz)");
  active_.setOnes();
  for (Index ix = 0; ix < grid_.nx; ++ix)
    for (Index iz = 0; iz < rows; ++iz)
      active_[grid_.index(iz, ix)] = 0.0;
}

RealVector FwiPopulation::to_parameters(const SlownessModel &model) const
{
  return model.values() / scale_;
}

SlownessModel FwiPopulation::to_model(const RealVector &x) const
{
  return SlownessModel(grid_, scale_ * x);
}

namespace
{

bool feasible(const RealVector &x)
{
  return x.allFinite() && (x.array() > 0.0).all();
}

// Factorized systems for the requested frequencies, empty elsewhere.
std::vector<std::optional<HelmholtzSystem>> build_systems(const SlownessModel &model,
                                                          const Acquisition &acq,
                                                          const std::vector<bool> &needed)
{
  std::vector<std::optional<HelmholtzSystem>> systems(needed.size());
  const int nf = static_cast<int>(needed.size());
#pragma omp parallel for schedule(dynamic)
  for (int f = 0; f < nf; ++f)
  {
    if (!needed[static_cast<std::size_t>(f)])
      continue;
    systems[static_cast<std::size_t>(f)].emplace(
        assemble(model, acq.frequencies[static_cast<std::size_t>(f)]));
    systems[static_cast<std::size_t>(f)]->factorize();
  }
  return systems;
}

}  // namespace

Evaluation FwiPopulation::evaluate(Index i, const RealVector &x) const
{
  const Index one[1] = {i};
  return evaluate_batch(one, x).front();
}

std::vector<Evaluation> FwiPopulation::evaluate_batch(std::span<const Index> indices,
                                                      const RealVector &x) const
{
  if (x.size() != grid_.size())
    throw ValidationError("parameter vector does not match grid size");

  // Flatten to (slot, source, frequency) tasks.
  struct Task
  {
    std::size_t slot;
    Index s;
    Index f;
  };
  std::vector<Task> tasks;
  std::vector<bool> needed(acq_.frequencies.size(), false);
  for (std::size_t j = 0; j < indices.size(); ++j)
    for (auto [s, f] : pairs_of(indices[j]))
    {
      tasks.push_back({j, s, f});
      needed[static_cast<std::size_t>(f)] = true;
    }

  std::vector<Evaluation> out(indices.size(), Evaluation{0.0, RealVector::Zero(x.size())});
  last_factorizations_ = 0;
  if (!feasible(x))
  {
    for (auto &e : out)
      e.value = std::numeric_limits<double>::infinity();
    return out;
  }

  const SlownessModel model = to_model(x);
  const auto systems = build_systems(model, acq_, needed);
  for (const auto &sys : systems)
    if (sys)
      last_factorizations_ += sys->factorization_count();

  std::vector<double> values(tasks.size());
  std::vector<RealVector> grads(tasks.size());
  const int ntasks = static_cast<int>(tasks.size());
#pragma omp parallel for schedule(dynamic)
  for (int t = 0; t < ntasks; ++t)
  {
    const Task &task = tasks[static_cast<std::size_t>(t)];
    const HelmholtzSystem &system = *systems[static_cast<std::size_t>(task.f)];
    const Wavefield u = system.solve(source_term(grid_, acq_, task.s, task.f));
    const ComplexVector r =
        acq_.observed(task.s, task.f) - restrict_to_receivers(u, acq_.receivers);
    values[static_cast<std::size_t>(t)] = value(penalty_, r);
    grads[static_cast<std::size_t>(t)] =
        scale_ * gradient_contribution(system, u, acq_.receivers, influence(penalty_, r))
                     .cwiseProduct(active_);
  }

  // Sequential reduction in task order keeps results independent of thread scheduling.
  for (std::size_t t = 0; t < tasks.size(); ++t)
  {
    out[tasks[t].slot].value += values[t];
    out[tasks[t].slot].gradient += grads[t];
  }
  return out;
}

Evaluation FwiPopulation::averaged(const RealVector &weights, const RealVector &x) const
{
  if (weights.size() != size())
    throw ValidationError("weight vector length must equal the population size");
  if (x.size() != grid_.size())
    throw ValidationError("parameter vector does not match grid size");
  if (!feasible(x))
    return {std::numeric_limits<double>::infinity(), RealVector::Zero(x.size())};

  const Index nf = acq_.num_frequencies();
  auto weight_of = [&](Index s, Index f)
  { return granularity_ == Granularity::Pair ? weights[acq_.pair_index(s, f)] : weights[s]; };

  const SlownessModel model = to_model(x);
  const auto systems = build_systems(model, acq_, std::vector<bool>(static_cast<std::size_t>(nf), true));
  std::vector<double> values(static_cast<std::size_t>(nf));
  std::vector<RealVector> grads(static_cast<std::size_t>(nf));
#pragma omp parallel for schedule(dynamic)
  for (int fi = 0; fi < static_cast<int>(nf); ++fi)
  {
    const Index f = fi;
    const HelmholtzSystem &system = *systems[static_cast<std::size_t>(f)];
    Wavefield meta_source = Wavefield::Zero(grid_.size());
    ComplexVector meta_data = ComplexVector::Zero(acq_.num_receivers());
    for (Index s = 0; s < acq_.num_sources(); ++s)
    {
      const double w = weight_of(s, f);
      meta_source[acq_.sources[static_cast<std::size_t>(s)].position] +=
          w * acq_.sources[static_cast<std::size_t>(s)].weights[static_cast<std::size_t>(f)];
      meta_data += w * acq_.observed(s, f);
    }
    const Wavefield u = system.solve(meta_source);
    const ComplexVector r = meta_data - restrict_to_receivers(u, acq_.receivers);
    values[static_cast<std::size_t>(f)] = r.squaredNorm();
    grads[static_cast<std::size_t>(f)] =
        scale_ * gradient_contribution(system, u, acq_.receivers, ComplexVector(2.0 * r))
                     .cwiseProduct(active_);
  }

  Evaluation total{0.0, RealVector::Zero(x.size())};
  for (Index f = 0; f < nf; ++f)
  {
    total.value += values[static_cast<std::size_t>(f)];
    total.gradient += grads[static_cast<std::size_t>(f)];
  }
  return total;
}

std::vector<ComplexVector> FwiPopulation::residuals(const RealVector &x) const
{
  const SlownessModel model = to_model(x);
  const auto systems = build_systems(model, acq_,
                                     std::vector<bool>(acq_.frequencies.size(), true));
  std::vector<ComplexVector> out(static_cast<std::size_t>(acq_.num_sources() * acq_.num_frequencies()));
  for (Index s = 0; s < acq_.num_sources(); ++s)
    for (Index f = 0; f < acq_.num_frequencies(); ++f)
      out[static_cast<std::size_t>(acq_.pair_index(s, f))] =
          residual(*systems[static_cast<std::size_t>(f)], acq_, s, f);
  return out;
}

}  // namespace rfwi

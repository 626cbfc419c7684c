// SPDX-License-Identifier: Apache-2.0

#ifndef RFWI_FWI_OBJECTIVE_HPP
#define RFWI_FWI_OBJECTIVE_HPP

#include <vector>

#include "rfwi/helmholtz.hpp"
#include "rfwi/misfit.hpp"
#include "rfwi/sampling.hpp"

namespace rfwi
{

enum class Granularity
{
  Pair,   // one experiment per (source, frequency)
  Source  // one experiment per source, all frequencies
};

//
// Waveform misfit as a population of experiments. Parameters are the squared slowness
// divided by parameter_scale, so x_phys = scale * x and gradients pick up the same factor.
// Each experiment's misfit is sum_j rho(r_j) over its residuals.
//
// Evaluations at infeasible parameters (non-positive slowness) return +inf and a zero
// gradient so that line searches can back off.
//
class FwiPopulation : public Population
{
public:
  FwiPopulation(Grid2D grid, Acquisition observed, Penalty penalty,
                Granularity granularity = Granularity::Pair, double parameter_scale = 1.0);

  Index size() const override;
  Evaluation evaluate(Index i, const RealVector &x) const override;
  std::vector<Evaluation> evaluate_batch(std::span<const Index> indices,
                                         const RealVector &x) const override;

  bool shared_operator() const override { return true; }
  bool least_squares() const override { return penalty_.kind() == PenaltyKind::LeastSquares; }

  // |R(x) w|^2 through per-frequency meta-sources q~ = sum_i w_i q_i and meta-data.
  Evaluation averaged(const RealVector &weights, const RealVector &x) const override;

  const Grid2D &grid() const { return grid_; }
  const Acquisition &acquisition() const { return acq_; }
  const Penalty &penalty() const { return penalty_; }
  double parameter_scale() const { return scale_; }

  RealVector to_parameters(const SlownessModel &model) const;
  SlownessModel to_model(const RealVector &x) const;

  // Residuals of every (source, frequency) pair, indexed like Acquisition::data.
  std::vector<ComplexVector> residuals(const RealVector &x) const;

  // Holds the top `rows` grid rows at their current values: gradient entries there are
  // zeroed, so solvers never move them.
  void fix_top_rows(Index rows);
  const RealVector &active() const { return active_; }

  // Factorizations performed by the most recent batch evaluation.
  int last_factorizations() const { return last_factorizations_; }

private:
  std::vector<std::pair<Index, Index>> pairs_of(Index i) const;

  Grid2D grid_;
  Acquisition acq_;
  Penalty penalty_;
  Granularity granularity_;
  double scale_;
  RealVector active_;
  mutable int last_factorizations_ = 0;
};

}  // namespace rfwi

#endif  // RFWI_FWI_OBJECTIVE_HPP

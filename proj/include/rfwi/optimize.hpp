// SPDX-License-Identifier: Apache-2.0

#ifndef RFWI_OPTIMIZE_HPP
#define RFWI_OPTIMIZE_HPP

#include <deque>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rfwi/sampling.hpp"

namespace rfwi
{

//
// Common objective interface for the solvers: the full average, sample averages under a
// plan, and single subfunctions of one population.
//
class ObjectiveOracle
{
public:
  explicit ObjectiveOracle(const Population &population) : population_(&population) {}

  Index m() const { return population_->size(); }
  const Population &population() const { return *population_; }

  Evaluation full(const RealVector &x) const { return full_misfit(*population_, x); }
  Evaluation sampled(const RealVector &x, const SamplePlan &plan, const SampleDraw &sample) const
  {
    return sample_misfit(*population_, plan, sample, x);
  }
  Evaluation single(const RealVector &x, Index i) const { return population_->evaluate(i, x); }

private:
  const Population *population_;
};

/// Limited-memory inverse Hessian approximation built from curvature pairs.
class LbfgsMemory
{
public:
  explicit LbfgsMemory(int capacity = 4, double curvature_guard = 1e-10);

  // Stores (dx, dg) when <dx, dg> > guard |dx| |dg|; returns whether it was kept.
  bool update(const RealVector &dx, const RealVector &dg);

  // Two-loop recursion: returns -H^{-1} g. Plain -g while the memory is empty.
  RealVector direction(const RealVector &g) const;

  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  void clear() { pairs_.clear(); }

private:
  struct Pair
  {
    RealVector dx;
    RealVector dg;
    double rho;
  };

  int capacity_;
  double guard_;
  std::deque<Pair> pairs_;
};

struct StepPolicy
{
  enum class Kind
  {
    Fixed,                 // alpha
    DecreasingOverPasses,  // alpha / max(1, floor(k / m))
    DecreasingHarmonic     // alpha / (k + 1)
  };

  Kind kind = Kind::Fixed;
  double alpha = 1.0;

  static StepPolicy fixed(double a) { return {Kind::Fixed, a}; }
  static StepPolicy over_passes(double a) { return {Kind::DecreasingOverPasses, a}; }
  static StepPolicy harmonic(double a) { return {Kind::DecreasingHarmonic, a}; }

  double step(long k, Index m) const;
  void validate() const;
  std::string name() const;
};

StepPolicy parse_step_policy(const std::string &kind, double alpha);

struct RunEntry
{
  long iter = 0;
  double phi = 0.0;
  bool phi_sampled = false;
  double grad_norm = 0.0;
  double model_error = 0.0;  // NaN without a reference model
  long cum_evals = 0;
  double wall_ms = 0.0;
  std::string iterate_hash;
};

struct RunRecord
{
  std::string solver;
  std::vector<RunEntry> entries;
  std::vector<Index> sample_sizes;
  RealVector final_x;
  std::string termination;  // "max_iter", "gradient_tolerance", or a diagnostic

  // Columns iter, phi, grad_norm, model_error, cum_evals, wall_ms. Wall time is written as
  // 0 unless requested so that repeated runs produce identical files.
  void write_csv(std::ostream &out, bool include_wall_time = false) const;
};

struct SolverOptions
{
  int max_iter = 50;
  double grad_tol = 1e-8;  // relative to the initial gradient norm
  int memory = 4;
  double curvature_guard = 1e-10;
  double armijo_c1 = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 30;
  int record_every = 1;
  // Record the full objective instead of the sampled one (not counted as evaluations).
  bool monitor_full = false;
  std::function<double(const RealVector &)> model_error;
};

// Full-gradient L-BFGS with Armijo backtracking.
RunRecord lbfgs(const ObjectiveOracle &oracle, const RealVector &x0,
                const SolverOptions &options = {});

// x_{k+1} = x_k - alpha_k grad phi_S(x_k), sample redrawn every iteration.
RunRecord stochastic_gradient(const ObjectiveOracle &oracle, const RealVector &x0,
                              const SamplePlan &plan, const StepPolicy &policy,
                              RandomStream &rng, const SolverOptions &options = {});

// x_{k+1} = x_k - alpha_k grad phi_{i_k}(x_k) with i_k uniform (or cyclic).
RunRecord incremental_gradient(const ObjectiveOracle &oracle, const RealVector &x0,
                               const StepPolicy &policy, RandomStream &rng,
                               const SolverOptions &options = {}, bool cyclic = false);

struct GrowingSampleOptions
{
  Index initial_size = 1;
  Index increment = 1;
  // Explicit per-iteration sizes; overrides the increment rule (last entry is held).
  std::vector<Index> schedule;
  bool quasi_newton = true;
  // Fixed step (e.g. 1/L) instead of Armijo backtracking.
  std::optional<double> fixed_step;

  Index size_at(int k, Index m) const;
};

//
// Growing-sample quasi-Newton method. Each iteration draws a fresh sample without
// replacement, forms an L-BFGS direction from the sampled gradient, and backtracks on the
// sampled objective. Curvature pairs use gradients of consecutive (different) samples.
//
RunRecord growing_sample(const ObjectiveOracle &oracle, const RealVector &x0,
                         const GrowingSampleOptions &growth, RandomStream &rng,
                         const SolverOptions &options = {});

/// Hex digest identifying an iterate.
std::string iterate_hash(const RealVector &x);

}  // namespace rfwi

#endif  // RFWI_OPTIMIZE_HPP

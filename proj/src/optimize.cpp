// SPDX-License-Identifier: Apache-2.0

#include "rfwi/optimize.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

#include "rfwi/io.hpp"

namespace rfwi
{

//
// LbfgsMemory
//

LbfgsMemory::LbfgsMemory(int capacity, double curvature_guard)
  : capacity_(capacity), guard_(curvature_guard)
{
  if (capacity < 1)
    throw ValidationError("L-BFGS memory must hold at least one pair");
}

bool LbfgsMemory::update(const RealVector &dx, const RealVector &dg)
{
  const double curvature = dx.dot(dg);
  if (!(curvature > guard_ * dx.norm() * dg.norm()))
    return false;
  if (static_cast<int>(pairs_.size()) == capacity_)
    pairs_.pop_front();
  pairs_.push_back({dx, dg, 1.0 / curvature});
  return true;
}

RealVector LbfgsMemory::direction(const RealVector &g) const
{
  RealVector q = g;
  if (pairs_.empty())
    return -q;
  std::vector<double> a(pairs_.size());
  for (std::size_t j = pairs_.size(); j-- > 0;)
  {
    const auto &p = pairs_[j];
    a[j] = p.rho * p.dx.dot(q);
    q -= a[j] * p.dg;
  }
  const auto &last = pairs_.back();
  q *= last.dx.dot(last.dg) / last.dg.squaredNorm();
  for (std::size_t j = 0; j < pairs_.size(); ++j)
  {
    const auto &p = pairs_[j];
    const double b = p.rho * p.dg.dot(q);
    q += (a[j] - b) * p.dx;
  }
  return -q;
}

//
// StepPolicy
//

double StepPolicy::step(long k, Index m) const
{
  switch (kind)
  {
  case Kind::Fixed:
    return alpha;
  case Kind::DecreasingOverPasses:
  {
    const long passes = k / static_cast<long>(m);
    return alpha / static_cast<double>(passes < 1 ? 1 : passes);
  }
  case Kind::DecreasingHarmonic:
    return alpha / static_cast<double>(k + 1);
  }
  return alpha;
}

void StepPolicy::validate() const
{
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw ValidationError("step size must be positive");
}

std::string StepPolicy::name() const
{
  switch (kind)
  {
  case Kind::Fixed:
    return "fixed";
  case Kind::DecreasingOverPasses:
    return "passes";
  case Kind::DecreasingHarmonic:
    return "harmonic";
  }
  return "unknown";
}

StepPolicy parse_step_policy(const std::string &kind, double alpha)
{
  StepPolicy p;
  if (kind == "fixed")
    p = StepPolicy::fixed(alpha);
  else if (kind == "passes")
    p = StepPolicy::over_passes(alpha);
  else if (kind == "harmonic")
    p = StepPolicy::harmonic(alpha);
  else
    throw ValidationError("unknown step policy '" + kind + "'");
  p.validate();
  return p;
}

//
// RunRecord
//

void RunRecord::write_csv(std::ostream &out, bool include_wall_time) const
{
  out << "iter,phi,grad_norm,model_error,cum_evals,wall_ms\n";
  for (const auto &e : entries)
  {
    out << e.iter << ',' << format_double(e.phi) << ',' << format_double(e.grad_norm) << ','
        << format_double(e.model_error) << ',' << e.cum_evals << ','
        << format_double(include_wall_time ? e.wall_ms : 0.0) << '\n';
  }
}

std::string iterate_hash(const RealVector &x)
{
  const auto *bytes = reinterpret_cast<const unsigned char *>(x.data());
  return sha256_hex(std::span(bytes, static_cast<std::size_t>(x.size()) * sizeof(double)))
      .substr(0, 16);
}

namespace
{

using Clock = std::chrono::steady_clock;

void require_finite(const RealVector &x0)
{
  if (!x0.allFinite())
    throw ValidationError("initial iterate must be finite");
}

class Recorder
{
public:
  Recorder(RunRecord &record, const ObjectiveOracle &oracle, const SolverOptions &options)
    : record_(record), oracle_(oracle), options_(options), start_(Clock::now())
  {
  }

  bool due(long k) const { return options_.record_every <= 1 || k % options_.record_every == 0; }

  void add(long k, const RealVector &x, const Evaluation &e, bool sampled, long cum)
  {
    RunEntry entry;
    entry.iter = k;
    if (options_.monitor_full && sampled)
    {
      const Evaluation full = oracle_.full(x);
      entry.phi = full.value;
      entry.grad_norm = full.gradient.norm();
      entry.phi_sampled = false;
    }
    else
    {
      entry.phi = e.value;
      entry.grad_norm = e.gradient.norm();
      entry.phi_sampled = sampled;
    }
    entry.model_error =
        options_.model_error ? options_.model_error(x) : std::numeric_limits<double>::quiet_NaN();
    entry.cum_evals = cum;
    entry.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start_).count();
    entry.iterate_hash = iterate_hash(x);
    record_.entries.push_back(std::move(entry));
  }

private:
  RunRecord &record_;
  const ObjectiveOracle &oracle_;
  const SolverOptions &options_;
  Clock::time_point start_;
};

//
// Shared quasi-Newton loop. The evaluator maps (x, k) to the objective the line search
// runs on at iteration k: the full average for lbfgs, a fresh sample for growing_sample.
//
struct QuasiNewtonSetup
{
  std::string name;
  bool sampled = false;
  bool quasi_newton = true;
  std::optional<double> fixed_step;
  std::function<Index(int)> size_at;
  // Draws the batch for iteration k (ignored for the full objective).
  std::function<SampleDraw(int, Index)> draw_batch;
};

RunRecord quasi_newton_loop(const ObjectiveOracle &oracle, const RealVector &x0,
                            const SolverOptions &options, const QuasiNewtonSetup &setup)
{
  require_finite(x0);
  if (options.max_iter < 0)
    throw ValidationError("max_iter must be non-negative");

  RunRecord record;
  record.solver = setup.name;
  Recorder recorder(record, oracle, options);
  LbfgsMemory memory(options.memory, options.curvature_guard);

  auto evaluate = [&](const RealVector &x, const SampleDraw &batch, Index s)
  {
    if (!setup.sampled)
      return oracle.full(x);
    return oracle.sampled(x, SamplePlan::without_replacement(s), batch);
  };

  RealVector x = x0;
  Index s = setup.size_at(0);
  SampleDraw batch = setup.draw_batch(0, s);
  Evaluation current = evaluate(x, batch, s);
  if (!std::isfinite(current.value))
    throw ValidationError("objective is not finite at the initial iterate");
  const double g0 = current.gradient.norm();
  long cum = 0;
  recorder.add(0, x, current, setup.sampled, cum);
  record.termination = "max_iter";

  RealVector prev_x;
  RealVector prev_g;
  for (int k = 0; k < options.max_iter; ++k)
  {
    if (k > 0 && setup.quasi_newton)
      memory.update(x - prev_x, current.gradient - prev_g);

    const RealVector &g = current.gradient;
    if (g.norm() <= options.grad_tol * g0 || g0 == 0.0)
    {
      record.termination = "gradient_tolerance";
      break;
    }

    RealVector p = setup.quasi_newton ? memory.direction(g) : RealVector(-g);
    double slope = g.dot(p);
    if (!(slope < 0.0))
    {
      memory.clear();
      p = -g;
      slope = -g.squaredNorm();
    }

    record.sample_sizes.push_back(s);
    RealVector x_next;
    Evaluation accepted;
    if (setup.fixed_step)
    {
      x_next = x + *setup.fixed_step * p;
      accepted = evaluate(x_next, batch, s);
    }
    else
    {
      // Unit step once curvature information exists, a unit-length step before that.
      double alpha = memory.empty() ? 1.0 / p.norm() : 1.0;
      bool found = false;
      for (int bt = 0; bt <= options.max_backtracks; ++bt)
      {
        RealVector trial = x + alpha * p;
        Evaluation e = evaluate(trial, batch, s);
        if (std::isfinite(e.value) && e.value <= current.value + options.armijo_c1 * alpha * slope)
        {
          x_next = std::move(trial);
          accepted = std::move(e);
          found = true;
          break;
        }
        alpha *= options.backtrack;
      }
      if (!found)
      {
        record.sample_sizes.pop_back();
        record.termination = "line search failed after " + std::to_string(options.max_backtracks) +
                             " backtracks at iteration " + std::to_string(k);
        break;
      }
    }

    cum += static_cast<long>(s);
    prev_x = x;
    prev_g = current.gradient;
    x = std::move(x_next);
    const long iter = k + 1;
    if (recorder.due(iter) || iter == options.max_iter)
      recorder.add(iter, x, accepted, setup.sampled, cum);

    if (iter == options.max_iter)
      break;
    if (setup.sampled)
    {
      s = setup.size_at(k + 1);
      batch = setup.draw_batch(k + 1, s);
      current = evaluate(x, batch, s);
    }
    else
    {
      current = std::move(accepted);
    }
  }
  // Always close the record with the state the solver stopped at.
  if (record.entries.back().iterate_hash != iterate_hash(x))
    recorder.add(static_cast<long>(record.sample_sizes.size()), x, current, setup.sampled, cum);
  record.final_x = x;
  return record;
}

}  // namespace

RunRecord lbfgs(const ObjectiveOracle &oracle, const RealVector &x0, const SolverOptions &options)
{
  QuasiNewtonSetup setup;
  setup.name = "lbfgs";
  setup.sampled = false;
  const Index m = oracle.m();
  setup.size_at = [m](int) { return m; };
  setup.draw_batch = [](int, Index) { return SampleDraw{}; };
  return quasi_newton_loop(oracle, x0, options, setup);
}

Index GrowingSampleOptions::size_at(int k, Index m) const
{
  Index s = 0;
  if (!schedule.empty())
    s = schedule[std::min<std::size_t>(static_cast<std::size_t>(k), schedule.size() - 1)];
  else
    s = initial_size + increment * static_cast<Index>(k);
  return std::clamp<Index>(s, 1, m);
}

RunRecord growing_sample(const ObjectiveOracle &oracle, const RealVector &x0,
                         const GrowingSampleOptions &growth, RandomStream &rng,
                         const SolverOptions &options)
{
  if (growth.initial_size < 1 || growth.increment < 0)
    throw ValidationError("growing sample needs initial size >= 1 and increment >= 0");
  if (growth.fixed_step && !(*growth.fixed_step > 0.0))
    throw ValidationError("fixed step must be positive");
  QuasiNewtonSetup setup;
  setup.name = "growing-sample";
  setup.sampled = true;
  setup.quasi_newton = growth.quasi_newton;
  setup.fixed_step = growth.fixed_step;
  const Index m = oracle.m();
  setup.size_at = [&growth, m](int k) { return growth.size_at(k, m); };
  setup.draw_batch = [&rng, m](int, Index s)
  { return draw(SamplePlan::without_replacement(s), m, rng); };
  return quasi_newton_loop(oracle, x0, options, setup);
}

RunRecord stochastic_gradient(const ObjectiveOracle &oracle, const RealVector &x0,
                              const SamplePlan &plan, const StepPolicy &policy,
                              RandomStream &rng, const SolverOptions &options)
{
  require_finite(x0);
  policy.validate();
  plan.validate(oracle.m());
  RunRecord record;
  record.solver = "stochastic-gradient";
  record.termination = "max_iter";
  Recorder recorder(record, oracle, options);

  RealVector x = x0;
  const long s = static_cast<long>(plan.size);
  for (long k = 0; k < options.max_iter; ++k)
  {
    const SampleDraw sample = draw(plan, oracle.m(), rng);
    const Evaluation e = oracle.sampled(x, plan, sample);
    if (recorder.due(k))
      recorder.add(k, x, e, true, s * k);
    record.sample_sizes.push_back(plan.size);
    x -= policy.step(k, oracle.m()) * e.gradient;
  }
  // Closing entry on an extra, uncounted sample.
  const SampleDraw sample = draw(plan, oracle.m(), rng);
  recorder.add(options.max_iter, x, oracle.sampled(x, plan, sample), true, s * options.max_iter);
  record.final_x = x;
  return record;
}

RunRecord incremental_gradient(const ObjectiveOracle &oracle, const RealVector &x0,
                               const StepPolicy &policy, RandomStream &rng,
                               const SolverOptions &options, bool cyclic)
{
  require_finite(x0);
  policy.validate();
  RunRecord record;
  record.solver = cyclic ? "incremental-cyclic" : "incremental";
  record.termination = "max_iter";
  Recorder recorder(record, oracle, options);

  const Index m = oracle.m();
  std::uniform_int_distribution<Index> pick(0, m - 1);
  RealVector x = x0;
  for (long k = 0; k < options.max_iter; ++k)
  {
    const Index i = cyclic ? static_cast<Index>(k % m) : pick(rng.engine());
    const Evaluation e = oracle.single(x, i);
    if (recorder.due(k))
      recorder.add(k, x, e, true, k);
    record.sample_sizes.push_back(1);
    x -= policy.step(k, m) * e.gradient;
  }
  const Index i = cyclic ? static_cast<Index>(options.max_iter % m) : pick(rng.engine());
  recorder.add(options.max_iter, x, oracle.single(x, i), true, options.max_iter);
  record.final_x = x;
  return record;
}

}  // namespace rfwi

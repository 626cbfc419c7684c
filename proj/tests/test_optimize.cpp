// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "rfwi/optimize.hpp"
#include "toy.hpp"

using namespace rfwi;
using namespace rfwi::test;

namespace
{

std::vector<RealVector> random_centers(Index m, Index n, std::uint64_t seed)
{
  std::mt19937_64 g(seed);
  std::vector<RealVector> c;
  for (Index i = 0; i < m; ++i)
    c.push_back(random_vector(n, g));
  return c;
}

std::string csv(const RunRecord &r)
{
  std::ostringstream out;
  r.write_csv(out);
  return out.str();
}

// phi(x) = -x[0] for x[0] <= 1, +inf beyond: every step from x = 1 is infeasible.
class Wall : public Population
{
public:
  Index size() const override { return 1; }
  Evaluation evaluate(Index, const RealVector &x) const override
  {
    RealVector g = RealVector::Zero(x.size());
    g[0] = -1.0;
    if (x[0] > 1.0)
      return {std::numeric_limits<double>::infinity(), RealVector::Zero(x.size())};
    return {-x[0], g};
  }
};

}  // namespace

TEST_CASE("two-loop recursion")
{
  LbfgsMemory memory(3);
  const RealVector g = RealVector::LinSpaced(4, 1.0, -2.0);
  CHECK(memory.direction(g) == -g);

  // Curvature guard.
  CHECK_FALSE(memory.update(RealVector::Unit(4, 0), -RealVector::Unit(4, 0)));
  CHECK_FALSE(memory.update(RealVector::Unit(4, 0), RealVector::Unit(4, 1)));
  CHECK(memory.empty());

  std::mt19937_64 rng(4);
  const Eigen::MatrixXd b = random_matrix(4, 4, rng);
  const Eigen::MatrixXd h = b * b.transpose() + Eigen::MatrixXd::Identity(4, 4);
  RealVector last_dx, last_dg;
  for (int j = 0; j < 5; ++j)
  {
    last_dx = random_vector(4, rng);
    last_dg = h * last_dx;
    CHECK(memory.update(last_dx, last_dg));
  }
  CHECK(memory.size() == 3);
  // Secant condition on the newest pair and descent for arbitrary gradients.
  CHECK((memory.direction(last_dg) + last_dx).norm() <= 1e-10 * last_dx.norm());
  for (int t = 0; t < 20; ++t)
  {
    const RealVector q = random_vector(4, rng);
    CHECK(q.dot(memory.direction(q)) < 0.0);
  }
  CHECK_THROWS_AS(LbfgsMemory(0), ValidationError);
}

TEST_CASE("L-BFGS on an isotropic quadratic takes a unit step and then the exact step")
{
  const Quadratic q(random_centers(7, 5, 1));
  const ObjectiveOracle oracle(q);
  SolverOptions options;
  options.max_iter = 20;
  options.grad_tol = 1e-12;
  const RunRecord r = lbfgs(oracle, RealVector::Zero(5), options);
  CHECK(r.termination == "gradient_tolerance");
  CHECK(r.entries.size() <= 4);
  CHECK((r.final_x - q.minimizer()).norm() <= 1e-12);
}

TEST_CASE("L-BFGS converges on linear least squares with monotone decrease")
{
  const auto pop = LinearLeastSquares::random(6, 8, 4, 2);
  const ObjectiveOracle oracle(pop);
  SolverOptions options;
  options.max_iter = 200;
  options.grad_tol = 1e-10;
  const RunRecord r = lbfgs(oracle, RealVector::Zero(8), options);
  CHECK(r.termination == "gradient_tolerance");
  CHECK((r.final_x - pop.minimizer()).norm() <= 1e-8 * pop.minimizer().norm());
  for (std::size_t k = 1; k < r.entries.size(); ++k)
    CHECK(r.entries[k].phi <= r.entries[k - 1].phi);
  for (std::size_t k = 0; k < r.entries.size(); ++k)
    CHECK(r.entries[k].cum_evals == r.entries[k].iter * 6);
}

TEST_CASE("line search failure is reported, not thrown")
{
  const Wall wall;
  const ObjectiveOracle oracle(wall);
  SolverOptions options;
  options.max_backtracks = 5;
  const RunRecord r = lbfgs(oracle, RealVector::Ones(2), options);
  CHECK(r.termination.rfind("line search failed", 0) == 0);
  CHECK(r.final_x == RealVector::Ones(2));
  CHECK_THROWS_AS(lbfgs(oracle, RealVector::Constant(2, 2.0), options), ValidationError);
  CHECK_THROWS_AS(lbfgs(oracle, RealVector::Constant(2, std::nan("")), options), ValidationError);
}

TEST_CASE("step policies")
{
  CHECK(StepPolicy::fixed(0.3).step(1000, 10) == 0.3);
  const auto passes = StepPolicy::over_passes(1.0);
  CHECK(passes.step(0, 10) == 1.0);
  CHECK(passes.step(19, 10) == 1.0);
  CHECK(passes.step(25, 10) == 0.5);
  CHECK(passes.step(35, 10) == doctest::Approx(1.0 / 3.0));
  CHECK(StepPolicy::harmonic(2.0).step(4, 10) == doctest::Approx(0.4));
  CHECK(parse_step_policy("harmonic", 1.0).kind == StepPolicy::Kind::DecreasingHarmonic);
  CHECK_THROWS_AS(parse_step_policy("adagrad", 1.0), ValidationError);
  CHECK_THROWS_AS(parse_step_policy("fixed", 0.0), ValidationError);
}

TEST_CASE("stochastic gradient with the full sample is gradient descent")
{
  const auto pop = LinearLeastSquares::random(5, 3, 2, 9);
  const ObjectiveOracle oracle(pop);
  SolverOptions options;
  options.max_iter = 30;
  RandomStream rng(1);
  const double alpha = 0.01;
  const RunRecord r = stochastic_gradient(oracle, RealVector::Zero(3),
                                          SamplePlan::without_replacement(5),
                                          StepPolicy::fixed(alpha), rng, options);
  RealVector x = RealVector::Zero(3);
  for (int k = 0; k < 30; ++k)
    x -= alpha * full_misfit(pop, x).gradient;
  CHECK(r.final_x == x);
  CHECK(r.entries.back().cum_evals == 150);
  CHECK(r.entries[3].cum_evals == 15);
}

TEST_CASE("stochastic gradient error decays like 1/k")
{
  // With phi_i = |x - c_i|^2 / 2 and step 1/(k+1), x_k is the mean of k sampled centers,
  // so E|x_k - x*|^2 is proportional to 1/k.
  const Quadratic q(random_centers(50, 3, 2));
  const ObjectiveOracle oracle(q);
  const RealVector xs = q.minimizer();
  SolverOptions options;
  options.max_iter = 1000;
  options.model_error = [&](const RealVector &x) { return (x - xs).squaredNorm(); };
  const int runs = 200;
  double at100 = 0.0, at1000 = 0.0;
  for (int run = 0; run < runs; ++run)
  {
    RandomStream rng(7, static_cast<std::uint64_t>(run));
    const RunRecord r = stochastic_gradient(oracle, RealVector::Zero(3),
                                            SamplePlan::with_replacement(1),
                                            StepPolicy::harmonic(1.0), rng, options);
    at100 += r.entries[100].model_error;
    at1000 += r.entries[1000].model_error;
  }
  const double slope = std::log(at1000 / at100) / std::log(10.0);
  CAPTURE(slope);
  CHECK(std::abs(slope + 1.0) <= 0.3);
}

TEST_CASE("incremental gradient")
{
  SUBCASE("single member is gradient descent")
  {
    const auto pop = LinearLeastSquares::random(1, 3, 5, 3);
    const ObjectiveOracle oracle(pop);
    SolverOptions options;
    options.max_iter = 40;
    RandomStream rng(2);
    const RunRecord r =
        incremental_gradient(oracle, RealVector::Zero(3), StepPolicy::fixed(0.02), rng, options);
    RealVector x = RealVector::Zero(3);
    for (int k = 0; k < 40; ++k)
      x -= 0.02 * pop.evaluate(0, x).gradient;
    CHECK(r.final_x == x);
    CHECK(r.entries[7].cum_evals == 7);
  }

  SUBCASE("fixed steps stall, decreasing steps keep improving")
  {
    const Quadratic q(random_centers(10, 2, 5));
    const ObjectiveOracle oracle(q);
    const RealVector xs = q.minimizer();
    SolverOptions options;
    options.max_iter = 20000;
    options.model_error = [&](const RealVector &x) { return (x - xs).norm(); };
    double fixed_err = 0.0, passes_err = 0.0, fixed_mid = 0.0;
    const int runs = 20;
    for (int run = 0; run < runs; ++run)
    {
      RandomStream a(3, static_cast<std::uint64_t>(run)), b(3, static_cast<std::uint64_t>(run));
      const auto rf =
          incremental_gradient(oracle, RealVector::Zero(2), StepPolicy::fixed(0.5), a, options);
      const auto rp = incremental_gradient(oracle, RealVector::Zero(2),
                                           StepPolicy::over_passes(0.5), b, options);
      fixed_mid += rf.entries[10000].model_error;
      fixed_err += rf.entries.back().model_error;
      passes_err += rp.entries.back().model_error;
    }
    CAPTURE(fixed_mid / runs);
    CAPTURE(fixed_err / runs);
    CAPTURE(passes_err / runs);
    CHECK(fixed_err / fixed_mid > 0.7);
    CHECK(passes_err < 0.2 * fixed_err);
  }

  SUBCASE("cyclic order visits members in turn")
  {
    const FixedGradients pop(Eigen::MatrixXd::Identity(3, 3));
    const ObjectiveOracle oracle(pop);
    SolverOptions options;
    options.max_iter = 6;
    RandomStream rng(1);
    const RunRecord r = incremental_gradient(oracle, RealVector::Zero(3), StepPolicy::fixed(1.0),
                                             rng, options, true);
    CHECK(r.final_x == RealVector::Constant(3, -2.0));
    CHECK(r.solver == "incremental-cyclic");
  }
}

TEST_CASE("growing sample")
{
  const auto pop = LinearLeastSquares::random(12, 4, 3, 6);
  const ObjectiveOracle oracle(pop);
  SolverOptions options;
  options.max_iter = 25;
  options.grad_tol = 0.0;

  SUBCASE("full initial sample reproduces L-BFGS")
  {
    GrowingSampleOptions growth;
    growth.initial_size = 12;
    growth.increment = 0;
    RandomStream rng(1);
    const RunRecord g = growing_sample(oracle, RealVector::Zero(4), growth, rng, options);
    const RunRecord l = lbfgs(oracle, RealVector::Zero(4), options);
    CHECK(g.final_x == l.final_x);
    REQUIRE(g.entries.size() == l.entries.size());
    for (std::size_t k = 0; k < g.entries.size(); ++k)
    {
      CHECK(g.entries[k].phi == l.entries[k].phi);
      CHECK(g.entries[k].cum_evals == l.entries[k].cum_evals);
    }
  }

  SUBCASE("sizes follow the rule or an explicit schedule")
  {
    GrowingSampleOptions growth;
    growth.initial_size = 2;
    growth.increment = 3;
    CHECK(growth.size_at(0, 12) == 2);
    CHECK(growth.size_at(3, 12) == 11);
    CHECK(growth.size_at(10, 12) == 12);
    RandomStream rng(2);
    const RunRecord r = growing_sample(oracle, RealVector::Zero(4), growth, rng, options);
    long cum = 0;
    for (std::size_t k = 0; k < r.sample_sizes.size(); ++k)
    {
      CHECK(r.sample_sizes[k] == growth.size_at(static_cast<int>(k), 12));
      cum += static_cast<long>(r.sample_sizes[k]);
    }
    CHECK(r.entries.back().cum_evals == cum);

    growth.schedule = {1, 1, 4, 9};
    CHECK(growth.size_at(2, 12) == 4);
    CHECK(growth.size_at(50, 12) == 9);
  }

  SUBCASE("converges once the sample is full")
  {
    GrowingSampleOptions growth;
    growth.initial_size = 1;
    growth.increment = 2;
    options.max_iter = 80;
    RandomStream rng(3);
    const RunRecord r = growing_sample(oracle, RealVector::Zero(4), growth, rng, options);
    CHECK((r.final_x - pop.minimizer()).norm() <= 1e-6 * pop.minimizer().norm());
  }

  SUBCASE("fixed-step gradient variant with a full sample is gradient descent")
  {
    GrowingSampleOptions growth;
    growth.initial_size = 12;
    growth.increment = 0;
    growth.quasi_newton = false;
    growth.fixed_step = 0.01;
    options.max_iter = 10;
    RandomStream rng(4);
    const RunRecord r = growing_sample(oracle, RealVector::Zero(4), growth, rng, options);
    RealVector x = RealVector::Zero(4);
    for (int k = 0; k < 10; ++k)
      x -= 0.01 * full_misfit(pop, x).gradient;
    CHECK((r.final_x - x).norm() <= 1e-14 * x.norm());
  }

  SUBCASE("monitoring the full objective")
  {
    GrowingSampleOptions growth;
    options.monitor_full = true;
    RandomStream rng(5);
    const RunRecord r = growing_sample(oracle, RealVector::Zero(4), growth, rng, options);
    for (const auto &e : r.entries)
    {
      CHECK_FALSE(e.phi_sampled);
    }
    CHECK(r.entries.back().phi == doctest::Approx(full_misfit(pop, r.final_x).value));
  }
}

TEST_CASE("solvers are deterministic per seed")
{
  const auto pop = LinearLeastSquares::random(10, 3, 2, 8);
  const ObjectiveOracle oracle(pop);
  SolverOptions options;
  options.max_iter = 40;
  auto run_all = [&](std::uint64_t seed)
  {
    std::string out;
    RandomStream a(seed), b(seed), c(seed);
    out += csv(growing_sample(oracle, RealVector::Zero(3), {}, a, options));
    out += csv(stochastic_gradient(oracle, RealVector::Zero(3), SamplePlan::with_replacement(3),
                                   StepPolicy::harmonic(0.05), b, options));
    out += csv(incremental_gradient(oracle, RealVector::Zero(3), StepPolicy::fixed(0.01), c,
                                    options));
    out += csv(lbfgs(oracle, RealVector::Zero(3), options));
    return out;
  };
  const std::string first = run_all(11);
  CHECK(first == run_all(11));
  CHECK(first != run_all(12));
}

TEST_CASE("run CSV format")
{
  const Quadratic q(random_centers(3, 2, 1));
  const ObjectiveOracle oracle(q);
  SolverOptions options;
  options.max_iter = 10;
  options.record_every = 4;
  RandomStream rng(1);
  const RunRecord r =
      incremental_gradient(oracle, RealVector::Zero(2), StepPolicy::fixed(0.1), rng, options);
  std::istringstream in(csv(r));
  std::string line;
  std::getline(in, line);
  CHECK(line == "iter,phi,grad_norm,model_error,cum_evals,wall_ms");
  std::vector<long> iters;
  while (std::getline(in, line))
  {
    const auto comma = line.find(',');
    iters.push_back(std::stol(line.substr(0, comma)));
    CHECK(line.substr(line.rfind(',') + 1) == "0");
    CHECK(line.find("nan") != std::string::npos);
  }
  CHECK(iters == std::vector<long>{0, 4, 8, 10});
}

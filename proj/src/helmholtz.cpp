// SPDX-License-Identifier: Apache-2.0

#include "rfwi/helmholtz.hpp"

#include <cmath>
#include <mutex>
#include <string>

#include <Eigen/SparseLU>

namespace rfwi
{

namespace
{

constexpr double kSolveTolerance = 1e-10;

double relative_residual(const ComplexSparse &A, const Wavefield &u, const Wavefield &rhs)
{
  return (A * u - rhs).norm() / rhs.norm();
}

}  // namespace

void Grid2D::validate() const
{
  if (nz < 3 || nx < 3)
    throw ValidationError("grid needs at least 3 nodes in each direction");
  if (!(h > 0.0) || !std::isfinite(h))
    throw ValidationError("grid spacing must be positive and finite");
}

SlownessModel::SlownessModel(Grid2D grid, RealVector values)
  : grid_(grid), values_(std::move(values))
{
  grid_.validate();
  if (values_.size() != grid_.size())
    throw ValidationError("slowness model size does not match grid");
  for (Index k = 0; k < values_.size(); ++k)
  {
    if (!std::isfinite(values_[k]) || !(values_[k] > 0.0))
      throw ValidationError("squared slowness must be positive and finite at node " +
                            std::to_string(k));
  }
}

void Acquisition::validate(const Grid2D &grid) const
{
  auto on_grid = [&](Index p) { return p >= 0 && p < grid.size(); };
  for (const auto &src : sources)
  {
    if (!on_grid(src.position))
      throw ValidationError("source position off grid");
    if (static_cast<Index>(src.weights.size()) != num_frequencies())
      throw ValidationError("source needs one weight per frequency");
  }
  for (Index r : receivers)
    if (!on_grid(r))
      throw ValidationError("receiver position off grid");
  for (double w : frequencies)
    if (!(w > 0.0) || !std::isfinite(w))
      throw ValidationError("angular frequencies must be positive");
  if (!data.empty())
  {
    if (static_cast<Index>(data.size()) != num_sources() * num_frequencies())
      throw ValidationError("data must hold one record per (source, frequency) pair");
    for (const auto &d : data)
      if (d.size() != num_receivers())
        throw ValidationError("data record length differs from receiver count");
  }
}

//
// HelmholtzSystem
//

struct HelmholtzSystem::Factorization
{
  std::once_flag once;
  Eigen::SparseLU<ComplexSparse, Eigen::COLAMDOrdering<int>> lu;
  std::atomic<int> count{0};
  bool ok = false;
  std::string message;
};

HelmholtzSystem::HelmholtzSystem(Grid2D grid, double omega, ComplexSparse matrix,
                                 ComplexVector diagonal_slope)
  : grid_(grid), omega_(omega), matrix_(std::move(matrix)),
    diagonal_slope_(std::move(diagonal_slope)), factor_(std::make_unique<Factorization>())
{
  matrix_.makeCompressed();
}

HelmholtzSystem::HelmholtzSystem(HelmholtzSystem &&) noexcept = default;
HelmholtzSystem &HelmholtzSystem::operator=(HelmholtzSystem &&) noexcept = default;
HelmholtzSystem::~HelmholtzSystem() = default;

void HelmholtzSystem::factorize() const
{
  std::call_once(factor_->once,
                 [this]
                 {
                   auto &f = *factor_;
                   f.lu.analyzePattern(matrix_);
                   f.lu.factorize(matrix_);
                   f.count.fetch_add(1);
                   f.ok = f.lu.info() == Eigen::Success;
                   if (!f.ok)
                     f.message = "sparse LU factorization failed: " + f.lu.lastErrorMessage();
                 });
  if (!factor_->ok)
    throw FactorizationError(factor_->message, omega_);
}

bool HelmholtzSystem::factorized() const
{
  return factor_->count.load() > 0 && factor_->ok;
}

int HelmholtzSystem::factorization_count() const
{
  return factor_->count.load();
}

Wavefield HelmholtzSystem::solve(const Wavefield &rhs) const
{
  if (rhs.size() != grid_.size())
    throw ValidationError("right-hand side does not match grid size");
  if (rhs.isZero(0.0))
    return Wavefield::Zero(rhs.size());
  factorize();
  Wavefield u = factor_->lu.solve(rhs);
  if (relative_residual(matrix_, u, rhs) > kSolveTolerance)
  {
    Wavefield correction = factor_->lu.solve(rhs - matrix_ * u);
    u += correction;
  }
  if (!u.allFinite() || relative_residual(matrix_, u, rhs) > kSolveTolerance)
    throw FactorizationError("solve did not reach relative residual 1e-10", omega_);
  return u;
}

Wavefield HelmholtzSystem::solve_adjoint(const Wavefield &rhs) const
{
  if (rhs.size() != grid_.size())
    throw ValidationError("right-hand side does not match grid size");
  if (rhs.isZero(0.0))
    return Wavefield::Zero(rhs.size());
  factorize();
  const ComplexSparse adjoint = matrix_.adjoint();
  Wavefield v = factor_->lu.adjoint().solve(rhs);
  if (relative_residual(adjoint, v, rhs) > kSolveTolerance)
  {
    Wavefield correction = factor_->lu.adjoint().solve(Wavefield(rhs - adjoint * v));
    v += correction;
  }
  if (!v.allFinite() || relative_residual(adjoint, v, rhs) > kSolveTolerance)
    throw FactorizationError("adjoint solve did not reach relative residual 1e-10", omega_);
  return v;
}

HelmholtzSystem assemble(const SlownessModel &model, double omega)
{
  if (!(omega > 0.0) || !std::isfinite(omega))
    throw ValidationError("angular frequency must be positive");

  const Grid2D &g = model.grid();
  const Index n = g.size();
  const double inv_h = 1.0 / g.h;
  const double inv_h2 = inv_h * inv_h;
  const Complex i_unit(0.0, 1.0);

  std::vector<Eigen::Triplet<Complex>> entries;
  entries.reserve(static_cast<std::size_t>(5 * n));
  ComplexVector slope(n);

  for (Index ix = 0; ix < g.nx; ++ix)
  {
    for (Index iz = 0; iz < g.nz; ++iz)
    {
      const Index k = g.index(iz, ix);
      const double x = model[k];

      // Inward neighbors of a boundary node, one per boundary side it touches.
      Index inward[2];
      int sides = 0;
      if (iz == 0)
        inward[sides++] = g.index(1, ix);
      else if (iz == g.nz - 1)
        inward[sides++] = g.index(g.nz - 2, ix);
      if (ix == 0)
        inward[sides++] = g.index(iz, 1);
      else if (ix == g.nx - 1)
        inward[sides++] = g.index(iz, g.nx - 2);

      if (sides == 0)
      {
        entries.emplace_back(k, k, omega * omega * x - 4.0 * inv_h2);
        entries.emplace_back(k, k - 1, inv_h2);
        entries.emplace_back(k, k + 1, inv_h2);
        entries.emplace_back(k, k - g.nz, inv_h2);
        entries.emplace_back(k, k + g.nz, inv_h2);
        slope[k] = omega * omega;
      }
      else
      {
        const double root = std::sqrt(x);
        entries.emplace_back(k, k, sides * inv_h2 - i_unit * omega * root * double(sides) * inv_h);
        for (int d = 0; d < sides; ++d)
          entries.emplace_back(k, inward[d], -inv_h2);
        slope[k] = -i_unit * omega * double(sides) * inv_h / (2.0 * root);
      }
    }
  }

  ComplexSparse A(n, n);
  A.setFromTriplets(entries.begin(), entries.end());
  return HelmholtzSystem(g, omega, std::move(A), std::move(slope));
}

Wavefield source_term(const Grid2D &grid, const Acquisition &acq, Index s, Index f)
{
  if (s < 0 || s >= acq.num_sources() || f < 0 || f >= acq.num_frequencies())
    throw ValidationError("source or frequency index out of range");
  Wavefield q = Wavefield::Zero(grid.size());
  q[acq.sources[s].position] = acq.sources[s].weights[f];
  return q;
}

ComplexVector restrict_to_receivers(const Wavefield &u, const std::vector<Index> &receivers)
{
  ComplexVector d(static_cast<Index>(receivers.size()));
  for (std::size_t r = 0; r < receivers.size(); ++r)
    d[static_cast<Index>(r)] = u[receivers[r]];
  return d;
}

Wavefield inject_at_receivers(const Grid2D &grid, const ComplexVector &y,
                              const std::vector<Index> &receivers)
{
  if (y.size() != static_cast<Index>(receivers.size()))
    throw ValidationError("receiver vector length mismatch");
  Wavefield w = Wavefield::Zero(grid.size());
  for (std::size_t r = 0; r < receivers.size(); ++r)
    w[receivers[r]] += y[static_cast<Index>(r)];
  return w;
}

ComplexVector forward(const HelmholtzSystem &system, const Acquisition &acq, Index s, Index f)
{
  if (acq.frequencies.at(static_cast<std::size_t>(f)) != system.omega())
    throw ValidationError("system frequency does not match the requested frequency index");
  return restrict_to_receivers(system.solve(source_term(system.grid(), acq, s, f)),
                               acq.receivers);
}

ComplexVector forward(const SlownessModel &model, const Acquisition &acq, Index s, Index f)
{
  acq.validate(model.grid());
  return forward(assemble(model, acq.frequencies.at(static_cast<std::size_t>(f))), acq, s, f);
}

ComplexVector residual(const HelmholtzSystem &system, const Acquisition &acq, Index s, Index f)
{
  return acq.observed(s, f) - forward(system, acq, s, f);
}

ComplexVector residual(const SlownessModel &model, const Acquisition &acq, Index s, Index f)
{
  acq.validate(model.grid());
  if (acq.data.empty())
    throw ValidationError("acquisition carries no observed data");
  return residual(assemble(model, acq.frequencies.at(static_cast<std::size_t>(f))), acq, s, f);
}

RealVector gradient_contribution(const HelmholtzSystem &system, const Wavefield &u,
                                 const std::vector<Index> &receivers,
                                 const ComplexVector &penalty_gradient)
{
  const Wavefield v =
      system.solve_adjoint(inject_at_receivers(system.grid(), penalty_gradient, receivers));
  return (v.conjugate().array() * system.diagonal_slope().array() * u.array()).real();
}

RealVector gradient_contribution(const SlownessModel &model, const Acquisition &acq, Index s,
                                 Index f, const ComplexVector &penalty_gradient)
{
  acq.validate(model.grid());
  const HelmholtzSystem system = assemble(model, acq.frequencies.at(static_cast<std::size_t>(f)));
  const Wavefield u = system.solve(source_term(model.grid(), acq, s, f));
  return gradient_contribution(system, u, acq.receivers, penalty_gradient);
}

ComplexVector jacobian_apply(const HelmholtzSystem &system, const Wavefield &u,
                             const std::vector<Index> &receivers, const RealVector &dx)
{
  if (dx.size() != u.size())
    throw ValidationError("model perturbation does not match grid size");
  const Wavefield born = -(system.diagonal_slope().array() * u.array() * dx.array()).matrix();
  return restrict_to_receivers(system.solve(born), receivers);
}

}  // namespace rfwi

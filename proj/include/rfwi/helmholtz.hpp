// SPDX-License-Identifier: Apache-2.0

#ifndef RFWI_HELMHOLTZ_HPP
#define RFWI_HELMHOLTZ_HPP

#include <atomic>
#include <complex>
#include <memory>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "rfwi/errors.hpp"

namespace rfwi
{

using Index = Eigen::Index;
using Complex = std::complex<double>;
using RealVector = Eigen::VectorXd;
using ComplexVector = Eigen::VectorXcd;
using ComplexSparse = Eigen::SparseMatrix<Complex, Eigen::ColMajor>;

/// Complex field on the grid nodes (forward wavefield u or adjoint field v).
using Wavefield = ComplexVector;

/// Uniform 2D grid. Nodes are stored depth-major: z is the fastest index, so node
/// (iz, ix) lives at iz + nz * ix.
struct Grid2D
{
  Index nz = 0;
  Index nx = 0;
  double h = 0.0;

  Index size() const { return nz * nx; }
  Index index(Index iz, Index ix) const { return iz + nz * ix; }
  bool operator==(const Grid2D &) const = default;

  void validate() const;
};

/// Squared slowness (s^2/m^2) on every node of a grid.
class SlownessModel
{
public:
  SlownessModel(Grid2D grid, RealVector values);

  const Grid2D &grid() const { return grid_; }
  const RealVector &values() const { return values_; }
  double operator[](Index k) const { return values_[k]; }

private:
  Grid2D grid_;
  RealVector values_;
};

/// A point source at one grid node with one complex weight per frequency.
struct Source
{
  Index position = 0;
  std::vector<Complex> weights;
};

//
// Survey geometry and observations. Observed data for (source s, frequency f) live at
// data[s * frequencies.size() + f] and hold one entry per receiver.
//
struct Acquisition
{
  std::vector<Source> sources;
  std::vector<Index> receivers;
  std::vector<double> frequencies;  // angular, rad/s
  std::vector<ComplexVector> data;

  Index num_sources() const { return static_cast<Index>(sources.size()); }
  Index num_frequencies() const { return static_cast<Index>(frequencies.size()); }
  Index num_receivers() const { return static_cast<Index>(receivers.size()); }
  Index pair_index(Index s, Index f) const { return s * num_frequencies() + f; }

  const ComplexVector &observed(Index s, Index f) const { return data[pair_index(s, f)]; }
  ComplexVector &observed(Index s, Index f) { return data[pair_index(s, f)]; }

  // Checks positions against the grid; data, when present, must be sources x
  // frequencies vectors of receiver length.
  void validate(const Grid2D &grid) const;
};

//
// Assembled operator A_w(x) for one angular frequency. Interior rows carry the 5-point
// Laplacian plus w^2 x; boundary rows carry the first-order absorbing condition
// du/dn - i w sqrt(x) u = 0, discretized one-sided and scaled by 1/h. The sparse LU
// factorization is computed once, on first use, and is shared by all subsequent solves.
//
class HelmholtzSystem
{
public:
  HelmholtzSystem(Grid2D grid, double omega, ComplexSparse matrix, ComplexVector diagonal_slope);
  HelmholtzSystem(HelmholtzSystem &&) noexcept;
  HelmholtzSystem &operator=(HelmholtzSystem &&) noexcept;
  ~HelmholtzSystem();

  const Grid2D &grid() const { return grid_; }
  double omega() const { return omega_; }
  const ComplexSparse &matrix() const { return matrix_; }

  // dA_kk/dx_k. The model enters A only through its diagonal.
  const ComplexVector &diagonal_slope() const { return diagonal_slope_; }

  // Thread safe; the first caller performs the factorization.
  void factorize() const;
  bool factorized() const;
  int factorization_count() const;

  Wavefield solve(const Wavefield &rhs) const;
  Wavefield solve_adjoint(const Wavefield &rhs) const;

private:
  struct Factorization;

  Grid2D grid_;
  double omega_;
  ComplexSparse matrix_;
  ComplexVector diagonal_slope_;
  std::unique_ptr<Factorization> factor_;
};

HelmholtzSystem assemble(const SlownessModel &model, double omega);

/// Discrete delta q_s for frequency f.
Wavefield source_term(const Grid2D &grid, const Acquisition &acq, Index s, Index f);

/// Receiver restriction P u.
ComplexVector restrict_to_receivers(const Wavefield &u, const std::vector<Index> &receivers);

/// Adjoint of the restriction, P^T y.
Wavefield inject_at_receivers(const Grid2D &grid, const ComplexVector &y,
                              const std::vector<Index> &receivers);

// Predicted data P A^{-1} q for one (source, frequency) pair.
ComplexVector forward(const HelmholtzSystem &system, const Acquisition &acq, Index s, Index f);
ComplexVector forward(const SlownessModel &model, const Acquisition &acq, Index s, Index f);

// d - F(x) q for one pair.
ComplexVector residual(const HelmholtzSystem &system, const Acquisition &acq, Index s, Index f);
ComplexVector residual(const SlownessModel &model, const Acquisition &acq, Index s, Index f);

//
// Adjoint-state gradient of sum_j rho(r_j) with respect to x for one pair, given the
// packed penalty gradient psi = d rho / d Re r + i d rho / d Im r at the residual. With
// u = A^{-1} q and v = A^{-H} P^T psi, the contribution is Re(conj(v) .* dA/dx .* u).
//
RealVector gradient_contribution(const HelmholtzSystem &system, const Wavefield &u,
                                 const std::vector<Index> &receivers,
                                 const ComplexVector &penalty_gradient);
RealVector gradient_contribution(const SlownessModel &model, const Acquisition &acq, Index s,
                                 Index f, const ComplexVector &penalty_gradient);

/// Linearized forward map J dx = d(P A^{-1} q)/dx applied to a model perturbation.
ComplexVector jacobian_apply(const HelmholtzSystem &system, const Wavefield &u,
                             const std::vector<Index> &receivers, const RealVector &dx);

}  // namespace rfwi

#endif  // RFWI_HELMHOLTZ_HPP

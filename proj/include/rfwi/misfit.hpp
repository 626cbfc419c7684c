// SPDX-License-Identifier: Apache-2.0

#ifndef RFWI_MISFIT_HPP
#define RFWI_MISFIT_HPP

#include <cmath>
#include <complex>
#include <string>
#include <type_traits>

#include <Eigen/Dense>

#include "rfwi/errors.hpp"

namespace rfwi
{

enum class PenaltyKind
{
  LeastSquares,
  Huber,
  StudentsT
};

//
// Residual penalty rho. Complex residuals are treated as 2n real components (real parts
// and imaginary parts), each penalized by the scalar formula:
//   least squares  t^2
//   Huber          t^2 / (2 mu)   for |t| <= mu,   |t| - mu / 2 otherwise
//   Student's t    log(1 + t^2 / nu)
// so least squares over a complex vector is sum |r_k|^2.
//
class Penalty
{
public:
  static Penalty least_squares() { return Penalty(PenaltyKind::LeastSquares, 0.0); }
  static Penalty huber(double mu) { return Penalty(PenaltyKind::Huber, mu); }
  static Penalty students_t(double nu) { return Penalty(PenaltyKind::StudentsT, nu); }

  PenaltyKind kind() const { return kind_; }
  // mu for Huber, nu for Student's t, unused for least squares.
  double parameter() const { return parameter_; }
  std::string name() const;

  double scalar_value(double t) const
  {
    switch (kind_)
    {
    case PenaltyKind::LeastSquares:
      return t * t;
    case PenaltyKind::Huber:
      return std::abs(t) <= parameter_ ? t * t / (2.0 * parameter_)
                                       : std::abs(t) - 0.5 * parameter_;
    case PenaltyKind::StudentsT:
      return std::log1p(t * t / parameter_);
    }
    return 0.0;
  }

  double scalar_derivative(double t) const
  {
    switch (kind_)
    {
    case PenaltyKind::LeastSquares:
      return 2.0 * t;
    case PenaltyKind::Huber:
      if (std::abs(t) <= parameter_)
        return t / parameter_;
      return t > 0.0 ? 1.0 : -1.0;
    case PenaltyKind::StudentsT:
      return 2.0 * t / (parameter_ + t * t);
    }
    return 0.0;
  }

  bool operator==(const Penalty &) const = default;

private:
  Penalty(PenaltyKind kind, double parameter);

  PenaltyKind kind_;
  double parameter_;
};

Penalty parse_penalty(const std::string &kind, double mu, double nu);

namespace detail
{

template <typename Scalar>
struct is_complex : std::false_type
{
};
template <typename Real>
struct is_complex<std::complex<Real>> : std::true_type
{
};

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived> &r)
{
  if (!r.allFinite())
    throw ValidationError("residual contains non-finite entries");
}

}  // namespace detail

/// Sum of the penalty over every real component of r.
template <typename Derived>
double value(const Penalty &p, const Eigen::MatrixBase<Derived> &r)
{
  using Scalar = typename Derived::Scalar;
  detail::require_finite(r);
  if (p.kind() == PenaltyKind::LeastSquares)
    return r.squaredNorm();
  double sum = 0.0;
  for (Eigen::Index k = 0; k < r.size(); ++k)
  {
    if constexpr (detail::is_complex<Scalar>::value)
    {
      sum += p.scalar_value(std::real(r(k)));
      sum += p.scalar_value(std::imag(r(k)));
    }
    else
    {
      sum += p.scalar_value(r(k));
    }
  }
  return sum;
}

/// Componentwise derivative of value(), with the real and imaginary partials packed
/// back into one complex entry (d rho / d Re + i d rho / d Im).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>
influence(const Penalty &p, const Eigen::MatrixBase<Derived> &r)
{
  using Scalar = typename Derived::Scalar;
  detail::require_finite(r);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(r.size());
  for (Eigen::Index k = 0; k < r.size(); ++k)
  {
    if constexpr (detail::is_complex<Scalar>::value)
      out(k) = Scalar(p.scalar_derivative(std::real(r(k))), p.scalar_derivative(std::imag(r(k))));
    else
      out(k) = p.scalar_derivative(r(k));
  }
  return out;
}

//
// Tail analytics for densities p(t) proportional to exp(-rho(t)).
//

enum class DensityKind
{
  Gaussian,  // rho = t^2 / 2
  Laplace,   // rho = alpha |t|
  Cauchy,    // rho = log(1 + t^2)
  Penalty    // rho taken from a Penalty
};

class Density
{
public:
  static Density gaussian() { return Density(DensityKind::Gaussian, 1.0, Penalty::least_squares()); }
  static Density laplace(double alpha);
  static Density cauchy() { return Density(DensityKind::Cauchy, 1.0, Penalty::least_squares()); }
  static Density from_penalty(const Penalty &p) { return Density(DensityKind::Penalty, 1.0, p); }

  DensityKind kind() const { return kind_; }
  double alpha() const { return alpha_; }
  const Penalty &penalty() const { return penalty_; }
  std::string name() const;

  double rho(double t) const;
  // Right derivative of rho at t.
  double right_derivative(double t) const;
  // Log-concave (rho convex): Gaussian, Laplace, least squares, Huber.
  bool log_concave() const;

private:
  Density(DensityKind kind, double alpha, Penalty penalty)
    : kind_(kind), alpha_(alpha), penalty_(penalty)
  {
  }

  DensityKind kind_;
  double alpha_;
  Penalty penalty_;
};

// Accepts gaussian, laplace, cauchy, least-squares, huber, students-t.
Density parse_density(const std::string &name, double alpha = 1.0, double mu = 1.0,
                      double nu = 2.0);

/// Pr(|r| > t2 | |r| > t1) under exp(-rho). Closed forms for Laplace and Cauchy,
/// adaptive quadrature otherwise. Throws QuadratureError if quadrature does not converge.
double conditional_tail(const Density &density, double t1, double t2);

/// Unnormalized tail mass int_t^inf exp(-(rho(r) - rho(t))) dr, by quadrature.
double scaled_tail_mass(const Density &density, double t);

struct TailQuery
{
  double t0 = 0.0;
  double t1 = 0.0;
  double t2 = 0.0;
  double alpha0 = 0.0;  // right derivative of rho at t0

  void validate() const;
};

TailQuery make_tail_query(const Density &density, double t0, double t1, double t2);

struct TailReport
{
  double lhs = 0.0;  // Pr(|r| > t2 | |r| > t1)
  double rhs = 0.0;  // exp(-alpha0 (t2 - t1))
  bool satisfied = false;
  bool log_concave_assumed = false;
};

// The exponential bound on conditional tails of log-concave densities. The log-concave
// flag is the caller's assertion and is only recorded in the report.
TailReport tail_bound_check(const TailQuery &query, const Density &density,
                            bool log_concave_assumed);

}  // namespace rfwi

#endif  // RFWI_MISFIT_HPP

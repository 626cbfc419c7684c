// SPDX-License-Identifier: Apache-2.0

#include "rfwi/misfit.hpp"

#include <limits>
#include <numbers>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace rfwi
{

Penalty::Penalty(PenaltyKind kind, double parameter) : kind_(kind), parameter_(parameter)
{
  if (kind != PenaltyKind::LeastSquares && !(parameter > 0.0 && std::isfinite(parameter)))
    throw ValidationError("penalty parameter must be positive and finite");
}

std::string Penalty::name() const
{
  switch (kind_)
  {
  case PenaltyKind::LeastSquares:
    return "least-squares";
  case PenaltyKind::Huber:
    return "huber";
  case PenaltyKind::StudentsT:
    return "students-t";
  }
  return "unknown";
}

Penalty parse_penalty(const std::string &kind, double mu, double nu)
{
  if (kind == "least-squares")
    return Penalty::least_squares();
  if (kind == "huber")
    return Penalty::huber(mu);
  if (kind == "students-t")
    return Penalty::students_t(nu);
  throw ValidationError("unknown penalty kind '" + kind + "'");
}

Density Density::laplace(double alpha)
{
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw ValidationError("Laplace rate must be positive");
  return Density(DensityKind::Laplace, alpha, Penalty::least_squares());
}

std::string Density::name() const
{
  switch (kind_)
  {
  case DensityKind::Gaussian:
    return "gaussian";
  case DensityKind::Laplace:
    return "laplace";
  case DensityKind::Cauchy:
    return "cauchy";
  case DensityKind::Penalty:
    return penalty_.name();
  }
  return "unknown";
}

double Density::rho(double t) const
{
  switch (kind_)
  {
  case DensityKind::Gaussian:
    return 0.5 * t * t;
  case DensityKind::Laplace:
    return alpha_ * std::abs(t);
  case DensityKind::Cauchy:
    return std::log1p(t * t);
  case DensityKind::Penalty:
    return penalty_.scalar_value(t);
  }
  return 0.0;
}

double Density::right_derivative(double t) const
{
  switch (kind_)
  {
  case DensityKind::Gaussian:
    return t;
  case DensityKind::Laplace:
    return t >= 0.0 ? alpha_ : -alpha_;
  case DensityKind::Cauchy:
    return 2.0 * t / (1.0 + t * t);
  case DensityKind::Penalty:
    if (penalty_.kind() == PenaltyKind::Huber && t == -penalty_.parameter())
      return -t / penalty_.parameter();
    return penalty_.scalar_derivative(t);
  }
  return 0.0;
}

bool Density::log_concave() const
{
  switch (kind_)
  {
  case DensityKind::Gaussian:
  case DensityKind::Laplace:
    return true;
  case DensityKind::Cauchy:
    return false;
  case DensityKind::Penalty:
    return penalty_.kind() != PenaltyKind::StudentsT;
  }
  return false;
}

Density parse_density(const std::string &name, double alpha, double mu, double nu)
{
  if (name == "gaussian")
    return Density::gaussian();
  if (name == "laplace")
    return Density::laplace(alpha);
  if (name == "cauchy")
    return Density::cauchy();
  return Density::from_penalty(parse_penalty(name, mu, nu));
}

double scaled_tail_mass(const Density &density, double t)
{
  using boost::math::quadrature::exp_sinh;
  using boost::math::quadrature::gauss_kronrod;

  const double rho_t = density.rho(t);
  auto integrand = [&](double r) { return std::exp(-(density.rho(r) - rho_t)); };
  constexpr double tol = 1e-12;

  double mass = 0.0;
  double start = t;
  // Integrate across a Huber kink separately so the half-line rule sees a smooth tail.
  if (density.kind() == DensityKind::Penalty && density.penalty().kind() == PenaltyKind::Huber &&
      t < density.penalty().parameter())
  {
    double err = 0.0;
    mass += gauss_kronrod<double, 31>::integrate(integrand, t, density.penalty().parameter(), 15,
                                                 tol, &err);
    start = density.penalty().parameter();
  }

  exp_sinh<double> half_line;
  double err = 0.0;
  double l1 = 0.0;
  const double tail = half_line.integrate(integrand, start,
                                          std::numeric_limits<double>::infinity(), tol, &err, &l1);
  if (!std::isfinite(tail) || err > 1e-9 * std::max(1.0, std::abs(tail)))
    throw QuadratureError("tail quadrature did not converge for " + density.name() +
                          " at t = " + std::to_string(t));
  return mass + tail;
}

double conditional_tail(const Density &density, double t1, double t2)
{
  if (!(t1 > 0.0) || !(t2 > t1) || !std::isfinite(t2))
    throw ValidationError("conditional tail needs 0 < t1 < t2");
  switch (density.kind())
  {
  case DensityKind::Laplace:
    return std::exp(-density.alpha() * (t2 - t1));
  case DensityKind::Cauchy:
  {
    // pi/2 - arctan(t) = arctan(1/t) stays accurate for large t.
    return std::atan(1.0 / t2) / std::atan(1.0 / t1);
  }
  default:
    break;
  }
  const double ratio = std::exp(-(density.rho(t2) - density.rho(t1)));
  return ratio * scaled_tail_mass(density, t2) / scaled_tail_mass(density, t1);
}

void TailQuery::validate() const
{
  if (!(t0 > 0.0) || !(t0 <= t1) || !(t1 < t2))
    throw ValidationError("tail query needs 0 < t0 <= t1 < t2");
  if (!(alpha0 > 0.0))
    throw ValidationError("right derivative at t0 must be positive");
}

TailQuery make_tail_query(const Density &density, double t0, double t1, double t2)
{
  TailQuery q{t0, t1, t2, density.right_derivative(t0)};
  q.validate();
  return q;
}

TailReport tail_bound_check(const TailQuery &query, const Density &density,
                            bool log_concave_assumed)
{
  query.validate();
  TailReport report;
  report.lhs = conditional_tail(density, query.t1, query.t2);
  report.rhs = std::exp(-query.alpha0 * (query.t2 - query.t1));
  report.satisfied = report.lhs <= report.rhs;
  report.log_concave_assumed = log_concave_assumed;
  return report;
}

}  // namespace rfwi

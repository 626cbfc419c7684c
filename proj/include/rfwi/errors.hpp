// SPDX-License-Identifier: Apache-2.0

#ifndef RFWI_ERRORS_HPP
#define RFWI_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace rfwi
{

// Bad input: out-of-range parameters, inconsistent dimensions, non-finite values.
class ValidationError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

// Numerical failure inside a solver.
class SolverError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// A linear solve at a particular angular frequency failed.
class FactorizationError : public SolverError
{
public:
  FactorizationError(const std::string &what, double omega)
    : SolverError(what + " (omega = " + std::to_string(omega) + " rad/s)"), omega_(omega)
  {
  }
  double omega() const { return omega_; }

private:
  double omega_;
};

class QuadratureError : public SolverError
{
public:
  using SolverError::SolverError;
};

}  // namespace rfwi

#endif  // RFWI_ERRORS_HPP

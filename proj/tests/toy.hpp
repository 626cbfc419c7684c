// SPDX-License-Identifier: Apache-2.0
// Small analytic populations used across the test suites.

#ifndef RFWI_TESTS_TOY_HPP
#define RFWI_TESTS_TOY_HPP

#include <random>
#include <vector>

#include "rfwi/sampling.hpp"

namespace rfwi::test
{

inline Eigen::MatrixXd random_matrix(Index rows, Index cols, std::mt19937_64 &g)
{
  std::normal_distribution<double> n;
  Eigen::MatrixXd a(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i)
      a(i, j) = n(g);
  return a;
}

inline RealVector random_vector(Index n, std::mt19937_64 &g)
{
  return random_matrix(n, 1, g).col(0);
}

// phi_i(x) = |A_i x - b_i|^2.
class LinearLeastSquares : public Population
{
public:
  LinearLeastSquares(std::vector<Eigen::MatrixXd> a, std::vector<RealVector> b)
    : a_(std::move(a)), b_(std::move(b))
  {
  }

  static LinearLeastSquares random(Index m, Index n, Index rows, std::uint64_t seed)
  {
    std::mt19937_64 g(seed);
    std::vector<Eigen::MatrixXd> a;
    std::vector<RealVector> b;
    for (Index i = 0; i < m; ++i)
    {
      a.push_back(random_matrix(rows, n, g));
      b.push_back(random_vector(rows, g));
    }
    return LinearLeastSquares(std::move(a), std::move(b));
  }

  Index size() const override { return static_cast<Index>(a_.size()); }
  Index dim() const { return a_.front().cols(); }

  Evaluation evaluate(Index i, const RealVector &x) const override
  {
    const auto &a = a_[static_cast<std::size_t>(i)];
    const RealVector r = a * x - b_[static_cast<std::size_t>(i)];
    return {r.squaredNorm(), 2.0 * a.transpose() * r};
  }

  // Hessian of phi = (1/m) sum phi_i.
  Eigen::MatrixXd hessian() const
  {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim(), dim());
    for (const auto &a : a_)
      h += 2.0 * a.transpose() * a;
    return h / static_cast<double>(size());
  }

  RealVector minimizer() const
  {
    Eigen::MatrixXd n = Eigen::MatrixXd::Zero(dim(), dim());
    RealVector rhs = RealVector::Zero(dim());
    for (std::size_t i = 0; i < a_.size(); ++i)
    {
      n += a_[i].transpose() * a_[i];
      rhs += a_[i].transpose() * b_[i];
    }
    return n.ldlt().solve(rhs);
  }

private:
  std::vector<Eigen::MatrixXd> a_;
  std::vector<RealVector> b_;
};

// phi_i(x) = 0.5 |x - c_i|^2, minimized by the mean of the centers.
class Quadratic : public Population
{
public:
  explicit Quadratic(std::vector<RealVector> centers) : c_(std::move(centers)) {}

  Index size() const override { return static_cast<Index>(c_.size()); }

  Evaluation evaluate(Index i, const RealVector &x) const override
  {
    const RealVector d = x - c_[static_cast<std::size_t>(i)];
    return {0.5 * d.squaredNorm(), d};
  }

  RealVector minimizer() const
  {
    RealVector s = RealVector::Zero(c_.front().size());
    for (const auto &c : c_)
      s += c;
    return s / static_cast<double>(c_.size());
  }

private:
  std::vector<RealVector> c_;
};

//
// Experiments sharing one linear operator B(x) = B0 + sum_k x_k E_k:
// r_i(x) = d_i - B(x) q_i and phi_i = |r_i|^2. The residual matrix is R(x) = D - B(x) Q.
//
class SharedOperatorToy : public Population
{
public:
  SharedOperatorToy(Index m, Index n, Index nd, Index nq, std::uint64_t seed)
  {
    std::mt19937_64 g(seed);
    b0_ = random_matrix(nd, nq, g);
    for (Index k = 0; k < n; ++k)
      e_.push_back(random_matrix(nd, nq, g));
    q_ = random_matrix(nq, m, g);
    d_ = random_matrix(nd, m, g);
  }

  Index size() const override { return q_.cols(); }
  Index dim() const { return static_cast<Index>(e_.size()); }
  bool shared_operator() const override { return true; }
  bool least_squares() const override { return true; }

  Eigen::MatrixXd op(const RealVector &x) const
  {
    Eigen::MatrixXd b = b0_;
    for (std::size_t k = 0; k < e_.size(); ++k)
      b += x[static_cast<Index>(k)] * e_[k];
    return b;
  }

  Eigen::MatrixXd residuals(const RealVector &x) const { return d_ - op(x) * q_; }

  Evaluation evaluate(Index i, const RealVector &x) const override
  {
    return combined(d_.col(i), q_.col(i), x);
  }

  Evaluation averaged(const RealVector &w, const RealVector &x) const override
  {
    return combined(d_ * w, q_ * w, x);
  }

private:
  Evaluation combined(const RealVector &d, const RealVector &q, const RealVector &x) const
  {
    const RealVector r = d - op(x) * q;
    RealVector g(dim());
    for (std::size_t k = 0; k < e_.size(); ++k)
      g[static_cast<Index>(k)] = -2.0 * r.dot(e_[k] * q);
    return {r.squaredNorm(), g};
  }

  Eigen::MatrixXd b0_;
  std::vector<Eigen::MatrixXd> e_;
  Eigen::MatrixXd q_;
  Eigen::MatrixXd d_;
};

// Population of fixed gradient vectors: phi_i(x) = <g_i, x>.
class FixedGradients : public Population
{
public:
  explicit FixedGradients(Eigen::MatrixXd g) : g_(std::move(g)) {}

  Index size() const override { return g_.cols(); }

  Evaluation evaluate(Index i, const RealVector &x) const override
  {
    return {g_.col(i).dot(x), g_.col(i)};
  }

  const Eigen::MatrixXd &gradients() const { return g_; }

private:
  Eigen::MatrixXd g_;
};

}  // namespace rfwi::test

#endif  // RFWI_TESTS_TOY_HPP

#pragma once

#include "sdc/problems/oracle.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

namespace sdc {

/// psi(x) = 0.5 x^T Q x - b^T x with Q symmetric positive semidefinite.
class QuadraticOracle final : public SmoothOracle {
 public:
  QuadraticOracle(Mat q, Vec b) : q_(std::move(q)), b_(std::move(b)) {
    if (q_.rows() != q_.cols() || q_.rows() != b_.size() || q_.rows() == 0) {
      throw Error(ErrorKind::invalid_dimensions, "quadratic: Q must be square and match b");
    }
    Eigen::SelfAdjointEigenSolver<Mat> eig(q_, Eigen::EigenvaluesOnly);
    lmin_ = eig.eigenvalues().minCoeff();
    lmax_ = eig.eigenvalues().maxCoeff();
  }

  /// 0.5 ||x||^2.
  static QuadraticOracle identity(Index n) { return {Mat::Identity(n, n), Vec::Zero(n)}; }

  /// Diagonal quadratic with the given eigenvalues and linear term.
  static QuadraticOracle diagonal(const Vec& eigenvalues, Vec b) {
    return {Mat(eigenvalues.asDiagonal()), std::move(b)};
  }

  /// Random rotation of a spectrum log-spaced in [mu, L]; b drawn N(0, 1).
  static QuadraticOracle random(Index n, double mu, double L, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    Mat g(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) g(i, j) = normal(rng);
    Eigen::HouseholderQR<Mat> qr(g);
    Mat rot = qr.householderQ();
    Vec spec(n);
    for (Index i = 0; i < n; ++i) {
      const double t = n == 1 ? 1.0 : static_cast<double>(i) / static_cast<double>(n - 1);
      spec(i) = mu * std::pow(L / mu, t);
    }
    Mat q = rot * spec.asDiagonal() * rot.transpose();
    q = 0.5 * (q + q.transpose()).eval();
    Vec b(n);
    for (Index i = 0; i < n; ++i) b(i) = normal(rng);
    return {std::move(q), std::move(b)};
  }

  Index dim() const override { return b_.size(); }

  double value(const Vec& x) override {
    ++counters_.n_value;
    return 0.5 * x.dot(q_ * x) - b_.dot(x);
  }

  Vec gradient(const Vec& x) override {
    ++counters_.n_grad;
    return q_ * x - b_;
  }

  double value_and_gradient(const Vec& x, Vec& grad) override {
    ++counters_.n_value;
    ++counters_.n_grad;
    Vec qx = q_ * x;
    grad = qx - b_;
    return 0.5 * x.dot(qx) - b_.dot(x);
  }

  double lipschitz() const override { return lmax_; }
  double min_eigenvalue() const { return lmin_; }

  /// Unique minimizer; requires Q positive definite.
  Vec minimizer() const { return q_.ldlt().solve(b_); }
  double min_value() const {
    const Vec xs = minimizer();
    return -0.5 * b_.dot(xs);
  }

  const Mat& hessian() const { return q_; }
  const Vec& linear() const { return b_; }

  std::unique_ptr<SmoothOracle> clone() const override {
    return std::make_unique<QuadraticOracle>(q_, b_);
  }

 private:
  Mat q_;
  Vec b_;
  double lmin_ = 0.0;
  double lmax_ = 0.0;
};

/// psi(x) = 0.5 ||A x - b||^2 with a dense matrix; counts A / A^T applications.
class LeastSquaresOracle final : public SmoothOracle {
 public:
  LeastSquaresOracle(Mat a, Vec b) : a_(std::move(a)), b_(std::move(b)) {
    if (a_.rows() != b_.size() || a_.cols() == 0) {
      throw Error(ErrorKind::invalid_dimensions, "least squares: rows(A) must equal size(b)");
    }
    Eigen::JacobiSVD<Mat> svd(a_);
    const double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    lip_ = smax * smax;
  }

  Index dim() const override { return a_.cols(); }

  double value(const Vec& x) override {
    ++counters_.n_value;
    ++counters_.n_A;
    return 0.5 * (a_ * x - b_).squaredNorm();
  }

  Vec gradient(const Vec& x) override {
    ++counters_.n_grad;
    ++counters_.n_A;
    ++counters_.n_At;
    return a_.transpose() * (a_ * x - b_);
  }

  double value_and_gradient(const Vec& x, Vec& grad) override {
    ++counters_.n_value;
    ++counters_.n_grad;
    ++counters_.n_A;
    ++counters_.n_At;
    const Vec r = a_ * x - b_;
    grad = a_.transpose() * r;
    return 0.5 * r.squaredNorm();
  }

  double lipschitz() const override { return lip_; }
  const Mat& matrix() const { return a_; }
  const Vec& rhs() const { return b_; }

  std::unique_ptr<SmoothOracle> clone() const override {
    return std::make_unique<LeastSquaresOracle>(a_, b_);
  }

 private:
  Mat a_;
  Vec b_;
  double lip_ = 0.0;
};

/// Chained Rosenbrock: sum_i 100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2. Minimum 0 at 1.
class RosenbrockOracle final : public SmoothOracle {
 public:
  explicit RosenbrockOracle(Index n = 2) : n_(n) {
    if (n < 2) throw Error(ErrorKind::invalid_dimensions, "rosenbrock needs n >= 2");
  }

  Index dim() const override { return n_; }

  double value(const Vec& x) override {
    ++counters_.n_value;
    double f = 0.0;
    for (Index i = 0; i + 1 < n_; ++i) {
      const double a = x(i + 1) - x(i) * x(i);
      const double b = 1.0 - x(i);
      f += 100.0 * a * a + b * b;
    }
    return f;
  }

  Vec gradient(const Vec& x) override {
    ++counters_.n_grad;
    Vec g = Vec::Zero(n_);
    for (Index i = 0; i + 1 < n_; ++i) {
      const double a = x(i + 1) - x(i) * x(i);
      g(i) += -400.0 * x(i) * a - 2.0 * (1.0 - x(i));
      g(i + 1) += 200.0 * a;
    }
    return g;
  }

  std::unique_ptr<SmoothOracle> clone() const override {
    return std::make_unique<RosenbrockOracle>(n_);
  }

 private:
  Index n_;
};

}  // namespace sdc

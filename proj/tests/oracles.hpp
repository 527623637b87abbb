#pragma once
// Independent reference computations used by the tests. Nothing here calls
// into the library's solvers.

#include "sdc/types.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

namespace oracle {

using sdc::Index;
using sdc::Mat;
using sdc::Vec;

/// Dense orthonormal DCT-II matrix: C(k, j) = c_k cos(pi (2j + 1) k / (2n)).
inline Mat dct_matrix(Index n) {
  Mat c(n, n);
  for (Index k = 0; k < n; ++k) {
    const double ck = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (Index j = 0; j < n; ++j) {
      c(k, j) = ck * std::cos(std::numbers::pi * (2.0 * j + 1.0) * k / (2.0 * n));
    }
  }
  return c;
}

inline Mat partial_dct_matrix(Index n, const std::vector<Index>& rows) {
  const Mat c = dct_matrix(n);
  Mat a(static_cast<Index>(rows.size()), n);
  for (std::size_t i = 0; i < rows.size(); ++i) a.row(static_cast<Index>(i)) = c.row(rows[i]);
  return a;
}

/// Global minimizer of 0.5 ||A x - b||^2 + lambda ||x||_1 by enumerating every
/// sign pattern in {-1, 0, +1}^n and solving the stationarity system on its
/// support. Only for n <= 12.
struct LassoSolution {
  Vec x;
  double f = std::numeric_limits<double>::infinity();
};

inline double lasso_objective(const Mat& a, const Vec& b, double lambda, const Vec& x) {
  return 0.5 * (a * x - b).squaredNorm() + lambda * x.lpNorm<1>();
}

inline LassoSolution lasso_enumerate(const Mat& a, const Vec& b, double lambda) {
  const Index n = a.cols();
  LassoSolution best;
  best.x = Vec::Zero(n);
  best.f = lasso_objective(a, b, lambda, best.x);
  std::vector<int> sign(static_cast<std::size_t>(n), 0);
  long total = 1;
  for (Index i = 0; i < n; ++i) total *= 3;
  for (long code = 1; code < total; ++code) {
    long c = code;
    std::vector<Index> support;
    for (Index i = 0; i < n; ++i) {
      sign[static_cast<std::size_t>(i)] = static_cast<int>(c % 3) - 1;
      c /= 3;
      if (sign[static_cast<std::size_t>(i)] != 0) support.push_back(i);
    }
    const Index k = static_cast<Index>(support.size());
    if (k > a.rows()) continue;
    Mat as(a.rows(), k);
    Vec sg(k);
    for (Index j = 0; j < k; ++j) {
      as.col(j) = a.col(support[static_cast<std::size_t>(j)]);
      sg(j) = sign[static_cast<std::size_t>(support[static_cast<std::size_t>(j)])];
    }
    const Mat g = as.transpose() * as;
    Eigen::LDLT<Mat> ldlt(g);
    if (ldlt.info() != Eigen::Success) continue;
    const Vec xs = ldlt.solve(as.transpose() * b - lambda * sg);
    bool consistent = true;
    for (Index j = 0; j < k; ++j) consistent = consistent && xs(j) * sg(j) > 0.0;
    if (!consistent) continue;
    Vec x = Vec::Zero(n);
    for (Index j = 0; j < k; ++j) x(support[static_cast<std::size_t>(j)]) = xs(j);
    const double f = lasso_objective(a, b, lambda, x);
    if (f < best.f) {
      best.f = f;
      best.x = x;
    }
  }
  return best;
}

/// Minimizer of a unimodal scalar function on [lo, hi] by ternary search.
inline double ternary_min(const std::function<double(double)>& phi, double lo, double hi, int iters = 300) {
  for (int i = 0; i < iters; ++i) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (phi(m1) < phi(m2)) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  return 0.5 * (lo + hi);
}

/// Same search driven by diff(a, b) = phi(a) - phi(b), written so that it is
/// free of cancellation; resolves the minimizer well below sqrt(eps).
inline double ternary_min_diff(const std::function<double(double, double)>& diff, double lo, double hi,
                               int iters = 300) {
  for (int i = 0; i < iters; ++i) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (diff(m1, m2) < 0.0) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  return 0.5 * (lo + hi);
}

/// Central finite-difference gradient.
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
  Vec g(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    Vec xp = x;
    Vec xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

/// FISTA in the form x_k = prox(y_{k-1} - s grad psi(y_{k-1})),
/// y_k = x_k + (k - 1)/(k + 2) (x_k - x_{k-1}), on an explicit matrix.
inline std::vector<Vec> fista(const Mat& a, const Vec& b, double lambda, const Vec& x0, double s, int iters) {
  auto prox = [&](const Vec& z) {
    Vec out(z.size());
    for (Index i = 0; i < z.size(); ++i) {
      const double m = std::abs(z(i)) - lambda * s;
      out(i) = m > 0.0 ? std::copysign(m, z(i)) : 0.0;
    }
    return out;
  };
  std::vector<Vec> xs{x0};
  Vec x = x0;
  Vec y = x0;
  for (int k = 1; k <= iters; ++k) {
    const Vec x_new = prox(y - s * (a.transpose() * (a * y - b)));
    const double mom = static_cast<double>(k - 1) / static_cast<double>(k + 2);
    y = x_new + mom * (x_new - x);
    x = x_new;
    xs.push_back(x);
  }
  return xs;
}

/// Nesterov's method with gradient restarting on f = 0.5 x'Qx - b'x, test
/// <grad f(x_k), x_k - x_{k-1}> > 0 taken before each step.
struct NesterovTrace {
  std::vector<Vec> xs;
  std::vector<int> restart_at;  // step indices at which a restart fired
};

inline NesterovTrace nesterov_restart(const Mat& q, const Vec& b, const Vec& x0, double s, int iters,
                                      bool restarts = true) {
  NesterovTrace tr;
  tr.xs.push_back(x0);
  Vec x = x0;
  Vec x_prev = x0;
  Vec y = x0;
  int j = 0;
  for (int k = 0; k < iters; ++k) {
    if (restarts && j > 0 && (q * x - b).dot(x - x_prev) > 0.0) {
      y = x;
      j = 0;
      tr.restart_at.push_back(k);
    }
    const Vec x_new = y - s * (q * y - b);
    ++j;
    const double mom = static_cast<double>(j - 1) / static_cast<double>(j + 2);
    y = x_new + mom * (x_new - x);
    x_prev = x;
    x = x_new;
    tr.xs.push_back(x);
  }
  return tr;
}

}  // namespace oracle

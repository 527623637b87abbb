#pragma once

#include "sdc/problems/dct.hpp"
#include "sdc/problems/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

namespace sdc {

/// Compressed-sensing Lasso instance: A = rows J of the orthonormal DCT-II of size n.
struct LassoInstance {
  Index n = 0;
  std::vector<Index> rows;  // J, |J| = m, distinct
  Vec b;
  double lambda = 0.0;
  std::optional<Vec> ground_truth;
  // Generator parameters, echoed for reproducibility.
  Index k = 0;
  double dynamic_range_db = 0.0;
  double noise_std = 0.0;
  std::uint64_t seed = 0;

  Index m() const { return static_cast<Index>(rows.size()); }

  void validate() const {
    if (n <= 0 || rows.empty() || m() > n) {
      throw Error(ErrorKind::invalid_dimensions, "lasso: need 0 < m <= n");
    }
    if (b.size() != m()) throw Error(ErrorKind::invalid_dimensions, "lasso: size(b) != m");
    std::vector<Index> sorted = rows;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end() || sorted.front() < 0 ||
        sorted.back() >= n) {
      throw Error(ErrorKind::invalid_input, "lasso: row indices must be distinct and in [0, n)");
    }
    if (ground_truth && ground_truth->size() != n) {
      throw Error(ErrorKind::invalid_dimensions, "lasso: ground truth has wrong length");
    }
  }
};

namespace detail {
// First `count` entries of a uniformly shuffled 0..n-1 (partial Fisher-Yates).
inline std::vector<Index> sample_distinct(Index n, Index count, std::mt19937_64& rng) {
  std::vector<Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), Index{0});
  for (Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  pool.resize(static_cast<std::size_t>(count));
  return pool;
}
}  // namespace detail

/// Partial DCT measurement operator x -> (dct(x))_J and its adjoint.
class PartialDct {
 public:
  PartialDct(Index n, std::vector<Index> rows) : dct_(n), rows_(std::move(rows)) {}

  Index cols() const { return dct_.size(); }
  Index rows() const { return static_cast<Index>(rows_.size()); }

  void apply(const Vec& x, Vec& y) {
    dct_.forward(x, full_);
    y.resize(rows());
    for (Index i = 0; i < rows(); ++i) y(i) = full_(rows_[static_cast<std::size_t>(i)]);
  }

  void adjoint(const Vec& y, Vec& x) {
    full_.setZero(cols());
    for (Index i = 0; i < rows(); ++i) full_(rows_[static_cast<std::size_t>(i)]) = y(i);
    dct_.inverse(full_, x);
  }

 private:
  OrthonormalDct dct_;
  std::vector<Index> rows_;
  Vec full_;
};

/// x_bar with k nonzeros of magnitude 10^(d c2 / 20) and random sign, then
/// b = (dct(x_bar))_J + w with w ~ N(0, noise_std^2).
inline LassoInstance lasso_generate(Index n, Index m, Index k, double dynamic_range_db,
                                    double noise_std, std::uint64_t seed, double lambda) {
  if (n <= 0 || m <= 0 || k < 0 || k > n || m > n) {
    throw Error(ErrorKind::invalid_dimensions, "lasso_generate: need k <= n and 0 < m <= n");
  }
  if (noise_std < 0.0 || lambda < 0.0) {
    throw Error(ErrorKind::invalid_input, "lasso_generate: noise and lambda must be >= 0");
  }
  std::mt19937_64 rng(seed);
  LassoInstance inst;
  inst.n = n;
  inst.k = k;
  inst.dynamic_range_db = dynamic_range_db;
  inst.noise_std = noise_std;
  inst.seed = seed;
  inst.lambda = lambda;

  Vec xbar = Vec::Zero(n);
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Index i : detail::sample_distinct(n, k, rng)) {
    const double sign = coin(rng) ? 1.0 : -1.0;
    xbar(i) = sign * std::pow(10.0, dynamic_range_db * unif(rng) / 20.0);
  }
  inst.rows = detail::sample_distinct(n, m, rng);

  PartialDct op(n, inst.rows);
  Vec ax;
  op.apply(xbar, ax);
  std::normal_distribution<double> normal(0.0, 1.0);
  inst.b = ax;
  if (noise_std > 0.0) {
    for (Index i = 0; i < m; ++i) inst.b(i) += noise_std * normal(rng);
  }
  inst.ground_truth = std::move(xbar);
  return inst;
}

/// psi(x) = 0.5 ||A x - b||^2 over a partial DCT. Each application of A or A^T
/// counts once. The last forward product is cached: a gradient requested at
/// the point of the previous evaluation reuses A x and only pays for A^T.
class LassoOracle final : public SmoothOracle {
 public:
  explicit LassoOracle(const LassoInstance& inst) : op_(inst.n, inst.rows), b_(inst.b) {
    inst.validate();
  }

  Index dim() const override { return op_.cols(); }
  double lipschitz() const override { return 1.0; }

  double value(const Vec& x) override {
    ++counters_.n_value;
    forward(x);
    return 0.5 * (cached_ax_ - b_).squaredNorm();
  }

  Vec gradient(const Vec& x) override {
    Vec g;
    value_and_gradient_impl(x, g, false);
    return g;
  }

  double value_and_gradient(const Vec& x, Vec& grad) override {
    return value_and_gradient_impl(x, grad, true);
  }

  /// A^T b, e.g. for lambda_max = ||A^T b||_inf. Counts one adjoint.
  Vec adjoint_of_b() {
    ++counters_.n_At;
    Vec out;
    op_.adjoint(b_, out);
    return out;
  }

  /// Direct operator access; counted like any other application.
  void apply(const Vec& x, Vec& y) {
    ++counters_.n_A;
    op_.apply(x, y);
  }
  void apply_adjoint(const Vec& y, Vec& x) {
    ++counters_.n_At;
    op_.adjoint(y, x);
  }

  std::unique_ptr<SmoothOracle> clone() const override {
    return std::unique_ptr<SmoothOracle>(new LassoOracle(*this, 0));
  }

 private:
  LassoOracle(const LassoOracle& other, int) : op_(other.op_), b_(other.b_) {}

  void forward(const Vec& x) {
    if (has_cache_ && cached_x_.size() == x.size() && cached_x_ == x) return;
    ++counters_.n_A;
    op_.apply(x, cached_ax_);
    cached_x_ = x;
    has_cache_ = true;
  }

  double value_and_gradient_impl(const Vec& x, Vec& grad, bool want_value) {
    if (want_value) ++counters_.n_value;
    ++counters_.n_grad;
    forward(x);
    residual_ = cached_ax_ - b_;
    ++counters_.n_At;
    op_.adjoint(residual_, grad);
    return 0.5 * residual_.squaredNorm();
  }

  PartialDct op_;
  Vec b_;
  Vec cached_x_;
  Vec cached_ax_;
  Vec residual_;
  bool has_cache_ = false;
};

}  // namespace sdc

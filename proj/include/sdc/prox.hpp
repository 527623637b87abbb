#pragma once

#include "sdc/problems/oracle.hpp"

#include <cmath>
#include <memory>
#include <optional>

namespace sdc {

enum class ProxKind { none, l1, squared_l2 };

/// The nonsmooth part h: none, lambda ||x||_1, or lambda ||x||^2.
struct ProxSpec {
  ProxKind kind = ProxKind::none;
  double lambda = 0.0;

  static ProxSpec none() { return {}; }
  static ProxSpec l1(double lambda) { return make(ProxKind::l1, lambda); }
  static ProxSpec squared_l2(double lambda) { return make(ProxKind::squared_l2, lambda); }

  bool is_identity() const { return kind == ProxKind::none || lambda == 0.0; }

  double value(const Vec& x) const {
    switch (kind) {
      case ProxKind::none: return 0.0;
      case ProxKind::l1: return lambda * x.lpNorm<1>();
      case ProxKind::squared_l2: return lambda * x.squaredNorm();
    }
    return 0.0;
  }

 private:
  static ProxSpec make(ProxKind kind, double lambda) {
    if (!(lambda >= 0.0)) throw Error(ErrorKind::invalid_input, "prox weight must be >= 0");
    return {kind, lambda};
  }
};

/// argmin_z ( ||z - x||^2 / (2 s) + h(z) ).
inline Vec prox_map(const ProxSpec& h, const Vec& x, double s) {
  if (!(s > 0.0)) throw Error(ErrorKind::invalid_step, "prox step must be positive");
  switch (h.kind) {
    case ProxKind::none:
      return x;
    case ProxKind::l1: {
      const double t = h.lambda * s;
      return x.unaryExpr([t](double v) { return std::copysign(std::max(std::abs(v) - t, 0.0), v) + 0.0; });
    }
    case ProxKind::squared_l2:
      return x / (1.0 + 2.0 * h.lambda * s);
  }
  return x;
}

/// G_s(x) from a precomputed grad psi(x). With h = none this is grad exactly.
inline Vec prox_grad_from(const ProxSpec& h, const Vec& x, const Vec& grad, double s) {
  if (!(s > 0.0)) throw Error(ErrorKind::invalid_step, "prox-gradient step must be positive");
  if (h.kind == ProxKind::none) return grad;
  return (x - prox_map(h, x - s * grad, s)) / s;
}

/// f = psi + h with psi behind a counted oracle.
class CompositeProblem {
 public:
  CompositeProblem(std::unique_ptr<SmoothOracle> smooth, ProxSpec h,
                   std::optional<double> lipschitz_hint = std::nullopt)
      : smooth_(std::move(smooth)), h_(h), lipschitz_hint_(lipschitz_hint) {
    if (!smooth_) throw Error(ErrorKind::invalid_input, "composite problem needs a smooth part");
    if (lipschitz_hint_ && !(*lipschitz_hint_ > 0.0)) {
      throw Error(ErrorKind::invalid_input, "lipschitz hint must be positive");
    }
  }

  CompositeProblem(const CompositeProblem& other)
      : smooth_(other.smooth_->clone()), h_(other.h_), lipschitz_hint_(other.lipschitz_hint_) {}
  CompositeProblem& operator=(const CompositeProblem& other) {
    if (this != &other) {
      smooth_ = other.smooth_->clone();
      h_ = other.h_;
      lipschitz_hint_ = other.lipschitz_hint_;
    }
    return *this;
  }
  CompositeProblem(CompositeProblem&&) noexcept = default;
  CompositeProblem& operator=(CompositeProblem&&) noexcept = default;

  Index dim() const { return smooth_->dim(); }
  SmoothOracle& smooth() { return *smooth_; }
  const SmoothOracle& smooth() const { return *smooth_; }
  const ProxSpec& h() const { return h_; }
  const CallCounters& counters() const { return smooth_->counters(); }

  /// Known L from the hint or the oracle; <= 0 when unknown.
  double lipschitz() const { return lipschitz_hint_ ? *lipschitz_hint_ : smooth_->lipschitz(); }

  double value(const Vec& x) { return smooth_->value(x) + h_.value(x); }

  /// Composite value f(x) and grad psi(x) from one oracle request.
  double value_and_gradient(const Vec& x, Vec& grad) {
    return smooth_->value_and_gradient(x, grad) + h_.value(x);
  }

  /// Changes the weight of h in place; the oracle and its counters are kept
  /// (continuation accumulates N_A across stages).
  void set_lambda(double lambda) {
    if (!(lambda >= 0.0)) throw Error(ErrorKind::invalid_input, "prox weight must be >= 0");
    h_.lambda = lambda;
  }

 private:
  std::unique_ptr<SmoothOracle> smooth_;
  ProxSpec h_;
  std::optional<double> lipschitz_hint_;
};

/// G_s(x) = (x - prox_h^s(x - s grad psi(x))) / s. One gradient request.
inline Vec prox_grad(CompositeProblem& problem, const Vec& x, double s) {
  if (!(s > 0.0)) throw Error(ErrorKind::invalid_step, "prox-gradient step must be positive");
  const Vec g = problem.smooth().gradient(x);
  return prox_grad_from(problem.h(), x, g, s);
}

}  // namespace sdc

#pragma once

#include "sdc/types.hpp"

#include <cstdint>
#include <memory>
#include <span>

namespace sdc {

/// Call accounting for one oracle instance. n_A / n_At count applications of a
/// measurement operator and its adjoint (zero for oracles without one).
struct CallCounters {
  std::uint64_t n_A = 0;
  std::uint64_t n_At = 0;
  std::uint64_t n_grad = 0;
  std::uint64_t n_value = 0;
  // Component gradients grad psi_i evaluated by finite-sum oracles.
  std::uint64_t n_component_grads = 0;

  std::uint64_t operator_calls() const { return n_A + n_At; }
};

/// Smooth part psi of a composite objective. Counters change only through the
/// evaluation methods below; each solver run owns its own clone.
class SmoothOracle {
 public:
  virtual ~SmoothOracle() = default;

  virtual Index dim() const = 0;
  virtual double value(const Vec& x) = 0;
  virtual Vec gradient(const Vec& x) = 0;

  /// Value and gradient at the same point. Implementations sharing work between
  /// the two (a residual, a margin vector) should override this.
  virtual double value_and_gradient(const Vec& x, Vec& grad) {
    const double v = value(x);
    grad = gradient(x);
    return v;
  }

  /// Lipschitz constant of the gradient when known analytically, else <= 0.
  virtual double lipschitz() const { return 0.0; }

  /// Deep copy with zeroed counters.
  virtual std::unique_ptr<SmoothOracle> clone() const = 0;

  const CallCounters& counters() const { return counters_; }

 protected:
  CallCounters counters_;
};

/// psi(x) = (1/N) sum_i psi_i(x), with mini-batch access to the components.
class FiniteSumOracle : public SmoothOracle {
 public:
  virtual Index num_terms() const = 0;

  /// out = (1/|batch|) sum_{i in batch} grad psi_i(x). Indices must be distinct
  /// and in [0, num_terms()).
  virtual void batch_gradient(const Vec& x, std::span<const Index> batch, Vec& out) = 0;

  /// Value of the single component psi_i.
  virtual double component_value(const Vec& x, Index i) = 0;
};

}  // namespace sdc

#pragma once

#include "sdc/problems/lasso.hpp"
#include "sdc/problems/lasso_io.hpp"
#include "sdc/problems/logreg.hpp"
#include "sdc/problems/quadratic.hpp"
#include "sdc/prox.hpp"

namespace sdc {

/// 0.5 ||A x - b||^2 + lambda ||x||_1 with the instance's lambda.
inline CompositeProblem lasso_problem(const LassoInstance& inst) {
  return CompositeProblem(std::make_unique<LassoOracle>(inst), ProxSpec::l1(inst.lambda));
}

/// Mean logistic loss + lambda ||x||_1 (bias included in the penalty).
inline CompositeProblem logreg_problem(std::shared_ptr<const LogRegDataset> data, double lambda) {
  if (!(lambda >= 0.0)) throw Error(ErrorKind::invalid_input, "lambda must be >= 0");
  return CompositeProblem(std::make_unique<LogRegOracle>(std::move(data)), ProxSpec::l1(lambda));
}

/// Smooth problem (h = none) around a single oracle.
template <class Oracle, class... Args>
CompositeProblem smooth_problem(Args&&... args) {
  return CompositeProblem(std::make_unique<Oracle>(std::forward<Args>(args)...), ProxSpec::none());
}

}  // namespace sdc

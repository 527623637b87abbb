#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>

namespace sdc {

enum class RestartReason {
  none,
  start,           // first iteration from u_0 = 0 / x_0 = x_{-1}; not counted as a restart
  descent,         // phi_k < 0: velocity is no longer a descent direction
  gradient_decay,  // d_f ||g_k|| < ||g_{k-1}||
  iteration_cap,   // K consecutive updates without restart
  step_failure,    // line search exhausted; fell back to steepest descent
};

inline const char* to_string(RestartReason r) {
  switch (r) {
    case RestartReason::none: return "none";
    case RestartReason::start: return "start";
    case RestartReason::descent: return "descent";
    case RestartReason::gradient_decay: return "gradient-decay";
    case RestartReason::iteration_cap: return "iteration-cap";
    case RestartReason::step_failure: return "step-failure";
  }
  return "unknown";
}

inline bool counts_as_restart(RestartReason r) {
  return r != RestartReason::none && r != RestartReason::start;
}

/// Per-iteration metrics. Values describe the iterate x_k the iteration
/// started from, plus the step it took.
struct IterationRecord {
  static constexpr double nan = std::numeric_limits<double>::quiet_NaN();

  std::size_t k = 0;
  std::size_t epoch = 0;
  std::size_t stage = 0;        // continuation stage
  double f = nan;
  double rel_err = nan;
  double grad_norm = nan;       // ||G_s(x_k)|| (||grad f|| for smooth problems)
  double scaled_grad_norm = nan;  // ||s G_s(x_k)|| at the metric step
  std::uint64_t n_A = 0;        // forward + adjoint operator applications so far
  std::size_t restarts = 0;
  RestartReason reason = RestartReason::none;
  double step = nan;
  double velocity_ratio = nan;  // ||u_{k+1}|| / ||G(x_k)||
  double ratio_bound = nan;     // recurrence bound on the ratio (safeguarded runs)
  std::int64_t wall_ns = 0;
};

}  // namespace sdc

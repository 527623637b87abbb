#pragma once

#include "sdc/sdc_core.hpp"

#include <cmath>
#include <limits>

namespace sdc {

/// FISC-PG is the SDC iteration with grad f replaced by G_s; with h = none it
/// is exactly sdc_step.
inline IterationRecord fisc_pg_step(CompositeProblem& p, SdcState& st, const LineSearchConfig& ls) {
  return sdc_step(p, st, ls);
}

/// State of the two-point (x_k, x_{k-1}) schemes FISC-ns / FISC-PM.
struct TwoPointState {
  Vec x;
  Vec x_prev;  // x_{-1} = x_0 at start
  Schedule schedule = Schedule::fisc(3.0);
  bool restarts_enabled = true;

  std::size_t k = 0;
  std::size_t restarts = 0;
  double step = 1.0;
  NonmonotoneState nm;
  double grad_tol = -1.0;
  bool converged = false;

  // Oracle information at x (valid when have_grad / have_f).
  double f = std::numeric_limits<double>::quiet_NaN();
  bool have_f = false;
  Vec grad;
  bool have_grad = false;
  Vec grad_prev;  // grad psi(x_prev), for BB trial steps
  bool have_grad_prev = false;

  void evaluate(CompositeProblem& p) {
    if (!have_grad) {
      f = p.value_and_gradient(x, grad);
      have_grad = have_f = true;
    }
  }
  void evaluate_value(CompositeProblem& p) {
    if (!have_f) {
      f = p.value(x);
      have_f = true;
    }
  }
};

inline TwoPointState two_point_init(const Vec& x0, const Schedule& schedule, const LineSearchConfig& ls,
                                    bool restarts_enabled = true) {
  ls.validate();
  TwoPointState st;
  st.x = x0;
  st.x_prev = x0;
  st.schedule = schedule;
  st.schedule.reset();
  st.restarts_enabled = restarts_enabled;
  st.step = ls.initial_step;
  return st;
}

namespace detail {

inline double two_point_trial(const TwoPointState& st, const LineSearchConfig& ls) {
  if (ls.mode == LineSearchMode::fixed) return ls.initial_step;
  switch (ls.trial) {
    case TrialPolicy::initial: return ls.initial_step;
    case TrialPolicy::previous: return st.step;
    case TrialPolicy::bb:
      if (st.have_grad_prev && st.have_grad && st.k > 0) {
        return bb_trial_step(st.x_prev, st.x, st.grad_prev, st.grad, ls.s_min, ls.s_max);
      }
      return st.step;
  }
  return ls.initial_step;
}

struct ProxStepResult {
  Vec x_next;
  double f_next = std::numeric_limits<double>::quiet_NaN();
  double step = 0.0;
  bool ok = false;
};

// x+ = prox_h^s(z - s grad psi(z)) with s fixed or backtracked from s_bar until
// f(x+) <= ref - c s ||G_s(z)||^2.
inline ProxStepResult prox_step_at(CompositeProblem& p, const Vec& z, const Vec& grad_z, double s_bar,
                                   const LineSearchConfig& ls, double ref) {
  ProxStepResult out;
  if (ls.mode == LineSearchMode::fixed) {
    out.x_next = prox_map(p.h(), z - s_bar * grad_z, s_bar);
    out.step = s_bar;
    out.ok = true;
    return out;
  }
  const double c = ls.mode == LineSearchMode::nonmonotone ? 0.5 : ls.sigma;
  Vec cand;
  auto res = backtrack(
      s_bar, ls,
      [&](double s) {
        cand = prox_map(p.h(), z - s * grad_z, s);
        return p.value(cand);
      },
      [&](double s, double fc) {
        const double gsq = (z - cand).squaredNorm() / (s * s);
        return fc <= ls.threshold(ref, c * s * gsq);
      });
  if (!res.ok) return out;
  out.x_next = std::move(cand);
  out.f_next = res.f_new;
  out.step = res.step;
  out.ok = true;
  return out;
}

}  // namespace detail

/// One FISC-PM iteration (FISC-ns when h = none). With phi_k = <x_k - x_{k-1},
/// -G_s(x_k)> >= 0 (or restarts disabled):
///   y_k = x_k + (1 - beta_k) dx_k - gamma_k (||dx_k|| / ||G_s(x_k)||) G_s(x_k),
///   x_{k+1} = prox_h^s(y_k - s grad psi(y_k)),
/// else x_{k+1} = x_k - s G_s(x_k) and the schedule is reset. The first
/// iteration (x_0 = x_{-1}) is the plain proximal-gradient step.
inline IterationRecord two_point_step(CompositeProblem& p, TwoPointState& st, const LineSearchConfig& ls) {
  IterationRecord rec;
  rec.k = st.k;
  rec.restarts = st.restarts;
  const ProxSpec& h = p.h();
  const double s_trial = detail::two_point_trial(st, ls);
  const double gamma = st.schedule.gamma();
  const bool need_x = st.k == 0 || st.restarts_enabled || gamma != 0.0 ||
                      (ls.mode != LineSearchMode::fixed && ls.trial == TrialPolicy::bb);

  Vec gx;
  double gx_norm = std::numeric_limits<double>::quiet_NaN();
  if (need_x) {
    st.evaluate(p);
    gx = prox_grad_from(h, st.x, st.grad, s_trial);
    gx_norm = gx.norm();
    if (st.k == 0) {
      st.grad_tol = 1e-15 * (1.0 + gx_norm);
      if (ls.mode == LineSearchMode::nonmonotone) st.nm = NonmonotoneState::start(st.f);
    }
    rec.grad_norm = gx_norm;
    rec.f = st.f;
    if (gx_norm <= st.grad_tol) {
      st.converged = true;
      return rec;
    }
  }
  if (st.have_f) rec.f = st.f;

  const Vec dx = st.x - st.x_prev;
  RestartReason reason = RestartReason::none;
  if (st.k == 0) {
    reason = RestartReason::start;
  } else if (st.restarts_enabled && dx.dot(-gx) < 0.0) {
    reason = RestartReason::descent;
  }

  detail::ProxStepResult next;
  if (reason == RestartReason::none) {
    Vec y = st.x + st.schedule.one_minus_beta() * dx;
    if (gamma != 0.0) y -= (gamma * dx.norm() / gx_norm) * gx;
    Vec grad_y;
    double f_y = std::numeric_limits<double>::quiet_NaN();
    if (ls.mode == LineSearchMode::fixed) {
      grad_y = p.smooth().gradient(y);
    } else {
      f_y = p.value_and_gradient(y, grad_y);
    }
    const double ref = ls.mode == LineSearchMode::nonmonotone ? std::max(st.nm.C, f_y) : f_y;
    next = detail::prox_step_at(p, y, grad_y, s_trial, ls, ref);
    if (!next.ok) reason = RestartReason::step_failure;
  }
  if (reason != RestartReason::none) {
    if (!need_x) {
      st.evaluate(p);
      gx_norm = prox_grad_from(h, st.x, st.grad, s_trial).norm();
    } else if (!st.have_grad) {
      st.evaluate(p);
    }
    const double ref = ls.mode == LineSearchMode::nonmonotone ? st.nm.C : st.f;
    next = detail::prox_step_at(p, st.x, st.grad, s_trial, ls, ref);
    // a huge BB trial (non-positive curvature) can outlast the backtracking budget
    if (!next.ok && s_trial > ls.initial_step) next = detail::prox_step_at(p, st.x, st.grad, ls.initial_step, ls, ref);
    if (!next.ok) {
      throw Error(ErrorKind::step_failure,
                  "two_point_step: proximal-gradient fallback failed at iteration " + std::to_string(st.k));
    }
  }

  if (ls.mode == LineSearchMode::nonmonotone) st.nm.update(ls.eta, next.f_next);
  rec.reason = reason;
  rec.step = next.step;
  if (counts_as_restart(reason)) ++st.restarts;
  rec.restarts = st.restarts;
  if (reason == RestartReason::none) {
    st.schedule.advance();
  } else {
    st.schedule.reset();
  }

  st.x_prev = std::move(st.x);
  if (st.have_grad) {
    st.grad_prev = std::move(st.grad);
    st.have_grad_prev = true;
  } else {
    st.have_grad_prev = false;
  }
  st.x = std::move(next.x_next);
  st.grad = Vec();
  st.have_grad = false;
  st.f = next.f_next;
  st.have_f = ls.mode != LineSearchMode::fixed;
  st.step = next.step;
  ++st.k;
  if (!st.x.allFinite()) {
    throw Error(ErrorKind::divergence, "two_point_step: non-finite iterate at iteration " + std::to_string(rec.k));
  }
  return rec;
}

/// FISC-ns: the two-point scheme on a smooth problem (h must be none).
inline IterationRecord fisc_ns_step(CompositeProblem& p, TwoPointState& st, const LineSearchConfig& ls) {
  if (p.h().kind != ProxKind::none) throw Error(ErrorKind::invalid_input, "FISC-ns needs h = none");
  return two_point_step(p, st, ls);
}

inline IterationRecord fisc_pm_step(CompositeProblem& p, TwoPointState& st, const LineSearchConfig& ls) {
  return two_point_step(p, st, ls);
}

/// Point at which the gradient-restart test of the Nesterov baseline is taken.
enum class RestartTestPoint {
  iterate,       // <grad f(x_k), x_k - x_{k-1}> > 0
  extrapolated,  // <grad f(y_k), x_k - x_{k-1}> > 0
};

/// Nesterov's method with gradient restarting and fixed step s:
///   x_j = y_{j-1} - s grad f(y_{j-1}),  y_j = x_j + (j-1)/(j+2) (x_j - x_{j-1}),
/// restarting with x_0 = y_0 := x_j and j = 0 when the test fires.
struct NesterovState {
  Vec x;
  Vec x_prev;
  Vec y;
  std::size_t j = 0;  // momentum counter
  std::size_t k = 0;  // iterations performed
  std::size_t restarts = 0;
  bool restarts_enabled = true;
  RestartTestPoint test = RestartTestPoint::iterate;
  bool converged = false;
  double grad_tol = -1.0;
};

inline NesterovState nesterov_init(const Vec& x0, bool restarts_enabled = true,
                                   RestartTestPoint test = RestartTestPoint::iterate) {
  NesterovState st;
  st.x = x0;
  st.x_prev = x0;
  st.y = x0;
  st.restarts_enabled = restarts_enabled;
  st.test = test;
  return st;
}

inline IterationRecord nesterov_restart_step(CompositeProblem& p, NesterovState& st, double s) {
  if (p.h().kind != ProxKind::none) throw Error(ErrorKind::invalid_input, "Nesterov baseline needs h = none");
  if (!(s > 0.0)) throw Error(ErrorKind::invalid_step, "step must be positive");
  IterationRecord rec;
  rec.k = st.k;
  rec.step = s;
  if (st.j > 0 && st.restarts_enabled) {
    const Vec g_test = p.smooth().gradient(st.test == RestartTestPoint::iterate ? st.x : st.y);
    if (g_test.dot(st.x - st.x_prev) > 0.0) {
      st.y = st.x;
      st.j = 0;
      ++st.restarts;
      rec.reason = RestartReason::descent;
    }
  } else if (st.j == 0) {
    rec.reason = st.k == 0 ? RestartReason::start : rec.reason;
  }
  const Vec g_y = p.smooth().gradient(st.y);
  const double gnorm = g_y.norm();
  if (st.k == 0) st.grad_tol = 1e-15 * (1.0 + gnorm);
  rec.grad_norm = gnorm;
  if (gnorm <= st.grad_tol) {
    st.converged = true;
    return rec;
  }
  Vec x_next = st.y - s * g_y;
  ++st.j;
  const double mom = static_cast<double>(st.j - 1) / static_cast<double>(st.j + 2);
  st.y = x_next + mom * (x_next - st.x);
  st.x_prev = std::move(st.x);
  st.x = std::move(x_next);
  ++st.k;
  rec.restarts = st.restarts;
  return rec;
}

/// Heavy-ball: u_{k+1} = beta_HB u_k - grad f(x_k), x_{k+1} = x_k + s u_{k+1}.
/// Uses x, u, k of an SdcState; schedule and safeguards are ignored.
inline IterationRecord heavy_ball_step(CompositeProblem& p, SdcState& st, double beta_hb, double s) {
  if (!(beta_hb >= 0.0 && beta_hb < 1.0)) throw Error(ErrorKind::invalid_config, "need 0 <= beta_HB < 1");
  if (!(s > 0.0)) throw Error(ErrorKind::invalid_step, "step must be positive");
  st.evaluate(p);
  IterationRecord rec;
  rec.k = st.k;
  rec.step = s;
  rec.f = st.f;
  const Vec G = prox_grad_from(p.h(), st.x, st.grad, s);
  rec.grad_norm = G.norm();
  if (st.k == 0) st.grad_tol = 1e-15 * (1.0 + rec.grad_norm);
  if (rec.grad_norm <= st.grad_tol) {
    st.converged = true;
    return rec;
  }
  st.u = beta_hb * st.u - G;
  st.x += s * st.u;
  st.have_grad = false;
  ++st.k;
  if (!st.x.allFinite()) {
    throw Error(ErrorKind::divergence, "heavy_ball_step: non-finite iterate at iteration " + std::to_string(rec.k));
  }
  return rec;
}

}  // namespace sdc

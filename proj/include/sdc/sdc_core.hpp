#pragma once

#include "sdc/linesearch.hpp"
#include "sdc/prox.hpp"
#include "sdc/record.hpp"

#include <cassert>
#include <cmath>
#include <limits>
#include <optional>

namespace sdc {

enum class ScheduleKind { fire, fisc };

/// (beta_k, gamma_k) generator. FIRE: beta = gamma, geometric decay by d_beta
/// from beta_1 = 1. FISC: beta = r/(l-1+r), gamma = (r-3)/(l-1+r), l_1 = 1.
class Schedule {
 public:
  static Schedule fire(double d_beta = 0.99) {
    if (!(d_beta > 0.0 && d_beta < 1.0)) throw Error(ErrorKind::invalid_config, "need 0 < d_beta < 1");
    Schedule s;
    s.kind_ = ScheduleKind::fire;
    s.d_beta_ = d_beta;
    return s;
  }

  static Schedule fisc(double r) {
    if (!(r >= 3.0)) throw Error(ErrorKind::invalid_config, "FISC needs r >= 3");
    Schedule s;
    s.kind_ = ScheduleKind::fisc;
    s.r_ = r;
    return s;
  }

  ScheduleKind kind() const { return kind_; }
  double r() const { return r_; }
  double d_beta() const { return d_beta_; }
  long index() const { return l_; }

  double beta() const {
    return kind_ == ScheduleKind::fire ? fire_beta_ : r_ / (static_cast<double>(l_ - 1) + r_);
  }
  double gamma() const {
    return kind_ == ScheduleKind::fire ? fire_beta_ : (r_ - 3.0) / (static_cast<double>(l_ - 1) + r_);
  }
  /// 1 - beta, formed without cancellation for FISC: (l-1)/(l-1+r).
  double one_minus_beta() const {
    if (kind_ == ScheduleKind::fire) return 1.0 - fire_beta_;
    const double lm1 = static_cast<double>(l_ - 1);
    return lm1 / (lm1 + r_);
  }

  void advance() {
    if (kind_ == ScheduleKind::fire) {
      fire_beta_ *= d_beta_;
    } else {
      ++l_;
    }
  }

  void reset() {
    fire_beta_ = 1.0;
    l_ = 1;
  }

 private:
  ScheduleKind kind_ = ScheduleKind::fisc;
  double r_ = 3.0;
  double d_beta_ = 0.99;
  double fire_beta_ = 1.0;
  long l_ = 1;
};

/// Schedule after one iteration: advanced, or back at its initial value.
inline Schedule schedule_advance(Schedule s, bool restarted) {
  if (restarted) {
    s.reset();
  } else {
    s.advance();
  }
  return s;
}

/// u_next = (1 - beta) u - gamma (||u|| / ||g||) g - g, with 1 - beta given
/// explicitly. Requires g != 0.
inline Vec velocity_update(const Vec& u, const Vec& g, double one_minus_beta, double gamma) {
  const double gnorm = g.norm();
  if (!(gnorm > 0.0)) throw Error(ErrorKind::invalid_input, "velocity update needs a nonzero gradient");
  const double coef = gamma * (u.norm() / gnorm) + 1.0;
  return one_minus_beta * u - coef * g;
}

inline Vec velocity_update_beta(const Vec& u, const Vec& g, double beta, double gamma) {
  return velocity_update(u, g, 1.0 - beta, gamma);
}

inline Vec velocity_update(const Vec& u, const Vec& g, const Schedule& s) {
  return velocity_update(u, g, s.one_minus_beta(), s.gamma());
}

/// Extra restart criteria: gradient may not drop by more than d_f per step,
/// at most K consecutive updates without a restart.
struct Safeguards {
  double d_f = 1e3;
  int K = 1000;

  void validate() const {
    if (!(d_f > 1.0)) throw Error(ErrorKind::invalid_config, "safeguard d_f must exceed 1");
    if (K < 1) throw Error(ErrorKind::invalid_config, "safeguard K must be >= 1");
  }
};

/// Next value of the recurrence bound b_j^2 = 4 d^2 b_{j-1}^2 + 4 d b_{j-1} + 2.
inline double velocity_ratio_bound_next(double prev, double d_f) {
  return std::sqrt(4.0 * d_f * d_f * prev * prev + 4.0 * d_f * prev + 2.0);
}

struct SdcState {
  Vec x;
  Vec u;
  Schedule schedule = Schedule::fire();
  int n_since_restart = 0;
  double prev_grad_norm = std::numeric_limits<double>::quiet_NaN();
  std::optional<Safeguards> safeguards;
  bool restarts_enabled = true;

  std::size_t k = 0;
  std::size_t restarts = 0;
  double step = 1.0;  // last accepted step
  NonmonotoneState nm;
  double grad_tol = -1.0;  // epsilon_g, fixed at the first iteration
  bool converged = false;

  // Oracle information at x, reused by the next step.
  double f = std::numeric_limits<double>::quiet_NaN();
  Vec grad;
  bool have_grad = false;
  Vec x_prev;
  Vec grad_prev;
  bool have_prev = false;

  double ratio_bound = 1.0;

  void evaluate(CompositeProblem& p) {
    if (!have_grad) {
      f = p.value_and_gradient(x, grad);
      have_grad = true;
    }
  }
};

inline SdcState sdc_init(const Vec& x0, const Schedule& schedule, const LineSearchConfig& ls,
                         std::optional<Safeguards> safeguards = std::nullopt,
                         bool restarts_enabled = true) {
  ls.validate();
  if (safeguards) safeguards->validate();
  SdcState st;
  st.x = x0;
  st.u = Vec::Zero(x0.size());
  st.schedule = schedule;
  st.schedule.reset();
  st.safeguards = safeguards;
  st.restarts_enabled = restarts_enabled;
  st.step = ls.initial_step;
  return st;
}

struct RestartDecision {
  bool restart = false;
  RestartReason reason = RestartReason::none;
};

/// phi = <-g, u> >= 0 continues; safeguards (when set) add the gradient-decay
/// and iteration-cap criteria. `g` must be nonzero.
inline RestartDecision restart_check(const Vec& g, const Vec& u, const SdcState& st) {
  const double phi = -g.dot(u);
  if (st.restarts_enabled && phi < 0.0) return {true, RestartReason::descent};
  if (st.safeguards) {
    if (std::isfinite(st.prev_grad_norm) && st.safeguards->d_f * g.norm() < st.prev_grad_norm) {
      return {true, RestartReason::gradient_decay};
    }
    if (st.n_since_restart >= st.safeguards->K) return {true, RestartReason::iteration_cap};
  }
  return {};
}

namespace detail {

struct SdcDirection {
  Vec u_next;
  RestartReason reason = RestartReason::none;
};

inline SdcDirection sdc_direction(const SdcState& st, const Vec& g, bool force_reset) {
  SdcDirection d;
  if (st.k == 0) {
    d.reason = RestartReason::start;
  } else if (force_reset) {
    d.reason = RestartReason::step_failure;
  } else {
    d.reason = restart_check(g, st.u, st).reason;
  }
  if (d.reason == RestartReason::none) {
    d.u_next = velocity_update(st.u, g, st.schedule);
  } else {
    d.u_next = -g;
  }
  // Descent property: <u_next, -g> >= ||g||^2 up to rounding.
  assert(d.u_next.dot(-g) >= g.squaredNorm() - 1e-12 * d.u_next.norm() * g.norm());
  return d;
}

// Bookkeeping shared by deterministic and stochastic SDC iterations.
inline void sdc_commit(SdcState& st, SdcDirection&& d, double gnorm, IterationRecord& rec) {
  const bool reset = d.reason != RestartReason::none;
  rec.reason = d.reason;
  rec.velocity_ratio = d.u_next.norm() / gnorm;
  if (st.safeguards) {
    st.ratio_bound = reset ? 1.0 : velocity_ratio_bound_next(st.ratio_bound, st.safeguards->d_f);
    rec.ratio_bound = st.ratio_bound;
  }
  if (counts_as_restart(d.reason)) ++st.restarts;
  if (reset) {
    st.schedule.reset();
    st.n_since_restart = 0;
  } else {
    st.schedule.advance();
    ++st.n_since_restart;
  }
  st.u = std::move(d.u_next);
  st.prev_grad_norm = gnorm;
  ++st.k;
  rec.restarts = st.restarts;
}

inline double trial_step(const SdcState& st, const LineSearchConfig& ls) {
  switch (ls.trial) {
    case TrialPolicy::initial: return ls.initial_step;
    case TrialPolicy::previous: return st.step;
    case TrialPolicy::bb:
      if (st.have_prev) return bb_trial_step(st.x_prev, st.x, st.grad_prev, st.grad, ls.s_min, ls.s_max);
      return ls.initial_step;
  }
  return ls.initial_step;
}

}  // namespace detail

/// Step used for the ||s G_s(x)|| metric: 1/L when L is known, else s_0.
inline double metric_step(const CompositeProblem& p, const LineSearchConfig& ls) {
  const double L = p.lipschitz();
  return L > 0.0 ? 1.0 / L : ls.initial_step;
}

/// One iteration of the SDC family, on the proximal gradient
/// G_s when h is present: restart test, velocity update or reset, step size,
/// x <- x + s u. Sets `st.converged` instead of stepping when ||G|| <= eps_g.
/// Throws step-failure only if the steepest-descent fallback also fails.
inline IterationRecord sdc_step(CompositeProblem& p, SdcState& st, const LineSearchConfig& ls) {
  st.evaluate(p);
  IterationRecord rec;
  rec.k = st.k;
  rec.f = st.f;
  rec.restarts = st.restarts;
  const ProxSpec& h = p.h();
  {
    const double sm = metric_step(p, ls);
    const Vec gm = prox_grad_from(h, st.x, st.grad, sm);
    rec.scaled_grad_norm = sm * gm.norm();
  }
  if (st.k == 0) {
    const Vec g0 = prox_grad_from(h, st.x, st.grad, ls.initial_step);
    st.grad_tol = 1e-15 * (1.0 + g0.norm());
    if (ls.mode == LineSearchMode::nonmonotone) st.nm = NonmonotoneState::start(st.f);
  }

  const bool smooth = h.kind == ProxKind::none;
  const double s_bar = ls.mode == LineSearchMode::fixed ? ls.initial_step : detail::trial_step(st, ls);

  Vec G;
  double gnorm = 0.0;
  detail::SdcDirection dir;
  auto build = [&](double s, bool force_reset) {
    if (!smooth || G.size() == 0) {
      G = prox_grad_from(h, st.x, st.grad, s);
      gnorm = G.norm();
    }
    if (gnorm <= st.grad_tol) return false;
    dir = detail::sdc_direction(st, G, force_reset);
    return true;
  };

  if (!build(s_bar, false)) {
    st.converged = true;
    rec.grad_norm = gnorm;
    return rec;
  }
  rec.grad_norm = gnorm;

  double s = s_bar;
  double f_new = std::numeric_limits<double>::quiet_NaN();
  if (ls.mode != LineSearchMode::fixed) {
    const double c_ref = ls.mode == LineSearchMode::nonmonotone ? st.nm.C : st.f;
    const double factor = ls.mode == LineSearchMode::nonmonotone ? 0.5 : ls.sigma;
    bool converged_inside = false;
    auto search = [&](double start, bool force_reset) {
      return backtrack(
          start, ls,
          [&](double trial) {
            if (!build(trial, force_reset)) {
              converged_inside = true;
              return std::numeric_limits<double>::infinity();
            }
            return p.value(st.x + trial * dir.u_next);
          },
          [&](double trial, double fc) {
            return fc <= ls.threshold(c_ref, factor * trial * dir.u_next.dot(-G));
          });
    };
    auto res = search(s_bar, false);
    // fallback: steepest descent, from s_0 if the trial was larger (a BB step
    // under non-positive curvature is s_max and would exhaust the budget)
    if (!res.ok && !converged_inside) res = search(std::min(s_bar, ls.initial_step), true);
    if (converged_inside && !res.ok) {
      st.converged = true;
      return rec;
    }
    if (!res.ok) {
      throw Error(ErrorKind::step_failure,
                  "sdc_step: steepest-descent fallback failed at iteration " + std::to_string(st.k));
    }
    s = res.step;
    f_new = res.f_new;
    if (ls.mode == LineSearchMode::nonmonotone) st.nm.update(ls.eta, f_new);
  }

  rec.step = s;
  Vec x_next = st.x + s * dir.u_next;
  detail::sdc_commit(st, std::move(dir), gnorm, rec);
  st.x_prev = std::move(st.x);
  st.grad_prev = std::move(st.grad);
  st.have_prev = true;
  st.x = std::move(x_next);
  st.grad = Vec();
  st.have_grad = false;
  st.f = f_new;
  st.step = s;
  if (!st.x.allFinite()) {
    throw Error(ErrorKind::divergence, "sdc_step: non-finite iterate at iteration " + std::to_string(rec.k));
  }
  return rec;
}

}  // namespace sdc

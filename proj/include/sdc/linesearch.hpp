#pragma once

#include "sdc/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sdc {

enum class LineSearchMode { fixed, armijo, nonmonotone };

/// Where the first trial step s_bar of each search comes from.
enum class TrialPolicy {
  initial,   // always the configured initial step
  previous,  // the last accepted step
  bb,        // Barzilai-Borwein step from the last two iterates
};

struct LineSearchConfig {
  LineSearchMode mode = LineSearchMode::nonmonotone;
  double initial_step = 1.0;  // s_0: the fixed step, or the first trial step
  double sigma = 1e-4;        // Armijo sufficient-decrease factor
  double rho = 0.5;           // backtracking factor
  double eta = 0.85;          // nonmonotone averaging weight
  int max_backtracks = 60;
  TrialPolicy trial = TrialPolicy::bb;
  double s_min = 1e-20;
  double s_max = 1e20;
  // Acceptance slack f_rel_tol * |reference|: decreases below the rounding
  // level of f cannot be resolved and would otherwise backtrack forever.
  double f_rel_tol = 1e-14;

  static LineSearchConfig fixed(double s) {
    LineSearchConfig c;
    c.mode = LineSearchMode::fixed;
    c.initial_step = s;
    return c;
  }
  static LineSearchConfig armijo(double s0, double sigma = 1e-4, double rho = 0.5) {
    LineSearchConfig c;
    c.mode = LineSearchMode::armijo;
    c.initial_step = s0;
    c.sigma = sigma;
    c.rho = rho;
    return c;
  }
  static LineSearchConfig nonmonotone(double s0, double eta = 0.85, double rho = 0.5) {
    LineSearchConfig c;
    c.mode = LineSearchMode::nonmonotone;
    c.initial_step = s0;
    c.eta = eta;
    c.rho = rho;
    return c;
  }

  void validate() const {
    if (!(initial_step > 0.0)) throw Error(ErrorKind::invalid_step, "initial step must be positive");
    if (!(sigma > 0.0 && sigma < 1.0)) throw Error(ErrorKind::invalid_config, "need 0 < sigma < 1");
    if (!(rho > 0.0 && rho < 1.0)) throw Error(ErrorKind::invalid_config, "need 0 < rho < 1");
    if (!(eta >= 0.0 && eta <= 1.0)) throw Error(ErrorKind::invalid_config, "need 0 <= eta <= 1");
    if (max_backtracks < 0) throw Error(ErrorKind::invalid_config, "max_backtracks must be >= 0");
    if (!(s_min > 0.0 && s_min <= s_max)) throw Error(ErrorKind::invalid_config, "bad BB clamp");
    if (!(f_rel_tol >= 0.0)) throw Error(ErrorKind::invalid_config, "f_rel_tol must be >= 0");
  }

  /// Right-hand side ref - decrease, relaxed by the rounding slack.
  double threshold(double ref, double decrease) const { return ref - decrease + f_rel_tol * std::abs(ref); }
};

/// Zhang-Hager reference value: C is a weighted average of past f values.
struct NonmonotoneState {
  double C = 0.0;
  double Q = 1.0;

  static NonmonotoneState start(double f0) { return {f0, 1.0}; }

  void update(double eta, double f_new) {
    const double q_next = eta * Q + 1.0;
    C = (eta * Q * C + f_new) / q_next;
    Q = q_next;
  }
};

struct LineSearchResult {
  double step = 0.0;
  double f_new = std::numeric_limits<double>::quiet_NaN();
  int n_evals = 0;
  bool ok = false;
};

/// Tries s = s_bar rho^h for h = 0..max_backtracks until `accept(s, f_new)`
/// holds, where `eval(s)` returns f at the trial point for step s.
template <class Eval, class Accept>
LineSearchResult backtrack(double s_bar, const LineSearchConfig& cfg, Eval&& eval, Accept&& accept) {
  LineSearchResult res;
  double s = s_bar;
  for (int h = 0; h <= cfg.max_backtracks; ++h, s *= cfg.rho) {
    const double f_new = eval(s);
    ++res.n_evals;
    if (std::isfinite(f_new) && accept(s, f_new)) {
      res.step = s;
      res.f_new = f_new;
      res.ok = true;
      return res;
    }
  }
  return res;
}

namespace detail {
inline double descent_slope(const Vec& u, const Vec& g) {
  const double slope = -u.dot(g);  // <u, -g>
  if (!(slope > 0.0)) throw Error(ErrorKind::invalid_input, "line search needs a descent direction");
  return slope;
}
}  // namespace detail

/// Smallest h with f(x + s u) <= f(x) - sigma s <u, -g>, s = s_bar rho^h.
/// `ok == false` signals step failure (caller restarts with steepest descent).
template <class F>
LineSearchResult armijo_search(F&& f, const Vec& x, double fx, const Vec& u, const Vec& g,
                               double s_bar, const LineSearchConfig& cfg) {
  const double slope = detail::descent_slope(u, g);
  return backtrack(
      s_bar, cfg, [&](double s) { return f(Vec(x + s * u)); },
      [&](double s, double f_new) { return f_new <= cfg.threshold(fx, cfg.sigma * s * slope); });
}

/// Smallest h with f(x + s u) <= C - (s/2) <u, -g>; on success the state
/// absorbs f_new (Q <- eta Q + 1, C <- (eta Q C + f_new) / Q).
template <class F>
LineSearchResult nonmonotone_search(F&& f, const Vec& x, const Vec& u, const Vec& g,
                                    NonmonotoneState& state, double s_bar,
                                    const LineSearchConfig& cfg) {
  const double slope = detail::descent_slope(u, g);
  const double c_ref = state.C;
  auto res = backtrack(
      s_bar, cfg, [&](double s) { return f(Vec(x + s * u)); },
      [&](double s, double f_new) { return f_new <= cfg.threshold(c_ref, 0.5 * s * slope); });
  if (res.ok) state.update(cfg.eta, res.f_new);
  return res;
}

/// BB1 step <dx, dx> / <dx, dg> clamped to [s_min, s_max]; s_max when the
/// curvature estimate is not positive.
inline double bb_trial_step(const Vec& x_prev, const Vec& x_cur, const Vec& g_prev, const Vec& g_cur,
                            double s_min = 1e-20, double s_max = 1e20) {
  const Vec dx = x_cur - x_prev;
  const Vec dg = g_cur - g_prev;
  const double curv = dx.dot(dg);
  if (!(curv > 0.0)) return s_max;
  return std::clamp(dx.squaredNorm() / curv, s_min, s_max);
}

}  // namespace sdc

#pragma once

#include "sdc/problems/oracle.hpp"
#include "sdc/variants.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace sdc {

enum class OdeKind { sdc, fire, fisc, nesterov, hf_ns, heavy_ball };

inline const char* to_string(OdeKind k) {
  switch (k) {
    case OdeKind::sdc: return "sdc";
    case OdeKind::fire: return "fire";
    case OdeKind::fisc: return "fisc";
    case OdeKind::nesterov: return "nesterov";
    case OdeKind::hf_ns: return "hf_ns";
    case OdeKind::heavy_ball: return "heavy_ball";
  }
  return "unknown";
}

/// x'' + beta(t) x' + grad f(x) + gamma(t) (||x'|| / ||grad f||) grad f = 0,
/// started at t0 > 0 with x'(t0) = 0.
struct OdeSpec {
  OdeKind kind = OdeKind::fisc;
  double r = 3.0;        // fisc, hf_ns
  double beta_hb = 0.0;  // heavy_ball friction
  double c1 = 1.0;       // fire: beta = gamma = c1 exp(-c2 t)
  double c2 = 1.0;
  std::function<double(double)> beta_fn;   // sdc
  std::function<double(double)> gamma_fn;  // sdc
  std::optional<double> t0;                // default sqrt(s)

  static OdeSpec with_r(OdeKind kind, double r) {
    OdeSpec o;
    o.kind = kind;
    o.r = r;
    return o;
  }
  static OdeSpec fisc(double r) { return with_r(OdeKind::fisc, r); }
  static OdeSpec nesterov() { return with_r(OdeKind::nesterov, 3.0); }
  static OdeSpec hf_ns(double r) { return with_r(OdeKind::hf_ns, r); }
  static OdeSpec heavy_ball(double beta) {
    OdeSpec o;
    o.kind = OdeKind::heavy_ball;
    o.beta_hb = beta;
    return o;
  }
  static OdeSpec fire(double c1, double c2) {
    OdeSpec o;
    o.kind = OdeKind::fire;
    o.c1 = c1;
    o.c2 = c2;
    return o;
  }
  static OdeSpec general(std::function<double(double)> beta, std::function<double(double)> gamma) {
    OdeSpec o;
    o.kind = OdeKind::sdc;
    o.beta_fn = std::move(beta);
    o.gamma_fn = std::move(gamma);
    return o;
  }

  void validate() const {
    switch (kind) {
      case OdeKind::fisc:
      case OdeKind::hf_ns:
        if (!(r >= 3.0)) throw Error(ErrorKind::invalid_config, "ODE needs r >= 3");
        break;
      case OdeKind::heavy_ball:
        if (!(beta_hb >= 0.0)) throw Error(ErrorKind::invalid_config, "heavy-ball ODE needs beta >= 0");
        break;
      case OdeKind::fire:
        if (!(c1 > 0.0 && c2 > 0.0)) throw Error(ErrorKind::invalid_config, "FIRE ODE needs c1, c2 > 0");
        break;
      case OdeKind::sdc:
        if (!beta_fn || !gamma_fn) throw Error(ErrorKind::invalid_config, "general ODE needs beta(t), gamma(t)");
        break;
      case OdeKind::nesterov: break;
    }
    if (t0 && !(*t0 > 0.0)) throw Error(ErrorKind::invalid_config, "t0 must be positive");
  }

  double r_eff() const { return kind == OdeKind::nesterov ? 3.0 : r; }

  double beta(double t) const {
    switch (kind) {
      case OdeKind::fisc:
      case OdeKind::hf_ns: return r / t;
      case OdeKind::nesterov: return 3.0 / t;
      case OdeKind::heavy_ball: return beta_hb;
      case OdeKind::fire: return c1 * std::exp(-c2 * t);
      case OdeKind::sdc: return beta_fn(t);
    }
    return 0.0;
  }
  double gamma(double t) const {
    switch (kind) {
      case OdeKind::fisc: return (r - 3.0) / t;
      case OdeKind::fire: return c1 * std::exp(-c2 * t);
      case OdeKind::sdc: return gamma_fn(t);
      default: return 0.0;
    }
  }
};

/// Start time that makes the grid coefficients sqrt(s) beta(t_k) equal the
/// FISC schedule r / (l - 1 + r) with l = k.
inline double fisc_aligned_t0(double r, double s) { return (r - 1.0) * std::sqrt(s); }

struct OdeTrajectory {
  double s = 0.0;
  double t0 = 0.0;
  std::vector<double> t;
  std::vector<Vec> x;
  std::vector<Vec> v;
  std::vector<double> f;
  std::size_t steps = 0;
  bool converged = false;
};

/// Symplectic Euler with step h = sqrt(s) on the grid t_k = t0 + k h:
///   v_{k+1} = v_k - h grad f(x_k) - h beta(t_k) v_k - h gamma(t_k) (||v_k|| / ||grad f(x_k)||) grad f(x_k),
///   x_{k+1} = x_k + h v_{k+1}.
/// Stores every `sample_every`-th state plus the last one.
inline OdeTrajectory integrate_symplectic(const OdeSpec& spec, SmoothOracle& f, const Vec& x0, double s,
                                          std::size_t n_steps, std::size_t sample_every = 1) {
  spec.validate();
  if (!(s > 0.0)) throw Error(ErrorKind::invalid_step, "ODE step parameter s must be positive");
  if (sample_every == 0) sample_every = 1;
  const double h = std::sqrt(s);
  OdeTrajectory tr;
  tr.s = s;
  tr.t0 = spec.t0 ? *spec.t0 : h;
  Vec x = x0;
  Vec v = Vec::Zero(x0.size());
  Vec g;
  auto keep = [&](double t, double fx) {
    tr.t.push_back(t);
    tr.x.push_back(x);
    tr.v.push_back(v);
    tr.f.push_back(fx);
  };
  for (std::size_t k = 0;; ++k) {
    const double t = tr.t0 + static_cast<double>(k) * h;
    const double fx = f.value_and_gradient(x, g);
    if (!std::isfinite(fx) || !x.allFinite() || !v.allFinite()) {
      throw Error(ErrorKind::divergence, "ODE integration: non-finite state at step " + std::to_string(k));
    }
    const double gnorm = g.norm();
    const bool last = k == n_steps || gnorm == 0.0;
    if (last || k % sample_every == 0) keep(t, fx);
    if (last) {
      tr.steps = k;
      tr.converged = gnorm == 0.0;
      break;
    }
    const double gam = spec.gamma(t);
    Vec dv = g;
    if (gam != 0.0) dv += (gam * v.norm() / gnorm) * g;
    dv += spec.beta(t) * v;
    v -= h * dv;
    x += h * v;
  }
  return tr;
}

/// E(t) = ((w - 2w^2) t^2 / 4) ||v||^2 + 0.5 ||x - x* + w t v||^2 + (w t^2 / 2)(f - f*),
/// w = 1 / (r - 1).
inline double lyapunov_continuous_eval(double r, double t, const Vec& x, const Vec& v, double f, const Vec& x_star,
                                       double f_star) {
  if (!(r >= 3.0)) throw Error(ErrorKind::invalid_config, "Lyapunov function needs r >= 3");
  const double w = 1.0 / (r - 1.0);
  const double a = (w - 2.0 * w * w) * t * t / 4.0;
  return a * v.squaredNorm() + 0.5 * (x - x_star + (w * t) * v).squaredNorm() + 0.5 * w * t * t * (f - f_star);
}

struct ContinuousAuditRow {
  double t = 0.0;
  double gap = 0.0;     // f - f*
  double energy = 0.0;  // E(t)
  double bound = 0.0;   // (r - 1) ||x0 - x*||^2 / t^2
  double slack = 0.0;   // bound - gap
};

struct ContinuousAudit {
  std::vector<ContinuousAuditRow> rows;
  std::size_t rate_violations = 0;
  std::size_t energy_violations = 0;  // E(t_{j+1}) > E(t_j) + tol
  double max_energy_increase = 0.0;
  bool rate_ok() const { return rate_violations == 0; }
  bool energy_ok() const { return energy_violations == 0; }
};

namespace detail {
inline void require_fisc(const OdeSpec& spec) {
  if (spec.kind != OdeKind::fisc && spec.kind != OdeKind::nesterov) {
    throw Error(ErrorKind::invalid_config,
                std::string("rate certificate is defined for FISC trajectories only, got ") + to_string(spec.kind));
  }
}
}  // namespace detail

/// Rate bound and sampled Lyapunov monotonicity along a FISC-ODE trajectory.
/// The rate bound gets additive slack `rate_slack`; E may rise by at most
/// `energy_rel_tol` * E(t0) between samples.
inline ContinuousAudit audit_continuous(const OdeTrajectory& tr, const OdeSpec& spec, const Vec& x_star,
                                        double f_star, double rate_slack = 1e-6, double energy_rel_tol = 1e-6) {
  detail::require_fisc(spec);
  ContinuousAudit a;
  if (tr.x.empty()) return a;
  const double r = spec.r_eff();
  const double d0 = (tr.x.front() - x_star).squaredNorm();
  double e_prev = 0.0;
  double e0 = 0.0;
  for (std::size_t j = 0; j < tr.x.size(); ++j) {
    ContinuousAuditRow row;
    row.t = tr.t[j];
    row.gap = tr.f[j] - f_star;
    row.energy = lyapunov_continuous_eval(r, row.t, tr.x[j], tr.v[j], tr.f[j], x_star, f_star);
    row.bound = (r - 1.0) * d0 / (row.t * row.t);
    row.slack = row.bound - row.gap;
    if (j == 0) e0 = row.energy;
    if (j > 0 && row.t > tr.t0 && row.gap > row.bound + rate_slack) ++a.rate_violations;
    if (j > 0) {
      const double inc = row.energy - e_prev;
      a.max_energy_increase = std::max(a.max_energy_increase, inc);
      if (inc > energy_rel_tol * e0) ++a.energy_violations;
    }
    e_prev = row.energy;
    a.rows.push_back(row);
  }
  return a;
}

/// True iff f(x(t)) - f* <= (r - 1) ||x0 - x*||^2 / t^2 + slack at every sample t > t0.
inline bool rate_certificate_continuous(const OdeTrajectory& tr, const OdeSpec& spec, double x0_dist,
                                        double f_star, double slack = 1e-6) {
  detail::require_fisc(spec);
  const double r = spec.r_eff();
  for (std::size_t j = 0; j < tr.t.size(); ++j) {
    const double t = tr.t[j];
    if (!(t > tr.t0)) continue;
    if (tr.f[j] - f_star > (r - 1.0) * x0_dist * x0_dist / (t * t) + slack) return false;
  }
  return true;
}

/// Iterates of a fixed-step FISC-PM run and their composite values.
struct DiscreteTrajectory {
  std::vector<Vec> x;
  std::vector<double> f;
  std::vector<RestartReason> reasons;  // reasons[k]: step from x_k to x_{k+1}
};

/// FISC-PM with fixed s and no restarts for `iters` steps; records x_0..x_iters.
inline DiscreteTrajectory record_fisc_pm(CompositeProblem& p, const Vec& x0, double r, double s, std::size_t iters) {
  const auto ls = LineSearchConfig::fixed(s);
  TwoPointState st = two_point_init(x0, Schedule::fisc(r), ls, false);
  DiscreteTrajectory tr;
  for (std::size_t k = 0;; ++k) {
    tr.x.push_back(st.x);
    tr.f.push_back(p.value(st.x));
    if (k == iters) break;
    const auto rec = two_point_step(p, st, ls);
    if (st.converged) break;
    tr.reasons.push_back(rec.reason);
  }
  return tr;
}

struct DiscreteAuditRow {
  std::size_t k = 0;
  double gap = 0.0;           // f(x_k) - f*
  double energy = 0.0;        // E(k)
  double step_rhs = 0.0;    // bound on E(k) - E(k-1)
  double step_excess = 0.0; // E(k) - E(k-1) - rhs (<= 0 when the bound holds)
  double total_excess = 0.0; // E(k) - E(0) + 2s/(r-1)(f0 - f*)
  double rate_bound = 0.0;    // (r-1) C0 / (2 (k+r-2)^2 s), safe C0
  double rate_bound_printed = 0.0;
  bool rate_ok = true;
};

struct DiscreteAudit {
  std::vector<DiscreteAuditRow> rows;
  double c0_safe = 0.0;
  double c0_printed = 0.0;
  double e0 = 0.0;
  double max_step_excess = -std::numeric_limits<double>::infinity();
  double max_total_excess = -std::numeric_limits<double>::infinity();
  std::size_t rate_violations = 0;
  std::size_t rate_violations_printed = 0;
};

/// Discrete Lyapunov function
///   E(k) = 2 ||x_k - x* + (k-1)/(r-1) dx_k||^2 + 2 (k+r-2)^2 s/(r-1) (f_k - f*)
///          + (r-3)(k-1)^2/(r-1)^2 ||dx_k||^2,  dx_k = x_k - x_{k-1}, x_{-1} = x_0.
inline double lyapunov_discrete_eval(std::size_t k, double r, double s, const Vec& xk, const Vec& xkm1,
                                     double fk, const Vec& x_star, double f_star) {
  const double kd = static_cast<double>(k);
  const Vec dx = xk - xkm1;
  const double a = (kd - 1.0) / (r - 1.0);
  return 2.0 * (xk - x_star + a * dx).squaredNorm() +
         2.0 * (kd + r - 2.0) * (kd + r - 2.0) * s / (r - 1.0) * (fk - f_star) +
         (r - 3.0) * (kd - 1.0) * (kd - 1.0) / ((r - 1.0) * (r - 1.0)) * dx.squaredNorm();
}

/// Per-iteration check of the descent inequality for E, the cumulative bound
/// and the O(1/k^2) rate. Requires a restart-free log.
inline DiscreteAudit lyapunov_discrete_audit(const DiscreteTrajectory& tr, double r, double s, const Vec& x_star,
                                             double f_star) {
  if (!(r >= 3.0)) throw Error(ErrorKind::invalid_config, "audit needs r >= 3");
  if (!(s > 0.0)) throw Error(ErrorKind::invalid_step, "audit needs s > 0");
  if (tr.x.empty() || tr.x.size() != tr.f.size()) throw Error(ErrorKind::audit_invalid, "empty or ragged log");
  for (std::size_t k = 0; k < tr.reasons.size(); ++k) {
    if (counts_as_restart(tr.reasons[k])) {
      throw Error(ErrorKind::audit_invalid, "restart in audited run at iteration " + std::to_string(k));
    }
  }
  DiscreteAudit a;
  const double alpha = (r - 3.0) / (r - 1.0);
  const double f0gap = tr.f.front() - f_star;
  a.c0_safe = 2.0 * (tr.x.front() - x_star).squaredNorm() + 2.0 * (r - 3.0) * s * f0gap;
  a.c0_printed = 2.0 * (tr.x.front() - x_star).squaredNorm() + (r - 3.0) * s * f0gap;
  double e_prev = 0.0;
  for (std::size_t k = 0; k < tr.x.size(); ++k) {
    DiscreteAuditRow row;
    row.k = k;
    row.gap = tr.f[k] - f_star;
    const Vec& xkm1 = k == 0 ? tr.x[0] : tr.x[k - 1];
    row.energy = lyapunov_discrete_eval(k, r, s, tr.x[k], xkm1, tr.f[k], x_star, f_star);
    if (k == 0) {
      a.e0 = row.energy;
    } else {
      const double dxk = (tr.x[k] - tr.x[k - 1]).squaredNorm();
      const double dxkm1 = k >= 2 ? (tr.x[k - 1] - tr.x[k - 2]).squaredNorm() : 0.0;
      const double phi_k = 2.0 * static_cast<double>(k) + r - 3.0;
      const double phi_km1 = phi_k - 2.0;
      row.step_rhs = alpha * (phi_km1 - 2.0) * dxkm1 - alpha * phi_k * dxk -
                       2.0 * s / (r - 1.0) * (tr.f[k - 1] - f_star);
      row.step_excess = row.energy - e_prev - row.step_rhs;
      row.total_excess = row.energy - a.e0 + 2.0 * s / (r - 1.0) * f0gap;
      const double den = 2.0 * (static_cast<double>(k) + r - 2.0) * (static_cast<double>(k) + r - 2.0) * s;
      row.rate_bound = (r - 1.0) * a.c0_safe / den;
      row.rate_bound_printed = (r - 1.0) * a.c0_printed / den;
      row.rate_ok = row.gap <= row.rate_bound;
      if (!row.rate_ok) ++a.rate_violations;
      if (row.gap > row.rate_bound_printed) ++a.rate_violations_printed;
      a.max_step_excess = std::max(a.max_step_excess, row.step_excess);
      a.max_total_excess = std::max(a.max_total_excess, row.total_excess);
    }
    e_prev = row.energy;
    a.rows.push_back(row);
  }
  return a;
}

inline void write_csv(std::ostream& out, const ContinuousAudit& a) {
  out << "t,gap,energy,bound,slack\n";
  out.precision(17);
  for (const auto& r : a.rows) out << r.t << ',' << r.gap << ',' << r.energy << ',' << r.bound << ',' << r.slack << '\n';
}

inline void write_csv(std::ostream& out, const DiscreteAudit& a) {
  out << "k,gap,energy,step_rhs,step_excess,total_excess,rate_bound,rate_bound_printed,rate_ok\n";
  out.precision(17);
  for (const auto& r : a.rows) {
    out << r.k << ',' << r.gap << ',' << r.energy << ',' << r.step_rhs << ',' << r.step_excess << ','
        << r.total_excess << ',' << r.rate_bound << ',' << r.rate_bound_printed << ',' << (r.rate_ok ? 1 : 0) << '\n';
  }
}

inline void write_csv(std::ostream& out, const OdeTrajectory& tr) {
  out << "t,f,x_norm,v_norm\n";
  out.precision(17);
  for (std::size_t j = 0; j < tr.t.size(); ++j) {
    out << tr.t[j] << ',' << tr.f[j] << ',' << tr.x[j].norm() << ',' << tr.v[j].norm() << '\n';
  }
}

}  // namespace sdc

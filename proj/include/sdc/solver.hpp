#pragma once

#include "sdc/variants.hpp"

#include <chrono>
#include <cstdio>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace sdc {

enum class SolverKind {
  sdc_pg,            // one-point SDC on G_s (F-PG, FS-PG)
  sdc_pm,            // two-point proximal-mapping variant (F-PM, FS-PM, FISTA)
  nesterov_restart,  // gradient-restarted Nesterov, fixed step
  heavy_ball,        // fixed step
  prox_grad,         // plain proximal gradient
};

inline const char* to_string(SolverKind k) {
  switch (k) {
    case SolverKind::sdc_pg: return "sdc_pg";
    case SolverKind::sdc_pm: return "sdc_pm";
    case SolverKind::nesterov_restart: return "nesterov_restart";
    case SolverKind::heavy_ball: return "heavy_ball";
    case SolverKind::prox_grad: return "prox_grad";
  }
  return "unknown";
}

struct SolverSpec {
  std::string name;
  SolverKind kind = SolverKind::sdc_pg;
  Schedule schedule = Schedule::fire();
  LineSearchConfig ls;
  std::optional<Safeguards> safeguards;
  bool restarts = true;
  double hb_beta = 0.9;
  RestartTestPoint restart_test = RestartTestPoint::iterate;
};

/// Builds a spec from a display name: F-PG, FS-PG(r), F-PM, FS-PM(r), FISTA,
/// NAG-restart, HB, PG. Line search and safeguards are taken as given.
inline SolverSpec solver_from_name(const std::string& name, const LineSearchConfig& ls,
                                   std::optional<Safeguards> safeguards = std::nullopt) {
  SolverSpec s;
  s.name = name;
  s.ls = ls;
  s.safeguards = safeguards;
  auto r_of = [&](const std::string& prefix) -> std::optional<double> {
    if (name.rfind(prefix, 0) != 0) return std::nullopt;
    std::string rest = name.substr(prefix.size());
    if (rest.empty()) return 5.0;
    if (rest.front() != '(' || rest.back() != ')') throw Error(ErrorKind::invalid_config, "bad solver name " + name);
    try {
      return std::stod(rest.substr(1, rest.size() - 2));
    } catch (const std::exception&) {
      throw Error(ErrorKind::invalid_config, "bad r in solver name " + name);
    }
  };
  if (name == "F-PG") {
    s.kind = SolverKind::sdc_pg;
    s.schedule = Schedule::fire();
  } else if (name == "F-PM") {
    s.kind = SolverKind::sdc_pm;
    s.schedule = Schedule::fire();
  } else if (auto r = r_of("FS-PG")) {
    s.kind = SolverKind::sdc_pg;
    s.schedule = Schedule::fisc(*r);
  } else if (auto r2 = r_of("FS-PM")) {
    s.kind = SolverKind::sdc_pm;
    s.schedule = Schedule::fisc(*r2);
  } else if (name == "FISTA") {
    s.kind = SolverKind::sdc_pm;
    s.schedule = Schedule::fisc(3.0);
    s.restarts = false;
  } else if (name == "NAG-restart") {
    s.kind = SolverKind::nesterov_restart;
  } else if (name == "HB") {
    s.kind = SolverKind::heavy_ball;
  } else if (name == "PG") {
    s.kind = SolverKind::prox_grad;
  } else {
    throw Error(ErrorKind::invalid_config, "unknown solver " + name);
  }
  return s;
}

/// Plain proximal-gradient step on a TwoPointState (schedule unused).
inline IterationRecord prox_grad_step(CompositeProblem& p, TwoPointState& st, const LineSearchConfig& ls) {
  IterationRecord rec;
  rec.k = st.k;
  st.evaluate(p);
  rec.f = st.f;
  const double s_bar = detail::two_point_trial(st, ls);
  rec.grad_norm = prox_grad_from(p.h(), st.x, st.grad, s_bar).norm();
  if (st.k == 0) {
    st.grad_tol = 1e-15 * (1.0 + rec.grad_norm);
    if (ls.mode == LineSearchMode::nonmonotone) st.nm = NonmonotoneState::start(st.f);
  }
  if (rec.grad_norm <= st.grad_tol) {
    st.converged = true;
    return rec;
  }
  const double ref = ls.mode == LineSearchMode::nonmonotone ? st.nm.C : st.f;
  auto next = detail::prox_step_at(p, st.x, st.grad, s_bar, ls, ref);
  if (!next.ok) throw Error(ErrorKind::step_failure, "prox_grad_step: line search failed");
  if (ls.mode == LineSearchMode::nonmonotone) st.nm.update(ls.eta, next.f_next);
  rec.step = next.step;
  st.x_prev = std::move(st.x);
  st.grad_prev = std::move(st.grad);
  st.have_grad_prev = true;
  st.x = std::move(next.x_next);
  st.have_grad = false;
  st.f = next.f_next;
  st.have_f = ls.mode != LineSearchMode::fixed;
  st.step = next.step;
  ++st.k;
  return rec;
}

/// Type-erased iteration over the solver family.
class Solver {
 public:
  explicit Solver(SolverSpec spec) : spec_(std::move(spec)) {
    spec_.ls.validate();
    if (spec_.safeguards) spec_.safeguards->validate();
  }

  const SolverSpec& spec() const { return spec_; }

  void reset(const Vec& x0) {
    switch (spec_.kind) {
      case SolverKind::sdc_pg:
        state_ = sdc_init(x0, spec_.schedule, spec_.ls, spec_.safeguards, spec_.restarts);
        break;
      case SolverKind::heavy_ball:
        state_ = sdc_init(x0, spec_.schedule, spec_.ls, std::nullopt, false);
        break;
      case SolverKind::sdc_pm:
      case SolverKind::prox_grad:
        state_ = two_point_init(x0, spec_.schedule, spec_.ls, spec_.restarts);
        break;
      case SolverKind::nesterov_restart:
        state_ = nesterov_init(x0, spec_.restarts, spec_.restart_test);
        break;
    }
  }

  IterationRecord step(CompositeProblem& p) {
    switch (spec_.kind) {
      case SolverKind::sdc_pg: return sdc_step(p, std::get<SdcState>(state_), spec_.ls);
      case SolverKind::heavy_ball:
        return heavy_ball_step(p, std::get<SdcState>(state_), spec_.hb_beta, spec_.ls.initial_step);
      case SolverKind::sdc_pm: return two_point_step(p, std::get<TwoPointState>(state_), spec_.ls);
      case SolverKind::prox_grad: return prox_grad_step(p, std::get<TwoPointState>(state_), spec_.ls);
      case SolverKind::nesterov_restart:
        return nesterov_restart_step(p, std::get<NesterovState>(state_), spec_.ls.initial_step);
    }
    throw Error(ErrorKind::invalid_config, "unknown solver kind");
  }

  const Vec& x() const {
    return std::visit([](const auto& s) -> const Vec& { return s.x; }, state_);
  }
  bool converged() const {
    return std::visit([](const auto& s) { return s.converged; }, state_);
  }
  std::size_t restarts() const {
    return std::visit(
        [](const auto& s) -> std::size_t {
          if constexpr (requires { s.restarts; }) {
            return s.restarts;
          } else {
            return 0;
          }
        },
        state_);
  }

 private:
  SolverSpec spec_;
  std::variant<SdcState, TwoPointState, NesterovState> state_;
};

/// Stop when ||s_m G_{s_m}(x_k)|| <= grad_tol (s_m = metric step), or when the
/// relative error (f - f*) / max(|f*|, 1) <= rel_tol, or after max_iter steps.
/// Disabled criteria are negative.
struct StopRule {
  std::size_t max_iter = 10000;
  double grad_tol = 1e-6;
  double rel_tol = -1.0;
  std::optional<double> f_star;
  double step_tol = -1.0;     // stop when ||x_k - x_{k-1}|| < step_tol
  double metric_step = -1.0;  // <= 0: 1/L, else the line search's s_0
};

inline double relative_error(double f, double f_star) {
  return (f - f_star) / std::max(std::abs(f_star), 1.0);
}

struct SolveResult {
  Vec x;
  std::vector<IterationRecord> records;
  bool converged = false;
};

/// Runs `solver` from x0 under `stop`. Metrics (f, ||s G||) are evaluated on
/// `monitor`, an uncounted copy of the problem, so N_A in the records is the
/// solver's own operator cost. Records describe x_0, ..., x_last.
inline SolveResult solve(CompositeProblem& p, Solver& solver, const Vec& x0, const StopRule& stop,
                         CompositeProblem* monitor = nullptr, std::size_t stage = 0) {
  std::optional<CompositeProblem> own;
  if (!monitor) {
    own.emplace(p);
    monitor = &*own;
  }
  const double sm = stop.metric_step > 0.0 ? stop.metric_step : metric_step(p, solver.spec().ls);
  const bool need_f = stop.f_star.has_value();
  solver.reset(x0);
  SolveResult out;
  std::int64_t wall = 0;
  Vec g;
  Vec x_last;
  for (std::size_t k = 0;; ++k) {
    IterationRecord rec;
    rec.k = k;
    rec.stage = stage;
    const Vec& x = solver.x();
    rec.f = monitor->value_and_gradient(x, g);
    rec.scaled_grad_norm = sm * prox_grad_from(p.h(), x, g, sm).norm();
    if (need_f) rec.rel_err = relative_error(rec.f, *stop.f_star);
    rec.n_A = p.counters().operator_calls();
    rec.restarts = solver.restarts();
    rec.wall_ns = wall;
    bool done = (stop.grad_tol > 0.0 && rec.scaled_grad_norm <= stop.grad_tol) ||
                (stop.rel_tol > 0.0 && need_f && rec.rel_err <= stop.rel_tol) ||
                (stop.step_tol > 0.0 && k > 0 && (x - x_last).norm() < stop.step_tol);
    if (done || k >= stop.max_iter) {
      out.records.push_back(rec);
      out.converged = done;
      break;
    }
    if (stop.step_tol > 0.0) x_last = x;
    const auto t0 = std::chrono::steady_clock::now();
    const IterationRecord srec = solver.step(p);
    wall += std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count();
    if (solver.converged()) {
      // internal stationarity test: no step was taken
      out.records.push_back(rec);
      out.converged = true;
      break;
    }
    rec.grad_norm = srec.grad_norm;
    rec.reason = srec.reason;
    rec.step = srec.step;
    rec.velocity_ratio = srec.velocity_ratio;
    rec.ratio_bound = srec.ratio_bound;
    out.records.push_back(rec);
  }
  out.x = solver.x();
  return out;
}

/// Record-stream equality ignoring wall-clock time.
inline bool same_records(const std::vector<IterationRecord>& a, const std::vector<IterationRecord>& b) {
  if (a.size() != b.size()) return false;
  auto eq = [](double u, double v) { return (std::isnan(u) && std::isnan(v)) || u == v; };
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& p = a[i];
    const auto& q = b[i];
    if (p.k != q.k || p.epoch != q.epoch || p.stage != q.stage || p.n_A != q.n_A || p.restarts != q.restarts ||
        p.reason != q.reason || !eq(p.f, q.f) || !eq(p.rel_err, q.rel_err) || !eq(p.grad_norm, q.grad_norm) ||
        !eq(p.scaled_grad_norm, q.scaled_grad_norm) || !eq(p.step, q.step) ||
        !eq(p.velocity_ratio, q.velocity_ratio) || !eq(p.ratio_bound, q.ratio_bound)) {
      return false;
    }
  }
  return true;
}

}  // namespace sdc

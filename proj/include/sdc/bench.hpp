#pragma once

#include "sdc/problems.hpp"
#include "sdc/solver.hpp"
#include "sdc/stochastic.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>
#include <tuple>

namespace sdc {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config schema

inline const char* to_string(LineSearchMode m) {
  switch (m) {
    case LineSearchMode::fixed: return "fixed";
    case LineSearchMode::armijo: return "armijo";
    case LineSearchMode::nonmonotone: return "nonmonotone";
  }
  return "unknown";
}

inline const char* to_string(TrialPolicy t) {
  switch (t) {
    case TrialPolicy::initial: return "initial";
    case TrialPolicy::previous: return "previous";
    case TrialPolicy::bb: return "bb";
  }
  return "unknown";
}

namespace detail {
template <class T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::invalid_config, where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end()) {
      throw Error(ErrorKind::invalid_config, "unknown key '" + key + "' in " + where);
    }
  }
}
}  // namespace detail

inline json to_json(const LineSearchConfig& c) {
  return {{"mode", to_string(c.mode)}, {"s0", c.initial_step}, {"sigma", c.sigma},
          {"rho", c.rho},              {"eta", c.eta},         {"max_backtracks", c.max_backtracks},
          {"trial", to_string(c.trial)}, {"s_min", c.s_min},   {"s_max", c.s_max}};
}

inline LineSearchConfig line_search_from_json(const json& j) {
  detail::check_keys(j, {"mode", "s0", "sigma", "rho", "eta", "max_backtracks", "trial", "s_min", "s_max"},
                     "line_search");
  LineSearchConfig c;
  std::string mode = to_string(c.mode);
  std::string trial = to_string(c.trial);
  detail::get_if(j, "mode", mode);
  detail::get_if(j, "trial", trial);
  if (mode == "fixed") {
    c.mode = LineSearchMode::fixed;
  } else if (mode == "armijo") {
    c.mode = LineSearchMode::armijo;
  } else if (mode == "nonmonotone") {
    c.mode = LineSearchMode::nonmonotone;
  } else {
    throw Error(ErrorKind::invalid_config, "unknown line search mode " + mode);
  }
  if (trial == "initial") {
    c.trial = TrialPolicy::initial;
  } else if (trial == "previous") {
    c.trial = TrialPolicy::previous;
  } else if (trial == "bb") {
    c.trial = TrialPolicy::bb;
  } else {
    throw Error(ErrorKind::invalid_config, "unknown trial policy " + trial);
  }
  detail::get_if(j, "s0", c.initial_step);
  detail::get_if(j, "sigma", c.sigma);
  detail::get_if(j, "rho", c.rho);
  detail::get_if(j, "eta", c.eta);
  detail::get_if(j, "max_backtracks", c.max_backtracks);
  detail::get_if(j, "s_min", c.s_min);
  detail::get_if(j, "s_max", c.s_max);
  c.validate();
  return c;
}

/// Problem description. type: lasso | logreg | quadratic | rosenbrock.
struct ProblemConfig {
  std::string type = "lasso";
  // lasso
  Index n = 4096;
  Index m = 512;
  Index k = 0;  // 0: floor(n / 40)
  double dynamic_range_db = 40.0;
  double noise_std = 0.1;
  double lambda = 8e-3;
  std::string path;  // lasso JSON instance or libsvm file
  // logreg (synthetic when path is empty)
  Index num_points = 1000;
  Index num_features = 20;
  double density = 0.5;
  std::string label_rule = "binary";  // binary | even_odd
  // quadratic
  double mu = 1e-4;
  double L = 1.0;

  Index resolved_k() const { return k > 0 ? k : n / 40; }
};

inline json to_json(const ProblemConfig& c) {
  json j = {{"type", c.type}};
  if (c.type == "lasso") {
    j.update({{"n", c.n}, {"m", c.m}, {"k", c.resolved_k()}, {"dynamic_range_db", c.dynamic_range_db},
              {"noise_std", c.noise_std}, {"lambda", c.lambda}});
  } else if (c.type == "logreg") {
    j.update({{"num_points", c.num_points}, {"num_features", c.num_features}, {"density", c.density},
              {"lambda", c.lambda}, {"label_rule", c.label_rule}});
  } else if (c.type == "quadratic") {
    j.update({{"n", c.n}, {"mu", c.mu}, {"L", c.L}});
  } else {
    j.update({{"n", c.n}});
  }
  if (!c.path.empty()) j["path"] = c.path;
  return j;
}

inline ProblemConfig problem_from_json(const json& j) {
  detail::check_keys(j,
                     {"type", "n", "m", "k", "dynamic_range_db", "noise_std", "lambda", "path", "num_points",
                      "num_features", "density", "label_rule", "mu", "L"},
                     "problem");
  ProblemConfig c;
  detail::get_if(j, "type", c.type);
  if (c.type == "rosenbrock") c.n = 2;
  if (c.type == "quadratic") c.n = 100;
  detail::get_if(j, "n", c.n);
  detail::get_if(j, "m", c.m);
  detail::get_if(j, "k", c.k);
  detail::get_if(j, "dynamic_range_db", c.dynamic_range_db);
  detail::get_if(j, "noise_std", c.noise_std);
  if (c.type == "logreg") c.lambda = 1e-3;
  detail::get_if(j, "lambda", c.lambda);
  detail::get_if(j, "path", c.path);
  detail::get_if(j, "num_points", c.num_points);
  detail::get_if(j, "num_features", c.num_features);
  detail::get_if(j, "density", c.density);
  detail::get_if(j, "label_rule", c.label_rule);
  detail::get_if(j, "mu", c.mu);
  detail::get_if(j, "L", c.L);
  if (c.type != "lasso" && c.type != "logreg" && c.type != "quadratic" && c.type != "rosenbrock") {
    throw Error(ErrorKind::invalid_config, "unknown problem type " + c.type);
  }
  return c;
}

/// A constructed problem plus what the harness needs to know about it.
struct BuiltProblem {
  CompositeProblem problem;
  Vec x0;
  std::optional<LassoInstance> lasso;
  std::shared_ptr<const LogRegDataset> logreg;
  std::optional<double> analytic_f_star;
  std::optional<Vec> analytic_x_star;
};

inline BuiltProblem build_problem(const ProblemConfig& c, std::uint64_t seed) {
  if (c.type == "lasso") {
    LassoInstance inst = c.path.empty()
                             ? lasso_generate(c.n, c.m, c.resolved_k(), c.dynamic_range_db, c.noise_std, seed, c.lambda)
                             : read_lasso(c.path);
    auto p = lasso_problem(inst);
    const Index n = inst.n;
    return {std::move(p), Vec::Zero(n), std::move(inst), nullptr, std::nullopt, std::nullopt};
  }
  if (c.type == "logreg") {
    std::shared_ptr<const LogRegDataset> data;
    if (c.path.empty()) {
      data = std::make_shared<LogRegDataset>(synthetic_logreg(c.num_points, c.num_features, c.density, seed));
    } else {
      LibsvmOptions opts;
      if (c.label_rule == "even_odd") {
        opts.label_rule = even_odd_split();
      } else if (c.label_rule != "binary") {
        throw Error(ErrorKind::invalid_config, "unknown label rule " + c.label_rule);
      }
      data = std::make_shared<LogRegDataset>(read_libsvm(c.path, opts));
    }
    auto p = logreg_problem(data, c.lambda);
    const Index n = p.dim();
    return {std::move(p), Vec::Zero(n), std::nullopt, data, std::nullopt, std::nullopt};
  }
  if (c.type == "quadratic") {
    std::mt19937_64 rng(seed);
    auto q = QuadraticOracle::random(c.n, c.mu, c.L, rng);
    BuiltProblem b{smooth_problem<QuadraticOracle>(q), Vec::Ones(c.n), std::nullopt, nullptr, q.min_value(),
                   q.minimizer()};
    return b;
  }
  Vec x0(c.n);
  for (Index i = 0; i < c.n; ++i) x0(i) = i % 2 == 0 ? -1.2 : 1.0;
  BuiltProblem b{smooth_problem<RosenbrockOracle>(c.n), x0, std::nullopt, nullptr, 0.0, Vec::Ones(c.n)};
  return b;
}

struct ContinuationConfig {
  bool enabled = true;
  double init_fraction = 0.1;  // lambda_0 = max(lambda_target, init_fraction ||A^T b||_inf)
  double factor = 0.25;        // lambda_{j+1} = max(lambda_target, factor lambda_j)
  double stage_rel = 1e-2;     // stage tolerance max(stage_rel lambda_j, 10 final tol)
  std::size_t stage_max_iter = 5000;
};

/// Solver block: display name (see solver_from_name / stochastic_from_name)
/// plus tuning.
struct SolverConfig {
  std::string name = "FS-PG(5)";
  LineSearchConfig ls;
  std::optional<Safeguards> safeguards;
  std::optional<bool> restarts;
  double hb_beta = 0.9;
  // stochastic solvers
  double step0 = 1.0;
  Index batch_size = 0;
  Index m = 0;
  std::size_t epochs = 100;
  double decay = 0.85;

  SolverSpec spec() const {
    SolverSpec s = solver_from_name(name, ls, safeguards);
    if (restarts) s.restarts = *restarts;
    s.hb_beta = hb_beta;
    return s;
  }
  bool stochastic() const {
    try {
      (void)stochastic_from_name(name, 1.0);
      return true;
    } catch (const Error&) {
      return false;
    }
  }
  StochasticConfig stochastic_config(std::uint64_t seed) const {
    StochasticConfig c = stochastic_from_name(name, step0, seed);
    c.batch_size = batch_size;
    c.m = m;
    c.epochs = epochs;
    c.decay = decay;
    if (restarts) c.restarts = *restarts;
    return c;
  }
};

inline json to_json(const SolverConfig& c) {
  json j = {{"name", c.name}, {"line_search", to_json(c.ls)}, {"hb_beta", c.hb_beta}};
  j["safeguards"] = c.safeguards ? json{{"d_f", c.safeguards->d_f}, {"K", c.safeguards->K}} : json(nullptr);
  j["restarts"] = c.restarts ? json(*c.restarts) : json(nullptr);
  if (c.stochastic()) {
    j.update({{"step0", c.step0}, {"batch_size", c.batch_size}, {"m", c.m}, {"epochs", c.epochs}, {"decay", c.decay}});
  }
  return j;
}

inline SolverConfig solver_from_json(const json& j) {
  detail::check_keys(j,
                     {"name", "line_search", "safeguards", "restarts", "hb_beta", "step0", "batch_size", "m",
                      "epochs", "decay"},
                     "solver");
  SolverConfig c;
  detail::get_if(j, "name", c.name);
  if (j.contains("line_search")) c.ls = line_search_from_json(j.at("line_search"));
  if (j.contains("safeguards") && !j.at("safeguards").is_null()) {
    Safeguards g;
    detail::check_keys(j.at("safeguards"), {"d_f", "K"}, "safeguards");
    detail::get_if(j.at("safeguards"), "d_f", g.d_f);
    detail::get_if(j.at("safeguards"), "K", g.K);
    g.validate();
    c.safeguards = g;
  }
  if (j.contains("restarts") && !j.at("restarts").is_null()) c.restarts = j.at("restarts").get<bool>();
  detail::get_if(j, "hb_beta", c.hb_beta);
  detail::get_if(j, "step0", c.step0);
  detail::get_if(j, "batch_size", c.batch_size);
  detail::get_if(j, "m", c.m);
  detail::get_if(j, "epochs", c.epochs);
  detail::get_if(j, "decay", c.decay);
  if (!c.stochastic()) (void)c.spec();  // validates the name
  return c;
}

/// Stopping block. With `epsilon` set, the run stops by the uniform relative
/// criterion derived from a reference solve at that tolerance; otherwise by
/// ||s G_s|| <= grad_tol.
struct StopConfig {
  std::size_t max_iter = 20000;
  double grad_tol = 1e-6;
  std::optional<double> epsilon;
};

inline json to_json(const StopConfig& c) {
  return {{"max_iter", c.max_iter}, {"grad_tol", c.grad_tol}, {"epsilon", c.epsilon ? json(*c.epsilon) : json(nullptr)}};
}

inline StopConfig stop_from_json(const json& j) {
  detail::check_keys(j, {"max_iter", "grad_tol", "epsilon"}, "stop");
  StopConfig c;
  detail::get_if(j, "max_iter", c.max_iter);
  detail::get_if(j, "grad_tol", c.grad_tol);
  if (j.contains("epsilon") && !j.at("epsilon").is_null()) c.epsilon = j.at("epsilon").get<double>();
  return c;
}

struct RunConfig {
  ProblemConfig problem;
  SolverConfig solver;
  StopConfig stop;
  ContinuationConfig continuation;
  std::uint64_t seed = 1;
  std::string output;  // empty: stdout
};

inline json to_json(const RunConfig& c) {
  return {{"problem", to_json(c.problem)},
          {"solver", to_json(c.solver)},
          {"stop", to_json(c.stop)},
          {"continuation",
           {{"enabled", c.continuation.enabled},
            {"init_fraction", c.continuation.init_fraction},
            {"factor", c.continuation.factor},
            {"stage_rel", c.continuation.stage_rel},
            {"stage_max_iter", c.continuation.stage_max_iter}}},
          {"seed", c.seed},
          {"output", c.output}};
}

inline RunConfig run_config_from_json(const json& j) {
  detail::check_keys(j, {"problem", "solver", "stop", "continuation", "seed", "output"}, "run config");
  RunConfig c;
  if (j.contains("problem")) c.problem = problem_from_json(j.at("problem"));
  if (j.contains("solver")) c.solver = solver_from_json(j.at("solver"));
  if (j.contains("stop")) c.stop = stop_from_json(j.at("stop"));
  if (j.contains("continuation")) {
    const json& cj = j.at("continuation");
    detail::check_keys(cj, {"enabled", "init_fraction", "factor", "stage_rel", "stage_max_iter"}, "continuation");
    detail::get_if(cj, "enabled", c.continuation.enabled);
    detail::get_if(cj, "init_fraction", c.continuation.init_fraction);
    detail::get_if(cj, "factor", c.continuation.factor);
    detail::get_if(cj, "stage_rel", c.continuation.stage_rel);
    detail::get_if(cj, "stage_max_iter", c.continuation.stage_max_iter);
  }
  detail::get_if(j, "seed", c.seed);
  detail::get_if(j, "output", c.output);
  return c;
}

// ---------------------------------------------------------------------------
// Continuation and reference solves

struct ContinuationResult {
  Vec x;
  std::vector<IterationRecord> records;  // all stages, `stage` set
  std::vector<double> lambdas;
  bool converged = false;  // final stage met its stopping rule
  bool partial = false;    // some intermediate stage hit its iteration cap
};

/// Solves a decreasing sequence lambda_j -> lambda_target, warm-starting each
/// stage. The final stage stops by `final_stop`; earlier stages by
/// ||s G_s|| <= max(stage_rel lambda_j, 10 final_tol). N_A accumulates in `p`.
inline ContinuationResult continuation_solve(CompositeProblem& p, const SolverSpec& spec, double lambda_target,
                                             const ContinuationConfig& cc, const StopRule& final_stop, const Vec& x0,
                                             double final_tol) {
  if (!(lambda_target > 0.0)) throw Error(ErrorKind::invalid_input, "continuation needs lambda_target > 0");
  if (p.h().kind != ProxKind::l1) throw Error(ErrorKind::invalid_input, "continuation needs an l1 term");
  CompositeProblem monitor(p);
  ContinuationResult out;
  double lam = lambda_target;
  if (cc.enabled) {
    const Vec g0 = monitor.smooth().gradient(Vec::Zero(p.dim()));  // -A^T b
    lam = std::max(lambda_target, cc.init_fraction * g0.lpNorm<Eigen::Infinity>());
  }
  Vec x = x0;
  Solver solver(spec);
  for (std::size_t stage = 0;; ++stage) {
    p.set_lambda(lam);
    monitor.set_lambda(lam);
    out.lambdas.push_back(lam);
    const bool last = lam <= lambda_target;
    StopRule rule = final_stop;
    if (!last) {
      rule = StopRule{};
      rule.max_iter = cc.stage_max_iter;
      rule.grad_tol = std::max(cc.stage_rel * lam, 10.0 * final_tol);
      rule.metric_step = final_stop.metric_step;
    }
    auto res = solve(p, solver, x, rule, &monitor, stage);
    for (auto& r : res.records) out.records.push_back(r);
    x = res.x;
    if (last) {
      out.converged = res.converged;
      break;
    }
    if (!res.converged) out.partial = true;
    lam = std::max(lambda_target, cc.factor * lam);
  }
  p.set_lambda(lambda_target);
  out.x = std::move(x);
  return out;
}

/// Reference solver standing in for a high-accuracy method: FS-PM(3) with
/// restarts and nonmonotone BB line search.
inline SolverSpec reference_solver_spec() {
  LineSearchConfig ls = LineSearchConfig::nonmonotone(1.0);
  ls.trial = TrialPolicy::bb;
  return solver_from_name("FS-PM(3)", ls);
}

struct UniformStopReference {
  double epsilon = 0.0;
  Vec x_star;
  double f_star = 0.0;
  Vec x_eps;       // reference iterate with ||s G_s|| <= epsilon
  double f_eps = 0.0;
  double threshold = 0.0;  // (f_eps - f*) / max(|f*|, 1)
};

/// Reference point at 1e-13 (x*), shared across tolerances.
struct ReferencePoint {
  Vec x_star;
  double f_star = 0.0;
};

inline ReferencePoint reference_point(const CompositeProblem& problem, const Vec& x0, double tol = 1e-13,
                                      std::size_t max_iter = 200000) {
  CompositeProblem p(problem);
  StopRule stop;
  stop.grad_tol = tol;
  stop.max_iter = max_iter;
  Solver solver(reference_solver_spec());
  SolveResult res;
  if (p.h().kind == ProxKind::l1 && p.h().lambda > 0.0) {
    auto c = continuation_solve(p, solver.spec(), p.h().lambda, ContinuationConfig{}, stop, x0, tol);
    res.x = c.x;
    res.converged = c.converged;
    res.records = std::move(c.records);
  } else {
    res = solve(p, solver, x0, stop);
  }
  if (!res.converged) {
    const auto& last = res.records.back();
    throw Error(ErrorKind::step_failure,
                "reference solve did not reach ||sG|| <= " + std::to_string(tol) + " (got " +
                    std::to_string(last.scaled_grad_norm) + " after " + std::to_string(res.records.size()) +
                    " iterations)");
  }
  return {res.x, p.value(res.x)};
}

/// Threshold for the uniform stopping rule at tolerance epsilon.
inline UniformStopReference uniform_stop_reference(const CompositeProblem& problem, double epsilon, const Vec& x0,
                                                   const ReferencePoint& ref) {
  if (!(epsilon > 0.0)) throw Error(ErrorKind::invalid_input, "epsilon must be positive");
  UniformStopReference out;
  out.epsilon = epsilon;
  out.x_star = ref.x_star;
  out.f_star = ref.f_star;
  if (epsilon <= 1e-13) {
    out.x_eps = ref.x_star;
  } else {
    CompositeProblem p(problem);
    StopRule stop;
    stop.grad_tol = epsilon;
    stop.max_iter = 200000;
    const SolverSpec spec = reference_solver_spec();
    if (p.h().kind == ProxKind::l1 && p.h().lambda > 0.0) {
      auto c = continuation_solve(p, spec, p.h().lambda, ContinuationConfig{}, stop, x0, epsilon);
      if (!c.converged) throw Error(ErrorKind::step_failure, "reference solve did not reach epsilon");
      out.x_eps = c.x;
    } else {
      Solver solver(spec);
      auto res = solve(p, solver, x0, stop);
      if (!res.converged) throw Error(ErrorKind::step_failure, "reference solve did not reach epsilon");
      out.x_eps = res.x;
    }
  }
  CompositeProblem p(problem);
  out.f_eps = p.value(out.x_eps);
  out.threshold = relative_error(out.f_eps, out.f_star);
  return out;
}

inline UniformStopReference uniform_stop_reference(const CompositeProblem& problem, double epsilon, const Vec& x0) {
  return uniform_stop_reference(problem, epsilon, x0, reference_point(problem, x0));
}

// ---------------------------------------------------------------------------
// Single runs

struct RunResult {
  json header;
  std::vector<IterationRecord> records;
  Vec x;
  bool converged = false;
  bool partial = false;
  std::optional<double> threshold;
};

inline RunResult run(const RunConfig& cfg) {
  RunResult out;
  out.header = to_json(cfg);
  BuiltProblem b = build_problem(cfg.problem, cfg.seed);
  CompositeProblem& p = b.problem;
  if (b.lasso && !cfg.problem.path.empty()) {
    // echo what was loaded, not the generator defaults
    auto& hp = out.header["problem"];
    hp["n"] = b.lasso->n;
    hp["m"] = b.lasso->m();
    hp["k"] = b.lasso->k;
    hp["lambda"] = b.lasso->lambda;
    hp["dynamic_range_db"] = b.lasso->dynamic_range_db;
    hp["noise_std"] = b.lasso->noise_std;
  }

  if (cfg.solver.stochastic()) {
    auto* fs = dynamic_cast<FiniteSumOracle*>(&p.smooth());
    if (!fs) throw Error(ErrorKind::invalid_config, "stochastic solvers need a finite-sum problem");
    const ReferencePoint ref = reference_point(p, b.x0);
    auto sr = run_stochastic(*fs, p.h(), b.x0, cfg.solver.stochastic_config(cfg.seed), ref.f_star);
    out.records = std::move(sr.records);
    out.x = std::move(sr.x);
    out.header["f_star"] = ref.f_star;
    out.converged = true;
    return out;
  }

  StopRule stop;
  stop.max_iter = cfg.stop.max_iter;
  stop.grad_tol = cfg.stop.grad_tol;
  double final_tol = cfg.stop.grad_tol;
  if (cfg.stop.epsilon) {
    const auto ref = uniform_stop_reference(p, *cfg.stop.epsilon, b.x0);
    stop.grad_tol = -1.0;
    stop.f_star = ref.f_star;
    stop.rel_tol = std::max(ref.threshold, std::numeric_limits<double>::min());
    final_tol = *cfg.stop.epsilon;
    out.threshold = ref.threshold;
    out.header["f_star"] = ref.f_star;
    out.header["threshold"] = ref.threshold;
  } else if (b.analytic_f_star) {
    stop.f_star = b.analytic_f_star;
  }
  const SolverSpec spec = cfg.solver.spec();
  if (p.h().kind == ProxKind::l1 && p.h().lambda > 0.0 && cfg.continuation.enabled) {
    auto c = continuation_solve(p, spec, p.h().lambda, cfg.continuation, stop, b.x0, final_tol);
    out.records = std::move(c.records);
    out.x = std::move(c.x);
    out.converged = c.converged;
    out.partial = c.partial;
  } else {
    Solver solver(spec);
    auto r = solve(p, solver, b.x0, stop);
    out.records = std::move(r.records);
    out.x = std::move(r.x);
    out.converged = r.converged;
  }
  out.header["converged"] = out.converged;
  out.header["partial"] = out.partial;
  return out;
}

inline void write_records_csv(std::ostream& out, const std::vector<IterationRecord>& recs) {
  out << "k,epoch,stage,f,rel_err,scaled_grad_norm,n_A,restarts,reason,step,wall_ns\n";
  out.precision(17);
  for (const auto& r : recs) {
    out << r.k << ',' << r.epoch << ',' << r.stage << ',' << r.f << ',' << r.rel_err << ',' << r.scaled_grad_norm
        << ',' << r.n_A << ',' << r.restarts << ',' << to_string(r.reason) << ',' << r.step << ',' << r.wall_ns
        << '\n';
  }
}

/// One JSON header line (prefixed "# ") followed by the CSV body.
inline void write_run(std::ostream& out, const RunResult& r) {
  out << "# " << r.header.dump() << '\n';
  write_records_csv(out, r.records);
}

// ---------------------------------------------------------------------------
// Bench matrix (Lasso protocol)

/// Worker count from SDC_WORKERS (default 1).
inline unsigned worker_count() {
  if (const char* w = std::getenv("SDC_WORKERS")) {
    try {
      const int v = std::stoi(w);
      if (v >= 1) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
    throw Error(ErrorKind::invalid_config, std::string("SDC_WORKERS must be a positive integer, got ") + w);
  }
  return 1;
}

struct BenchConfig {
  ProblemConfig problem;  // lasso parameters; dynamic range overridden per cell
  std::vector<double> dynamic_ranges{40.0};
  std::vector<double> epsilons{1e-2, 1e-4};
  std::vector<SolverConfig> solvers;
  ContinuationConfig continuation;
  std::size_t trials = 10;
  std::uint64_t base_seed = 1;
  std::size_t max_iter = 20000;
  bool keep_records = false;
};

inline json to_json(const BenchConfig& c) {
  json s = json::array();
  for (const auto& sc : c.solvers) s.push_back(to_json(sc));
  return {{"problem", to_json(c.problem)},
          {"dynamic_ranges", c.dynamic_ranges},
          {"epsilons", c.epsilons},
          {"solvers", s},
          {"continuation", c.continuation.enabled},
          {"trials", c.trials},
          {"base_seed", c.base_seed},
          {"max_iter", c.max_iter}};
}

inline BenchConfig bench_from_json(const json& j) {
  detail::check_keys(j,
                     {"problem", "dynamic_ranges", "epsilons", "solvers", "continuation", "trials", "base_seed",
                      "max_iter", "keep_records"},
                     "bench config");
  BenchConfig c;
  if (j.contains("problem")) c.problem = problem_from_json(j.at("problem"));
  detail::get_if(j, "dynamic_ranges", c.dynamic_ranges);
  detail::get_if(j, "epsilons", c.epsilons);
  if (j.contains("solvers")) {
    for (const auto& s : j.at("solvers")) c.solvers.push_back(solver_from_json(s));
  }
  detail::get_if(j, "continuation", c.continuation.enabled);
  detail::get_if(j, "trials", c.trials);
  detail::get_if(j, "base_seed", c.base_seed);
  detail::get_if(j, "max_iter", c.max_iter);
  detail::get_if(j, "keep_records", c.keep_records);
  return c;
}

struct TrialResult {
  std::string solver;
  double epsilon = 0.0;
  double dynamic_range_db = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t n_A = 0;
  std::int64_t wall_ns = 0;
  std::size_t iterations = 0;
  double final_rel_err = 0.0;
  double threshold = 0.0;
  bool converged = false;
  std::string error;  // nonempty when the trial threw
  std::vector<IterationRecord> records;
};

struct SummaryRow {
  std::string solver;
  double epsilon = 0.0;
  double dynamic_range_db = 0.0;
  std::size_t trials = 0;
  std::size_t completed = 0;
  double mean_n_A = 0.0;
  double median_n_A = 0.0;
  double mean_wall_s = 0.0;
  bool incomplete = false;
};

struct BenchResult {
  std::vector<TrialResult> trials;  // sorted by (d, seed, epsilon, solver order)
  std::vector<SummaryRow> summary;
  bool all_converged() const {
    return std::all_of(trials.begin(), trials.end(), [](const TrialResult& t) { return t.converged; });
  }
};

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace detail {
// All solver/epsilon cells of one generated instance.
inline std::vector<TrialResult> bench_instance(const BenchConfig& cfg, double d, std::uint64_t seed) {
  std::vector<TrialResult> out;
  ProblemConfig pc = cfg.problem;
  pc.dynamic_range_db = d;
  BuiltProblem b = build_problem(pc, seed);
  std::optional<ReferencePoint> ref;
  std::string ref_error;
  try {
    ref = reference_point(b.problem, b.x0);
  } catch (const Error& e) {
    ref_error = e.what();
  }
  for (double eps : cfg.epsilons) {
    std::optional<UniformStopReference> usr;
    std::string err = ref_error;
    if (ref) {
      try {
        usr = uniform_stop_reference(b.problem, eps, b.x0, *ref);
      } catch (const Error& e) {
        err = e.what();
      }
    }
    for (const auto& sc : cfg.solvers) {
      TrialResult t;
      t.solver = sc.name;
      t.epsilon = eps;
      t.dynamic_range_db = d;
      t.seed = seed;
      if (!usr) {
        t.error = err;
        out.push_back(std::move(t));
        continue;
      }
      t.threshold = usr->threshold;
      try {
        CompositeProblem p(b.problem);
        StopRule stop;
        stop.max_iter = cfg.max_iter;
        stop.grad_tol = -1.0;
        stop.f_star = usr->f_star;
        stop.rel_tol = std::max(usr->threshold, std::numeric_limits<double>::min());
        const SolverSpec spec = sc.spec();
        std::vector<IterationRecord> recs;
        bool conv = false;
        if (cfg.continuation.enabled) {
          auto c = continuation_solve(p, spec, p.h().lambda, cfg.continuation, stop, b.x0, eps);
          recs = std::move(c.records);
          conv = c.converged;
        } else {
          Solver solver(spec);
          auto r = solve(p, solver, b.x0, stop);
          recs = std::move(r.records);
          conv = r.converged;
        }
        t.converged = conv;
        t.iterations = recs.size() - 1;
        t.n_A = recs.back().n_A;
        t.wall_ns = 0;
        for (const auto& r : recs) t.wall_ns = std::max(t.wall_ns, r.wall_ns);
        // stage-local wall clocks restart at zero; sum the per-stage maxima
        std::map<std::size_t, std::int64_t> per_stage;
        for (const auto& r : recs) per_stage[r.stage] = std::max(per_stage[r.stage], r.wall_ns);
        t.wall_ns = 0;
        for (const auto& [_, w] : per_stage) t.wall_ns += w;
        t.final_rel_err = recs.back().rel_err;
        if (cfg.keep_records) t.records = std::move(recs);
      } catch (const Error& e) {
        t.error = e.what();
      }
      out.push_back(std::move(t));
    }
  }
  return out;
}
}  // namespace detail

/// Runs every (d, seed) instance against every (epsilon, solver) cell.
/// Instances are distributed over `workers` threads; results are ordered by
/// (d, seed) so the output does not depend on scheduling.
inline BenchResult bench_matrix(const BenchConfig& cfg, unsigned workers = 1) {
  if (cfg.solvers.empty()) throw Error(ErrorKind::invalid_config, "bench needs at least one solver");
  if (cfg.trials == 0) throw Error(ErrorKind::invalid_config, "bench needs trials >= 1");
  if (cfg.problem.type != "lasso") throw Error(ErrorKind::invalid_config, "bench matrix runs the Lasso protocol");
  std::vector<std::pair<double, std::uint64_t>> jobs;
  for (double d : cfg.dynamic_ranges) {
    for (std::size_t t = 0; t < cfg.trials; ++t) jobs.emplace_back(d, cfg.base_seed + t);
  }
  std::vector<std::vector<TrialResult>> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      results[i] = detail::bench_instance(cfg, jobs[i].first, jobs[i].second);
    }
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(jobs.size())));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  BenchResult out;
  for (auto& r : results) {
    for (auto& t : r) out.trials.push_back(std::move(t));
  }
  for (double d : cfg.dynamic_ranges) {
    for (double eps : cfg.epsilons) {
      for (const auto& sc : cfg.solvers) {
        SummaryRow row;
        row.solver = sc.name;
        row.epsilon = eps;
        row.dynamic_range_db = d;
        std::vector<double> na;
        double wall = 0.0;
        for (const auto& t : out.trials) {
          if (t.solver != sc.name || t.epsilon != eps || t.dynamic_range_db != d) continue;
          ++row.trials;
          if (!t.converged || !t.error.empty()) continue;
          ++row.completed;
          na.push_back(static_cast<double>(t.n_A));
          wall += static_cast<double>(t.wall_ns) * 1e-9;
        }
        row.incomplete = row.completed < row.trials;
        if (!na.empty()) {
          row.mean_n_A = std::accumulate(na.begin(), na.end(), 0.0) / static_cast<double>(na.size());
          row.median_n_A = median(na);
          row.mean_wall_s = wall / static_cast<double>(na.size());
        }
        out.summary.push_back(row);
      }
    }
  }
  return out;
}

inline void write_summary_csv(std::ostream& out, const BenchResult& r) {
  out << "solver,epsilon,d,trials,completed,mean_n_A,median_n_A,mean_wall_s,incomplete\n";
  out.precision(10);
  for (const auto& s : r.summary) {
    out << s.solver << ',' << s.epsilon << ',' << s.dynamic_range_db << ',' << s.trials << ',' << s.completed << ','
        << s.mean_n_A << ',' << s.median_n_A << ',' << s.mean_wall_s << ',' << (s.incomplete ? 1 : 0) << '\n';
  }
}

inline void write_trials_csv(std::ostream& out, const BenchResult& r) {
  out << "solver,epsilon,d,seed,n_A,wall_ns,iterations,final_rel_err,threshold,converged,error\n";
  out.precision(17);
  for (const auto& t : r.trials) {
    out << t.solver << ',' << t.epsilon << ',' << t.dynamic_range_db << ',' << t.seed << ',' << t.n_A << ','
        << t.wall_ns << ',' << t.iterations << ',' << t.final_rel_err << ',' << t.threshold << ','
        << (t.converged ? 1 : 0) << ",\"" << t.error << "\"\n";
  }
}

// ---------------------------------------------------------------------------
// Epochs report (logistic protocol)

struct EpochsConfig {
  ProblemConfig problem;  // type logreg
  std::vector<SolverConfig> solvers;
  std::size_t seeds = 10;
  std::uint64_t base_seed = 1;
  std::size_t epochs = 100;
  bool same_data = true;  // one dataset (base_seed) for every sampler seed
};

inline EpochsConfig epochs_from_json(const json& j) {
  detail::check_keys(j, {"problem", "solvers", "seeds", "base_seed", "epochs", "same_data"}, "logreg config");
  EpochsConfig c;
  c.problem.type = "logreg";
  c.problem.lambda = 1e-3;
  if (j.contains("problem")) c.problem = problem_from_json(j.at("problem"));
  if (j.contains("solvers")) {
    for (const auto& s : j.at("solvers")) c.solvers.push_back(solver_from_json(s));
  }
  detail::get_if(j, "seeds", c.seeds);
  detail::get_if(j, "base_seed", c.base_seed);
  detail::get_if(j, "epochs", c.epochs);
  detail::get_if(j, "same_data", c.same_data);
  return c;
}

inline json to_json(const EpochsConfig& c) {
  json s = json::array();
  for (const auto& sc : c.solvers) s.push_back(to_json(sc));
  return {{"problem", to_json(c.problem)}, {"solvers", s},          {"seeds", c.seeds},
          {"base_seed", c.base_seed},      {"epochs", c.epochs},    {"same_data", c.same_data}};
}

struct EpochsRow {
  std::string solver;
  std::size_t epoch = 0;
  double median_rel_err = 0.0;
  double mean_rel_err = 0.0;
};

struct EpochsResult {
  std::vector<EpochsRow> rows;
  // per solver, per seed: rel_err by epoch
  std::map<std::string, std::vector<std::vector<double>>> curves;
  std::vector<double> f_stars;
};

/// Per-epoch relative error curves for stochastic (and deterministic, one
/// iteration per epoch) solvers, aggregated over seeds.
inline EpochsResult epochs_report(const EpochsConfig& cfg) {
  if (cfg.solvers.empty()) throw Error(ErrorKind::invalid_config, "logreg report needs solvers");
  EpochsResult out;
  std::optional<BuiltProblem> shared;
  std::optional<double> shared_fstar;
  for (std::size_t si = 0; si < cfg.seeds; ++si) {
    const std::uint64_t seed = cfg.base_seed + si;
    std::optional<BuiltProblem> own;
    BuiltProblem* bp = nullptr;
    double f_star = 0.0;
    if (cfg.same_data) {
      if (!shared) {
        shared.emplace(build_problem(cfg.problem, cfg.base_seed));
        StopRule st;
        shared_fstar = reference_point(shared->problem, shared->x0).f_star;
      }
      bp = &*shared;
      f_star = *shared_fstar;
    } else {
      own.emplace(build_problem(cfg.problem, seed));
      bp = &*own;
      f_star = reference_point(bp->problem, bp->x0).f_star;
    }
    out.f_stars.push_back(f_star);
    for (const auto& sc : cfg.solvers) {
      std::vector<double> curve;
      if (sc.stochastic()) {
        CompositeProblem p(bp->problem);
        auto* fs = dynamic_cast<FiniteSumOracle*>(&p.smooth());
        if (!fs) throw Error(ErrorKind::invalid_config, "stochastic solvers need a finite-sum problem");
        StochasticConfig c = sc.stochastic_config(seed);
        c.epochs = cfg.epochs;
        auto run = run_stochastic(*fs, p.h(), bp->x0, c, f_star);
        for (const auto& r : run.records) curve.push_back(r.rel_err);
      } else {
        CompositeProblem p(bp->problem);
        Solver solver(sc.spec());
        StopRule stop;
        stop.grad_tol = -1.0;
        stop.max_iter = cfg.epochs;
        stop.f_star = f_star;
        auto r = solve(p, solver, bp->x0, stop);
        for (const auto& rec : r.records) curve.push_back(rec.rel_err);
        while (curve.size() < cfg.epochs + 1) curve.push_back(curve.back());
      }
      out.curves[sc.name].push_back(std::move(curve));
    }
  }
  for (const auto& sc : cfg.solvers) {
    const auto& per_seed = out.curves[sc.name];
    for (std::size_t e = 0; e <= cfg.epochs; ++e) {
      std::vector<double> col;
      for (const auto& c : per_seed) col.push_back(c[e]);
      EpochsRow row;
      row.solver = sc.name;
      row.epoch = e;
      row.median_rel_err = median(col);
      row.mean_rel_err = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(col.size());
      out.rows.push_back(row);
    }
  }
  return out;
}

inline void write_epochs_csv(std::ostream& out, const EpochsResult& r) {
  out << "solver,epoch,median_rel_err,mean_rel_err\n";
  out.precision(17);
  for (const auto& row : r.rows) {
    out << row.solver << ',' << row.epoch << ',' << row.median_rel_err << ',' << row.mean_rel_err << '\n';
  }
}

}  // namespace sdc

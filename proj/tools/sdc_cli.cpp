// sdc: command-line harness for the SDC solver family.
//
//   sdc gen-lasso  --n 4096 --m 512 --d 40 --seed 1 --out inst.json
//   sdc solve      --config run.json [--solver FS-PG(5)] [--epsilon 1e-4] ...
//   sdc bench      --config bench.json [--trials 10] --summary summary.csv
//   sdc logreg     --config logreg.json [--data a9a.txt] --out epochs.csv
//   sdc ode-sim    --kind fisc --r 5 --s 1e-6 --steps 100000 --out traj.csv
//   sdc ode-audit  --problem quadratic --r 5 --iters 1000 --out audit.csv
//
// Exit code 0 only when every run converged (or every audit passed).

#include "sdc/bench.hpp"
#include "sdc/ode_lab.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <random>

namespace {

using nlohmann::json;

json load_json(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw sdc::Error(sdc::ErrorKind::io_error, "cannot open config " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw sdc::Error(sdc::ErrorKind::parse_error, path + ": " + e.what());
  }
}

// Writes to `path`, or stdout when empty or "-".
template <class F>
void emit(const std::string& path, F&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw sdc::Error(sdc::ErrorKind::io_error, "cannot write " + path);
  write(out);
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

json solver_list(const std::string& names, const json& base) {
  json arr = json::array();
  for (const auto& n : split(names)) {
    json s = base;
    s["name"] = n;
    arr.push_back(s);
  }
  return arr;
}

struct LassoFlags {
  std::optional<long> n, m, k;
  std::optional<double> d, noise, lambda;
  void add(CLI::App* app) {
    app->add_option("--n", n, "signal dimension");
    app->add_option("--m", m, "number of measurements");
    app->add_option("--k", k, "nonzeros (default n/40)");
    app->add_option("--d", d, "dynamic range in dB");
    app->add_option("--noise", noise, "noise standard deviation");
    app->add_option("--lambda", lambda, "l1 weight");
  }
  void apply(json& p) const {
    if (n) p["n"] = *n;
    if (m) p["m"] = *m;
    if (k) p["k"] = *k;
    if (d) p["dynamic_range_db"] = *d;
    if (noise) p["noise_std"] = *noise;
    if (lambda) p["lambda"] = *lambda;
  }
};

int cmd_gen_lasso(const LassoFlags& f, std::uint64_t seed, const std::string& out) {
  sdc::ProblemConfig pc;
  json p = json::object();
  f.apply(p);
  pc = sdc::problem_from_json(p);
  auto inst = sdc::lasso_generate(pc.n, pc.m, pc.resolved_k(), pc.dynamic_range_db, pc.noise_std, seed, pc.lambda);
  emit(out, [&](std::ostream& o) { o << sdc::to_json(inst).dump() << '\n'; });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SDC solver family: Lasso / logistic benchmarks and ODE audits"};
  app.require_subcommand(1);

  // gen-lasso
  auto* gen = app.add_subcommand("gen-lasso", "generate a partial-DCT Lasso instance as JSON");
  LassoFlags gen_flags;
  gen_flags.add(gen);
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out,-o", gen_out, "output file (default stdout)");

  // solve
  auto* solve = app.add_subcommand("solve", "run one configuration");
  std::string solve_cfg, solve_out, solve_solver, solve_problem, solve_path, solve_ls;
  std::optional<std::uint64_t> solve_seed;
  std::optional<double> solve_eps, solve_gtol, solve_s0;
  std::optional<std::size_t> solve_iters;
  std::optional<bool> solve_cont, solve_restarts;
  LassoFlags solve_lasso;
  solve->add_option("--config,-c", solve_cfg, "run config JSON");
  solve->add_option("--solver", solve_solver, "solver name, e.g. FS-PG(5), F-PM, FISTA, sFSVR-PG(5)");
  solve->add_option("--problem", solve_problem, "lasso | logreg | quadratic | rosenbrock");
  solve->add_option("--path", solve_path, "instance file (lasso JSON or libsvm)");
  solve->add_option("--line-search", solve_ls, "fixed | armijo | nonmonotone");
  solve->add_option("--s0", solve_s0, "fixed / initial step");
  solve->add_option("--seed", solve_seed, "seed");
  solve->add_option("--epsilon", solve_eps, "uniform stopping tolerance");
  solve->add_option("--grad-tol", solve_gtol, "stop at ||s G_s|| <= tol");
  solve->add_option("--max-iter", solve_iters, "iteration cap");
  solve->add_option("--continuation", solve_cont, "use lambda continuation (true/false)");
  solve->add_option("--restarts", solve_restarts, "enable restarts (true/false)");
  solve->add_option("--out,-o", solve_out, "output file (default stdout)");
  solve_lasso.add(solve);

  // bench
  auto* bench = app.add_subcommand("bench", "Lasso bench matrix with uniform stopping");
  std::string bench_cfg, bench_summary, bench_trials_out, bench_solvers, bench_eps, bench_d;
  std::optional<std::size_t> bench_trials;
  std::optional<std::uint64_t> bench_seed;
  LassoFlags bench_lasso;
  bench->add_option("--config,-c", bench_cfg, "bench config JSON");
  bench->add_option("--solvers", bench_solvers, "comma-separated solver names");
  bench->add_option("--epsilons", bench_eps, "comma-separated tolerances");
  bench->add_option("--dynamic-ranges", bench_d, "comma-separated dynamic ranges (dB)");
  bench->add_option("--trials", bench_trials, "instances per dynamic range");
  bench->add_option("--seed", bench_seed, "first instance seed");
  bench->add_option("--summary", bench_summary, "summary CSV (default stdout)");
  bench->add_option("--trials-out", bench_trials_out, "per-trial CSV");
  bench_lasso.add(bench);

  // logreg
  auto* logreg = app.add_subcommand("logreg", "l1-logistic epochs vs relative error");
  std::string lr_cfg, lr_data, lr_out, lr_solvers, lr_rule;
  std::optional<double> lr_lambda, lr_step;
  std::optional<std::size_t> lr_seeds, lr_epochs;
  logreg->add_option("--config,-c", lr_cfg, "logreg config JSON");
  logreg->add_option("--data", lr_data, "libsvm file (default: synthetic)");
  logreg->add_option("--label-rule", lr_rule, "binary | even_odd");
  logreg->add_option("--lambda", lr_lambda, "l1 weight");
  logreg->add_option("--solvers", lr_solvers, "comma-separated solver names");
  logreg->add_option("--step0", lr_step, "initial step for every solver");
  logreg->add_option("--seeds", lr_seeds, "number of sampler seeds");
  logreg->add_option("--epochs", lr_epochs, "epochs");
  logreg->add_option("--out,-o", lr_out, "epochs CSV (default stdout)");

  // ode-sim
  auto* ode = app.add_subcommand("ode-sim", "integrate an SDC-type ODE with symplectic Euler");
  std::string ode_kind = "fisc", ode_out, ode_audit_out;
  double ode_r = 3.0, ode_beta = 0.5, ode_c1 = 1.0, ode_c2 = 1.0, ode_s = 1e-6;
  std::size_t ode_steps = 100000, ode_every = 100, ode_n = 10;
  std::uint64_t ode_seed = 1;
  std::string ode_problem = "quadratic";
  ode->add_option("--kind", ode_kind, "fisc | nesterov | hf_ns | heavy_ball | fire");
  ode->add_option("--r", ode_r, "r for fisc / hf_ns");
  ode->add_option("--beta", ode_beta, "heavy-ball friction");
  ode->add_option("--c1", ode_c1, "FIRE amplitude");
  ode->add_option("--c2", ode_c2, "FIRE decay rate");
  ode->add_option("--s", ode_s, "step parameter (time step sqrt(s))");
  ode->add_option("--steps", ode_steps, "number of steps");
  ode->add_option("--sample-every", ode_every, "keep every k-th state");
  ode->add_option("--problem", ode_problem, "sphere | quadratic");
  ode->add_option("--dim", ode_n, "dimension");
  ode->add_option("--seed", ode_seed, "quadratic seed");
  ode->add_option("--out,-o", ode_out, "trajectory CSV (default stdout)");
  ode->add_option("--audit", ode_audit_out, "continuous Lyapunov audit CSV (fisc/nesterov only)");

  // ode-audit
  auto* audit = app.add_subcommand("ode-audit", "discrete Lyapunov audit of fixed-step FISC-PM");
  std::string au_problem = "quadratic", au_out;
  double au_r = 5.0;
  std::size_t au_iters = 1000, au_n = 100;
  std::uint64_t au_seed = 1;
  audit->add_option("--problem", au_problem, "quadratic | lasso");
  audit->add_option("--r", au_r, "FISC parameter r >= 3");
  audit->add_option("--iters", au_iters, "iterations");
  audit->add_option("--dim", au_n, "dimension (lasso: n, m = n/8)");
  audit->add_option("--seed", au_seed, "instance seed");
  audit->add_option("--out,-o", au_out, "audit CSV (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen_lasso(gen_flags, gen_seed, gen_out);

    if (*solve) {
      json j = load_json(solve_cfg);
      json& p = j["problem"];
      if (p.is_null()) p = json::object();
      if (!solve_problem.empty()) p["type"] = solve_problem;
      if (!solve_path.empty()) p["path"] = solve_path;
      solve_lasso.apply(p);
      json& s = j["solver"];
      if (s.is_null()) s = json::object();
      if (!solve_solver.empty()) s["name"] = solve_solver;
      if (!solve_ls.empty()) s["line_search"]["mode"] = solve_ls;
      if (solve_s0) {
        s["line_search"]["s0"] = *solve_s0;
        if (s.value("name", std::string()).rfind('s', 0) == 0 || s.value("name", std::string()) == "SGD" ||
            s.value("name", std::string()) == "prox-SVRG") {
          s["step0"] = *solve_s0;
        }
      }
      if (solve_restarts) s["restarts"] = *solve_restarts;
      json& st = j["stop"];
      if (st.is_null()) st = json::object();
      if (solve_eps) st["epsilon"] = *solve_eps;
      if (solve_gtol) st["grad_tol"] = *solve_gtol;
      if (solve_iters) st["max_iter"] = *solve_iters;
      if (solve_cont) j["continuation"]["enabled"] = *solve_cont;
      if (solve_seed) j["seed"] = *solve_seed;
      if (!solve_out.empty()) j["output"] = solve_out;
      const sdc::RunConfig cfg = sdc::run_config_from_json(j);
      const sdc::RunResult r = sdc::run(cfg);
      emit(cfg.output, [&](std::ostream& o) { sdc::write_run(o, r); });
      if (!r.converged) std::cerr << "sdc solve: run did not converge\n";
      return r.converged ? 0 : 1;
    }

    if (*bench) {
      json j = load_json(bench_cfg);
      json& p = j["problem"];
      if (p.is_null()) p = json::object();
      bench_lasso.apply(p);
      if (!bench_solvers.empty()) j["solvers"] = solver_list(bench_solvers, json::object());
      auto nums = [](const std::string& s) {
        std::vector<double> v;
        for (const auto& t : split(s)) v.push_back(std::stod(t));
        return v;
      };
      if (!bench_eps.empty()) j["epsilons"] = nums(bench_eps);
      if (!bench_d.empty()) j["dynamic_ranges"] = nums(bench_d);
      if (bench_trials) j["trials"] = *bench_trials;
      if (bench_seed) j["base_seed"] = *bench_seed;
      sdc::BenchConfig cfg = sdc::bench_from_json(j);
      if (cfg.solvers.empty()) {
        for (const char* n : {"F-PG", "FS-PG(5)", "F-PM", "FS-PM(5)"}) {
          sdc::SolverConfig sc;
          sc.name = n;
          cfg.solvers.push_back(sc);
        }
      }
      const auto r = sdc::bench_matrix(cfg, sdc::worker_count());
      emit(bench_summary, [&](std::ostream& o) {
        o << "# " << sdc::to_json(cfg).dump() << '\n';
        sdc::write_summary_csv(o, r);
      });
      if (!bench_trials_out.empty()) emit(bench_trials_out, [&](std::ostream& o) { sdc::write_trials_csv(o, r); });
      if (!r.all_converged()) std::cerr << "sdc bench: some trials did not converge\n";
      return r.all_converged() ? 0 : 1;
    }

    if (*logreg) {
      json j = load_json(lr_cfg);
      json& p = j["problem"];
      if (p.is_null()) p = json::object();
      p["type"] = "logreg";
      if (!lr_data.empty()) p["path"] = lr_data;
      if (!lr_rule.empty()) p["label_rule"] = lr_rule;
      if (lr_lambda) p["lambda"] = *lr_lambda;
      if (!lr_solvers.empty()) {
        json base = json::object();
        if (lr_step) base["step0"] = *lr_step;
        j["solvers"] = solver_list(lr_solvers, base);
      } else if (lr_step && j.contains("solvers")) {
        for (auto& s : j["solvers"]) s["step0"] = *lr_step;
      }
      if (lr_seeds) j["seeds"] = *lr_seeds;
      if (lr_epochs) j["epochs"] = *lr_epochs;
      sdc::EpochsConfig cfg = sdc::epochs_from_json(j);
      if (cfg.solvers.empty()) {
        for (const char* n : {"SGD", "prox-SVRG", "sF-PG", "sFS-PG(5)", "sFVR-PG", "sFSVR-PG(5)"}) {
          sdc::SolverConfig sc;
          sc.name = n;
          if (lr_step) sc.step0 = *lr_step;
          cfg.solvers.push_back(sc);
        }
      }
      const auto r = sdc::epochs_report(cfg);
      emit(lr_out, [&](std::ostream& o) {
        o << "# " << sdc::to_json(cfg).dump() << '\n';
        sdc::write_epochs_csv(o, r);
      });
      return 0;
    }

    if (*ode) {
      sdc::OdeSpec spec;
      if (ode_kind == "fisc") {
        spec = sdc::OdeSpec::fisc(ode_r);
      } else if (ode_kind == "nesterov") {
        spec = sdc::OdeSpec::nesterov();
      } else if (ode_kind == "hf_ns") {
        spec = sdc::OdeSpec::hf_ns(ode_r);
      } else if (ode_kind == "heavy_ball") {
        spec = sdc::OdeSpec::heavy_ball(ode_beta);
      } else if (ode_kind == "fire") {
        spec = sdc::OdeSpec::fire(ode_c1, ode_c2);
      } else {
        throw sdc::Error(sdc::ErrorKind::invalid_config, "unknown ODE kind " + ode_kind);
      }
      std::unique_ptr<sdc::QuadraticOracle> q;
      if (ode_problem == "sphere") {
        q = std::make_unique<sdc::QuadraticOracle>(sdc::QuadraticOracle::identity(static_cast<sdc::Index>(ode_n)));
      } else if (ode_problem == "quadratic") {
        std::mt19937_64 rng(ode_seed);
        q = std::make_unique<sdc::QuadraticOracle>(
            sdc::QuadraticOracle::random(static_cast<sdc::Index>(ode_n), 1e-2, 1.0, rng));
      } else {
        throw sdc::Error(sdc::ErrorKind::invalid_config, "unknown ODE problem " + ode_problem);
      }
      const sdc::Vec x0 = sdc::Vec::Ones(static_cast<sdc::Index>(ode_n));
      const auto tr = sdc::integrate_symplectic(spec, *q, x0, ode_s, ode_steps, ode_every);
      emit(ode_out, [&](std::ostream& o) { sdc::write_csv(o, tr); });
      if (!ode_audit_out.empty()) {
        const auto a = sdc::audit_continuous(tr, spec, q->minimizer(), q->min_value());
        emit(ode_audit_out, [&](std::ostream& o) { sdc::write_csv(o, a); });
        std::cerr << "rate violations " << a.rate_violations << ", energy violations " << a.energy_violations << '\n';
        return a.rate_ok() && a.energy_ok() ? 0 : 1;
      }
      return 0;
    }

    if (*audit) {
      std::optional<sdc::CompositeProblem> p;
      sdc::Vec x_star;
      double f_star = 0.0;
      double L = 1.0;
      if (au_problem == "quadratic") {
        std::mt19937_64 rng(au_seed);
        auto q = sdc::QuadraticOracle::random(static_cast<sdc::Index>(au_n), 1e-3, 1.0, rng);
        x_star = q.minimizer();
        f_star = q.min_value();
        L = q.lipschitz();
        p.emplace(sdc::smooth_problem<sdc::QuadraticOracle>(q));
      } else if (au_problem == "lasso") {
        const auto n = static_cast<sdc::Index>(au_n);
        auto inst = sdc::lasso_generate(n, std::max<sdc::Index>(1, n / 8), std::max<sdc::Index>(1, n / 40), 40.0, 0.1,
                                        au_seed, 8e-3);
        p.emplace(sdc::lasso_problem(inst));
        const auto ref = sdc::reference_point(*p, sdc::Vec::Zero(n));
        x_star = ref.x_star;
        f_star = ref.f_star;
      } else {
        throw sdc::Error(sdc::ErrorKind::invalid_config, "unknown audit problem " + au_problem);
      }
      const sdc::Vec x0 = au_problem == "lasso" ? sdc::Vec::Zero(p->dim()) : sdc::Vec::Ones(p->dim());
      const double s = 1.0 / L;
      const auto tr = sdc::record_fisc_pm(*p, x0, au_r, s, au_iters);
      const auto a = sdc::lyapunov_discrete_audit(tr, au_r, s, x_star, f_star);
      emit(au_out, [&](std::ostream& o) { sdc::write_csv(o, a); });
      const double tol = 1e-9 * (1.0 + a.e0);
      const bool ok = a.rate_violations == 0 && a.max_step_excess <= tol && a.max_total_excess <= tol;
      std::cerr << "rate violations " << a.rate_violations << " (printed C0: " << a.rate_violations_printed
                << "), max step excess " << a.max_step_excess << ", max total excess " << a.max_total_excess
                << '\n';
      return ok ? 0 : 1;
    }
  } catch (const sdc::Error& e) {
    std::cerr << "sdc: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "sdc: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

#include "oracles.hpp"

#include "sdc/problems.hpp"
#include "sdc/solver.hpp"
#include "sdc/variants.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace sdc;

namespace {

Vec randn(Index n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vec v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

struct DenseLasso {
  Mat a;
  Vec b;
  double lambda;
  CompositeProblem problem() const {
    return CompositeProblem(std::make_unique<LeastSquaresOracle>(a, b), ProxSpec::l1(lambda));
  }
};

DenseLasso random_dense_lasso(Index m, Index n, double lambda, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  DenseLasso d;
  d.a = Mat::NullaryExpr(m, n, [&]() { return std::normal_distribution<double>()(rng); }) / std::sqrt(double(m));
  d.b = randn(m, rng);
  d.lambda = lambda;
  return d;
}

// Convex quadratic 0.5 x'Qx - b'x with spectrum in [mu, L].
struct Quad {
  Mat q;
  Vec b;
  QuadraticOracle oracle() const { return QuadraticOracle(q, b); }
};

Quad random_quad(Index n, double mu, double L, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto o = QuadraticOracle::random(n, mu, L, rng);
  return {o.hessian(), o.linear()};
}

}  // namespace

TEST(FiscPm, RThreeWithoutRestartsIsFista) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto d = random_dense_lasso(20, 40, 0.05, seed);
    auto p = d.problem();
    const double s = 1.0 / p.lipschitz();
    std::mt19937_64 rng(seed);
    const Vec x0 = randn(40, rng);
    const auto ref = oracle::fista(d.a, d.b, d.lambda, x0, s, 100);
    const auto ls = LineSearchConfig::fixed(s);
    auto st = two_point_init(x0, Schedule::fisc(3), ls, false);
    for (int k = 1; k <= 100; ++k) {
      fisc_pm_step(p, st, ls);
      const Vec& e = ref[static_cast<std::size_t>(k)];
      ASSERT_LE((st.x - e).norm(), 1e-12 * (1.0 + e.norm())) << "seed " << seed << " k " << k;
    }
  }
}

TEST(FiscPm, FistaNameMapsToTheSameIteration) {
  const auto d = random_dense_lasso(10, 20, 0.1, 7);
  auto p = d.problem();
  const double s = 1.0 / p.lipschitz();
  const Vec x0 = Vec::Ones(20);
  Solver solver(solver_from_name("FISTA", LineSearchConfig::fixed(s)));
  solver.reset(x0);
  const auto ref = oracle::fista(d.a, d.b, d.lambda, x0, s, 30);
  for (int k = 1; k <= 30; ++k) {
    solver.step(p);
    ASSERT_LE((solver.x() - ref[static_cast<std::size_t>(k)]).norm(), 1e-12 * (1.0 + ref[k].norm()));
  }
}

TEST(FiscPm, FirstIterationIsProxGradientStep) {
  const auto d = random_dense_lasso(10, 16, 0.2, 3);
  for (double r : {3.0, 5.0}) {
    auto p = d.problem();
    const double s = 0.5 / p.lipschitz();
    const Vec x0 = Vec::LinSpaced(16, -1.0, 1.0);
    const auto ls = LineSearchConfig::fixed(s);
    auto st = two_point_init(x0, Schedule::fisc(r), ls);
    const auto rec = fisc_pm_step(p, st, ls);
    EXPECT_EQ(rec.reason, RestartReason::start);
    const Vec g = d.a.transpose() * (d.a * x0 - d.b);
    const Vec expect = prox_map(ProxSpec::l1(d.lambda), x0 - s * g, s);
    EXPECT_LE((st.x - expect).norm(), 1e-14 * (1.0 + expect.norm()));
    EXPECT_EQ(st.x_prev, x0);
  }
}

TEST(FiscPm, SmoothCaseMatchesScriptedFiscNs) {
  // FISC-ns written out: y = x + (1 - beta) dx - gamma (|dx| / |g|) g, x+ = y - s grad(y)
  const auto qd = random_quad(6, 0.05, 1.0, 11);
  for (double r : {3.0, 4.0, 6.0}) {
    auto p = CompositeProblem(std::make_unique<QuadraticOracle>(qd.oracle()), ProxSpec::none());
    const double s = 1.0;
    const auto ls = LineSearchConfig::fixed(s);
    const Vec x0 = Vec::Ones(6);
    auto st = two_point_init(x0, Schedule::fisc(r), ls);
    Vec x = x0;
    Vec xp = x0;
    long l = 1;
    for (int k = 0; k < 60; ++k) {
      const Vec g = qd.q * x - qd.b;
      Vec xn;
      if (k == 0) {
        xn = x - s * g;
      } else if (-g.dot(x - xp) < 0.0) {
        xn = x - s * g;
        l = 1;
      } else {
        const double denom = double(l) - 1.0 + r;
        const Vec dx = x - xp;
        const Vec y = x + ((double(l) - 1.0) / denom) * dx - ((r - 3.0) / denom) * (dx.norm() / g.norm()) * g;
        xn = y - s * (qd.q * y - qd.b);
        ++l;
      }
      xp = x;
      x = xn;
      fisc_ns_step(p, st, ls);
      ASSERT_LE((st.x - x).norm(), 1e-12 * (1.0 + x.norm())) << "r " << r << " k " << k;
    }
  }
}

TEST(FiscNs, RejectsNonsmoothProblem) {
  const auto d = random_dense_lasso(4, 6, 0.1, 1);
  auto p = d.problem();
  const auto ls = LineSearchConfig::fixed(0.1);
  auto st = two_point_init(Vec::Zero(6), Schedule::fisc(3), ls);
  EXPECT_THROW(fisc_ns_step(p, st, ls), Error);
}

TEST(FiscNs, RThreeWithRestartsMatchesNesterovRestart) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto qd = random_quad(12, 1e-3, 1.0, seed);
    auto p = CompositeProblem(std::make_unique<QuadraticOracle>(qd.oracle()), ProxSpec::none());
    const double s = 1.0;
    const Vec x0 = Vec::Constant(12, 3.0);
    const auto ref = oracle::nesterov_restart(qd.q, qd.b, x0, s, 300);
    ASSERT_FALSE(ref.restart_at.empty());
    const auto ls = LineSearchConfig::fixed(s);
    auto st = two_point_init(x0, Schedule::fisc(3), ls, true);
    std::vector<int> restarts;
    for (int k = 0; k < 300; ++k) {
      const auto rec = fisc_ns_step(p, st, ls);
      if (rec.reason == RestartReason::descent) restarts.push_back(k);
      const Vec& e = ref.xs[static_cast<std::size_t>(k + 1)];
      ASSERT_LE((st.x - e).norm(), 1e-10 * (1.0 + e.norm())) << "seed " << seed << " k " << k;
    }
    EXPECT_EQ(restarts, ref.restart_at);
  }
}

TEST(Nesterov, LibraryBaselineMatchesOracle) {
  const auto qd = random_quad(8, 1e-3, 1.0, 5);
  for (bool restarts : {false, true}) {
    auto p = CompositeProblem(std::make_unique<QuadraticOracle>(qd.oracle()), ProxSpec::none());
    const Vec x0 = Vec::Ones(8);
    const auto ref = oracle::nesterov_restart(qd.q, qd.b, x0, 1.0, 200, restarts);
    auto st = nesterov_init(x0, restarts);
    for (int k = 0; k < 200; ++k) {
      nesterov_restart_step(p, st, 1.0);
      const Vec& e = ref.xs[static_cast<std::size_t>(k + 1)];
      ASSERT_LE((st.x - e).norm(), 1e-12 * (1.0 + e.norm()));
    }
    EXPECT_EQ(st.restarts, ref.restart_at.size());
  }
}

TEST(Nesterov, FirstStepIsGradientStep) {
  const auto qd = random_quad(4, 0.1, 1.0, 6);
  auto p = CompositeProblem(std::make_unique<QuadraticOracle>(qd.oracle()), ProxSpec::none());
  const Vec x0 = Vec::Ones(4);
  auto st = nesterov_init(x0);
  nesterov_restart_step(p, st, 0.5);
  EXPECT_LE((st.x - (x0 - 0.5 * (qd.q * x0 - qd.b))).norm(), 1e-15);
  EXPECT_EQ(st.y, st.x);  // coefficient (1 - 1)/(1 + 2) = 0
}

TEST(Nesterov, RestartsRemoveOscillation) {
  const auto qd = random_quad(10, 1e-3, 1.0, 7);
  const Vec xstar = qd.q.ldlt().solve(qd.b);
  auto run = [&](bool restarts) {
    auto p = CompositeProblem(std::make_unique<QuadraticOracle>(qd.oracle()), ProxSpec::none());
    auto st = nesterov_init(Vec::Constant(10, 2.0), restarts);
    QuadraticOracle q = qd.oracle();
    std::vector<double> f;
    for (int k = 0; k < 400; ++k) {
      nesterov_restart_step(p, st, 1.0);
      f.push_back(q.value(st.x));
    }
    return std::make_pair(f, st.restarts);
  };
  const auto [f_plain, r_plain] = run(false);
  const auto [f_rst, r_rst] = run(true);
  bool nonmonotone = false;
  for (std::size_t i = 1; i < f_plain.size(); ++i) nonmonotone = nonmonotone || f_plain[i] > f_plain[i - 1];
  EXPECT_TRUE(nonmonotone);
  EXPECT_EQ(r_plain, 0u);
  EXPECT_GT(r_rst, 0u);
  QuadraticOracle q = qd.oracle();
  EXPECT_LT(f_rst.back() - q.value(xstar), f_plain.back() - q.value(xstar));
}

TEST(RateBound, RateBoundHoldsWithoutRestarts) {
  // f = 0.5 L x^2
  for (double r : {3.0, 5.0, 8.0}) {
    const double L = 4.0;
    auto p = CompositeProblem(std::make_unique<QuadraticOracle>(Mat::Constant(1, 1, L), Vec::Zero(1)),
                              ProxSpec::none());
    const double s = 1.0 / L;
    const Vec x0 = Vec::Constant(1, 3.0);
    const double f0 = 0.5 * L * 9.0;
    const double c0 = 2.0 * 9.0 + 2.0 * (r - 3.0) * s * f0;
    const auto ls = LineSearchConfig::fixed(s);
    auto st = two_point_init(x0, Schedule::fisc(r), ls, false);
    for (int k = 1; k <= 200; ++k) {
      fisc_pm_step(p, st, ls);
      if (st.converged) break;
      const double gap = 0.5 * L * st.x.squaredNorm();
      const double bound = (r - 1.0) * c0 / (2.0 * (k + r - 2.0) * (k + r - 2.0) * s);
      ASSERT_LE(gap, bound) << "r " << r << " k " << k;
    }
  }
  // random Lasso with the enumerated minimizer
  const auto d = random_dense_lasso(6, 9, 0.1, 4);
  const auto sol = oracle::lasso_enumerate(d.a, d.b, d.lambda);
  for (double r : {3.0, 5.0}) {
    auto p = d.problem();
    const double s = 1.0 / p.lipschitz();
    const Vec x0 = Vec::Ones(9);
    const double f0 = p.value(x0);
    const double c0 = 2.0 * (x0 - sol.x).squaredNorm() + 2.0 * (r - 3.0) * s * (f0 - sol.f);
    const auto ls = LineSearchConfig::fixed(s);
    auto st = two_point_init(x0, Schedule::fisc(r), ls, false);
    for (int k = 1; k <= 300; ++k) {
      fisc_pm_step(p, st, ls);
      const double gap = p.value(st.x) - sol.f;
      const double bound = (r - 1.0) * c0 / (2.0 * (k + r - 2.0) * (k + r - 2.0) * s);
      ASSERT_LE(gap, bound + 1e-12) << "r " << r << " k " << k;
    }
  }
}

TEST(FiscPg, SmoothCaseIsSdcStep) {
  const auto qd = random_quad(7, 0.01, 1.0, 8);
  const auto ls = LineSearchConfig::nonmonotone(1.0);
  auto p1 = CompositeProblem(std::make_unique<QuadraticOracle>(qd.oracle()), ProxSpec::none());
  auto p2 = CompositeProblem(std::make_unique<QuadraticOracle>(qd.oracle()), ProxSpec::none());
  auto a = sdc_init(Vec::Ones(7), Schedule::fisc(5), ls);
  Solver b(solver_from_name("FS-PG(5)", ls));
  b.reset(Vec::Ones(7));
  for (int k = 0; k < 80 && !a.converged; ++k) {
    sdc_step(p1, a, ls);
    b.step(p2);
    ASSERT_EQ(a.x, b.x()) << k;
  }
  // a zero-weight l1 term only changes rounding
  auto p3 = CompositeProblem(std::make_unique<QuadraticOracle>(qd.oracle()), ProxSpec::l1(0.0));
  auto c = sdc_init(Vec::Ones(7), Schedule::fisc(5), ls);
  auto d = sdc_init(Vec::Ones(7), Schedule::fisc(5), ls);
  auto p4 = CompositeProblem(std::make_unique<QuadraticOracle>(qd.oracle()), ProxSpec::none());
  for (int k = 0; k < 10; ++k) {
    fisc_pg_step(p3, c, ls);
    sdc_step(p4, d, ls);
    ASSERT_LE((c.x - d.x).norm(), 1e-10 * (1.0 + d.x.norm())) << k;
  }
}

TEST(FiscPg, FirstIterationIsProxGradientStep) {
  const auto d = random_dense_lasso(10, 16, 0.2, 9);
  auto p = d.problem();
  const double s = 0.5 / p.lipschitz();
  const auto ls = LineSearchConfig::fixed(s);
  const Vec x0 = Vec::LinSpaced(16, -2.0, 1.0);
  auto st = sdc_init(x0, Schedule::fisc(5), ls);
  fisc_pg_step(p, st, ls);
  const Vec g = d.a.transpose() * (d.a * x0 - d.b);
  const Vec expect = prox_map(ProxSpec::l1(d.lambda), x0 - s * g, s);
  EXPECT_LE((st.x - expect).norm(), 1e-14 * (1.0 + expect.norm()));
}

TEST(FiscPg, SmallLassoReachesEnumeratedMinimizer) {
  const auto d = random_dense_lasso(8, 12, 0.1, 10);
  const auto sol = oracle::lasso_enumerate(d.a, d.b, d.lambda);
  for (const char* name : {"FS-PG(5)", "F-PG", "FS-PM(5)", "F-PM"}) {
    auto p = d.problem();
    const double L = p.lipschitz();
    Solver solver(solver_from_name(name, LineSearchConfig::nonmonotone(1.0)));
    StopRule stop;
    stop.grad_tol = 1e-10;
    stop.max_iter = 20000;
    const auto res = solve(p, solver, Vec::Zero(12), stop);
    EXPECT_TRUE(res.converged) << name;
    EXPECT_LE(res.records.back().scaled_grad_norm, 1e-10) << name;
    // strong convexity on the support is not guaranteed, so compare through ||x - x*|| loosely
    EXPECT_LE((res.x - sol.x).norm(), 1e-8 * std::max(1.0, L)) << name;
    EXPECT_LE(p.value(res.x) - sol.f, 1e-12 * std::max(1.0, std::abs(sol.f))) << name;
  }
}

TEST(HeavyBall, ZeroMomentumIsGradientDescent) {
  const auto qd = random_quad(5, 0.1, 1.0, 12);
  auto p = CompositeProblem(std::make_unique<QuadraticOracle>(qd.oracle()), ProxSpec::none());
  auto st = sdc_init(Vec::Ones(5), Schedule::fire(), LineSearchConfig::fixed(0.5), std::nullopt, false);
  Vec x = Vec::Ones(5);
  for (int k = 0; k < 20; ++k) {
    heavy_ball_step(p, st, 0.0, 0.5);
    x -= 0.5 * (qd.q * x - qd.b);
    ASSERT_LE((st.x - x).norm(), 1e-14);
  }
}

TEST(HeavyBall, ScalarRecurrence) {
  auto p = smooth_problem<QuadraticOracle>(QuadraticOracle::identity(1));
  auto st = sdc_init(Vec::Constant(1, 1.0), Schedule::fire(), LineSearchConfig::fixed(0.1), std::nullopt, false);
  double x = 1.0;
  double u = 0.0;
  for (int k = 0; k < 10; ++k) {
    heavy_ball_step(p, st, 0.9, 0.1);
    u = 0.9 * u - x;
    x = x + 0.1 * u;
    ASSERT_NEAR(st.x(0), x, 1e-15) << k;
  }
}

TEST(HeavyBall, EqualsVelocityUpdateWithGammaZero) {
  std::mt19937_64 rng(13);
  const Vec u = randn(4, rng);
  const Vec g = randn(4, rng);
  const double bhb = 0.7;
  EXPECT_LE((velocity_update_beta(u, g, 1.0 - bhb, 0.0) - (bhb * u - g)).norm(), 1e-15);
  EXPECT_THROW(
      {
        auto p = smooth_problem<QuadraticOracle>(QuadraticOracle::identity(1));
        auto st = sdc_init(Vec::Ones(1), Schedule::fire(), LineSearchConfig::fixed(0.1));
        heavy_ball_step(p, st, 1.0, 0.1);
      },
      Error);
}

TEST(Solver, NamesResolve) {
  const auto ls = LineSearchConfig::nonmonotone(1.0);
  EXPECT_EQ(solver_from_name("F-PG", ls).kind, SolverKind::sdc_pg);
  EXPECT_EQ(solver_from_name("FS-PG(5)", ls).schedule.r(), 5.0);
  EXPECT_EQ(solver_from_name("FS-PM(7)", ls).kind, SolverKind::sdc_pm);
  EXPECT_EQ(solver_from_name("FS-PG", ls).schedule.r(), 5.0);
  EXPECT_FALSE(solver_from_name("FISTA", ls).restarts);
  EXPECT_EQ(solver_from_name("NAG-restart", ls).kind, SolverKind::nesterov_restart);
  EXPECT_EQ(solver_from_name("HB", ls).kind, SolverKind::heavy_ball);
  EXPECT_THROW(solver_from_name("FS-PG(2)", ls), Error);
  EXPECT_THROW(solver_from_name("FS-PGx", ls), Error);
  EXPECT_THROW(solver_from_name("CG", ls), Error);
}

TEST(Solver, LineSearchVariantsConvergeOnDctLasso) {
  const auto inst = lasso_generate(1024, 128, 25, 40.0, 0.1, 3, 8e-3);
  for (const char* name : {"F-PG", "FS-PG(5)", "F-PM", "FS-PM(3)", "PG"}) {
    auto p = lasso_problem(inst);
    Solver solver(solver_from_name(name, LineSearchConfig::nonmonotone(1.0)));
    StopRule stop;
    stop.grad_tol = 1e-8;
    stop.max_iter = 20000;
    const auto res = solve(p, solver, Vec::Zero(inst.n), stop);
    EXPECT_TRUE(res.converged) << name;
    // records are consistent: n_A never decreases, k counts up
    for (std::size_t i = 1; i < res.records.size(); ++i) {
      EXPECT_GE(res.records[i].n_A, res.records[i - 1].n_A);
      EXPECT_EQ(res.records[i].k, i);
    }
  }
}

TEST(Solver, RunsAreReproducible) {
  const auto inst = lasso_generate(512, 64, 12, 40.0, 0.1, 4, 8e-3);
  for (const char* name : {"FS-PG(5)", "FS-PM(5)"}) {
    auto p1 = lasso_problem(inst);
    auto p2 = lasso_problem(inst);
    Solver s1(solver_from_name(name, LineSearchConfig::nonmonotone(1.0)));
    Solver s2(solver_from_name(name, LineSearchConfig::nonmonotone(1.0)));
    StopRule stop;
    stop.grad_tol = 1e-8;
    const auto a = solve(p1, s1, Vec::Zero(inst.n), stop);
    const auto b = solve(p2, s2, Vec::Zero(inst.n), stop);
    EXPECT_TRUE(same_records(a.records, b.records)) << name;
    EXPECT_EQ(a.x, b.x);
  }
}

#include "oracles.hpp"

#include "sdc/linesearch.hpp"
#include "sdc/problems.hpp"
#include "sdc/prox.hpp"

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

// Small dense Lasso: 0.5 ||A x - b||^2 + lambda ||x||_1.
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

}  // namespace

// --------------------------------------------------------------------- prox

TEST(Prox, L1Example) {
  Vec x(3);
  x << 2.0, -0.5, 0.0;
  const Vec p = prox_map(ProxSpec::l1(1.0), x, 1.0);
  EXPECT_EQ(p, Vec((Vec(3) << 1.0, 0.0, 0.0).finished()));
}

TEST(Prox, IdentityCases) {
  std::mt19937_64 rng(1);
  const Vec x = randn(7, rng);
  for (double s : {1e-3, 1.0, 1e3}) {
    EXPECT_EQ(prox_map(ProxSpec::none(), x, s), x);
    EXPECT_EQ(prox_map(ProxSpec::l1(0.0), x, s), x);
    EXPECT_EQ(prox_map(ProxSpec::squared_l2(0.0), x, s), x);
  }
}

TEST(Prox, RejectsNonPositiveStep) {
  const Vec x = Vec::Ones(2);
  for (double s : {0.0, -1.0}) {
    try {
      prox_map(ProxSpec::l1(1.0), x, s);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::invalid_step);
    }
  }
  EXPECT_THROW(ProxSpec::l1(-1.0), Error);
}

TEST(Prox, MatchesTernarySearchPerCoordinate) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> unif(0.01, 2.0);
  for (int t = 0; t < 20; ++t) {
    const Vec x = randn(6, rng, 2.0);
    const double lambda = unif(rng);
    const double s = unif(rng);
    const Vec p1 = prox_map(ProxSpec::l1(lambda), x, s);
    const Vec p2 = prox_map(ProxSpec::squared_l2(lambda), x, s);
    for (Index i = 0; i < x.size(); ++i) {
      const double xi = x(i);
      // phi(a) - phi(b) = (a - b)(a + b - 2 x) / (2 s) + h(a) - h(b)
      const double z1 = oracle::ternary_min_diff(
          [&](double a, double b) {
            return (a - b) * (a + b - 2.0 * xi) / (2.0 * s) + lambda * (std::abs(a) - std::abs(b));
          },
          -10.0, 10.0);
      const double z2 = oracle::ternary_min_diff(
          [&](double a, double b) { return (a - b) * ((a + b - 2.0 * xi) / (2.0 * s) + lambda * (a + b)); },
          -10.0, 10.0);
      EXPECT_NEAR(p1(i), z1, 1e-8);
      EXPECT_NEAR(p2(i), z2, 1e-8);
    }
  }
}

TEST(Prox, NonExpansive) {
  std::mt19937_64 rng(3);
  for (auto h : {ProxSpec::l1(0.7), ProxSpec::squared_l2(0.7), ProxSpec::none()}) {
    for (int t = 0; t < 50; ++t) {
      const Vec x = randn(5, rng);
      const Vec y = randn(5, rng);
      EXPECT_LE((prox_map(h, x, 0.8) - prox_map(h, y, 0.8)).norm(), (x - y).norm() * (1.0 + 1e-15));
    }
  }
}

TEST(ProxGrad, EqualsGradientWithoutH) {
  std::mt19937_64 rng(4);
  auto p = smooth_problem<RosenbrockOracle>(Index{4});
  RosenbrockOracle ref(4);
  for (double s : {1e-4, 0.3, 7.0}) {
    const Vec x = randn(4, rng);
    EXPECT_EQ(prox_grad(p, x, s), ref.gradient(x));
  }
}

TEST(ProxGrad, ScalarExample) {
  auto p = CompositeProblem(std::make_unique<QuadraticOracle>(QuadraticOracle::identity(1)), ProxSpec::l1(0.5));
  const Vec x = Vec::Constant(1, 2.0);
  EXPECT_EQ(prox_grad(p, x, 1.0)(0), 2.0);
  EXPECT_THROW(prox_grad(p, x, 0.0), Error);
}

TEST(ProxGrad, VanishesAtEnumeratedLassoMinimizer) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto d = random_dense_lasso(8, 10, 0.2, seed);
    const auto sol = oracle::lasso_enumerate(d.a, d.b, d.lambda);
    auto p = d.problem();
    const double L = p.lipschitz();
    for (double s : {1.0 / L, 0.5 / L}) {
      EXPECT_LE(prox_grad(p, sol.x, s).norm(), 1e-8) << "seed " << seed;
    }
  }
}

TEST(ProxGrad, FixedPointCharacterization) {
  // f = 0.5 ||x - c||^2 + lambda ||x||_1 is minimized by soft-thresholding c.
  std::mt19937_64 rng(5);
  const Vec c = randn(6, rng, 2.0);
  const double lambda = 0.8;
  const Vec xstar = prox_map(ProxSpec::l1(lambda), c, 1.0);
  auto p = CompositeProblem(std::make_unique<QuadraticOracle>(Mat::Identity(6, 6), c), ProxSpec::l1(lambda));
  for (double s : {0.3, 1.0}) {
    EXPECT_LE(prox_grad(p, xstar, s).norm(), 1e-15);
    for (int t = 0; t < 10; ++t) {
      const Vec y = xstar + randn(6, rng, 0.1);
      EXPECT_GT(prox_grad(p, y, s).norm(), 0.0);
    }
  }
}

TEST(ProxGrad, BasicInequality) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto d = random_dense_lasso(6, 9, 0.3, seed);
    auto p = d.problem();
    const double L = p.lipschitz();
    std::mt19937_64 rng(seed + 100);
    for (int t = 0; t < 20; ++t) {
      const Vec x = randn(9, rng);
      const Vec y = randn(9, rng);
      for (double s : {1.0 / L, 0.5 / L}) {
        const Vec G = prox_grad(p, y, s);
        const double lhs = p.value(Vec(y - s * G));
        const double rhs = p.value(x) + G.dot(y - x) - 0.5 * s * G.squaredNorm();
        EXPECT_LE(lhs, rhs + 1e-12 * (1.0 + std::abs(rhs)));
      }
    }
  }
}

// --------------------------------------------------------------- linesearch

namespace {
double half_sq(const Vec& x) { return 0.5 * x.squaredNorm(); }
}  // namespace

TEST(Armijo, AcceptsFullStepOnUnitQuadratic) {
  const Vec x = Vec::Constant(1, 1.0);
  const Vec g = x;
  const Vec u = -g;
  const auto res = armijo_search(half_sq, x, half_sq(x), u, g, 1.0, LineSearchConfig::armijo(1.0));
  ASSERT_TRUE(res.ok);
  EXPECT_EQ(res.step, 1.0);
  EXPECT_EQ(res.n_evals, 1);
  EXPECT_EQ(res.f_new, 0.0);
}

TEST(Armijo, TinyTrialStepAccepted) {
  const Vec x = Vec::Constant(3, 1.0);
  const auto res = armijo_search(half_sq, x, half_sq(x), Vec(-x), x, 1e-8, LineSearchConfig::armijo(1.0));
  ASSERT_TRUE(res.ok);
  EXPECT_EQ(res.step, 1e-8);
}

TEST(Armijo, BacktracksOnLongStep) {
  const double L = 4.0;
  auto f = [&](const Vec& z) { return 0.5 * L * z.squaredNorm(); };
  const Vec x = Vec::Constant(1, 1.0);
  const Vec g = L * x;
  const auto res = armijo_search(f, x, f(x), Vec(-g), g, 10.0 / L, LineSearchConfig::armijo(1.0));
  ASSERT_TRUE(res.ok);
  EXPECT_GT(res.n_evals, 1);
  EXPECT_LT(res.step, 10.0 / L);
}

TEST(Armijo, ReturnsSmallestAcceptableExponent) {
  // brute-force oracle: scan h = 0, 1, ... with the inequality written out
  RosenbrockOracle r(3);
  auto f = [&](const Vec& z) { return r.value(z); };
  std::mt19937_64 rng(6);
  auto cfg = LineSearchConfig::armijo(1.0, 1e-4, 0.5);
  cfg.f_rel_tol = 0.0;
  for (int t = 0; t < 30; ++t) {
    const Vec x = randn(3, rng);
    const Vec g = r.gradient(x);
    const Vec u = -g;
    const double fx = f(x);
    const auto res = armijo_search(f, x, fx, u, g, 1.0, cfg);
    ASSERT_TRUE(res.ok);
    int h = 0;
    double s = 1.0;
    while (!(f(Vec(x + s * u)) <= fx - cfg.sigma * s * (-u.dot(g)))) {
      s *= 0.5;
      ++h;
    }
    EXPECT_EQ(res.step, s);
    EXPECT_EQ(res.n_evals, h + 1);
    EXPECT_LE(res.f_new, fx - cfg.sigma * res.step * (-u.dot(g)));
  }
}

TEST(Armijo, RejectsAscentDirection) {
  const Vec x = Vec::Constant(2, 1.0);
  try {
    armijo_search(half_sq, x, half_sq(x), x, x, 1.0, LineSearchConfig::armijo(1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_input);
  }
}

TEST(Armijo, ExhaustionSignalsFailure) {
  auto cfg = LineSearchConfig::armijo(1.0);
  cfg.max_backtracks = 3;
  // f jumps up away from x: no step of the tried sizes is acceptable
  auto f = [](const Vec& z) { return z(0) == 1.0 ? 0.0 : 1.0; };
  const Vec x = Vec::Constant(1, 1.0);
  const auto res = armijo_search(f, x, 0.0, Vec::Constant(1, -1.0), Vec::Constant(1, 1.0), 1.0, cfg);
  EXPECT_FALSE(res.ok);
  EXPECT_EQ(res.n_evals, 4);
}

TEST(Nonmonotone, UpdateArithmetic) {
  NonmonotoneState s{10.0, 1.0};
  s.update(1.0, 6.0);
  EXPECT_EQ(s.Q, 2.0);
  EXPECT_EQ(s.C, 8.0);
  NonmonotoneState t{10.0, 1.0};
  t.update(0.85, 6.0);
  EXPECT_DOUBLE_EQ(t.Q, 1.85);
  EXPECT_NEAR(t.C, 14.5 / 1.85, 1e-14);
  EXPECT_NEAR(t.C, 7.8378, 1e-4);
  NonmonotoneState z{10.0, 1.0};
  z.update(0.0, 6.0);
  EXPECT_EQ(z.C, 6.0);
  EXPECT_EQ(z.Q, 1.0);
}

TEST(Nonmonotone, ReferenceIsConvexCombinationOfHistory) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(-5.0, 5.0);
  for (double eta : {0.0, 0.5, 0.85, 1.0}) {
    std::vector<double> fs{unif(rng)};
    std::vector<double> w{1.0};
    auto st = NonmonotoneState::start(fs[0]);
    for (int k = 0; k < 40; ++k) {
      const double fn = unif(rng);
      const double q_old = st.Q;
      st.update(eta, fn);
      for (double& wi : w) wi *= eta * q_old / st.Q;
      w.push_back(1.0 / st.Q);
      fs.push_back(fn);
      double sum = 0.0;
      double comb = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        EXPECT_GE(w[i], 0.0);
        sum += w[i];
        comb += w[i] * fs[i];
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
      EXPECT_NEAR(comb, st.C, 1e-10);
      EXPECT_GE(st.Q, 1.0);
    }
  }
}

TEST(Nonmonotone, AcceptedStepSatisfiesInequalityAndUpdatesState) {
  std::mt19937_64 rng(8);
  auto q = QuadraticOracle::random(5, 0.1, 50.0, rng);
  auto f = [&](const Vec& z) { return q.value(z); };
  const auto cfg = LineSearchConfig::nonmonotone(1.0);
  Vec x = randn(5, rng);
  auto st = NonmonotoneState::start(f(x));
  for (int k = 0; k < 30; ++k) {
    const Vec g = q.gradient(x);
    const Vec u = -g;
    const double c_before = st.C;
    const double q_before = st.Q;
    const auto res = nonmonotone_search(f, x, u, g, st, 10.0, cfg);
    ASSERT_TRUE(res.ok);
    EXPECT_LE(res.f_new, cfg.threshold(c_before, 0.5 * res.step * u.dot(-g)));
    EXPECT_DOUBLE_EQ(st.Q, cfg.eta * q_before + 1.0);
    EXPECT_NEAR(st.C, (cfg.eta * q_before * c_before + res.f_new) / st.Q, 1e-12 * (1.0 + std::abs(st.C)));
    x += res.step * u;
  }
}

TEST(LineSearch, TerminatesWithinBudgetOnTestProblems) {
  std::mt19937_64 rng(9);
  auto q = QuadraticOracle::random(8, 1e-3, 1e3, rng);
  RosenbrockOracle r(6);
  const auto inst = lasso_generate(64, 16, 3, 40.0, 0.1, 1, 1e-2);
  LassoOracle lasso(inst);
  std::vector<SmoothOracle*> oracles{&q, &r, &lasso};
  for (SmoothOracle* o : oracles) {
    auto f = [&](const Vec& z) { return o->value(z); };
    for (int t = 0; t < 10; ++t) {
      const Vec x = randn(o->dim(), rng);
      const Vec g = o->gradient(x);
      auto st = NonmonotoneState::start(f(x));
      EXPECT_TRUE(nonmonotone_search(f, x, Vec(-g), g, st, 1e6, LineSearchConfig::nonmonotone(1.0)).ok);
      EXPECT_TRUE(armijo_search(f, x, f(x), Vec(-g), g, 1e6, LineSearchConfig::armijo(1.0)).ok);
    }
  }
}

TEST(LineSearch, ConfigValidation) {
  auto bad = [](auto mutate) {
    LineSearchConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), Error);
  };
  bad([](LineSearchConfig& c) { c.sigma = 0.0; });
  bad([](LineSearchConfig& c) { c.sigma = 1.0; });
  bad([](LineSearchConfig& c) { c.rho = 1.0; });
  bad([](LineSearchConfig& c) { c.eta = 1.5; });
  bad([](LineSearchConfig& c) { c.initial_step = 0.0; });
  bad([](LineSearchConfig& c) { c.max_backtracks = -1; });
  EXPECT_NO_THROW(LineSearchConfig().validate());
}

TEST(Bb, ExactOnScalarQuadratic) {
  const double L = 7.0;
  const Vec x0 = Vec::Constant(1, 3.0);
  const Vec x1 = Vec::Constant(1, 1.0);
  EXPECT_DOUBLE_EQ(bb_trial_step(x0, x1, Vec(L * x0), Vec(L * x1)), 1.0 / L);
}

TEST(Bb, NonPositiveCurvatureGivesMaxStep) {
  Vec x0(2), x1(2), g0(2), g1(2);
  x0 << 0, 0;
  x1 << 1, 0;
  g0 << 0, 0;
  g1 << 0, 1;  // <dx, dg> = 0
  EXPECT_EQ(bb_trial_step(x0, x1, g0, g1, 1e-20, 1e20), 1e20);
  g1 << -1, 0;
  EXPECT_EQ(bb_trial_step(x0, x1, g0, g1, 1e-20, 5.0), 5.0);
}

TEST(Bb, WithinInverseSpectrumOfRandomQuadratic) {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 20; ++t) {
    auto q = QuadraticOracle::random(6, 0.05, 20.0, rng);
    Eigen::SelfAdjointEigenSolver<Mat> eig(q.hessian());
    const double lmin = eig.eigenvalues().minCoeff();
    const double lmax = eig.eigenvalues().maxCoeff();
    const Vec x0 = randn(6, rng);
    const Vec x1 = randn(6, rng);
    const double s = bb_trial_step(x0, x1, q.gradient(x0), q.gradient(x1));
    EXPECT_GE(s, (1.0 / lmax) * (1.0 - 1e-12));
    EXPECT_LE(s, (1.0 / lmin) * (1.0 + 1e-12));
  }
}

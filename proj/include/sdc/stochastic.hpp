#pragma once

#include "sdc/problems/oracle.hpp"
#include "sdc/sdc_core.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace sdc {

/// Uniform batches of distinct indices. Each draw is a partial Fisher-Yates
/// shuffle of a persistent permutation; the batch is returned sorted so a
/// full batch reproduces the full-gradient summation order.
class BatchSampler {
 public:
  BatchSampler(Index num_terms, Index batch_size, std::uint64_t seed)
      : n_(num_terms), b_(batch_size), rng_(seed), perm_(static_cast<std::size_t>(num_terms)) {
    if (num_terms < 1) throw Error(ErrorKind::invalid_input, "sampler needs N >= 1");
    if (batch_size < 1 || batch_size > num_terms) {
      throw Error(ErrorKind::invalid_input, "batch size must be in [1, N]");
    }
    std::iota(perm_.begin(), perm_.end(), Index{0});
    batch_.resize(static_cast<std::size_t>(b_));
  }

  Index num_terms() const { return n_; }
  Index batch_size() const { return b_; }

  std::span<const Index> next() {
    if (b_ == n_) {
      std::copy(perm_.begin(), perm_.end(), batch_.begin());
    } else {
      for (Index i = 0; i < b_; ++i) {
        std::uniform_int_distribution<Index> pick(i, n_ - 1);
        std::swap(perm_[static_cast<std::size_t>(i)], perm_[static_cast<std::size_t>(pick(rng_))]);
      }
      std::copy(perm_.begin(), perm_.begin() + b_, batch_.begin());
    }
    std::sort(batch_.begin(), batch_.end());
    return batch_;
  }

 private:
  Index n_;
  Index b_;
  std::mt19937_64 rng_;
  std::vector<Index> perm_;
  std::vector<Index> batch_;
};

/// (1/|T|) sum_{i in T} grad psi_i(x) over the next batch.
inline Vec minibatch_grad(FiniteSumOracle& oracle, const Vec& x, BatchSampler& sampler) {
  Vec out;
  oracle.batch_gradient(x, sampler.next(), out);
  return out;
}

/// Anchor x~ with its full gradient; refreshed every m iterations.
struct VrAnchor {
  Vec x_tilde;
  Vec full_grad;
  Index m = 20;
  Index age = 0;
  bool valid = false;

  void refresh(FiniteSumOracle& oracle, const Vec& x) {
    x_tilde = x;
    full_grad = oracle.gradient(x);
    age = 0;
    valid = true;
  }

  bool due() const { return !valid || age >= m; }
};

/// (1/|T|) sum_{i in T} (grad psi_i(x) - grad psi_i(x~)) + grad psi(x~) for a
/// given batch. At x = x~ the bracket vanishes exactly.
inline Vec svrg_grad(FiniteSumOracle& oracle, const Vec& x, const VrAnchor& anchor, std::span<const Index> batch) {
  if (!anchor.valid) throw Error(ErrorKind::invalid_input, "SVRG anchor not initialised");
  Vec gx;
  Vec gt;
  oracle.batch_gradient(x, batch, gx);
  oracle.batch_gradient(anchor.x_tilde, batch, gt);
  Vec out = gx - gt;
  out += anchor.full_grad;
  return out;
}

/// svrg_grad on the next batch; refreshes the anchor at x when its age hits m
/// and counts this use towards its age.
inline Vec svrg_grad(FiniteSumOracle& oracle, const Vec& x, VrAnchor& anchor, BatchSampler& sampler) {
  if (anchor.due()) anchor.refresh(oracle, x);
  ++anchor.age;
  return svrg_grad(oracle, x, anchor, sampler.next());
}

enum class StochasticOracleKind { plain, vr };

inline Vec stochastic_gradient(FiniteSumOracle& oracle, const Vec& x, StochasticOracleKind kind,
                               BatchSampler& sampler, VrAnchor* anchor) {
  if (kind == StochasticOracleKind::plain) return minibatch_grad(oracle, x, sampler);
  if (!anchor) throw Error(ErrorKind::invalid_input, "variance-reduced oracle needs an anchor");
  return svrg_grad(oracle, x, *anchor, sampler);
}

/// One stochastic SDC iteration with step s: G from the stochastic gradient,
/// restart test on that G, velocity update, x <- x + s u. Safeguards are not
/// used in stochastic mode.
inline IterationRecord stochastic_sdc_step(FiniteSumOracle& oracle, const ProxSpec& h, SdcState& st,
                                           StochasticOracleKind kind, double s, BatchSampler& sampler,
                                           VrAnchor* anchor = nullptr) {
  if (!(s > 0.0)) throw Error(ErrorKind::invalid_step, "step must be positive");
  if (st.safeguards) throw Error(ErrorKind::invalid_config, "safeguards are not used in stochastic runs");
  IterationRecord rec;
  rec.k = st.k;
  rec.step = s;
  const Vec g = stochastic_gradient(oracle, st.x, kind, sampler, anchor);
  const Vec G = prox_grad_from(h, st.x, g, s);
  const double gnorm = G.norm();
  rec.grad_norm = gnorm;
  rec.restarts = st.restarts;
  if (!(gnorm > 0.0)) {
    ++st.k;
    return rec;
  }
  auto dir = detail::sdc_direction(st, G, false);
  Vec x_next = st.x + s * dir.u_next;
  detail::sdc_commit(st, std::move(dir), gnorm, rec);
  st.x = std::move(x_next);
  st.have_grad = false;
  st.have_prev = false;
  return rec;
}

/// x <- prox_h^s(x - s g) with g the mini-batch gradient.
inline void prox_sgd_step(FiniteSumOracle& oracle, const ProxSpec& h, Vec& x, double s, BatchSampler& sampler) {
  const Vec g = minibatch_grad(oracle, x, sampler);
  x = prox_map(h, x - s * g, s);
}

/// x <- prox_h^s(x - s g) with g the SVRG estimator.
inline void prox_svrg_step(FiniteSumOracle& oracle, const ProxSpec& h, Vec& x, double s, BatchSampler& sampler,
                           VrAnchor& anchor) {
  const Vec g = svrg_grad(oracle, x, anchor, sampler);
  x = prox_map(h, x - s * g, s);
}

/// Momentum-SGD form: u~ = alpha u - g; if <u~, -g> >= 0 then
/// u' = (1 - beta) u~ - gamma (||u~|| / ||g||) g, else u' = -g. With
/// ||g|| <= eps_g the correction is skipped (u' = u~). Parameters then move by
/// x <- x + s u'.
inline Vec dl_sdc_update(const Vec& u, const Vec& g, double alpha, double beta, double gamma, double eps_g = 0.0,
                         bool* restarted = nullptr) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::invalid_config, "need 0 < alpha < 1");
  Vec ut = alpha * u - g;
  if (restarted) *restarted = false;
  const double gnorm = g.norm();
  if (gnorm <= eps_g) return ut;
  if (ut.dot(-g) >= 0.0) {
    const double c = gamma * ut.norm() / gnorm;
    return (1.0 - beta) * ut - c * g;
  }
  if (restarted) *restarted = true;
  return -g;
}

enum class StochasticMethod { sgd, prox_svrg, sdc, sdc_vr };

struct StochasticConfig {
  std::string name = "sFS-PG(5)";
  StochasticMethod method = StochasticMethod::sdc;
  Schedule schedule = Schedule::fisc(5.0);
  bool restarts = true;
  double step0 = 1.0;
  double decay = 0.85;       // step multiplier per epoch
  bool decay_steps = true;   // prox-SVRG keeps a constant step
  Index batch_size = 0;      // 0: max(1, floor(0.01 N))
  Index m = 0;               // 0: 200 for prox-SVRG, 20 for the SDC variant
  std::size_t epochs = 100;
  std::uint64_t seed = 1;

  Index resolved_batch(Index n_terms) const {
    if (batch_size > 0) return std::min(batch_size, n_terms);
    return std::max<Index>(1, n_terms / 100);
  }
  Index resolved_m() const {
    if (m > 0) return m;
    return method == StochasticMethod::prox_svrg ? 200 : 20;
  }
};

/// SGD, prox-SVRG, sF-PG, sFS-PG(r), sFVR-PG, sFSVR-PG(r).
inline StochasticConfig stochastic_from_name(const std::string& name, double step0, std::uint64_t seed = 1) {
  StochasticConfig c;
  c.name = name;
  c.step0 = step0;
  c.seed = seed;
  auto parse_r = [&](const std::string& prefix) -> std::optional<double> {
    if (name.rfind(prefix, 0) != 0) return std::nullopt;
    const std::string rest = name.substr(prefix.size());
    if (rest.empty()) return 5.0;
    if (rest.size() < 3 || rest.front() != '(' || rest.back() != ')') {
      throw Error(ErrorKind::invalid_config, "bad solver name " + name);
    }
    return std::stod(rest.substr(1, rest.size() - 2));
  };
  if (name == "SGD") {
    c.method = StochasticMethod::sgd;
  } else if (name == "prox-SVRG") {
    c.method = StochasticMethod::prox_svrg;
    c.decay_steps = false;
  } else if (name == "sF-PG") {
    c.method = StochasticMethod::sdc;
    c.schedule = Schedule::fire();
  } else if (name == "sFVR-PG") {
    c.method = StochasticMethod::sdc_vr;
    c.schedule = Schedule::fire();
  } else if (auto r = parse_r("sFSVR-PG")) {
    c.method = StochasticMethod::sdc_vr;
    c.schedule = Schedule::fisc(*r);
  } else if (auto r2 = parse_r("sFS-PG")) {
    c.method = StochasticMethod::sdc;
    c.schedule = Schedule::fisc(*r2);
  } else {
    throw Error(ErrorKind::invalid_config, "unknown stochastic solver " + name);
  }
  return c;
}

struct StochasticRun {
  Vec x;
  std::vector<IterationRecord> records;  // one per epoch, epoch 0 at x0
};

/// Runs `cfg.epochs` epochs of ceil(N / batch) iterations each. Composite
/// values for the records come from an uncounted clone of `oracle`.
inline StochasticRun run_stochastic(FiniteSumOracle& oracle, const ProxSpec& h, const Vec& x0,
                                    const StochasticConfig& cfg, std::optional<double> f_star = std::nullopt) {
  if (!(cfg.step0 > 0.0)) throw Error(ErrorKind::invalid_step, "initial step must be positive");
  if (!(cfg.decay > 0.0 && cfg.decay <= 1.0)) throw Error(ErrorKind::invalid_config, "need 0 < decay <= 1");
  const Index n_terms = oracle.num_terms();
  const Index batch = cfg.resolved_batch(n_terms);
  const Index per_epoch = (n_terms + batch - 1) / batch;
  BatchSampler sampler(n_terms, batch, cfg.seed);
  VrAnchor anchor;
  anchor.m = cfg.resolved_m();

  auto monitor = oracle.clone();
  StochasticRun out;
  std::int64_t wall = 0;
  Vec x = x0;
  SdcState st = sdc_init(x0, cfg.schedule, LineSearchConfig::fixed(cfg.step0), std::nullopt, cfg.restarts);
  double s = cfg.step0;
  std::size_t k = 0;

  auto record = [&](std::size_t epoch, const Vec& at) {
    IterationRecord rec;
    rec.k = k;
    rec.epoch = epoch;
    rec.f = monitor->value(at) + h.value(at);
    if (f_star) rec.rel_err = (rec.f - *f_star) / std::max(std::abs(*f_star), 1.0);
    rec.restarts = st.restarts;
    rec.step = s;
    rec.wall_ns = wall;
    out.records.push_back(rec);
  };
  record(0, x0);

  const bool sdc_like = cfg.method == StochasticMethod::sdc || cfg.method == StochasticMethod::sdc_vr;
  const auto kind = cfg.method == StochasticMethod::sdc_vr ? StochasticOracleKind::vr : StochasticOracleKind::plain;
  for (std::size_t e = 1; e <= cfg.epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    for (Index i = 0; i < per_epoch; ++i, ++k) {
      switch (cfg.method) {
        case StochasticMethod::sgd: prox_sgd_step(oracle, h, x, s, sampler); break;
        case StochasticMethod::prox_svrg: prox_svrg_step(oracle, h, x, s, sampler, anchor); break;
        case StochasticMethod::sdc:
        case StochasticMethod::sdc_vr: stochastic_sdc_step(oracle, h, st, kind, s, sampler, &anchor); break;
      }
    }
    if (cfg.decay_steps) s *= cfg.decay;
    wall += std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count();
    const Vec& cur = sdc_like ? st.x : x;
    if (!cur.allFinite()) throw Error(ErrorKind::divergence, cfg.name + ": non-finite iterate in epoch " + std::to_string(e));
    record(e, cur);
  }
  out.x = sdc_like ? st.x : x;
  return out;
}

}  // namespace sdc

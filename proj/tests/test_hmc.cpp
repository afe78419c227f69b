#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "test_util.hpp"
#include "tsclimb/diagnostics.hpp"
#include "tsclimb/hmc.hpp"

using namespace tsclimb;
using namespace tsclimb_test;

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

// Flat density whose value drops by log(2) away from the origin; gradients
// are zero, so every proposal has a Hamiltonian increase of exactly log(2).
class StepDensity final : public LogDensity {
 public:
  int dim() const override { return 1; }
  double logp_grad(const Vec& z, Vec& grad) const override {
    grad.assign(1, 0.0);
    return std::abs(z[0]) < 1e-12 ? 0.0 : -std::log(2.0);
  }
};

class ConstantDensity final : public LogDensity {
 public:
  int dim() const override { return 1; }
  double logp_grad(const Vec&, Vec& grad) const override {
    grad.assign(1, 0.0);
    return 0.0;
  }
};

// Finite only on |z| < 1; stepping outside diverges.
class BoundedDensity final : public LogDensity {
 public:
  int dim() const override { return 1; }
  double logp_grad(const Vec& z, Vec& grad) const override {
    if (std::abs(z[0]) >= 1.0) {
      grad.assign(1, 0.0);
      return -std::numeric_limits<double>::infinity();
    }
    grad.assign(1, -2.0 * z[0] / (1.0 - z[0] * z[0]));
    return std::log(1.0 - z[0] * z[0]);
  }
};

}  // namespace

TEST_CASE("warped density with the identity map equals the raw target exactly") {
  Funnel funnel;
  TransportMap id = TransportMap::identity(2);
  WarpedDensity warped(funnel, id);
  RawDensity raw(funnel);
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const Vec z = random_vec(rng, 2, 1.5);
    Vec g_w, g_r;
    const double v_w = warped.logp_grad(z, g_w);
    const double v_r = raw.logp_grad(z, g_r);
    CHECK(v_w == v_r);
    CHECK(g_w == g_r);
  }
}

TEST_CASE("affine warp matched to a diagonal gaussian yields a standard normal") {
  GaussianAnalytic target({1.0, -1.0}, {2.0, 0.5});
  TransportMap map = TransportMap::affine(2);
  map.set_params({1.0, -1.0, std::log(2.0), std::log(0.5)});
  WarpedDensity warped(target, map);

  Vec grad;
  const double v0 = warped.logp_grad({0.0, 0.0}, grad);
  CHECK(v0 == doctest::Approx(-kLog2Pi).epsilon(1e-12));
  CHECK(norm_inf(grad) == 0.0);

  Rng rng(9);
  for (int i = 0; i < 30; ++i) {
    const Vec z0 = random_vec(rng, 2);
    const double v = warped.logp_grad(z0, grad);
    CHECK(v == doctest::Approx(-kLog2Pi - 0.5 * dot(z0, z0)).epsilon(1e-12));
    for (int j = 0; j < 2; ++j) CHECK(grad[j] == doctest::Approx(-z0[j]).epsilon(1e-12));
  }
}

TEST_CASE("warped gradient matches finite differences on a realnvp-warped funnel") {
  Funnel funnel;
  Rng rng(41);
  TransportMap map = TransportMap::realnvp(2, 2, {8, 8}, 77);
  map.set_params(random_vec(rng, map.n_params(), 0.3));
  WarpedDensity warped(funnel, map);

  for (int i = 0; i < 100; ++i) {
    const Vec z0 = random_vec(rng, 2);
    Vec grad;
    warped.logp_grad(z0, grad);
    auto f = [&](const Vec& v) {
      Vec g;
      return warped.logp_grad(v, g);
    };
    CHECK(grad_mismatch(grad, finite_diff_grad(f, z0), 1e-4) < 1.0);
  }
}

TEST_CASE("leapfrog on a standard normal: hand-computed single step") {
  GaussianAnalytic target({0.0}, {1.0});
  RawDensity density(target);
  Vec z{0.0}, m{1.0};
  CHECK(leapfrog(density, z, m, 0.1, 1));
  CHECK(z[0] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(m[0] == doctest::Approx(0.995).epsilon(1e-15));
}

TEST_CASE("leapfrog is time reversible") {
  Funnel funnel;
  RawDensity density(funnel);
  Rng rng(17);
  for (int i = 0; i < 50; ++i) {
    const Vec z0 = random_vec(rng, 2);
    const Vec m0 = random_vec(rng, 2);
    Vec z = z0, m = m0;
    REQUIRE(leapfrog(density, z, m, 0.05, 8));
    for (auto& v : m) v = -v;
    REQUIRE(leapfrog(density, z, m, 0.05, 8));
    for (int j = 0; j < 2; ++j) {
      CHECK(std::abs(z[j] - z0[j]) < 1e-8);
      CHECK(std::abs(-m[j] - m0[j]) < 1e-8);
    }
  }
}

TEST_CASE("leapfrog energy drift stays small on a standard normal") {
  GaussianAnalytic target({0.0}, {1.0});
  RawDensity density(target);
  Vec z{1.0}, m{0.5}, grad;
  const double h0 = -density.logp_grad(z, grad) + 0.5 * m[0] * m[0];
  REQUIRE(leapfrog(density, z, m, 0.01, 100));
  const double h1 = -density.logp_grad(z, grad) + 0.5 * m[0] * m[0];
  CHECK(std::abs(h1 - h0) < 1e-3);
}

TEST_CASE("identical hamiltonian accepts with probability one") {
  ConstantDensity flat;
  ChainState state({0.0}, 0.3, 10, 123);
  for (int i = 0; i < 200; ++i) {
    const HmcOutcome out = hmc_step(flat, state);
    CHECK(out.accepted);
    CHECK(out.log_accept_ratio == 0.0);
  }
}

TEST_CASE("a log(2) energy increase accepts about half the time") {
  StepDensity density;
  ChainState state({0.0}, 0.3, 10, 2024);
  long accepted = 0;
  const long trials = 20000;
  for (long i = 0; i < trials; ++i) {
    state.z0 = {0.0};
    const HmcOutcome out = hmc_step(density, state);
    if (out.accepted) accepted += 1;
    CHECK(out.log_accept_ratio == doctest::Approx(-std::log(2.0)));
  }
  const double rate = static_cast<double>(accepted) / trials;
  CHECK(std::abs(rate - 0.5) < 3.0 * 0.5 / std::sqrt(static_cast<double>(trials)));
}

TEST_CASE("rejected steps keep the position and never touch map or target") {
  Funnel funnel;
  TransportMap map = TransportMap::affine(2);
  map.set_params({0.5, 0.2, 0.1, -0.3});
  const Vec params_before = map.params();
  WarpedDensity warped(funnel, map);
  ChainState state(Vec{0.0, 0.0}, 1.9, 3, 5);
  state.z0 = state.rng.normal_vec(2);
  long rejects = 0;
  for (int i = 0; i < 400; ++i) {
    const Vec before = state.z0;
    const HmcOutcome out = hmc_step(warped, state);
    if (!out.accepted) {
      rejects += 1;
      CHECK(std::memcmp(before.data(), state.z0.data(), sizeof(double) * 2) == 0);
    }
  }
  CHECK(rejects > 0);  // a 1.9 step size on the funnel must reject sometimes
  CHECK(map.params() == params_before);
}

TEST_CASE("divergent trajectories are rejected and shrink the step size") {
  BoundedDensity density;
  ChainState state({0.0}, 1.5, 5, 7);
  state.adapt_enabled = true;
  bool saw_divergence = false;
  for (int i = 0; i < 50 && !saw_divergence; ++i) {
    const Vec before = state.z0;
    const double s_before = state.step_size;
    const HmcOutcome out = hmc_advance(density, state, 0.67);
    if (out.divergent) {
      saw_divergence = true;
      CHECK_FALSE(out.accepted);
      CHECK(state.z0 == before);
      CHECK(state.step_size == doctest::Approx(0.9 * s_before).epsilon(1e-12));
    }
  }
  CHECK(saw_divergence);
}

TEST_CASE("step size adaptation follows the robbins-monro recursion") {
  ChainState state({0.0}, 0.1, 50, 1);
  adapt_step_size(state, true, 0.67);
  CHECK(state.step_size == doctest::Approx(0.1 * std::exp(0.05 * 0.33)).epsilon(1e-12));

  // ceil(1/s) capped by l_max
  state.step_size = 0.3;
  state.n_leapfrog = leapfrog_count(state.step_size, state.l_max);
  CHECK(state.n_leapfrog == 4);
  CHECK(leapfrog_count(0.005, 50) == 50);
  CHECK(leapfrog_count(1.7, 50) == 1);

  // alternating accept/reject at target 0.5: log s drifts toward nothing
  ChainState alt({0.0}, 0.2, 50, 2);
  for (int k = 0; k < 2000; ++k) adapt_step_size(alt, k % 2 == 0, 0.5);
  CHECK(std::abs(std::log(alt.step_size / 0.2)) < 0.05);

  // clamping
  ChainState lo({0.0}, 1e-4, 50, 3);
  for (int k = 0; k < 200; ++k) adapt_step_size(lo, false, 0.99);
  CHECK(lo.step_size >= ChainState::kStepMin);
  ChainState hi({0.0}, 2.0, 50, 4);
  for (int k = 0; k < 200; ++k) adapt_step_size(hi, true, 0.01);
  CHECK(hi.step_size <= ChainState::kStepMax);
}

TEST_CASE("identity-map warped chain is bitwise identical to the plain chain") {
  Funnel funnel;
  TransportMap id = TransportMap::identity(2);
  WarpedDensity warped(funnel, id);
  RawDensity raw(funnel);

  ChainState sa(Vec{0.0, 0.0}, 0.1, 50, 99);
  ChainState sb(Vec{0.0, 0.0}, 0.1, 50, 99);
  sa.z0 = sa.rng.normal_vec(2);
  sb.z0 = sb.rng.normal_vec(2);

  for (int i = 0; i < 2000; ++i) {
    const HmcOutcome oa = hmc_advance(warped, sa, 0.67);
    const HmcOutcome ob = hmc_advance(raw, sb, 0.67);
    REQUIRE(oa.accepted == ob.accepted);
    REQUIRE(std::memcmp(sa.z0.data(), sb.z0.data(), sizeof(double) * 2) == 0);
    REQUIRE(sa.step_size == sb.step_size);
  }
}

TEST_CASE("long-run chain moments and adapted acceptance on a standard normal") {
  GaussianAnalytic target({0.0, 0.0}, {1.0, 1.0});
  RawDensity density(target);
  ChainState state(Vec{0.0, 0.0}, 0.5, 50, 31415);
  state.z0 = state.rng.normal_vec(2);

  const long n = 100000;
  Chain chain(Vec{}, 2);
  long accepted = 0;
  for (long i = 0; i < n; ++i) {
    const HmcOutcome out = hmc_advance(density, state, 0.67);
    if (out.accepted) accepted += 1;
    chain.push(state.z0);
  }
  const double rate = static_cast<double>(accepted) / static_cast<double>(n);
  CHECK(std::abs(rate - 0.67) < 0.05);

  const SummaryStats stats = moments(chain);
  for (int j = 0; j < 2; ++j) {
    const double e = ess(chain, j);
    const double mc_err = stats.stddev[j] / std::sqrt(e);
    CHECK(std::abs(stats.mean[j]) < 3.0 * mc_err);
    CHECK(std::abs(stats.stddev[j] * stats.stddev[j] - 1.0) < 0.05);
  }
}

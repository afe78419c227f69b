#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "tsclimb/targets.hpp"

using namespace tsclimb;
using namespace tsclimb_test;

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

// Independent sampling oracle: random-walk Metropolis, no shared code with
// the HMC kernel under test elsewhere.
Vec rwm_posterior_mean(const TargetModel& target, double proposal_std, long n_steps, uint64_t seed) {
  Rng rng(seed);
  Vec z(static_cast<size_t>(target.dim()), 0.0);
  double logp = target.log_joint(z);
  Vec mean(z.size(), 0.0);
  long kept = 0;
  for (long k = 0; k < n_steps; ++k) {
    Vec prop = z;
    for (auto& v : prop) v += proposal_std * rng.normal();
    const double lp = target.log_joint(prop);
    if (std::log(rng.uniform() + 1e-300) < lp - logp) {
      z = prop;
      logp = lp;
    }
    if (k >= n_steps / 5) {
      for (size_t i = 0; i < z.size(); ++i) mean[i] += z[i];
      kept += 1;
    }
  }
  for (auto& v : mean) v /= static_cast<double>(kept);
  return mean;
}

double grid_integral(const TargetModel& t, double lo0, double hi0, double lo1, double hi1, int n0, int n1) {
  const double s0 = (hi0 - lo0) / n0;
  const double s1 = (hi1 - lo1) / n1;
  double integral = 0.0;
  Vec z(2);
  for (int i = 0; i < n0; ++i) {
    z[0] = lo0 + (i + 0.5) * s0;
    for (int j = 0; j < n1; ++j) {
      z[1] = lo1 + (j + 0.5) * s1;
      integral += std::exp(t.log_joint(z)) * s0 * s1;
    }
  }
  return integral;
}

}  // namespace

TEST_CASE("funnel log joint and gradient at the origin") {
  Funnel f(1.0);
  CHECK(f.log_joint({0.0, 0.0}) == doctest::Approx(-kLog2Pi).epsilon(1e-12));
  const Vec g = f.grad_z({0.0, 0.0});
  CHECK(g[0] == doctest::Approx(0.0));   // d/d z_obs
  CHECK(g[1] == doctest::Approx(-1.0));  // d/d z_scale
}

TEST_CASE("banana log joint at the origin matches the hand evaluation") {
  Banana b;
  CHECK(b.log_joint({0.0, 0.0}) == doctest::Approx(-6.140462159403391).epsilon(1e-10));
}

TEST_CASE("gaussian log joint is the normalized density at the mean") {
  GaussianAnalytic g({1.0, -1.0}, {2.0, 0.5});
  const double expected = -kLog2Pi - 0.5 * std::log(4.0 * 0.25);
  CHECK(g.log_joint({1.0, -1.0}) == doctest::Approx(expected).epsilon(1e-12));
  const Vec grad = g.grad_z({1.0, -1.0});
  CHECK(norm_inf(grad) == 0.0);
}

TEST_CASE("target gradients match finite differences") {
  Rng rng(515);
  Funnel funnel;
  Banana banana;
  GaussianAnalytic gauss({0.5, -2.0, 1.0}, {1.0, 2.0, 0.3});
  ConjugateGaussian conj({0.4, 1.2, -0.3, 2.2}, 0.7);
  Rng data_rng(99);
  const MultilevelData data = synth_multilevel(data_rng, 3, 60, 1.0, 0.5);
  auto ml = make_multilevel_target(data);
  ml->set_theta({0.3, -0.2});

  const std::vector<const TargetModel*> targets{&funnel, &banana, &gauss, &conj, ml.get()};
  for (const TargetModel* t : targets) {
    for (int trial = 0; trial < 25; ++trial) {
      const Vec z = random_vec(rng, t->dim(), 1.2);
      auto f = [&](const Vec& zv) { return t->log_joint(zv); };
      CHECK(grad_mismatch(t->grad_z(z), finite_diff_grad(f, z), 1e-5) < 1.0);

      if (t->theta_dim() > 0) {
        auto probe = t->clone();
        auto f_th = [&](const Vec& th) {
          probe->set_theta(th);
          return probe->log_joint(z);
        };
        CHECK(grad_mismatch(t->grad_theta(z), finite_diff_grad(f_th, t->theta()), 1e-5) < 1.0);
      } else {
        CHECK(t->grad_theta(z).empty());
      }
    }
  }
}

TEST_CASE("exact sampling moments match analytic values") {
  Rng rng(1234);
  Banana banana;
  {
    const long n = 10000000;
    double s1 = 0.0, s2 = 0.0, q1 = 0.0, q2 = 0.0;
    for (long i = 0; i < n; ++i) {
      const Vec z = banana.exact_sample(rng);
      s1 += z[0];
      s2 += z[1];
      q1 += z[0] * z[0];
      q2 += z[1] * z[1];
    }
    const double std1 = std::sqrt(q1 / n - (s1 / n) * (s1 / n));
    const double std2 = std::sqrt(q2 / n - (s2 / n) * (s2 / n));
    CHECK(std::abs(std1 - 10.0) / 10.0 < 0.005);
    CHECK(std::abs(std2 - 3.0) / 3.0 < 0.005);
  }
  Funnel funnel;
  {
    const long n = 1000000;
    double s_obs = 0.0, s_scale = 0.0, q_obs = 0.0, q_scale = 0.0;
    for (long i = 0; i < n; ++i) {
      const Vec z = funnel.exact_sample(rng);
      s_obs += z[0];
      s_scale += z[1];
      q_obs += z[0] * z[0];
      q_scale += z[1] * z[1];
    }
    const double std_obs = std::sqrt(q_obs / n - (s_obs / n) * (s_obs / n));
    const double std_scale = std::sqrt(q_scale / n - (s_scale / n) * (s_scale / n));
    CHECK(std::abs(std_scale - 1.0) < 0.01);
    CHECK(std::abs(std_obs - std::exp(1.0)) / std::exp(1.0) < 0.01);
  }
}

TEST_CASE("funnel, banana and gaussian densities integrate to one") {
  Funnel funnel;
  CHECK(std::abs(grid_integral(funnel, -60, 60, -6, 6, 2400, 600) - 1.0) < 0.01);
  Banana banana;
  CHECK(std::abs(grid_integral(banana, -45, 45, -12, 45, 1500, 1200) - 1.0) < 0.01);
  GaussianAnalytic gauss({0.0, 1.0}, {1.0, 2.0});
  CHECK(std::abs(grid_integral(gauss, -8, 8, -15, 17, 800, 800) - 1.0) < 0.01);
}

TEST_CASE("exact sampling requires a generative target") {
  ConjugateGaussian conj({1.0}, 0.0);
  Rng rng(1);
  CHECK_THROWS_AS(conj.exact_sample(rng), contract_error);
}

TEST_CASE("synthetic multilevel data is deterministic in the seed") {
  Rng a(777), b(777), c(778);
  const MultilevelData da = synth_multilevel(a, 3, 300, 1.0, 0.5);
  const MultilevelData db = synth_multilevel(b, 3, 300, 1.0, 0.5);
  const MultilevelData dc = synth_multilevel(c, 3, 300, 1.0, 0.5);
  CHECK(da.response == db.response);
  CHECK(da.covariate == db.covariate);
  CHECK(da.group == db.group);
  CHECK(da.response != dc.response);

  CHECK_THROWS_AS(synth_multilevel(a, 1, 10, 1.0, 0.0), contract_error);
  CHECK_THROWS_AS(synth_multilevel(a, 5, 3, 1.0, 0.0), contract_error);
}

TEST_CASE("multilevel prior scale is floored, keeping the log joint finite") {
  Rng rng(12);
  const MultilevelData data = synth_multilevel(rng, 3, 30, 1.0, 0.0);
  auto ml = make_multilevel_target(data);
  ml->set_theta({std::log(1e-12), 0.0});
  CHECK(ml->sigma_group() == doctest::Approx(MultilevelLogit::kSigmaFloor));
  CHECK(std::isfinite(ml->log_joint({0.1, -0.1, 0.2})));
  // the floored scale freezes the prior gradient in log sigma
  CHECK(ml->grad_theta({0.1, -0.1, 0.2})[0] == 0.0);
}

TEST_CASE("multilevel posterior group means follow the empirical group logits") {
  // beta = 0 and balanced groups: the posterior mean of each group effect
  // must carry the sign of that group's empirical log-odds.
  Rng rng(2718);
  const MultilevelData data = synth_multilevel(rng, 3, 300, 1.5, 0.0);
  auto ml = make_multilevel_target(data);
  ml->set_theta({std::log(1.5), 0.0});

  Vec empirical(3, 0.0);
  Vec counts(3, 0.0);
  for (size_t i = 0; i < data.group.size(); ++i) {
    empirical[static_cast<size_t>(data.group[i])] += data.response[i];
    counts[static_cast<size_t>(data.group[i])] += 1.0;
  }
  for (int g = 0; g < 3; ++g) empirical[g] = empirical[g] / counts[g] - 0.5;

  const Vec post_mean = rwm_posterior_mean(*ml, 0.15, 200000, 5150);
  for (int g = 0; g < 3; ++g) {
    INFO("group ", g, " empirical ", empirical[g], " posterior ", post_mean[g]);
    CHECK(empirical[g] * post_mean[g] > 0.0);
  }
}

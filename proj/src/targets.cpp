#include "tsclimb/targets.hpp"

#include <cmath>

namespace tsclimb {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double log_normal(double x, double mean, double stddev) {
  const double r = (x - mean) / stddev;
  return -0.5 * r * r - std::log(stddev) - 0.5 * kLog2Pi;
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// log(1 + e^x) without overflow
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace

Funnel::Funnel(double a) : a_(a) { require(a > 0.0, "Funnel: a must be positive"); }

double Funnel::log_joint(const Vec& z) const {
  require(z.size() == 2, "funnel: dimension mismatch");
  const double z_obs = z[0];
  const double z_scale = z[1];
  // N(z_scale; 0, 1) * N(z_obs; 0, exp(2 a z_scale))
  return -0.5 * z_scale * z_scale - 0.5 * kLog2Pi - a_ * z_scale -
         0.5 * z_obs * z_obs * std::exp(-2.0 * a_ * z_scale) - 0.5 * kLog2Pi;
}

Vec Funnel::grad_z(const Vec& z) const {
  require(z.size() == 2, "funnel: dimension mismatch");
  const double z_obs = z[0];
  const double z_scale = z[1];
  const double w = std::exp(-2.0 * a_ * z_scale);
  return {-z_obs * w, -z_scale - a_ + a_ * z_obs * z_obs * w};
}

Vec Funnel::exact_sample(Rng& rng) const {
  const double z_scale = rng.normal();
  const double z_obs = std::exp(a_ * z_scale) * rng.normal();
  return {z_obs, z_scale};
}

Banana::Banana(double b) : b_(b) { require(b > 0.0, "Banana: b must be positive"); }

double Banana::log_joint(const Vec& z) const {
  require(z.size() == 2, "banana: dimension mismatch");
  const double v1 = z[0];
  const double v2 = z[1] - b_ * z[0] * z[0] + 100.0 * b_;
  return log_normal(v1, 0.0, 10.0) + log_normal(v2, 0.0, 1.0);
}

Vec Banana::grad_z(const Vec& z) const {
  require(z.size() == 2, "banana: dimension mismatch");
  const double v2 = z[1] - b_ * z[0] * z[0] + 100.0 * b_;
  return {-z[0] / 100.0 + 2.0 * b_ * z[0] * v2, -v2};
}

Vec Banana::exact_sample(Rng& rng) const {
  const double v1 = 10.0 * rng.normal();
  const double v2 = rng.normal();
  return {v1, v2 + b_ * v1 * v1 - 100.0 * b_};
}

GaussianAnalytic::GaussianAnalytic(Vec mean, Vec stddev) : mean_(std::move(mean)), stddev_(std::move(stddev)) {
  require(!mean_.empty() && mean_.size() == stddev_.size(), "GaussianAnalytic: mean/std size mismatch");
  for (double s : stddev_) require(s > 0.0, "GaussianAnalytic: std must be positive");
}

double GaussianAnalytic::log_joint(const Vec& z) const {
  require(z.size() == mean_.size(), "gaussian: dimension mismatch");
  double s = 0.0;
  for (size_t i = 0; i < z.size(); ++i) s += log_normal(z[i], mean_[i], stddev_[i]);
  return s;
}

Vec GaussianAnalytic::grad_z(const Vec& z) const {
  require(z.size() == mean_.size(), "gaussian: dimension mismatch");
  Vec g(z.size());
  for (size_t i = 0; i < z.size(); ++i) g[i] = -(z[i] - mean_[i]) / (stddev_[i] * stddev_[i]);
  return g;
}

Vec GaussianAnalytic::exact_sample(Rng& rng) const {
  Vec z(mean_.size());
  for (size_t i = 0; i < z.size(); ++i) z[i] = mean_[i] + stddev_[i] * rng.normal();
  return z;
}

ConjugateGaussian::ConjugateGaussian(Vec observations, double theta_init)
    : x_(std::move(observations)), theta_(theta_init) {
  require(!x_.empty(), "ConjugateGaussian: needs observations");
}

void ConjugateGaussian::set_theta(const Vec& th) {
  require(th.size() == 1, "conjugate_gaussian: theta has one entry");
  theta_ = th[0];
}

double ConjugateGaussian::log_joint(const Vec& z) const {
  require(z.size() == 1, "conjugate_gaussian: dimension mismatch");
  double s = log_normal(z[0], theta_, 1.0);
  for (double xi : x_) s += log_normal(xi, z[0], 1.0);
  return s;
}

Vec ConjugateGaussian::grad_z(const Vec& z) const {
  require(z.size() == 1, "conjugate_gaussian: dimension mismatch");
  double g = -(z[0] - theta_);
  for (double xi : x_) g += xi - z[0];
  return {g};
}

Vec ConjugateGaussian::grad_theta(const Vec& z) const {
  require(z.size() == 1, "conjugate_gaussian: dimension mismatch");
  return {z[0] - theta_};
}

double ConjugateGaussian::observation_mean() const {
  double s = 0.0;
  for (double xi : x_) s += xi;
  return s / static_cast<double>(x_.size());
}

MultilevelLogit::MultilevelLogit(std::vector<int> group, Vec covariate, std::vector<int> response,
                                 int n_groups, Vec theta_init)
    : group_(std::move(group)),
      covariate_(std::move(covariate)),
      response_(std::move(response)),
      n_groups_(n_groups),
      theta_(std::move(theta_init)) {
  require(n_groups_ >= 2, "multilevel_logit: need at least 2 groups");
  require(group_.size() == covariate_.size() && group_.size() == response_.size(),
          "multilevel_logit: column length mismatch");
  require(group_.size() >= static_cast<size_t>(n_groups_), "multilevel_logit: fewer rows than groups");
  require(theta_.size() == 2, "multilevel_logit: theta is (log sigma_group, beta)");
  for (int g : group_) require(g >= 0 && g < n_groups_, "multilevel_logit: group index out of range");
  for (int y : response_) require(y == 0 || y == 1, "multilevel_logit: responses are binary");
}

void MultilevelLogit::set_theta(const Vec& th) {
  require(th.size() == 2, "multilevel_logit: theta is (log sigma_group, beta)");
  theta_ = th;
}

double MultilevelLogit::sigma_group() const { return std::max(std::exp(theta_[0]), kSigmaFloor); }

double MultilevelLogit::log_joint(const Vec& z) const {
  require(static_cast<int>(z.size()) == n_groups_, "multilevel_logit: dimension mismatch");
  const double beta = theta_[1];
  double s = 0.0;
  for (size_t i = 0; i < group_.size(); ++i) {
    const double eta = z[static_cast<size_t>(group_[i])] + beta * covariate_[i];
    s += response_[i] == 1 ? -softplus(-eta) : -softplus(eta);
  }
  const double sigma = sigma_group();
  for (int g = 0; g < n_groups_; ++g) s += log_normal(z[static_cast<size_t>(g)], 0.0, sigma);
  return s;
}

Vec MultilevelLogit::grad_z(const Vec& z) const {
  require(static_cast<int>(z.size()) == n_groups_, "multilevel_logit: dimension mismatch");
  const double beta = theta_[1];
  const double sigma = sigma_group();
  Vec g(z.size(), 0.0);
  for (size_t i = 0; i < group_.size(); ++i) {
    const double eta = z[static_cast<size_t>(group_[i])] + beta * covariate_[i];
    g[static_cast<size_t>(group_[i])] += static_cast<double>(response_[i]) - sigmoid(eta);
  }
  for (int gi = 0; gi < n_groups_; ++gi) g[static_cast<size_t>(gi)] -= z[static_cast<size_t>(gi)] / (sigma * sigma);
  return g;
}

Vec MultilevelLogit::grad_theta(const Vec& z) const {
  require(static_cast<int>(z.size()) == n_groups_, "multilevel_logit: dimension mismatch");
  const double beta = theta_[1];
  const double sigma = sigma_group();
  double d_beta = 0.0;
  for (size_t i = 0; i < group_.size(); ++i) {
    const double eta = z[static_cast<size_t>(group_[i])] + beta * covariate_[i];
    d_beta += covariate_[i] * (static_cast<double>(response_[i]) - sigmoid(eta));
  }
  // d/d log sigma of sum_g log N(z_g; 0, sigma^2); zero once the floor binds.
  double d_logsig = 0.0;
  if (std::exp(theta_[0]) > kSigmaFloor) {
    for (int g = 0; g < n_groups_; ++g) {
      const double r = z[static_cast<size_t>(g)] / sigma;
      d_logsig += r * r - 1.0;
    }
  }
  return {d_logsig, d_beta};
}

MultilevelData synth_multilevel(Rng& rng, int n_groups, int n_obs, double sigma_group, double beta) {
  require(n_groups >= 2, "synth_multilevel: need at least 2 groups");
  require(n_obs >= n_groups, "synth_multilevel: need at least one observation per group");
  Vec effects(static_cast<size_t>(n_groups));
  for (auto& e : effects) e = sigma_group * rng.normal();
  MultilevelData data;
  data.n_groups = n_groups;
  data.group.resize(static_cast<size_t>(n_obs));
  data.covariate.resize(static_cast<size_t>(n_obs));
  data.response.resize(static_cast<size_t>(n_obs));
  for (int i = 0; i < n_obs; ++i) {
    const int g = i % n_groups;
    const double u = rng.normal();
    const double p = sigmoid(effects[static_cast<size_t>(g)] + beta * u);
    data.group[static_cast<size_t>(i)] = g;
    data.covariate[static_cast<size_t>(i)] = u;
    data.response[static_cast<size_t>(i)] = rng.uniform() < p ? 1 : 0;
  }
  return data;
}

std::unique_ptr<MultilevelLogit> make_multilevel_target(const MultilevelData& data) {
  return std::make_unique<MultilevelLogit>(data.group, data.covariate, data.response, data.n_groups);
}

}  // namespace tsclimb

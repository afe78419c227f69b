#pragma once

#include <memory>
#include <string>

#include "tsclimb/numkit.hpp"

namespace tsclimb {

// Unnormalized log joints log p(x, z; theta) with gradients in z and, where
// the model has learnable parameters, in theta. theta is the only mutable
// piece after construction and only the trainer touches it.
class TargetModel {
 public:
  virtual ~TargetModel() = default;

  virtual std::string name() const = 0;
  virtual int dim() const = 0;

  virtual int theta_dim() const { return 0; }
  virtual Vec theta() const { return {}; }
  virtual void set_theta(const Vec& th) {
    require(th.empty(), name() + ": target has no parameters");
  }

  virtual double log_joint(const Vec& z) const = 0;
  virtual Vec grad_z(const Vec& z) const = 0;
  virtual Vec grad_theta(const Vec& z) const {
    (void)z;
    return {};
  }

  virtual bool supports_exact_sample() const { return false; }
  virtual Vec exact_sample(Rng& rng) const {
    (void)rng;
    throw contract_error(name() + ": exact sampling unsupported");
  }

  virtual std::unique_ptr<TargetModel> clone() const = 0;
};

// Two-dimensional funnel: coordinate 0 is the observation-scale coordinate
// with conditional std exp(a * z_scale), coordinate 1 the N(0,1) scale
// coordinate. a defaults to 1.
class Funnel final : public TargetModel {
 public:
  explicit Funnel(double a = 1.0);
  std::string name() const override { return "funnel"; }
  int dim() const override { return 2; }
  double log_joint(const Vec& z) const override;
  Vec grad_z(const Vec& z) const override;
  bool supports_exact_sample() const override { return true; }
  Vec exact_sample(Rng& rng) const override;
  std::unique_ptr<TargetModel> clone() const override { return std::make_unique<Funnel>(*this); }
  double a() const { return a_; }

 private:
  double a_;
};

// Twisted Gaussian: (v1, v2) ~ N(0, diag(100, 1)), z1 = v1,
// z2 = v2 + b v1^2 - 100 b. Density evaluated through the unit-Jacobian
// inverse twist.
class Banana final : public TargetModel {
 public:
  explicit Banana(double b = 0.02);
  std::string name() const override { return "banana"; }
  int dim() const override { return 2; }
  double log_joint(const Vec& z) const override;
  Vec grad_z(const Vec& z) const override;
  bool supports_exact_sample() const override { return true; }
  Vec exact_sample(Rng& rng) const override;
  std::unique_ptr<TargetModel> clone() const override { return std::make_unique<Banana>(*this); }
  double b() const { return b_; }

 private:
  double b_;
};

// Diagonal Gaussian with known mean and per-dimension std; the analytic
// reference for moment-matching checks.
class GaussianAnalytic final : public TargetModel {
 public:
  GaussianAnalytic(Vec mean, Vec stddev);
  std::string name() const override { return "gaussian"; }
  int dim() const override { return static_cast<int>(mean_.size()); }
  double log_joint(const Vec& z) const override;
  Vec grad_z(const Vec& z) const override;
  bool supports_exact_sample() const override { return true; }
  Vec exact_sample(Rng& rng) const override;
  std::unique_ptr<TargetModel> clone() const override {
    return std::make_unique<GaussianAnalytic>(*this);
  }
  const Vec& mean() const { return mean_; }
  const Vec& stddev() const { return stddev_; }

 private:
  Vec mean_;
  Vec stddev_;
};

// z ~ N(theta, 1), x_i | z ~ N(z, 1). The marginal-likelihood optimum in
// theta is the sample mean of the observations.
class ConjugateGaussian final : public TargetModel {
 public:
  explicit ConjugateGaussian(Vec observations, double theta_init = 0.0);
  std::string name() const override { return "conjugate_gaussian"; }
  int dim() const override { return 1; }
  int theta_dim() const override { return 1; }
  Vec theta() const override { return {theta_}; }
  void set_theta(const Vec& th) override;
  double log_joint(const Vec& z) const override;
  Vec grad_z(const Vec& z) const override;
  Vec grad_theta(const Vec& z) const override;
  std::unique_ptr<TargetModel> clone() const override {
    return std::make_unique<ConjugateGaussian>(*this);
  }
  const Vec& observations() const { return x_; }
  double observation_mean() const;

 private:
  Vec x_;
  double theta_ = 0.0;
};

// Binary responses with one grouping factor and one fixed effect:
// y_i ~ Bernoulli(logit^{-1}(z_{g[i]} + beta * u_i)),
// z_g ~ N(0, sigma_group^2), theta = (log sigma_group, beta).
class MultilevelLogit final : public TargetModel {
 public:
  MultilevelLogit(std::vector<int> group, Vec covariate, std::vector<int> response, int n_groups,
                  Vec theta_init = {0.0, 0.0});
  std::string name() const override { return "multilevel_logit"; }
  int dim() const override { return n_groups_; }
  int theta_dim() const override { return 2; }
  Vec theta() const override { return theta_; }
  void set_theta(const Vec& th) override;
  double log_joint(const Vec& z) const override;
  Vec grad_z(const Vec& z) const override;
  Vec grad_theta(const Vec& z) const override;
  std::unique_ptr<TargetModel> clone() const override {
    return std::make_unique<MultilevelLogit>(*this);
  }

  const std::vector<int>& group() const { return group_; }
  const Vec& covariate() const { return covariate_; }
  const std::vector<int>& response() const { return response_; }
  int n_groups() const { return n_groups_; }
  double sigma_group() const;

  static constexpr double kSigmaFloor = 1e-6;

 private:
  std::vector<int> group_;
  Vec covariate_;
  std::vector<int> response_;
  int n_groups_;
  Vec theta_;
};

struct MultilevelData {
  std::vector<int> group;
  Vec covariate;
  std::vector<int> response;
  int n_groups = 0;
};

// Draws a balanced synthetic dataset from the multilevel model and wraps it
// in a MultilevelLogit target with theta initialized at (0, 0).
MultilevelData synth_multilevel(Rng& rng, int n_groups, int n_obs, double sigma_group, double beta);
std::unique_ptr<MultilevelLogit> make_multilevel_target(const MultilevelData& data);

}  // namespace tsclimb

#pragma once

#include <memory>

#include "tsclimb/mlp.hpp"
#include "tsclimb/numkit.hpp"

namespace tsclimb {

// Invertible maps T: R^d -> R^d between the standard-normal base space and
// the latent space. A map doubles as the flow transformation of the
// variational density q and as the space-warping function of the sampler.
//
// Each layer provides the forward/inverse transform plus vector-Jacobian
// products of both directions w.r.t. inputs and parameters, so the full map
// supports: density evaluation q(z), score gradients in the parameters with
// z held fixed, and chain-rule gradients of warped log-densities.

enum class FlowKind { Identity, Affine, Iaf, RealNvp, Stack };

std::string flow_kind_name(FlowKind k);

class FlowLayer {
 public:
  virtual ~FlowLayer() = default;

  virtual int dim() const = 0;
  virtual int n_params() const = 0;
  virtual void get_params(double* out) const = 0;
  virtual void set_params(const double* in) = 0;

  // z = T(eps); returns log|det dT/deps|.
  virtual double forward(const Vec& eps, Vec& z) const = 0;
  // eps = T^{-1}(z); returns log|det dT/deps| evaluated at the recovered eps.
  virtual double inverse(const Vec& z, Vec& eps) const = 0;

  // Given upstream u on z and weight c on the forward logdet, accumulates
  // u^T dz/deps + c dlogdet/deps into d_eps and the parameter part into
  // d_params (length n_params, accumulated).
  virtual void forward_vjp(const Vec& eps, const Vec& u, double c, Vec& d_eps,
                           double* d_params) const = 0;
  // Given upstream u on eps = T^{-1}(z) and weight c on the inverse logdet
  // (-logdet of the forward at eps), accumulates gradients w.r.t. z and the
  // parameters.
  virtual void inverse_vjp(const Vec& z, const Vec& u, double c, Vec& d_z,
                           double* d_params) const = 0;

  virtual std::unique_ptr<FlowLayer> clone() const = 0;
};

struct FlowForward {
  Vec z;
  double logdet = 0.0;
};

// Pieces of d(z, logdet)/d(eps, params) exposed as the spec'd gradient
// contract: VJPs for z, full gradients for the scalar logdet.
struct ForwardGrads {
  Vec u_dz_deps;       // u^T dz/deps
  Vec u_dz_dparams;    // u^T dz/dparams
  Vec dlogdet_deps;
  Vec dlogdet_dparams;
};

class TransportMap {
 public:
  TransportMap() = default;

  static TransportMap identity(int d);
  static TransportMap affine(int d);
  // Stacked autoregressive layers; conditioner MLPs use `hidden` widths.
  // `init_seed` seeds the small random init of the conditioner hidden
  // layers (the output layers stay zero, so the map starts at identity).
  static TransportMap iaf(int d, int n_stack, const std::vector<int>& hidden, uint64_t init_seed);
  static TransportMap realnvp(int d, int n_stack, const std::vector<int>& hidden, uint64_t init_seed);
  static TransportMap stack(std::vector<TransportMap> parts);

  TransportMap(const TransportMap& other);
  TransportMap& operator=(const TransportMap& other);
  TransportMap(TransportMap&&) = default;
  TransportMap& operator=(TransportMap&&) = default;

  FlowKind kind() const { return kind_; }
  int dim() const { return d_; }
  int n_params() const;
  Vec params() const;
  void set_params(const Vec& p);
  size_t n_layers() const { return layers_.size(); }

  FlowForward forward(const Vec& eps) const;
  Vec inverse(const Vec& z) const;

  // log q(z) under the flow with standard-normal base.
  double log_q(const Vec& z) const;
  // d log q(z) / d params with z treated as a constant.
  Vec grad_log_q_params(const Vec& z) const;

  // Chain-rule building block: upstream u on z plus weight c on logdet,
  // returns the gradient w.r.t. eps and fills d_params if non-null.
  Vec forward_pullback(const Vec& eps, const Vec& u, double c, Vec* d_params = nullptr) const;
  ForwardGrads grad_forward_inputs(const Vec& eps, const Vec& u) const;

 private:
  FlowKind kind_ = FlowKind::Identity;
  int d_ = 0;
  std::vector<std::unique_ptr<FlowLayer>> layers_;
};

// Standard normal base N(0, I_d).
double base_log_density(const Vec& eps);

}  // namespace tsclimb

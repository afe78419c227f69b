#pragma once

#include "tsclimb/flows.hpp"
#include "tsclimb/numkit.hpp"
#include "tsclimb/targets.hpp"

namespace tsclimb {

// Log density with gradient for the sampler. Implementations return -inf
// (with an unspecified gradient) instead of throwing when the underlying
// map hits a non-finite value; the kernel treats that as a divergence.
class LogDensity {
 public:
  virtual ~LogDensity() = default;
  virtual int dim() const = 0;
  virtual double logp_grad(const Vec& z, Vec& grad) const = 0;
};

// The target itself: sampling runs in the latent space.
class RawDensity final : public LogDensity {
 public:
  explicit RawDensity(const TargetModel& target) : target_(&target) {}
  int dim() const override { return target_->dim(); }
  double logp_grad(const Vec& z, Vec& grad) const override;

 private:
  const TargetModel* target_;
};

// Pushed-back density on the warped space z0 = T^{-1}(z):
// log p(x, T(z0); theta) + log|det J_T(z0)|. With the identity map this is
// the raw log joint exactly.
class WarpedDensity final : public LogDensity {
 public:
  WarpedDensity(const TargetModel& target, const TransportMap& map) : target_(&target), map_(&map) {
    require(target.dim() == map.dim(), "WarpedDensity: target/map dimension mismatch");
  }
  int dim() const override { return target_->dim(); }
  double logp_grad(const Vec& z0, Vec& grad) const override;

 private:
  const TargetModel* target_;
  const TransportMap* map_;
};

struct HmcOutcome {
  Vec position;       // chain position after the step
  Vec proposal;       // end of the leapfrog trajectory
  bool accepted = false;
  bool divergent = false;
  double log_accept_ratio = 0.0;
  double logp = 0.0;  // density value at the returned position
};

struct ChainState {
  Vec z0;
  double step_size = 0.1;
  int n_leapfrog = 10;
  int l_max = 50;
  long adapt_count = 0;
  double accept_ewma = 0.0;
  bool adapt_enabled = true;
  Rng rng;

  ChainState(Vec init, double step_size_init, int l_max_, uint64_t seed);

  static constexpr double kStepMin = 1e-4;
  static constexpr double kStepMax = 2.0;
};

// L leapfrog steps of size s with unit mass matrix. Returns false if the
// trajectory left the finite domain.
bool leapfrog(const LogDensity& density, Vec& z, Vec& m, double step_size, int n_steps);

// One proposal + accept/reject with momenta drawn from the state's rng.
// Does not touch the step size.
HmcOutcome hmc_step(const LogDensity& density, ChainState& state);

// Robbins-Monro on log s toward the target acceptance rate:
// log s += 0.05 / (1 + k)^0.6 * (1[accepted] - target). Divergent steps
// shrink s by 0.9 instead. L is recomputed as min(ceil(1/s), l_max).
void adapt_step_size(ChainState& state, bool accepted, double target_accept, bool divergent = false);

// hmc_step followed by step-size adaptation (when enabled).
HmcOutcome hmc_advance(const LogDensity& density, ChainState& state, double target_accept);

int leapfrog_count(double step_size, int l_max);

}  // namespace tsclimb

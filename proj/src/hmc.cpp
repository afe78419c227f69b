#include "tsclimb/hmc.hpp"

#include <cmath>
#include <limits>

namespace tsclimb {

double RawDensity::logp_grad(const Vec& z, Vec& grad) const {
  const double v = target_->log_joint(z);
  grad = target_->grad_z(z);
  return v;
}

double WarpedDensity::logp_grad(const Vec& z0, Vec& grad) const {
  try {
    const FlowForward fwd = map_->forward(z0);
    const double v = target_->log_joint(fwd.z) + fwd.logdet;
    const Vec gz = target_->grad_z(fwd.z);
    grad = map_->forward_pullback(z0, gz, 1.0);
    return v;
  } catch (const numeric_error&) {
    grad.assign(z0.size(), 0.0);
    return -std::numeric_limits<double>::infinity();
  }
}

ChainState::ChainState(Vec init, double step_size_init, int l_max_, uint64_t seed)
    : z0(std::move(init)), step_size(step_size_init), l_max(l_max_), rng(seed) {
  require(step_size > 0.0, "ChainState: step size must be positive");
  require(l_max >= 1, "ChainState: l_max must be positive");
  step_size = std::min(std::max(step_size, kStepMin), kStepMax);
  n_leapfrog = leapfrog_count(step_size, l_max);
}

int leapfrog_count(double step_size, int l_max) {
  const int l = static_cast<int>(std::ceil(1.0 / step_size));
  return std::min(std::max(l, 1), l_max);
}

bool leapfrog(const LogDensity& density, Vec& z, Vec& m, double step_size, int n_steps) {
  Vec grad;
  double v = density.logp_grad(z, grad);
  if (!std::isfinite(v)) return false;
  for (int l = 0; l < n_steps; ++l) {
    axpy(0.5 * step_size, grad, m);
    axpy(step_size, m, z);
    v = density.logp_grad(z, grad);
    if (!std::isfinite(v) || !all_finite(grad) || !all_finite(z)) return false;
    axpy(0.5 * step_size, grad, m);
  }
  return all_finite(m);
}

HmcOutcome hmc_step(const LogDensity& density, ChainState& state) {
  HmcOutcome out;
  const Vec m0 = state.rng.normal_vec(density.dim());
  Vec grad;
  const double logp0 = density.logp_grad(state.z0, grad);
  const double h0 = -logp0 + 0.5 * dot(m0, m0);

  Vec z = state.z0;
  Vec m = m0;
  const bool ok = leapfrog(density, z, m, state.step_size, state.n_leapfrog);
  const double u = state.rng.uniform();

  if (!ok) {
    out.position = state.z0;
    out.proposal = z;
    out.divergent = true;
    out.accepted = false;
    out.log_accept_ratio = -std::numeric_limits<double>::infinity();
    out.logp = logp0;
    return out;
  }

  Vec grad1;
  const double logp1 = density.logp_grad(z, grad1);
  const double h1 = -logp1 + 0.5 * dot(m, m);
  const double log_ratio = h0 - h1;
  if (!std::isfinite(log_ratio)) {
    out.position = state.z0;
    out.proposal = z;
    out.divergent = true;
    out.accepted = false;
    out.log_accept_ratio = -std::numeric_limits<double>::infinity();
    out.logp = logp0;
    return out;
  }

  out.proposal = z;
  out.log_accept_ratio = std::min(log_ratio, 0.0);
  if (std::log(u) < log_ratio) {
    out.accepted = true;
    out.position = std::move(z);
    out.logp = logp1;
  } else {
    out.accepted = false;
    out.position = state.z0;
    out.logp = logp0;
  }
  state.z0 = out.position;
  return out;
}

void adapt_step_size(ChainState& state, bool accepted, double target_accept, bool divergent) {
  require(target_accept > 0.0 && target_accept < 1.0, "adapt_step_size: target in (0,1)");
  double log_s = std::log(state.step_size);
  if (divergent) {
    log_s += std::log(0.9);
  } else {
    const double eta = 0.05 / std::pow(1.0 + static_cast<double>(state.adapt_count), 0.6);
    log_s += eta * ((accepted ? 1.0 : 0.0) - target_accept);
  }
  state.adapt_count += 1;
  state.step_size = std::min(std::max(std::exp(log_s), ChainState::kStepMin), ChainState::kStepMax);
  state.n_leapfrog = leapfrog_count(state.step_size, state.l_max);
}

HmcOutcome hmc_advance(const LogDensity& density, ChainState& state, double target_accept) {
  HmcOutcome out = hmc_step(density, state);
  state.accept_ewma = 0.99 * state.accept_ewma + 0.01 * (out.accepted ? 1.0 : 0.0);
  if (state.adapt_enabled) adapt_step_size(state, out.accepted, target_accept, out.divergent);
  return out;
}

}  // namespace tsclimb

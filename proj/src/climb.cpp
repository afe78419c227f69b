#include "tsclimb/climb.hpp"

#include <cmath>

namespace tsclimb {

namespace {

constexpr int kLambdaTraceLimit = 16;

void update_lambda(RunState& state, const TrainerConfig& cfg, const Vec& z) {
  if (state.iter < cfg.freeze_window || state.map->n_params() == 0) return;
  try {
    const Vec score = state.map->grad_log_q_params(z);
    Vec loss_grad(score.size());
    for (size_t i = 0; i < score.size(); ++i) loss_grad[i] = -score[i];
    Vec params = state.map->params();
    adam_step(state.adam_lambda, params, loss_grad);
    state.map->set_params(params);
  } catch (const numeric_error&) {
    state.counters.skipped_lambda_updates += 1;
  }
}

void update_lambda_elbo(RunState& state, const TrainerConfig& cfg, const Vec& eps, const Vec& grad_logp_z) {
  if (state.iter < cfg.freeze_window || state.map->n_params() == 0) return;
  try {
    Vec d_lambda;
    state.map->forward_pullback(eps, grad_logp_z, 1.0, &d_lambda);
    Vec loss_grad(d_lambda.size());
    for (size_t i = 0; i < d_lambda.size(); ++i) loss_grad[i] = -d_lambda[i];
    Vec params = state.map->params();
    adam_step(state.adam_lambda, params, loss_grad);
    state.map->set_params(params);
  } catch (const numeric_error&) {
    state.counters.skipped_lambda_updates += 1;
  }
}

void update_theta(RunState& state, const Vec& z) {
  if (state.target->theta_dim() == 0) return;
  try {
    const Vec g = state.target->grad_theta(z);
    Vec loss_grad(g.size());
    for (size_t i = 0; i < g.size(); ++i) loss_grad[i] = -g[i];
    Vec theta = state.target->theta();
    adam_step(state.adam_theta, theta, loss_grad);
    state.target->set_theta(theta);
  } catch (const numeric_error&) {
    state.counters.skipped_theta_updates += 1;
  }
}

TraceRecord make_record(const RunState& state, const HmcOutcome& outcome, double warped_logp,
                        double latent_logp, const Vec& z) {
  TraceRecord rec;
  rec.iter = state.iter;
  rec.accepted = outcome.accepted;
  rec.step_size = state.chain.step_size;
  rec.n_leapfrog = state.chain.n_leapfrog;
  rec.warped_logp = warped_logp;
  rec.latent_logp = latent_logp;
  rec.divergent = outcome.divergent;
  const Vec lambda = state.map->params();
  rec.lambda_norm = norm2(lambda);
  if (static_cast<int>(lambda.size()) <= kLambdaTraceLimit) rec.lambda = lambda;
  rec.theta = state.target->theta();
  rec.z = z;
  return rec;
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::Tsc: return "tsc";
    case Method::Msc: return "msc";
    case Method::ElboVi: return "elbo";
  }
  return "unknown";
}

void TrainerConfig::validate() const {
  require(iterations >= 1, "trainer: iterations must be >= 1");
  require(lr_lambda > 0.0 && lr_theta > 0.0, "trainer: learning rates must be positive");
  require(decay >= 0.0, "trainer: decay must be non-negative");
  require(target_accept > 0.0 && target_accept < 1.0, "trainer: target_accept in (0,1)");
  require(freeze_window >= 0, "trainer: freeze_window must be non-negative");
  require(step_size_init > 0.0, "trainer: step_size_init must be positive");
  require(l_max >= 1, "trainer: l_max must be >= 1");
}

RunState::RunState(TransportMap& m, TargetModel& t, const TrainerConfig& cfg)
    : map(&m),
      target(&t),
      chain(Vec(static_cast<size_t>(t.dim()), 0.0), cfg.step_size_init, cfg.l_max, cfg.seed),
      adam_lambda(m.n_params(), cfg.lr_lambda, cfg.decay),
      adam_theta(t.theta_dim(), cfg.lr_theta, cfg.decay) {
  require(m.dim() == t.dim(), "RunState: map/target dimension mismatch");
  chain.z0 = chain.rng.normal_vec(t.dim());
}

TraceRecord tsc_step(RunState& state, const TrainerConfig& cfg) {
  const WarpedDensity warped(*state.target, *state.map);
  const HmcOutcome outcome = hmc_advance(warped, state.chain, cfg.target_accept);
  if (outcome.divergent) state.counters.divergences += 1;

  // Latent sample under the pre-update map; held fixed for both updates.
  const FlowForward fwd = state.map->forward(state.chain.z0);
  const Vec z = fwd.z;
  const double latent_logp = state.target->log_joint(z);

  update_lambda(state, cfg, z);
  update_theta(state, z);

  // Carry the retained sample into the warped space of the updated map.
  state.chain.z0 = state.map->inverse(z);

  return make_record(state, outcome, outcome.logp, latent_logp, z);
}

TraceRecord msc_step(RunState& state, const TrainerConfig& cfg) {
  const RawDensity raw(*state.target);
  const HmcOutcome outcome = hmc_advance(raw, state.chain, cfg.target_accept);
  if (outcome.divergent) state.counters.divergences += 1;

  const Vec z = state.chain.z0;
  const double latent_logp = state.target->log_joint(z);

  update_lambda(state, cfg, z);
  update_theta(state, z);

  return make_record(state, outcome, outcome.logp, latent_logp, z);
}

TraceRecord elbo_step(RunState& state, const TrainerConfig& cfg) {
  HmcOutcome pseudo;
  pseudo.accepted = true;
  pseudo.divergent = false;

  const Vec eps = state.chain.rng.normal_vec(state.target->dim());
  Vec z;
  double latent_logp = 0.0;
  double objective = 0.0;
  try {
    const FlowForward fwd = state.map->forward(eps);
    z = fwd.z;
    latent_logp = state.target->log_joint(z);
    objective = latent_logp + fwd.logdet;
    const Vec gz = state.target->grad_z(z);
    update_lambda_elbo(state, cfg, eps, gz);
    update_theta(state, z);
  } catch (const numeric_error&) {
    pseudo.divergent = true;
    state.counters.divergences += 1;
    state.counters.skipped_lambda_updates += 1;
    z = eps;
  }

  TraceRecord rec = make_record(state, pseudo, objective, latent_logp, z);
  rec.step_size = 0.0;
  rec.n_leapfrog = 0;
  return rec;
}

RunState run(const TrainerConfig& cfg, TargetModel& target, TransportMap& map, const TraceSink& sink) {
  cfg.validate();
  RunState state(map, target, cfg);
  for (long k = 0; k < cfg.iterations; ++k) {
    state.iter = k;
    if (cfg.adapt_freeze_after >= 0) state.chain.adapt_enabled = k < cfg.adapt_freeze_after;
    TraceRecord rec;
    switch (cfg.method) {
      case Method::Tsc: rec = tsc_step(state, cfg); break;
      case Method::Msc: rec = msc_step(state, cfg); break;
      case Method::ElboVi: rec = elbo_step(state, cfg); break;
    }
    if (sink) sink(rec);
  }
  return state;
}

}  // namespace tsclimb

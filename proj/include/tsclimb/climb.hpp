#pragma once

#include <functional>

#include "tsclimb/hmc.hpp"

namespace tsclimb {

enum class Method { Tsc, Msc, ElboVi };

std::string method_name(Method m);

struct TrainerConfig {
  Method method = Method::Tsc;
  long iterations = 10000;
  double lr_lambda = 3e-3;   // alpha_1
  double lr_theta = 3e-3;    // alpha_2
  double decay = 3e-4;       // inverse-time decay rate kappa
  double target_accept = 0.67;
  long freeze_window = 200;  // initial iterations with no lambda update
  uint64_t seed = 0;
  double step_size_init = 0.1;
  int l_max = 50;
  long adapt_freeze_after = -1;  // stop step-size adaptation after this many iterations; -1 = never

  void validate() const;
};

struct TraceRecord {
  long iter = 0;
  bool accepted = false;
  double step_size = 0.0;
  int n_leapfrog = 0;
  double warped_logp = 0.0;
  double latent_logp = 0.0;
  bool divergent = false;
  double lambda_norm = 0.0;
  Vec theta;
  Vec z;       // latent-space sample retained after this iteration
  Vec lambda;  // filled only for small parameter vectors
};

struct RunCounters {
  long chain_reinits = 0;
  long divergences = 0;
  long skipped_lambda_updates = 0;
  long skipped_theta_updates = 0;
};

struct RunState {
  TransportMap* map = nullptr;
  TargetModel* target = nullptr;
  ChainState chain;
  AdamState adam_lambda;
  AdamState adam_theta;
  long iter = 0;
  RunCounters counters;

  RunState(TransportMap& m, TargetModel& t, const TrainerConfig& cfg);
};

using TraceSink = std::function<void(const TraceRecord&)>;

// One iteration of each method. All three share the update pattern: obtain
// a latent sample, ascend log q(z; lambda) at the frozen sample, ascend
// log p(x, z; theta).
TraceRecord tsc_step(RunState& state, const TrainerConfig& cfg);
TraceRecord msc_step(RunState& state, const TrainerConfig& cfg);
TraceRecord elbo_step(RunState& state, const TrainerConfig& cfg);

// Runs cfg.iterations steps of the configured method, streaming one record
// per iteration into the sink. The chain is initialized once from N(0, I)
// and never re-initialized.
RunState run(const TrainerConfig& cfg, TargetModel& target, TransportMap& map, const TraceSink& sink);

}  // namespace tsclimb

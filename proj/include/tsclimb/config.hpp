#pragma once

#include <nlohmann/json_fwd.hpp>

#include "tsclimb/climb.hpp"
#include "tsclimb/flows.hpp"
#include "tsclimb/targets.hpp"

namespace tsclimb {

// Experiment configuration, parsed from JSON with strict unknown-field
// rejection. Defaults follow the synthetic-experiment settings: Adam with
// initial rate 3e-3 and inverse-time decay 3e-4, 67% target acceptance,
// L = ceil(1/s).

struct TargetConfig {
  std::string name = "funnel";
  double a = 1.0;                // funnel
  double b = 0.02;               // banana
  Vec mean{0.0, 0.0};            // gaussian
  Vec stddev{1.0, 1.0};          // gaussian
  int n_obs = 50;                // conjugate_gaussian / multilevel_logit
  double true_mean = 1.0;        // conjugate_gaussian
  int n_groups = 3;              // multilevel_logit
  double sigma_group = 1.0;      // multilevel_logit
  double beta = 0.5;             // multilevel_logit
  uint64_t data_seed = 1234;     // synthetic-data generators
};

struct FlowConfig {
  std::string kind = "affine";  // identity | affine | iaf | realnvp
  int stack_depth = 2;
  int hidden_width = 16;
  int hidden_layers = 2;
  uint64_t init_seed = 42;
};

struct HmcConfig {
  double target_accept = 0.67;
  double step_size_init = 0.1;
  int l_max = 50;
  long adapt_freeze_after = -1;
};

struct TrainerSection {
  std::string method = "tsc";  // tsc | msc | elbo
  long iterations = 10000;
  double lr_lambda = 3e-3;
  double lr_theta = 3e-3;
  double decay = 3e-4;
  long freeze_window = 200;
};

struct EvalConfig {
  long n_posterior_samples = 100000;
  int n_groups_table1 = 0;
};

struct ExperimentConfig {
  TargetConfig target;
  FlowConfig flow;
  TrainerSection trainer;
  HmcConfig hmc;
  uint64_t seed = 0;
  std::string output_dir = ".";
  EvalConfig eval;
};

ExperimentConfig default_config();

// Throws contract_error naming the offending field on unknown keys,
// missing required fields, or out-of-range values.
ExperimentConfig parse_config_json(const nlohmann::json& j);
ExperimentConfig parse_config(const std::string& path);

nlohmann::json config_to_json(const ExperimentConfig& cfg);
void validate_config(const ExperimentConfig& cfg);

Method method_from_string(const std::string& s);
TrainerConfig trainer_config(const ExperimentConfig& cfg);

// Instantiates the configured target. For synthetic-data targets the
// dataset is drawn from cfg.target.data_seed; multilevel runs also expose
// the raw dataset for persistence.
std::unique_ptr<TargetModel> build_target(const TargetConfig& cfg, MultilevelData* dataset = nullptr);
TransportMap build_flow(const FlowConfig& cfg, int dim);

}  // namespace tsclimb

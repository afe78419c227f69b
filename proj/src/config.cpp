#include "tsclimb/config.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

namespace tsclimb {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  require(j.is_object(), "config: " + where + " must be a JSON object");
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      throw contract_error("config: unknown field '" + where + "." + item.key() + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_vec(const json& j, const char* key, Vec& out) {
  if (j.contains(key)) {
    require(j.at(key).is_array(), std::string("config: '") + key + "' must be an array");
    out = j.at(key).get<Vec>();
  }
}

TargetConfig parse_target(const json& j) {
  TargetConfig t;
  check_keys(j, "target", {"name", "params"});
  require(j.contains("name"), "config: missing required field 'target.name'");
  t.name = j.at("name").get<std::string>();
  const json params = j.value("params", json::object());
  if (t.name == "funnel") {
    check_keys(params, "target.params", {"a"});
    read(params, "a", t.a);
  } else if (t.name == "banana") {
    check_keys(params, "target.params", {"b"});
    read(params, "b", t.b);
  } else if (t.name == "gaussian") {
    check_keys(params, "target.params", {"mean", "std"});
    read_vec(params, "mean", t.mean);
    read_vec(params, "std", t.stddev);
  } else if (t.name == "conjugate_gaussian") {
    check_keys(params, "target.params", {"n_obs", "true_mean", "data_seed"});
    read(params, "n_obs", t.n_obs);
    read(params, "true_mean", t.true_mean);
    read(params, "data_seed", t.data_seed);
  } else if (t.name == "multilevel_logit") {
    check_keys(params, "target.params", {"n_groups", "n_obs", "sigma_group", "beta", "data_seed"});
    read(params, "n_groups", t.n_groups);
    read(params, "n_obs", t.n_obs);
    read(params, "sigma_group", t.sigma_group);
    read(params, "beta", t.beta);
    read(params, "data_seed", t.data_seed);
  } else {
    throw contract_error("config: unknown target.name '" + t.name + "'");
  }
  return t;
}

json target_to_json(const TargetConfig& t) {
  json params = json::object();
  if (t.name == "funnel") {
    params["a"] = t.a;
  } else if (t.name == "banana") {
    params["b"] = t.b;
  } else if (t.name == "gaussian") {
    params["mean"] = t.mean;
    params["std"] = t.stddev;
  } else if (t.name == "conjugate_gaussian") {
    params["n_obs"] = t.n_obs;
    params["true_mean"] = t.true_mean;
    params["data_seed"] = t.data_seed;
  } else if (t.name == "multilevel_logit") {
    params["n_groups"] = t.n_groups;
    params["n_obs"] = t.n_obs;
    params["sigma_group"] = t.sigma_group;
    params["beta"] = t.beta;
    params["data_seed"] = t.data_seed;
  }
  return json{{"name", t.name}, {"params", params}};
}

}  // namespace

ExperimentConfig default_config() { return ExperimentConfig{}; }

ExperimentConfig parse_config_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  check_keys(j, "", {"target", "flow", "trainer", "hmc", "seed", "output_dir", "eval"});
  require(j.contains("target"), "config: missing required field 'target'");
  require(j.contains("trainer"), "config: missing required field 'trainer'");
  cfg.target = parse_target(j.at("target"));

  if (j.contains("flow")) {
    const json& f = j.at("flow");
    check_keys(f, "flow", {"kind", "stack_depth", "hidden_width", "hidden_layers", "init_seed"});
    read(f, "kind", cfg.flow.kind);
    read(f, "stack_depth", cfg.flow.stack_depth);
    read(f, "hidden_width", cfg.flow.hidden_width);
    read(f, "hidden_layers", cfg.flow.hidden_layers);
    read(f, "init_seed", cfg.flow.init_seed);
  }

  {
    const json& t = j.at("trainer");
    check_keys(t, "trainer",
               {"method", "iterations", "lr_lambda", "lr_theta", "decay", "freeze_window"});
    require(t.contains("method"), "config: missing required field 'trainer.method'");
    read(t, "method", cfg.trainer.method);
    read(t, "iterations", cfg.trainer.iterations);
    read(t, "lr_lambda", cfg.trainer.lr_lambda);
    read(t, "lr_theta", cfg.trainer.lr_theta);
    read(t, "decay", cfg.trainer.decay);
    read(t, "freeze_window", cfg.trainer.freeze_window);
  }

  if (j.contains("hmc")) {
    const json& h = j.at("hmc");
    check_keys(h, "hmc", {"target_accept", "step_size_init", "l_max", "adapt_freeze_after"});
    read(h, "target_accept", cfg.hmc.target_accept);
    read(h, "step_size_init", cfg.hmc.step_size_init);
    read(h, "l_max", cfg.hmc.l_max);
    read(h, "adapt_freeze_after", cfg.hmc.adapt_freeze_after);
  }

  read(j, "seed", cfg.seed);
  read(j, "output_dir", cfg.output_dir);

  if (j.contains("eval")) {
    const json& e = j.at("eval");
    check_keys(e, "eval", {"n_posterior_samples", "n_groups_table1"});
    read(e, "n_posterior_samples", cfg.eval.n_posterior_samples);
    read(e, "n_groups_table1", cfg.eval.n_groups_table1);
  }

  validate_config(cfg);
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw contract_error("config: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw contract_error("config: malformed JSON in '" + path + "': " + e.what());
  }
  return parse_config_json(j);
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["target"] = target_to_json(cfg.target);
  j["flow"] = {{"kind", cfg.flow.kind},
               {"stack_depth", cfg.flow.stack_depth},
               {"hidden_width", cfg.flow.hidden_width},
               {"hidden_layers", cfg.flow.hidden_layers},
               {"init_seed", cfg.flow.init_seed}};
  j["trainer"] = {{"method", cfg.trainer.method},
                  {"iterations", cfg.trainer.iterations},
                  {"lr_lambda", cfg.trainer.lr_lambda},
                  {"lr_theta", cfg.trainer.lr_theta},
                  {"decay", cfg.trainer.decay},
                  {"freeze_window", cfg.trainer.freeze_window}};
  j["hmc"] = {{"target_accept", cfg.hmc.target_accept},
              {"step_size_init", cfg.hmc.step_size_init},
              {"l_max", cfg.hmc.l_max},
              {"adapt_freeze_after", cfg.hmc.adapt_freeze_after}};
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  j["eval"] = {{"n_posterior_samples", cfg.eval.n_posterior_samples},
               {"n_groups_table1", cfg.eval.n_groups_table1}};
  return j;
}

void validate_config(const ExperimentConfig& cfg) {
  static const std::set<std::string> kinds{"identity", "affine", "iaf", "realnvp"};
  if (!kinds.count(cfg.flow.kind))
    throw contract_error("config: unknown flow.kind '" + cfg.flow.kind + "'");
  method_from_string(cfg.trainer.method);
  require(cfg.flow.stack_depth >= 1, "config: flow.stack_depth must be >= 1");
  require(cfg.flow.hidden_width >= 1, "config: flow.hidden_width must be >= 1");
  require(cfg.flow.hidden_layers >= 1, "config: flow.hidden_layers must be >= 1");
  require(cfg.trainer.iterations >= 1, "config: trainer.iterations must be >= 1");
  require(cfg.trainer.lr_lambda > 0.0, "config: trainer.lr_lambda must be positive");
  require(cfg.trainer.lr_theta > 0.0, "config: trainer.lr_theta must be positive");
  require(cfg.trainer.decay >= 0.0, "config: trainer.decay must be non-negative");
  require(cfg.trainer.freeze_window >= 0, "config: trainer.freeze_window must be non-negative");
  require(cfg.hmc.target_accept > 0.0 && cfg.hmc.target_accept < 1.0,
          "config: hmc.target_accept must lie in (0,1)");
  require(cfg.hmc.step_size_init > 0.0, "config: hmc.step_size_init must be positive");
  require(cfg.hmc.l_max >= 1, "config: hmc.l_max must be >= 1");
  require(cfg.eval.n_posterior_samples >= 1, "config: eval.n_posterior_samples must be >= 1");
  require(cfg.eval.n_groups_table1 >= 0, "config: eval.n_groups_table1 must be >= 0");
  if (cfg.target.name == "funnel") require(cfg.target.a > 0.0, "config: target.params.a must be positive");
  if (cfg.target.name == "banana") require(cfg.target.b > 0.0, "config: target.params.b must be positive");
  if (cfg.target.name == "gaussian") {
    require(!cfg.target.mean.empty() && cfg.target.mean.size() == cfg.target.stddev.size(),
            "config: gaussian mean/std must be non-empty and equally sized");
    for (double s : cfg.target.stddev) require(s > 0.0, "config: gaussian std must be positive");
  }
  if (cfg.target.name == "conjugate_gaussian")
    require(cfg.target.n_obs >= 1, "config: target.params.n_obs must be >= 1");
  if (cfg.target.name == "multilevel_logit") {
    require(cfg.target.n_groups >= 2, "config: target.params.n_groups must be >= 2");
    require(cfg.target.n_obs >= cfg.target.n_groups,
            "config: target.params.n_obs must be >= n_groups");
    require(cfg.target.sigma_group > 0.0, "config: target.params.sigma_group must be positive");
  }
}

Method method_from_string(const std::string& s) {
  if (s == "tsc") return Method::Tsc;
  if (s == "msc") return Method::Msc;
  if (s == "elbo") return Method::ElboVi;
  throw contract_error("config: unknown trainer.method '" + s + "'");
}

TrainerConfig trainer_config(const ExperimentConfig& cfg) {
  TrainerConfig t;
  t.method = method_from_string(cfg.trainer.method);
  t.iterations = cfg.trainer.iterations;
  t.lr_lambda = cfg.trainer.lr_lambda;
  t.lr_theta = cfg.trainer.lr_theta;
  t.decay = cfg.trainer.decay;
  t.target_accept = cfg.hmc.target_accept;
  t.freeze_window = cfg.trainer.freeze_window;
  t.seed = cfg.seed;
  t.step_size_init = cfg.hmc.step_size_init;
  t.l_max = cfg.hmc.l_max;
  t.adapt_freeze_after = cfg.hmc.adapt_freeze_after;
  return t;
}

std::unique_ptr<TargetModel> build_target(const TargetConfig& cfg, MultilevelData* dataset) {
  if (cfg.name == "funnel") return std::make_unique<Funnel>(cfg.a);
  if (cfg.name == "banana") return std::make_unique<Banana>(cfg.b);
  if (cfg.name == "gaussian") return std::make_unique<GaussianAnalytic>(cfg.mean, cfg.stddev);
  if (cfg.name == "conjugate_gaussian") {
    Rng rng(cfg.data_seed);
    const double latent = cfg.true_mean + rng.normal();
    Vec x(static_cast<size_t>(cfg.n_obs));
    for (auto& xi : x) xi = latent + rng.normal();
    return std::make_unique<ConjugateGaussian>(std::move(x));
  }
  if (cfg.name == "multilevel_logit") {
    Rng rng(cfg.data_seed);
    MultilevelData data = synth_multilevel(rng, cfg.n_groups, cfg.n_obs, cfg.sigma_group, cfg.beta);
    auto target = make_multilevel_target(data);
    if (dataset) *dataset = std::move(data);
    return target;
  }
  throw contract_error("config: unknown target.name '" + cfg.name + "'");
}

TransportMap build_flow(const FlowConfig& cfg, int dim) {
  if (cfg.kind == "identity") return TransportMap::identity(dim);
  if (cfg.kind == "affine") return TransportMap::affine(dim);
  const std::vector<int> hidden(static_cast<size_t>(cfg.hidden_layers), cfg.hidden_width);
  if (cfg.kind == "iaf") return TransportMap::iaf(dim, cfg.stack_depth, hidden, cfg.init_seed);
  if (cfg.kind == "realnvp") return TransportMap::realnvp(dim, cfg.stack_depth, hidden, cfg.init_seed);
  throw contract_error("config: unknown flow.kind '" + cfg.kind + "'");
}

}  // namespace tsclimb

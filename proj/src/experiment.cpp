#include "tsclimb/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tsclimb/log.hpp"

namespace tsclimb {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// %.17g round-trips doubles exactly, which keeps emitted files stable
// across reruns of the same build.
std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct CsvWriter {
  std::ofstream out;

  CsvWriter(const fs::path& path, const std::string& header) {
    out.open(path, std::ios::binary);
    if (!out) throw io_error("cannot open '" + path.string() + "' for writing");
    out << header << "\n";
  }

  void row(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ",";
      out << cells[i];
    }
    out << "\n";
  }
};

void write_dataset_csv(const fs::path& path, const MultilevelData& data) {
  CsvWriter w(path, "group,covariate,response");
  for (size_t i = 0; i < data.group.size(); ++i)
    w.row({std::to_string(data.group[i]), fmt(data.covariate[i]), std::to_string(data.response[i])});
}

std::string trace_header(int theta_dim, int lambda_cols) {
  std::string h = "iter,accepted,step_size,leapfrog,warped_logp,latent_logp,div,lambda_norm";
  for (int i = 0; i < theta_dim; ++i) h += ",theta" + std::to_string(i);
  for (int i = 0; i < lambda_cols; ++i) h += ",lam" + std::to_string(i);
  return h;
}

std::string samples_header(int dim) {
  std::string h = "iter";
  for (int i = 1; i <= dim; ++i) h += ",z" + std::to_string(i);
  return h;
}

json stats_to_json(const SummaryStats& stats) {
  json j;
  j["mean"] = stats.mean;
  j["std"] = stats.stddev;
  if (stats.ess.empty())
    j["ess"] = nullptr;
  else
    j["ess"] = stats.ess;
  j["acceptance_rate"] = stats.acceptance_rate;
  j["divergences"] = stats.divergences;
  return j;
}

json truth_to_json(const TargetModel& target) {
  // Analytic moments where they are known in closed form.
  if (const auto* g = dynamic_cast<const GaussianAnalytic*>(&target))
    return json{{"mean", g->mean()}, {"std", g->stddev()}};
  if (const auto* f = dynamic_cast<const Funnel*>(&target)) {
    const double a = f->a();
    return json{{"mean", Vec{0.0, 0.0}}, {"std", Vec{std::exp(a * a), 1.0}}};
  }
  if (const auto* b = dynamic_cast<const Banana*>(&target)) {
    const double var2 = 1.0 + b->b() * b->b() * 2.0 * 1e4;
    return json{{"mean", Vec{0.0, 0.0}}, {"std", Vec{10.0, std::sqrt(var2)}}};
  }
  return nullptr;
}

}  // namespace

RunOutputs run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const auto t_start = std::chrono::steady_clock::now();

  const fs::path out_dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw io_error("cannot create output directory '" + out_dir.string() + "'");

  MultilevelData dataset;
  auto target = build_target(cfg.target, &dataset);
  TransportMap map = build_flow(cfg.flow, target->dim());
  const TrainerConfig tcfg = trainer_config(cfg);
  const int d = target->dim();

  RunOutputs outputs;
  if (cfg.target.name == "multilevel_logit") {
    outputs.dataset_csv = out_dir / "dataset.csv";
    write_dataset_csv(outputs.dataset_csv, dataset);
  }

  outputs.trace_csv = out_dir / "trace.csv";
  outputs.samples_csv = out_dir / "samples.csv";
  outputs.summary_json = out_dir / "summary.json";

  const int lambda_cols = map.n_params() <= 16 ? map.n_params() : 0;
  CsvWriter trace(outputs.trace_csv, trace_header(target->theta_dim(), lambda_cols));
  CsvWriter samples(outputs.samples_csv, samples_header(d));

  Chain kept(Vec{}, d);
  long n_accepted = 0;
  long n_divergent = 0;

  log_info("run: method=" + cfg.trainer.method + " target=" + cfg.target.name +
           " flow=" + cfg.flow.kind + " iterations=" + std::to_string(cfg.trainer.iterations) +
           " seed=" + std::to_string(cfg.seed));

  const TraceSink sink = [&](const TraceRecord& rec) {
    std::vector<std::string> cells;
    cells.reserve(static_cast<size_t>(8 + rec.theta.size() + rec.lambda.size()));
    cells.push_back(std::to_string(rec.iter));
    cells.push_back(rec.accepted ? "1" : "0");
    cells.push_back(fmt(rec.step_size));
    cells.push_back(std::to_string(rec.n_leapfrog));
    cells.push_back(fmt(rec.warped_logp));
    cells.push_back(fmt(rec.latent_logp));
    cells.push_back(rec.divergent ? "1" : "0");
    cells.push_back(fmt(rec.lambda_norm));
    for (double t : rec.theta) cells.push_back(fmt(t));
    for (double l : rec.lambda) cells.push_back(fmt(l));
    trace.row(cells);

    if (rec.accepted) n_accepted += 1;
    if (rec.divergent) n_divergent += 1;
    if (rec.iter >= tcfg.freeze_window) {
      std::vector<std::string> srow;
      srow.push_back(std::to_string(rec.iter));
      for (double zi : rec.z) srow.push_back(fmt(zi));
      samples.row(srow);
      kept.push(rec.z);
    }
  };

  RunState final_state = run(tcfg, *target, map, sink);

  SummaryStats stats;
  if (kept.n() > 0) {
    stats = moments(kept);
    stats.ess.assign(static_cast<size_t>(d), 0.0);
    for (int j = 0; j < d; ++j) {
      try {
        stats.ess[static_cast<size_t>(j)] = ess(kept, j);
      } catch (const std::exception&) {
        stats.ess.clear();
        break;
      }
    }
  }
  stats.acceptance_rate = static_cast<double>(n_accepted) / static_cast<double>(tcfg.iterations);
  stats.divergences = n_divergent;

  json summary;
  summary["config"] = config_to_json(cfg);
  summary["seed"] = cfg.seed;
  summary["method"] = cfg.trainer.method;
  summary["target"] = cfg.target.name;
  summary["final_theta"] = target->theta();
  summary["flow_kind"] = cfg.flow.kind;
  summary["flow_params"] = map.params();
  summary["stats"] = stats_to_json(stats);
  summary["counters"] = {{"chain_reinits", final_state.counters.chain_reinits},
                         {"divergences", final_state.counters.divergences},
                         {"skipped_lambda_updates", final_state.counters.skipped_lambda_updates},
                         {"skipped_theta_updates", final_state.counters.skipped_theta_updates}};
  summary["n_kept_samples"] = kept.n();
  summary["truth"] = truth_to_json(*target);

  // Draws from the fitted posterior, grouped: per-group per-dimension std.
  if (cfg.eval.n_groups_table1 > 0) {
    outputs.table1_csv = out_dir / "table1.csv";
    std::string header = "group";
    for (int i = 1; i <= d; ++i) header += ",std_z" + std::to_string(i);
    CsvWriter table(outputs.table1_csv, header);
    const GroupedStdResult grouped = fitted_std_protocol(
        map, cfg.eval.n_groups_table1, cfg.eval.n_posterior_samples, cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    for (int g = 0; g < cfg.eval.n_groups_table1; ++g) {
      std::vector<std::string> cells{std::to_string(g)};
      for (int j = 0; j < d; ++j) cells.push_back(fmt(grouped.group_std[static_cast<size_t>(g)][j]));
      table.row(cells);
    }
    summary["table1"] = {{"std", grouped.mean_std}, {"se", grouped.se},
                         {"groups", cfg.eval.n_groups_table1},
                         {"samples_per_group", cfg.eval.n_posterior_samples}};
  }

  {
    std::ofstream out(outputs.summary_json, std::ios::binary);
    if (!out) throw io_error("cannot open '" + outputs.summary_json.string() + "' for writing");
    out << summary.dump(2) << "\n";
  }

  const auto t_end = std::chrono::steady_clock::now();
  const double secs = std::chrono::duration<double>(t_end - t_start).count();
  log_info("run: done in " + fmt(secs) + "s, acceptance " + fmt(stats.acceptance_rate) +
           ", divergences " + std::to_string(n_divergent));

  outputs.stats = stats;
  outputs.final_theta = target->theta();
  outputs.final_flow_params = map.params();
  outputs.counters = final_state.counters;
  return outputs;
}

GroupedStdResult fitted_std_protocol(const TransportMap& map, int n_groups, long n_per_group,
                                     uint64_t seed) {
  require(n_groups >= 1 && n_per_group >= 2, "fitted_std_protocol: bad sizes");
  const int d = map.dim();
  GroupedStdResult result;
  result.mean_std.assign(static_cast<size_t>(d), 0.0);
  result.se.assign(static_cast<size_t>(d), 0.0);
  Vec m2(static_cast<size_t>(d), 0.0);
  Rng rng(seed);
  for (int g = 0; g < n_groups; ++g) {
    // streaming per-group moments
    Vec mean(static_cast<size_t>(d), 0.0);
    Vec gm2(static_cast<size_t>(d), 0.0);
    for (long s = 0; s < n_per_group; ++s) {
      const FlowForward fwd = map.forward(rng.normal_vec(d));
      for (int j = 0; j < d; ++j) {
        const double x = fwd.z[static_cast<size_t>(j)];
        const double delta = x - mean[static_cast<size_t>(j)];
        mean[static_cast<size_t>(j)] += delta / static_cast<double>(s + 1);
        gm2[static_cast<size_t>(j)] += delta * (x - mean[static_cast<size_t>(j)]);
      }
    }
    Vec sd(static_cast<size_t>(d));
    for (int j = 0; j < d; ++j)
      sd[static_cast<size_t>(j)] = std::sqrt(gm2[static_cast<size_t>(j)] / static_cast<double>(n_per_group - 1));
    for (int j = 0; j < d; ++j) {
      const double delta = sd[static_cast<size_t>(j)] - result.mean_std[static_cast<size_t>(j)];
      result.mean_std[static_cast<size_t>(j)] += delta / static_cast<double>(g + 1);
      m2[static_cast<size_t>(j)] += delta * (sd[static_cast<size_t>(j)] - result.mean_std[static_cast<size_t>(j)]);
    }
    result.group_std.push_back(std::move(sd));
  }
  if (n_groups > 1) {
    for (int j = 0; j < d; ++j)
      result.se[static_cast<size_t>(j)] = std::sqrt(
          m2[static_cast<size_t>(j)] / static_cast<double>(n_groups - 1) / static_cast<double>(n_groups));
  }
  return result;
}

Chain load_samples_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw io_error("empty samples file '" + path.string() + "'");
  int d = 0;
  for (char c : line)
    if (c == ',') d += 1;
  require(d >= 1, "samples.csv: no sample columns");
  Chain chain(Vec{}, d);
  Vec z(static_cast<size_t>(d));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');  // iter column
    for (int j = 0; j < d; ++j) {
      if (!std::getline(ss, cell, ',')) throw io_error("samples.csv: short row");
      z[static_cast<size_t>(j)] = std::strtod(cell.c_str(), nullptr);
    }
    chain.push(z);
  }
  return chain;
}

namespace {

json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw io_error("malformed JSON in '" + path.string() + "': " + e.what());
  }
  return j;
}

}  // namespace

CompareReport compare_runs(const fs::path& dir_a, const fs::path& dir_b, const std::string& truth_path,
                           const fs::path& out_path) {
  const json sum_a = load_json(dir_a / "summary.json");
  const json sum_b = load_json(dir_b / "summary.json");
  if (sum_a.at("target") != sum_b.at("target") ||
      sum_a.at("config").at("target") != sum_b.at("config").at("target"))
    throw contract_error("compare: runs use different targets");

  json report;
  std::ostringstream text;
  const std::string method_a = sum_a.at("method").get<std::string>();
  const std::string method_b = sum_b.at("method").get<std::string>();
  report["target"] = sum_a.at("target");
  report["run_a"] = {{"dir", dir_a.string()}, {"method", method_a}};
  report["run_b"] = {{"dir", dir_b.string()}, {"method", method_b}};
  text << "compare: target " << sum_a.at("target").get<std::string>() << "\n";
  text << "  A: " << dir_a.string() << " (" << method_a << ")\n";
  text << "  B: " << dir_b.string() << " (" << method_b << ")\n";

  // Distance to truth from the persisted run statistics.
  json truth = nullptr;
  if (!truth_path.empty())
    truth = load_json(truth_path);
  else if (sum_a.contains("truth") && !sum_a.at("truth").is_null())
    truth = sum_a.at("truth");
  if (!truth.is_null()) {
    const Vec tm = truth.at("mean").get<Vec>();
    const Vec ts = truth.at("std").get<Vec>();
    auto dist = [&](const json& sum) {
      SummaryStats st;
      st.mean = sum.at("stats").at("mean").get<Vec>();
      st.stddev = sum.at("stats").at("std").get<Vec>();
      return compare_to_truth(st, tm, ts);
    };
    const TruthComparison ca = dist(sum_a);
    const TruthComparison cb = dist(sum_b);
    report["distance"] = {
        {"a", {{"abs_err_mean", ca.abs_err_mean}, {"abs_err_std", ca.abs_err_std}, {"sse", ca.sse}}},
        {"b", {{"abs_err_mean", cb.abs_err_mean}, {"abs_err_std", cb.abs_err_std}, {"sse", cb.sse}}}};
    std::string winner = "tie";
    if (ca.sse < cb.sse) winner = "a";
    else if (cb.sse < ca.sse) winner = "b";
    report["winner_moment_distance"] = winner;
    text << "  distance to truth (sse): A=" << fmt(ca.sse) << " B=" << fmt(cb.sse)
         << " winner=" << winner << "\n";
  }

  // Cumulative ESS of the stored latent samples at shared prefix lengths.
  const Chain chain_a = load_samples_csv(dir_a / "samples.csv");
  const Chain chain_b = load_samples_csv(dir_b / "samples.csv");
  const long n_shared = std::min(chain_a.n(), chain_b.n());
  if (n_shared >= 16) {
    std::vector<long> checkpoints;
    for (long c = 16; c < n_shared; c *= 2) checkpoints.push_back(c);
    checkpoints.push_back(n_shared);
    Vec ess_a, ess_b;
    for (long c : checkpoints) {
      double worst_a = std::numeric_limits<double>::infinity();
      double worst_b = std::numeric_limits<double>::infinity();
      for (int j = 0; j < chain_a.dim; ++j) worst_a = std::min(worst_a, ess_prefix(chain_a, j, c));
      for (int j = 0; j < chain_b.dim; ++j) worst_b = std::min(worst_b, ess_prefix(chain_b, j, c));
      ess_a.push_back(worst_a);
      ess_b.push_back(worst_b);
    }
    report["ess"] = {{"checkpoints", checkpoints}, {"a", ess_a}, {"b", ess_b}};
    std::string winner = "tie";
    if (ess_a.back() > ess_b.back()) winner = "a";
    else if (ess_b.back() > ess_a.back()) winner = "b";
    report["winner_final_ess"] = winner;
    text << "  final min-ESS at n=" << n_shared << ": A=" << fmt(ess_a.back())
         << " B=" << fmt(ess_b.back()) << " winner=" << winner << "\n";
  }

  CompareReport result;
  result.json_path = out_path;
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw io_error("cannot open '" + out_path.string() + "' for writing");
  out << report.dump(2) << "\n";
  result.text = text.str();
  return result;
}

}  // namespace tsclimb

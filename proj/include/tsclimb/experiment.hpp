#pragma once

#include <filesystem>

#include "tsclimb/config.hpp"
#include "tsclimb/diagnostics.hpp"

namespace tsclimb {

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunOutputs {
  std::filesystem::path trace_csv;
  std::filesystem::path samples_csv;
  std::filesystem::path summary_json;
  std::filesystem::path table1_csv;    // only when eval.n_groups_table1 > 0
  std::filesystem::path dataset_csv;   // only for synthetic-dataset targets
  SummaryStats stats;
  Vec final_theta;
  Vec final_flow_params;
  RunCounters counters;
};

// Executes one configured experiment and persists trace.csv, samples.csv
// and summary.json (plus table1.csv / dataset.csv when applicable) under
// cfg.output_dir. Every emitted file is a pure function of (config, seed).
RunOutputs run_experiment(const ExperimentConfig& cfg);

struct CompareReport {
  std::string text;                 // human-readable report, also printed
  std::filesystem::path json_path;  // compare.json
};

// Compares two finished runs on the same target: distance to ground truth
// (when a truth JSON with "mean"/"std" arrays is given) and cumulative ESS
// of the stored latent samples at shared checkpoints.
CompareReport compare_runs(const std::filesystem::path& dir_a, const std::filesystem::path& dir_b,
                           const std::string& truth_path = "",
                           const std::filesystem::path& out_path = "compare.json");

// Latent samples persisted by a run (samples.csv).
Chain load_samples_csv(const std::filesystem::path& path);

struct GroupedStdResult {
  std::vector<Vec> group_std;  // per group, per dimension
  Vec mean_std;                // across groups
  Vec se;                      // standard error across groups
};

// Standard deviation of draws from the fitted posterior, computed over
// n_groups independent groups of n_per_group draws each.
GroupedStdResult fitted_std_protocol(const TransportMap& map, int n_groups, long n_per_group,
                                     uint64_t seed);

}  // namespace tsclimb

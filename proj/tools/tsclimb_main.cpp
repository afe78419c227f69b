#include <atomic>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tsclimb/experiment.hpp"
#include "tsclimb/log.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

int run_command(const std::vector<std::string>& config_paths, long seed_override,
                const std::string& out_override, int jobs) {
  using tsclimb::ExperimentConfig;

  std::vector<ExperimentConfig> configs;
  for (const auto& path : config_paths) {
    ExperimentConfig cfg = tsclimb::parse_config(path);
    if (seed_override >= 0) cfg.seed = static_cast<uint64_t>(seed_override);
    if (!out_override.empty()) {
      if (config_paths.size() == 1) {
        cfg.output_dir = out_override;
      } else {
        // Sweep mode: isolate each run under the base directory.
        const auto stem = std::filesystem::path(path).stem().string();
        cfg.output_dir = (std::filesystem::path(out_override) / stem).string();
      }
    }
    configs.push_back(std::move(cfg));
  }

  std::atomic<size_t> next{0};
  std::atomic<int> status{kExitOk};
  std::mutex io_mutex;
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= configs.size()) return;
      try {
        const auto outputs = tsclimb::run_experiment(configs[i]);
        std::lock_guard<std::mutex> lock(io_mutex);
        std::printf("wrote %s\n", outputs.summary_json.string().c_str());
      } catch (const tsclimb::io_error& e) {
        std::lock_guard<std::mutex> lock(io_mutex);
        tsclimb::log_error(e.what());
        status.store(kExitIo);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(io_mutex);
        tsclimb::log_error(e.what());
        status.store(kExitConfig);
      }
    }
  };

  const int n_workers = std::max(1, std::min<int>(jobs, static_cast<int>(configs.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return status.load();
}

}  // namespace

int main(int argc, char** argv) {
  tsclimb::set_log_level(tsclimb::LogLevel::Info);
  tsclimb::set_log_level_from_env();

  CLI::App app{"Transport score climbing: forward-KL variational inference trained from warped-space HMC"};
  app.require_subcommand(1);

  // run
  auto* run_cmd = app.add_subcommand("run", "Run one or more experiment configs");
  std::vector<std::string> config_paths;
  long seed_override = -1;
  std::string out_override;
  int jobs = 1;
  run_cmd->add_option("--config", config_paths, "Path to a JSON experiment config (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--seed", seed_override, "Override the config seed");
  run_cmd->add_option("--out", out_override, "Override the output directory");
  run_cmd->add_option("--jobs", jobs, "Run configs in parallel")->check(CLI::PositiveNumber);

  // compare
  auto* cmp_cmd = app.add_subcommand("compare", "Compare two finished runs");
  std::string dir_a, dir_b, truth_path, cmp_out = "compare.json";
  cmp_cmd->add_option("dir_a", dir_a, "First run directory")->required();
  cmp_cmd->add_option("dir_b", dir_b, "Second run directory")->required();
  cmp_cmd->add_option("--truth", truth_path, "JSON file with ground-truth 'mean' and 'std' arrays")
      ->check(CLI::ExistingFile);
  cmp_cmd->add_option("--out", cmp_out, "Where to write compare.json");

  // print-defaults
  auto* def_cmd = app.add_subcommand("print-defaults", "Print the default config as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run_cmd->parsed()) return run_command(config_paths, seed_override, out_override, jobs);
    if (cmp_cmd->parsed()) {
      const auto report = tsclimb::compare_runs(dir_a, dir_b, truth_path, cmp_out);
      std::cout << report.text;
      std::printf("wrote %s\n", report.json_path.string().c_str());
      return kExitOk;
    }
    if (def_cmd->parsed()) {
      std::cout << tsclimb::config_to_json(tsclimb::default_config()).dump(2) << "\n";
      return kExitOk;
    }
  } catch (const tsclimb::io_error& e) {
    tsclimb::log_error(e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    tsclimb::log_error(e.what());
    return kExitConfig;
  }
  return kExitOk;
}

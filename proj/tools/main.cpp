// transopt command line: run, sweep, compare and check-conditions.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "transopt/diagnostics.hpp"
#include "transopt/error.hpp"
#include "transopt/experiment.hpp"

namespace fs = std::filesystem;
using namespace transopt;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<StepIndex> stride;
  std::optional<fs::path> out;
};

ExperimentConfig apply(ExperimentConfig cfg, const Overrides& o) {
  if (o.seed) cfg.problem.seed = *o.seed;
  if (o.stride) {
    if (*o.stride < 1) throw ConfigError("--stride must be >= 1");
    cfg.run.stride = *o.stride;
  }
  return cfg;
}

void print_summary(const RunRecord& r) {
  const RunSummary s = summarize(r);
  std::string line = fmt::format("{}  {} on {}  steps={}  train_loss={:.6g}", r.directory.string(), s.optimizer,
                                 s.problem, s.steps, s.final_train_loss);
  if (s.final_regret) line += fmt::format("  regret={:.6g}", *s.final_regret);
  if (s.heldout_accuracy) line += fmt::format("  heldout_acc={:.4f}", *s.heldout_accuracy);
  line += fmt::format("  ({:.2f}s)", r.wall_seconds);
  std::cout << line << '\n';
}

int cmd_run(const fs::path& config, const Overrides& o) {
  const ExperimentConfig cfg = apply(load_config(config), o);
  for (const auto& r : run_repeated(cfg, run_directory(cfg, o.out))) print_summary(r);
  return 0;
}

int cmd_sweep(const fs::path& dir, const Overrides& o, unsigned jobs) {
  if (!fs::is_directory(dir)) throw ConfigError(fmt::format("{} is not a directory", dir.string()));
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".yaml" || ext == ".yml")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError(fmt::format("no .yaml configs in {}", dir.string()));

  // Parse everything up front so a bad config fails before any run starts.
  std::vector<ExperimentConfig> configs;
  for (const auto& f : files) configs.push_back(apply(load_config(f), o));

  std::vector<std::vector<RunRecord>> results(configs.size());
  std::vector<std::string> errors(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        results[i] = run_repeated(configs[i], run_directory(configs[i], o.out));
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const unsigned n = std::max(1U, std::min<unsigned>(jobs, static_cast<unsigned>(configs.size())));
  std::vector<std::thread> pool;
  for (unsigned k = 0; k < n; ++k) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  int status = 0;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (!errors[i].empty()) {
      std::cerr << files[i].string() << ": " << errors[i] << '\n';
      status = 1;
      continue;
    }
    for (const auto& r : results[i]) print_summary(r);
  }
  return status;
}

int cmd_compare(const std::vector<fs::path>& dirs, const std::optional<fs::path>& out) {
  std::vector<RunSummary> runs;
  for (const auto& d : dirs) runs.push_back(load_summary(d));
  const auto rows = compare_runs(runs);
  if (out) {
    write_comparison_csv(rows, *out);
  } else {
    write_comparison_csv(rows, std::cout);
  }
  return 0;
}

int cmd_check(const fs::path& dir) {
  const auto kv = read_key_value_csv(dir / "conditions.csv");
  auto value = [&kv](std::string_view key) -> std::string {
    for (const auto& [k, v] : kv) {
      if (k == key) return v;
    }
    return "absent";
  };
  for (const auto& [k, v] : kv) std::cout << fmt::format("{:<28} {}\n", k, v);

  int status = 0;
  if (value("eta_bound_applicable") == "true" && value("eta_bound_holds") != "true") {
    std::cout << "FAIL: 1/eta_hat exceeded its bound\n";
    status = 1;
  }
  if (value("hypotheses_all") == "true" && value("measured_regret") != "absent") {
    const double measured = std::stod(value("measured_regret"));
    for (const char* key : {"bound_cor1_total", "bound_cor2_total"}) {
      const std::string b = value(key);
      if (b != "absent" && std::stod(b) < measured) {
        std::cout << fmt::format("FAIL: {} = {} is below the measured regret {}\n", key, b, measured);
        status = 1;
      }
    }
  }
  if (status == 0) std::cout << "OK\n";
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Seeded optimizer experiments with regret and convergence diagnostics"};
  app.require_subcommand(1);

  Overrides o;
  std::uint64_t seed = 0;
  StepIndex stride = 1;
  std::string out;
  unsigned jobs = 1;

  std::vector<CLI::App*> with_overrides;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Override problem.seed");
    sub->add_option("--stride", stride, "Override run.stride");
    sub->add_option("--out", out, "Output root (overrides TRANSOPT_OUT and run.out)");
    with_overrides.push_back(sub);
  };

  std::string config;
  auto* run = app.add_subcommand("run", "Run one config");
  run->add_option("config", config, "Config file")->required()->check(CLI::ExistingFile);
  add_common(run);

  std::string config_dir;
  auto* sweep = app.add_subcommand("sweep", "Run every .yaml config in a directory");
  sweep->add_option("config-dir", config_dir, "Directory of configs")->required()->check(CLI::ExistingDirectory);
  sweep->add_option("--jobs,-j", jobs, "Parallel runs")->check(CLI::PositiveNumber);
  add_common(sweep);

  std::vector<std::string> run_dirs;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "Tabulate endpoints of runs over the same problem");
  compare->add_option("run-dirs", run_dirs, "Run directories")->required()->check(CLI::ExistingDirectory);
  compare->add_option("--out", compare_out, "Write the table to this file instead of stdout");

  std::string check_dir;
  auto* check = app.add_subcommand("check-conditions", "Print a run's condition report");
  check->add_option("run-dir", check_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  for (CLI::App* sub : with_overrides) {
    if (!*sub) continue;
    if (sub->count("--seed") > 0) o.seed = seed;
    if (sub->count("--stride") > 0) o.stride = stride;
    if (sub->count("--out") > 0) o.out = out;
  }

  try {
    if (*run) return cmd_run(config, o);
    if (*sweep) return cmd_sweep(config_dir, o, jobs);
    if (*compare) {
      std::vector<fs::path> dirs(run_dirs.begin(), run_dirs.end());
      return cmd_compare(dirs, compare_out.empty() ? std::nullopt : std::optional<fs::path>(compare_out));
    }
    if (*check) return cmd_check(check_dir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

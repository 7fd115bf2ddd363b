#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "transopt/diagnostics.hpp"
#include "transopt/optim.hpp"
#include "transopt/problems.hpp"
#include "transopt/schedule.hpp"

namespace transopt {

enum class ProblemKind { quadratic, reddi, logistic, mlp };

std::string_view to_string(ProblemKind k);

struct ProblemConfig {
  ProblemKind kind = ProblemKind::quadratic;
  std::uint64_t seed = 42;
  std::size_t dim = 10;           ///< quadratic (default 10), logistic (default 5)
  double c = 3.0;                 ///< reddi
  std::size_t n_samples = 1000;   ///< logistic
  std::size_t batch_size = 128;   ///< logistic, mlp
  double box_radius = 10.0;       ///< logistic
  std::vector<std::size_t> layers{2, 16, 16, 2};
  std::size_t n_train = 1000;
  std::size_t n_test = 1000;
  double separation = 1.0;

  friend bool operator==(const ProblemConfig&, const ProblemConfig&) = default;
};

struct RunConfig {
  StepIndex horizon = 1000;
  std::optional<std::int64_t> epochs;  ///< logistic and mlp only; determines horizon
  StepIndex stride = 1;                ///< record every stride-th step (plus t = 1 and t = T)
  StepIndex eval_stride = 0;           ///< full evaluation every eval_stride steps; 0 = final step only
  int repeat = 1;
  std::string out = "runs";

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

struct ExperimentConfig {
  ProblemConfig problem;
  OptimizerSpec optimizer{StepConfig{}, DstadamSpec{}};
  RunConfig run;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Parses the YAML config format documented in docs/config.md. Every omitted
/// field takes its default; unknown keys and invariant violations throw ConfigError.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical text with every field spelled out. parse_config(serialize(c)) == c.
std::string serialize(const ExperimentConfig& cfg);

/// Short name used in directory names and comparison tables ("dstadam", "adabound", ...).
std::string optimizer_label(const OptimizerSpec& spec);

/// FNV-1a 64 of the canonical text.
std::uint64_t config_hash(const ExperimentConfig& cfg);

/// Output root: `override_root`, else $TRANSOPT_OUT, else cfg.run.out.
std::filesystem::path output_root(const ExperimentConfig& cfg,
                                  const std::optional<std::filesystem::path>& override_root = std::nullopt);

/// `<root>/<problem>-<optimizer>-<hash>`.
std::filesystem::path run_directory(const ExperimentConfig& cfg,
                                    const std::optional<std::filesystem::path>& override_root = std::nullopt);

std::unique_ptr<OnlineProblem> make_problem(const ProblemConfig& cfg, StepIndex horizon);

struct RecordRow {
  StepIndex t = 0;
  double loss = 0.0;
  std::optional<double> regret;
  double lr_min = 0.0;
  double lr_median = 0.0;
  double lr_max = 0.0;
};

struct RunRecord {
  ExperimentConfig config;
  std::filesystem::path directory;
  std::vector<RecordRow> rows;
  ConditionReport report;
  Evaluation final_eval;
  std::optional<double> final_regret;
  std::optional<double> sup_regret_over_sqrt_t;
  double wall_seconds = 0.0;
};

/// Executes one run into `directory` (created if missing). Writes loss.csv,
/// regret.csv, lr_hist.csv, conditions.csv, record.csv, eval.csv, summary.csv,
/// config.yaml and timing.txt.
RunRecord run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& directory);
RunRecord run_experiment(const ExperimentConfig& cfg);

/// One run per repeat: seeds seed, seed + 1, ... written to `<dir>/rep-<k>` when repeat > 1.
std::vector<RunRecord> run_repeated(const ExperimentConfig& cfg, const std::filesystem::path& directory);

/// Endpoint numbers read back from a run directory's summary.csv.
struct RunSummary {
  std::string problem;
  std::string problem_key;  ///< hash of the problem section; equal keys mean the same data stream
  std::string optimizer;
  StepIndex steps = 0;
  double final_train_loss = 0.0;
  std::optional<double> final_regret;
  std::optional<double> heldout_accuracy;
  std::optional<double> sup_regret_over_sqrt_t;
};

RunSummary summarize(const RunRecord& record);
RunSummary load_summary(const std::filesystem::path& run_dir);

/// One row per run. Throws ComparisonError on fewer than two runs or mixed problems.
std::vector<RunSummary> compare_runs(const std::vector<RunSummary>& runs);
void write_comparison_csv(const std::vector<RunSummary>& rows, const std::filesystem::path& path);
void write_comparison_csv(const std::vector<RunSummary>& rows, std::ostream& out);

}  // namespace transopt

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "ism/audit.hpp"
#include "ism/core.hpp"

namespace ism {

// Invalid or inconsistent configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unreadable or malformed input data (CLI exit code 2).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Experiment { MedianSweep, RegressionSweep, StepFigure, Audit };

std::string experiment_name(Experiment e);
// Accepts "median", "regression", "step-figure", "audit".
Experiment parse_experiment(const std::string& name);

struct DataSource {
  enum class Kind { Csv, SyntheticUniform, SyntheticRegression };
  Kind kind = Kind::SyntheticUniform;
  // Csv
  std::string path;
  std::size_t column = 0;
  bool skip_header = false;
  // Synthetic
  std::size_t n = 1000;
  double low = 0.0;
  double high = 1.0;
  // SyntheticRegression: y = <x, theta*> + w with theta* ~ U[-5, 5]^d,
  // x ~ U[-x_half_width, x_half_width]^d, w ~ U[-noise_half_width, ...].
  int dim = 1;
  double noise_half_width = 0.05;
  double x_half_width = 2.0;
};

struct SgdSweepConfig {
  std::vector<double> sample_rates{0.004, 0.016, 0.064};
  double sigma = 2.0;
  std::vector<double> eta0_grid{0.05, 0.1, 0.3, 1.0, 3.0, 10.0};
  std::int64_t max_steps = 10000;
};

struct AuditSuiteConfig {
  std::size_t pairs = 200;
  std::size_t n = 50;
  std::size_t grid = 100;
  std::size_t regression_pairs = 100;
  std::size_t regression_n = 40;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::MedianSweep;
  std::vector<double> epsilons{0.1};
  int trials = 1;
  std::uint64_t seed = 0;
  DataSource source;

  // Median
  double range_low = 0.0;
  double range_high = 1.0;
  std::optional<double> rho;    // default 1/n
  std::optional<double> delta;  // default n^-1.1
  std::size_t grid_points = 0;

  // Regression
  std::vector<double> alphas{1.0};
  double theta_box = 10.0;
  int mh_steps = 500;
  SgdSweepConfig sgd;

  // Step figure
  std::size_t step_n = 400;
  double step_threshold = 100.0;

  AuditSuiteConfig audit;

  // 0 means one worker per hardware thread.
  int workers = 0;

  // Throws ConfigError.
  void validate() const;
};

// Keys mirror the struct fields; unknown keys are rejected. `experiment`, when
// given, is used if the file names none and must match it otherwise. Throws
// ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j,
                              std::optional<Experiment> experiment = {});
ExperimentConfig load_config(const std::string& path,
                             std::optional<Experiment> experiment = {});

// One numeric column of a CSV file. Throws DataError naming the file row of
// the first non-numeric cell.
Dataset1D load_csv_column(const std::string& path, std::size_t column,
                          bool skip_header = false);

struct RunRecord {
  std::string experiment;
  std::string mechanism;
  double epsilon = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  std::vector<double> output;  // NaN when infeasible
  double abs_error = 0.0;
  double wall_ms = 0.0;
};

struct SweepResult {
  std::vector<RunRecord> records;
  // Free-form metadata (chosen hyperparameters, infeasible cells).
  nlohmann::json notes = nlohmann::json::object();
  bool infeasible = false;
};

// Per-trial seed: derive_seed(config seed, epsilon index, trial index).
std::uint64_t trial_seed(std::uint64_t base, std::size_t epsilon_index,
                         std::size_t trial);

// Runs fn(i) for i in [0, count) on up to `workers` threads.
void parallel_for(std::size_t count, int workers,
                  const std::function<void(std::size_t)>& fn);

// Mechanisms: inverse_sensitivity, smooth_laplace, laplace. Reference is the
// empirical median of the clamped data.
SweepResult run_median_sweep(const ExperimentConfig& config);

// Mechanisms: inverse_sensitivity (MH) and private_sgd with the (q, eta0)
// giving the smallest median error at each epsilon. Error is ||theta -
// theta*||. Experiment names carry the loss parameter, e.g.
// "regression_alpha1".
SweepResult run_regression_sweep(const ExperimentConfig& config);

// One step-figure table per epsilon; throws ConfigError unless T eps >= 10.
std::vector<std::vector<StepFigureRow>> run_step_figure(
    const ExperimentConfig& config);

std::vector<AuditReport> run_audit_suite(const ExperimentConfig& config);

// Linear interpolation between order statistics: position (N - 1) p.
double quantile(std::vector<double> values, double p);

inline constexpr const char* kCsvHeader =
    "experiment,mechanism,epsilon,trial,seed,output,abs_error,wall_ms";

// CSV text (header plus one line per record); records sorted by
// (experiment, mechanism, epsilon, trial) first. Multi-dimensional outputs
// are joined with ';'.
std::string records_csv(std::vector<RunRecord> records);

// Per experiment, mechanism and epsilon: median, q05, q95 of abs_error
// (finite values only) and the count of infeasible trials.
nlohmann::json summarize(const std::vector<RunRecord>& records);

// Writes `path` (CSV) and `path.summary.json`. Throws std::runtime_error on
// I/O failure.
void emit_results(const std::vector<RunRecord>& records,
                  const std::string& path,
                  const nlohmann::json& notes = nlohmann::json::object());

std::string step_figure_csv(
    const std::vector<double>& epsilons,
    const std::vector<std::vector<StepFigureRow>>& tables);

}  // namespace ism

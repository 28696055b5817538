#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "falcon/algorithms.hpp"
#include "falcon/analysis.hpp"
#include "falcon/environments.hpp"

namespace falcon {

/// Bad configuration: unknown key or id, out-of-range value, unwritable
/// output. The CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A check the CLI was asked to perform did not hold (exit code 3).
class CheckFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string algorithm = "safe-falcon";
  std::string env = "intro";
  std::optional<std::size_t> env_k;
  double env_b = 1.0 / 16.0;
  std::uint64_t tau1 = 2;
  double delta = 0.05;
  std::uint64_t horizon = 1024;
  std::uint64_t runs = 1;
  std::uint64_t seed = 1;
  bool avg_epoch_test = false;
  std::filesystem::path out = "out";
  /// Upper bound on runs * T.
  std::uint64_t round_budget = 2'000'000'000ULL;

  AlgorithmConfig algorithm_config() const;
  /// Throws ConfigError.
  void validate() const;
};

/// Recognized keys: algorithm, env, env.K, env.B, tau1, delta, T, runs,
/// seed, avg_epoch_test, out.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Flat `key = value` lines; `#` starts a comment; blank lines are skipped.
ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

EnvPtr make_environment(const ExperimentConfig& config);
std::unique_ptr<RegressionOracle> make_oracle(const BanditEnvironment& env);

/// Runs one replication with the configured algorithm.
RunTrace run_once(const ExperimentConfig& config, const BanditEnvironment& env,
                  const RegressionOracle& oracle, std::uint64_t run_id);

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<std::vector<EpochSummary>> per_run;
  std::vector<EpochAggregate> aggregate;
  std::vector<std::optional<std::uint64_t>> detection_round;
  std::vector<int> final_m_hat;
  std::uint64_t trace_rows = 0;

  /// Epoch containing the first failed check of run i, if any.
  std::optional<int> flip_epoch(std::size_t run) const;
};

/// Called with each finished trace in run order before it is discarded.
using TraceSink = std::function<void(std::uint64_t run_id, const RunTrace&)>;

/// Seeded replications seed_i = seed + i, i = 0 .. runs-1.
ExperimentResult run_replications(const ExperimentConfig& config, const TraceSink& sink = {});

inline constexpr const char* kTraceHeader =
    "run_id,t,epoch,context,action,realized_reward,optimal_arm,optimal_mean_reward,"
    "realized_regret,safe,m_hat";

void write_trace_rows(std::ostream& out, std::uint64_t run_id, const RunTrace& trace);
/// Per-run epoch means followed by the cross-run mean and 95% half-width.
void write_epochs_csv(std::ostream& out, const ExperimentResult& result,
                      const std::string& algorithm_column = {});

struct SvgSeries {
  std::string label;
  std::vector<EpochAggregate> points;
};
void write_regret_svg(std::ostream& out, const std::vector<SvgSeries>& series,
                      const std::string& title);

/// Writes trace.csv, epochs.csv and regret.svg under config.out.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Runs both configs and writes a merged epochs.csv (with an algorithm
/// column), flips.csv and regret.svg under `out`. Throws ConfigError when the
/// environments or horizons differ.
std::pair<ExperimentResult, ExperimentResult> compare_experiments(const ExperimentConfig& a,
                                                                  const ExperimentConfig& b,
                                                                  const std::filesystem::path& out);

/// Per-run per-epoch mean realized regret recomputed from a trace.csv stream.
/// Result is indexed [run][epoch order].
std::vector<std::vector<EpochSummary>> summaries_from_trace_csv(std::istream& in,
                                                                std::uint64_t tau1);

}  // namespace falcon

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crnbo/bo_loop.hpp"

namespace crnbo {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kCurveHeader = "iteration,metric,mean,stderr,policy,benchmark";
inline constexpr const char* kWorkersEnv = "CRNBO_WORKERS";

struct ExperimentConfig {
  std::string benchmark = "synthetic-gp";
  nlohmann::json simulator = nlohmann::json::object();
  std::vector<std::string> policies = {"KG", "KG-CRN"};
  LoopOptions loop;
  int macroreps = 20;
  std::vector<double> rho_sweep;  // synthetic only; empty means the simulator's own rho
  std::string output_dir = "results";
  std::uint64_t master_seed = 1;
  int heldout_seeds = 2000;
  int workers = 0;  // 0: environment variable, else hardware concurrency

  /// Missing keys keep their defaults. Throws InvalidInput on bad values.
  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
};

/// max theta-bar minus theta-bar at each recommendation, one value per record entry.
std::vector<double> opportunity_cost(const Simulator& sim, const RunRecord& record);

/// Running fraction of evaluations whose seed was already in the history,
/// one value per record entry (the final entry repeats the last value).
std::vector<double> seed_reuse(const RunRecord& record);

struct HeldOutEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  bool stderr_defined = false;
  int count = 0;
};

/// Mean objective over seeds kHeldOutSeedBase, kHeldOutSeedBase+1, ..., which
/// never coincide with optimisation seeds.
HeldOutEstimate heldout_value(const Simulator& sim, const Point& x, int test_seed_count);

struct MeanStderr {
  double mean = 0.0;
  double std_error = 0.0;
};
/// Mean and standard error of the mean across replications.
MeanStderr mean_stderr(const std::vector<double>& values);

struct SummaryRow {
  std::string policy;
  std::string benchmark;
  std::string metric;
  double mean = 0.0;
  double std_error = 0.0;
  bool best_equivalent = false;
};

/// Marks, per benchmark, the best policy and every policy whose mean +- 2se
/// interval overlaps the best one's.
void mark_best_equivalent(std::vector<SummaryRow>& rows, bool higher_is_better);

struct CurvePoint {
  int iteration = 0;
  std::string metric;
  double mean = 0.0;
  double std_error = 0.0;
  std::string policy;
  std::string benchmark;
};

struct ExperimentResult {
  std::vector<RunRecord> records;   // ordered by (benchmark variant, policy, replication)
  std::vector<std::string> labels;  // benchmark label per record
  std::vector<std::optional<double>> final_cost;        // per record, when the truth is known
  std::vector<std::optional<HeldOutEstimate>> heldout;  // per record
  std::vector<CurvePoint> curves;
  std::vector<SummaryRow> summary;
  bool any_failed = false;
};

/// Benchmark variants of a config: one per rho in the sweep, or just the base.
std::vector<std::pair<std::string, nlohmann::json>> benchmark_variants(const ExperimentConfig& cfg);

/// Runs every (variant, policy, replication) with up to `workers` threads
/// and aggregates. Output order is fixed regardless of scheduling.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Writes runs.jsonl, curves.csv, summary.csv and metadata.json into the
/// output directory. Only metadata.json holds timestamps.
void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& result, double wall_seconds,
                   const std::string& started_at);

std::string curves_csv(const std::vector<CurvePoint>& curves);
std::string summary_csv(const std::vector<SummaryRow>& rows);

/// Worker count: explicit value, else the environment variable, else the
/// hardware concurrency (at least 1).
int resolve_workers(int configured);

/// FNV-1a 64-bit hash rendered as hex.
std::string config_hash(const std::string& text);

}  // namespace crnbo

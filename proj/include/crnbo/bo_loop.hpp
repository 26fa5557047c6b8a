#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crnbo/acquisition.hpp"
#include "crnbo/hyperfit.hpp"
#include "crnbo/simulators.hpp"

namespace crnbo {

struct PolicyVariant {
  std::string name;
  ModelFlags model;
  bool allow_old_seeds = false;
  bool allow_pairs = false;

  /// One of KG, KG-PW, KG-PW-bias, KG-CRN-CS, KG-CRN.
  static PolicyVariant from_name(const std::string& name);
  static std::vector<std::string> names();
};

/// How the inner maximisation set A is built each iteration.
enum class DiscretizationMode {
  LhcPerturb,  // n-point Latin hypercube plus perturbed past points
  FullDomain,  // every lattice point (small finite domains only)
  PastPoints,  // the distinct sampled x only
};

struct LoopOptions {
  int budget = 50;  // N, total evaluations including the initial design
  int n_init = 20;
  int init_seeds = 5;
  bool known_hyperparams = false;  // use the simulator's generative values
  FitOptions fit;
  AcquisitionOptions acquisition;
  RecommendOptions recommendation;
  DiscretizationMode discretization = DiscretizationMode::LhcPerturb;
  /// For fresh-seed policies, additionally search the full seed set and log
  /// the result so the dominance of the full search can be audited.
  bool audit_dominance = false;
};

/// One evaluation (or the final summary entry, which has no evaluation).
struct IterationRecord {
  int n = 0;  // observations available when the decision was made
  bool evaluated = false;
  Point x;
  Seed seed = 0;
  double y = 0.0;
  bool reused_seed = false;
  bool pair = false;
  bool fallback = false;  // no candidate had positive value; x drawn at random
  double acquisition_value = 0.0;
  double fresh_value = 0.0;
  std::optional<double> full_value;  // audited full-seed maximum
  Point recommendation;
  double recommendation_mean = 0.0;
  CrnHyperparams hp;
  double log_ml = 0.0;
  double wall_seconds = 0.0;
};

struct RunRecord {
  std::string policy;
  std::string benchmark;
  std::uint64_t run_key = 0;
  int n_init = 0;
  int budget = 0;
  bool complete = true;
  std::string error;
  std::vector<Point> init_x;
  std::vector<Seed> init_seeds;
  std::vector<double> init_y;
  std::vector<IterationRecord> iterations;
  Point final_recommendation;
};

/// Latin hypercube over the domain with seeds 1..init_seeds assigned round-robin.
Dataset initialize(const Simulator& sim, int n_init, int init_seeds, std::mt19937_64& rng);

/// Runs one optimisation. All randomness derives from `run_key`, so equal
/// inputs give identical records.
RunRecord run(const PolicyVariant& policy, const Simulator& sim, const LoopOptions& opts, std::uint64_t run_key);

/// Serialised record. Wall-clock timings are left out unless asked for, so
/// the default output is reproducible byte for byte.
nlohmann::json to_json(const RunRecord& record, bool include_timing = false);
nlohmann::json to_json(const CrnHyperparams& hp);

}  // namespace crnbo

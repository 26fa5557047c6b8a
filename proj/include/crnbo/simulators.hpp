#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crnbo/domain.hpp"
#include "crnbo/kernel.hpp"

namespace crnbo {

/// Seeds at or above this label are reserved for held-out evaluation and
/// never handed out during optimisation.
inline constexpr Seed kHeldOutSeedBase = Seed{1} << 40;

/// A seeded objective theta(x, s), always to be maximised. Implementations
/// are pure: the value depends only on (x, s) and the configuration.
class Simulator {
 public:
  virtual ~Simulator() = default;
  virtual std::string name() const = 0;
  virtual const Domain& domain() const = 0;
  /// Throws InvalidInput for x outside the domain or s < 1.
  virtual double evaluate(const Point& x, Seed s) const = 0;
  /// Seed-averaged objective, when known exactly.
  virtual std::optional<double> truth(const Point&) const { return std::nullopt; }
  virtual std::optional<double> truth_max() const { return std::nullopt; }
  /// Generative hyperparameters (prior_mean left at 0), when known.
  virtual std::optional<CrnHyperparams> known_hyperparams() const { return std::nullopt; }
};

// ---------------------------------------------------------------- synthetic

enum class DifferenceMode { OffsetsOnly, BiasOnly };

struct SyntheticGpConfig {
  int grid_size = 100;  // X = {1, ..., grid_size}
  double target_variance = 100.0 * 100.0;
  double target_lengthscale = 5.0;
  double rho = 0.5;
  double total_difference_variance = 50.0 * 50.0;
  DifferenceMode difference_mode = DifferenceMode::OffsetsOnly;
  std::uint64_t master_seed = 0;

  void validate() const;
};

class SyntheticGp final : public Simulator {
 public:
  explicit SyntheticGp(SyntheticGpConfig cfg);

  std::string name() const override { return "synthetic-gp"; }
  const Domain& domain() const override { return domain_; }
  double evaluate(const Point& x, Seed s) const override;
  std::optional<double> truth(const Point& x) const override;
  std::optional<double> truth_max() const override;
  std::optional<CrnHyperparams> known_hyperparams() const override;

  const SyntheticGpConfig& config() const { return cfg_; }
  /// theta-bar over the grid, index i holding x = i + 1.
  const Eigen::VectorXd& truth_vector() const { return truth_; }

 private:
  std::size_t grid_index(const Point& x) const;

  SyntheticGpConfig cfg_;
  Domain domain_;
  Eigen::VectorXd truth_;
  Eigen::MatrixXd bias_sqrt_;  // symmetric square root of the bias covariance
};

// ---------------------------------------------------------------- ATO

struct AtoItem {
  double profit = 1.0;
  double holding_cost = 2.0;
  double production_mean = 0.15;
  double production_sd = 0.0225;
};

struct AtoProduct {
  double arrival_rate = 1.0;
  std::vector<int> key_items;      // all must be in stock to sell
  std::vector<int> non_key_items;  // used when available
};

struct AtoConfig {
  std::vector<AtoItem> items;
  std::vector<AtoProduct> products;
  int threshold_min = 1;
  int threshold_max = 20;
  double warmup = 20.0;
  double horizon = 70.0;
  std::uint64_t master_seed = 0;

  /// Eight items and five products with base-stock replenishment.
  static AtoConfig defaults();
  void validate() const;
};

/// One customer order in the exogenous stream of a seed.
struct AtoOrder {
  double time = 0.0;
  int product = 0;
};

class Ato final : public Simulator {
 public:
  explicit Ato(AtoConfig cfg);

  std::string name() const override { return "ato"; }
  const Domain& domain() const override { return domain_; }
  /// Profit per unit time after the warm-up period.
  double evaluate(const Point& thresholds, Seed s) const override;

  const AtoConfig& config() const { return cfg_; }
  /// The customer stream for seed s, identical for every threshold vector.
  std::vector<AtoOrder> orders(Seed s) const;
  /// k-th production time of item i under seed s.
  double production_time(Seed s, int item, std::uint64_t k) const;

 private:
  AtoConfig cfg_;
  Domain domain_;
};

// ---------------------------------------------------------------- AIS

enum class AisObjective { MeanJourney, SumJourney, Fixed30 };

struct AisConfig {
  double side = 30.0;
  int num_bases = 3;
  double horizon = 1800.0;
  double expected_patients = 30.0;
  double speed = 1.0;
  AisObjective objective = AisObjective::MeanJourney;
  std::uint64_t master_seed = 0;

  void validate() const;
};

struct AisPatient {
  double time = 0.0;
  double x = 0.0;
  double y = 0.0;
};

class Ais final : public Simulator {
 public:
  explicit Ais(AisConfig cfg);

  std::string name() const override { return "ais"; }
  const Domain& domain() const override { return domain_; }
  /// Negated journey-time objective.
  double evaluate(const Point& bases, Seed s) const override;

  const AisConfig& config() const { return cfg_; }
  std::vector<AisPatient> patients(Seed s) const;
  /// Journey-time objective before negation (lower is better).
  double journey_objective(const Point& bases, Seed s) const;

 private:
  AisConfig cfg_;
  Domain domain_;
};

// ---------------------------------------------------------------- registry

SyntheticGpConfig synthetic_config_from_json(const nlohmann::json& j);
AtoConfig ato_config_from_json(const nlohmann::json& j);
AisConfig ais_config_from_json(const nlohmann::json& j);

/// Names accepted by make_simulator.
std::vector<std::string> simulator_names();

/// Builds a registered simulator from its JSON configuration (missing keys
/// take defaults). Throws InvalidInput for unknown names.
std::unique_ptr<Simulator> make_simulator(const std::string& name, const nlohmann::json& cfg = nlohmann::json::object());

}  // namespace crnbo

#include "crnbo/simulators.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

#include "crnbo/errors.hpp"
#include "crnbo/rng.hpp"

namespace crnbo {

namespace {

// Stream identifiers mixed into every counter-stream key.
enum StreamId : std::uint64_t {
  kTruthStream = 1,
  kOffsetStream = 2,
  kBiasStream = 3,
  kWhiteStream = 4,
  kArrivalStream = 5,
  kProductionStream = 6,
  kLocationStream = 7,
};

std::uint64_t seed_key(Seed s) { return static_cast<std::uint64_t>(s); }

void require_seed(Seed s, const char* who) {
  if (!is_observation_seed(s)) throw InvalidInput(std::string(who) + ": seed must be >= 1");
}

// Symmetric square root of a PSD matrix, negative eigenvalues clipped to 0.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& k) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

Eigen::MatrixXd grid_se_cov(int n, double variance, double lengthscale) {
  Eigen::MatrixXd k(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double r = (i - j) / lengthscale;
      k(i, j) = variance * std::exp(-0.5 * r * r);
    }
  }
  return k;
}

Eigen::VectorXd normal_vector(const CounterStream& stream, int n) {
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z[i] = stream.normal(static_cast<std::uint64_t>(i));
  return z;
}

}  // namespace

// ---------------------------------------------------------------- synthetic

void SyntheticGpConfig::validate() const {
  if (grid_size < 2) throw InvalidInput("synthetic-gp: grid_size must be at least 2");
  if (!(target_variance > 0.0) || !(target_lengthscale > 0.0))
    throw InvalidInput("synthetic-gp: target variance and lengthscale must be positive");
  if (!(rho >= 0.0 && rho <= 1.0)) throw InvalidInput("synthetic-gp: rho must lie in [0, 1]");
  if (!(total_difference_variance > 0.0)) throw InvalidInput("synthetic-gp: total_difference_variance must be positive");
}

SyntheticGp::SyntheticGp(SyntheticGpConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  const int n = cfg_.grid_size;
  domain_ = Domain::lattice(Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, n));
  const Eigen::MatrixXd root = psd_sqrt(grid_se_cov(n, cfg_.target_variance, cfg_.target_lengthscale));
  truth_ = root * normal_vector(CounterStream({cfg_.master_seed, kTruthStream}), n);
  if (cfg_.difference_mode == DifferenceMode::BiasOnly && cfg_.rho > 0.0) {
    bias_sqrt_ = psd_sqrt(grid_se_cov(n, cfg_.rho * cfg_.total_difference_variance, cfg_.target_lengthscale));
  }
}

std::size_t SyntheticGp::grid_index(const Point& x) const {
  if (x.size() != 1) throw InvalidInput("synthetic-gp: x must be one-dimensional");
  const double r = std::round(x[0]);
  if (std::abs(x[0] - r) > 1e-9 || r < 1.0 || r > cfg_.grid_size) throw InvalidInput("synthetic-gp: x is off the grid");
  return static_cast<std::size_t>(r) - 1;
}

double SyntheticGp::evaluate(const Point& x, Seed s) const {
  const std::size_t i = grid_index(x);
  require_seed(s, "synthetic-gp");
  double y = truth_[static_cast<Eigen::Index>(i)];
  const double structured = cfg_.rho * cfg_.total_difference_variance;
  if (structured > 0.0) {
    if (cfg_.difference_mode == DifferenceMode::OffsetsOnly) {
      y += std::sqrt(structured) * CounterStream({cfg_.master_seed, kOffsetStream, seed_key(s)}).normal(0);
    } else {
      const CounterStream stream({cfg_.master_seed, kBiasStream, seed_key(s)});
      y += bias_sqrt_.row(static_cast<Eigen::Index>(i)).dot(normal_vector(stream, cfg_.grid_size));
    }
  }
  const double white = (1.0 - cfg_.rho) * cfg_.total_difference_variance;
  if (white > 0.0) y += std::sqrt(white) * CounterStream({cfg_.master_seed, kWhiteStream, seed_key(s), i}).normal(0);
  return y;
}

std::optional<double> SyntheticGp::truth(const Point& x) const { return truth_[static_cast<Eigen::Index>(grid_index(x))]; }

std::optional<double> SyntheticGp::truth_max() const { return truth_.maxCoeff(); }

std::optional<CrnHyperparams> SyntheticGp::known_hyperparams() const {
  CrnHyperparams hp;
  hp.lengthscales = Eigen::VectorXd::Constant(1, cfg_.target_lengthscale);
  hp.target_variance = cfg_.target_variance;
  const double structured = cfg_.rho * cfg_.total_difference_variance;
  if (cfg_.difference_mode == DifferenceMode::OffsetsOnly) {
    hp.offset_variance = structured;
  } else {
    hp.bias_variance = structured;
  }
  hp.white_variance = (1.0 - cfg_.rho) * cfg_.total_difference_variance;
  return hp;
}

// ---------------------------------------------------------------- ATO

AtoConfig AtoConfig::defaults() {
  AtoConfig c;
  const double means[8] = {0.15, 0.40, 0.25, 0.15, 0.25, 0.08, 0.13, 0.40};
  for (int i = 0; i < 8; ++i) c.items.push_back(AtoItem{static_cast<double>(i + 1), 2.0, means[i], 0.15 * means[i]});
  // Rows list items 0..7; the first six are key items, the last two optional.
  const double rates[5] = {3.6, 3.0, 2.4, 1.8, 1.2};
  const int bill[5][8] = {{1, 0, 0, 1, 0, 1, 1, 0},
                          {1, 0, 0, 0, 1, 1, 1, 0},
                          {0, 1, 0, 1, 0, 1, 0, 0},
                          {0, 0, 1, 1, 0, 1, 0, 1},
                          {0, 0, 1, 0, 1, 1, 1, 0}};
  for (int p = 0; p < 5; ++p) {
    AtoProduct prod;
    prod.arrival_rate = rates[p];
    for (int i = 0; i < 8; ++i) {
      if (!bill[p][i]) continue;
      (i < 6 ? prod.key_items : prod.non_key_items).push_back(i);
    }
    c.products.push_back(prod);
  }
  return c;
}

void AtoConfig::validate() const {
  if (items.empty() || products.empty()) throw InvalidInput("ato: needs items and products");
  if (threshold_min > threshold_max) throw InvalidInput("ato: empty threshold range");
  if (!(warmup >= 0.0) || !(horizon > warmup)) throw InvalidInput("ato: horizon must exceed warmup");
  const int m = static_cast<int>(items.size());
  for (const AtoItem& it : items) {
    if (!(it.production_mean > 0.0) || !(it.production_sd >= 0.0) || !(it.holding_cost >= 0.0))
      throw InvalidInput("ato: invalid item parameters");
  }
  for (const AtoProduct& p : products) {
    if (!(p.arrival_rate > 0.0)) throw InvalidInput("ato: arrival rates must be positive");
    if (p.key_items.empty()) throw InvalidInput("ato: every product needs a key item");
    for (int i : p.key_items) {
      if (i < 0 || i >= m) throw InvalidInput("ato: item index out of range");
    }
    for (int i : p.non_key_items) {
      if (i < 0 || i >= m) throw InvalidInput("ato: item index out of range");
    }
  }
}

Ato::Ato(AtoConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const auto m = static_cast<Eigen::Index>(cfg_.items.size());
  domain_ = Domain::lattice(Eigen::VectorXd::Constant(m, cfg_.threshold_min),
                            Eigen::VectorXd::Constant(m, cfg_.threshold_max));
}

std::vector<AtoOrder> Ato::orders(Seed s) const {
  require_seed(s, "ato");
  std::vector<AtoOrder> out;
  for (std::size_t p = 0; p < cfg_.products.size(); ++p) {
    const CounterStream stream({cfg_.master_seed, kArrivalStream, seed_key(s), p});
    double t = 0.0;
    for (std::uint64_t k = 0;; ++k) {
      t += stream.exponential(k, cfg_.products[p].arrival_rate);
      if (t > cfg_.horizon) break;
      out.push_back(AtoOrder{t, static_cast<int>(p)});
    }
  }
  std::sort(out.begin(), out.end(), [](const AtoOrder& a, const AtoOrder& b) {
    return a.time < b.time || (a.time == b.time && a.product < b.product);
  });
  return out;
}

double Ato::production_time(Seed s, int item, std::uint64_t k) const {
  const AtoItem& it = cfg_.items[static_cast<std::size_t>(item)];
  const CounterStream stream({cfg_.master_seed, kProductionStream, seed_key(s), static_cast<std::uint64_t>(item)});
  return std::max(0.0, it.production_mean + it.production_sd * stream.normal(k));
}

double Ato::evaluate(const Point& thresholds, Seed s) const {
  domain_.check(thresholds, "ato thresholds");
  for (Eigen::Index i = 0; i < thresholds.size(); ++i) {
    if (thresholds[i] != std::round(thresholds[i])) throw InvalidInput("ato: thresholds must be integers");
  }
  const std::vector<AtoOrder> stream = orders(s);
  const std::size_t m = cfg_.items.size();
  constexpr double kNever = std::numeric_limits<double>::infinity();

  // Base-stock policy: every unit consumed triggers one replenishment job.
  // Each item has a single production line working through its jobs in order.
  std::vector<long> on_hand(m), backlog(m, 0);
  std::vector<double> finish(m, kNever);
  std::vector<std::uint64_t> jobs_started(m, 0);
  for (std::size_t i = 0; i < m; ++i) on_hand[i] = static_cast<long>(thresholds[static_cast<Eigen::Index>(i)]);

  double revenue = 0.0;
  double holding = 0.0;
  double clock = 0.0;
  auto advance = [&](double t) {
    const double from = std::max(clock, cfg_.warmup);
    const double to = std::min(t, cfg_.horizon);
    if (to > from) {
      double rate = 0.0;
      for (std::size_t i = 0; i < m; ++i) rate += cfg_.items[i].holding_cost * static_cast<double>(on_hand[i]);
      holding += rate * (to - from);
    }
    clock = t;
  };
  auto start_job = [&](std::size_t i, double t) {
    finish[i] = t + production_time(s, static_cast<int>(i), jobs_started[i]++);
  };

  std::size_t next_order = 0;
  while (true) {
    const double t_order = next_order < stream.size() ? stream[next_order].time : kNever;
    std::size_t item = m;
    double t_done = kNever;
    for (std::size_t i = 0; i < m; ++i) {
      if (finish[i] < t_done) {
        t_done = finish[i];
        item = i;
      }
    }
    const double t = std::min(t_order, t_done);
    if (!(t <= cfg_.horizon)) break;
    advance(t);
    if (t_done <= t_order) {
      ++on_hand[item];
      --backlog[item];
      finish[item] = kNever;
      if (backlog[item] > 0) start_job(item, t);
      continue;
    }
    const AtoProduct& prod = cfg_.products[static_cast<std::size_t>(stream[next_order].product)];
    ++next_order;
    const bool available = std::all_of(prod.key_items.begin(), prod.key_items.end(),
                                       [&](int i) { return on_hand[static_cast<std::size_t>(i)] > 0; });
    if (!available) continue;
    double sale = 0.0;
    auto consume = [&](int idx) {
      const auto i = static_cast<std::size_t>(idx);
      --on_hand[i];
      ++backlog[i];
      sale += cfg_.items[i].profit;
      if (finish[i] == kNever) start_job(i, t);
    };
    for (int i : prod.key_items) consume(i);
    for (int i : prod.non_key_items) {
      if (on_hand[static_cast<std::size_t>(i)] > 0) consume(i);
    }
    if (t >= cfg_.warmup) revenue += sale;
  }
  advance(cfg_.horizon);
  return (revenue - holding) / (cfg_.horizon - cfg_.warmup);
}

// ---------------------------------------------------------------- AIS

void AisConfig::validate() const {
  if (!(side > 0.0) || num_bases < 1 || !(horizon > 0.0) || !(expected_patients > 0.0) || !(speed > 0.0))
    throw InvalidInput("ais: invalid configuration");
}

Ais::Ais(AisConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  const Eigen::Index d = 2 * cfg_.num_bases;
  domain_ = Domain::box(Eigen::VectorXd::Zero(d), Eigen::VectorXd::Constant(d, cfg_.side));
}

std::vector<AisPatient> Ais::patients(Seed s) const {
  require_seed(s, "ais");
  const CounterStream arrivals({cfg_.master_seed, kArrivalStream, seed_key(s)});
  const CounterStream places({cfg_.master_seed, kLocationStream, seed_key(s)});
  const double rate = cfg_.expected_patients / cfg_.horizon;
  const bool fixed = cfg_.objective == AisObjective::Fixed30;
  const auto fixed_count = static_cast<std::size_t>(std::llround(cfg_.expected_patients));
  std::vector<AisPatient> out;
  double t = 0.0;
  for (std::uint64_t k = 0;; ++k) {
    t += arrivals.exponential(k, rate);
    if (fixed ? out.size() >= fixed_count : t > cfg_.horizon) break;
    out.push_back(AisPatient{t, cfg_.side * places.uniform(2 * k), cfg_.side * places.uniform(2 * k + 1)});
  }
  return out;
}

double Ais::journey_objective(const Point& bases, Seed s) const {
  domain_.check(bases, "ais bases");
  const std::vector<AisPatient> ps = patients(s);
  double total = 0.0;
  for (const AisPatient& p : ps) {
    double best = std::numeric_limits<double>::infinity();
    for (int b = 0; b < cfg_.num_bases; ++b) best = std::min(best, std::hypot(p.x - bases[2 * b], p.y - bases[2 * b + 1]));
    total += best / cfg_.speed;
  }
  if (cfg_.objective == AisObjective::SumJourney) return total;
  return ps.empty() ? 0.0 : total / static_cast<double>(ps.size());
}

double Ais::evaluate(const Point& bases, Seed s) const { return -journey_objective(bases, s); }

// ---------------------------------------------------------------- registry

namespace {

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

SyntheticGpConfig synthetic_config_from_json(const nlohmann::json& j) {
  SyntheticGpConfig c;
  read_opt(j, "grid_size", c.grid_size);
  read_opt(j, "target_variance", c.target_variance);
  read_opt(j, "target_lengthscale", c.target_lengthscale);
  read_opt(j, "rho", c.rho);
  read_opt(j, "total_difference_variance", c.total_difference_variance);
  read_opt(j, "master_seed", c.master_seed);
  if (j.contains("difference_mode")) {
    const auto mode = j.at("difference_mode").get<std::string>();
    if (mode == "offsets-only") {
      c.difference_mode = DifferenceMode::OffsetsOnly;
    } else if (mode == "bias-only") {
      c.difference_mode = DifferenceMode::BiasOnly;
    } else {
      throw InvalidInput("synthetic-gp: unknown difference_mode '" + mode + "'");
    }
  }
  c.validate();
  return c;
}

AtoConfig ato_config_from_json(const nlohmann::json& j) {
  AtoConfig c = AtoConfig::defaults();
  read_opt(j, "threshold_min", c.threshold_min);
  read_opt(j, "threshold_max", c.threshold_max);
  read_opt(j, "warmup", c.warmup);
  read_opt(j, "horizon", c.horizon);
  read_opt(j, "master_seed", c.master_seed);
  if (j.contains("items")) {
    c.items.clear();
    for (const auto& it : j.at("items")) {
      AtoItem item;
      read_opt(it, "profit", item.profit);
      read_opt(it, "holding_cost", item.holding_cost);
      read_opt(it, "production_mean", item.production_mean);
      read_opt(it, "production_sd", item.production_sd);
      c.items.push_back(item);
    }
  }
  if (j.contains("products")) {
    c.products.clear();
    for (const auto& pj : j.at("products")) {
      AtoProduct p;
      read_opt(pj, "arrival_rate", p.arrival_rate);
      read_opt(pj, "key_items", p.key_items);
      read_opt(pj, "non_key_items", p.non_key_items);
      c.products.push_back(p);
    }
  }
  c.validate();
  return c;
}

AisConfig ais_config_from_json(const nlohmann::json& j) {
  AisConfig c;
  read_opt(j, "side", c.side);
  read_opt(j, "num_bases", c.num_bases);
  read_opt(j, "horizon", c.horizon);
  read_opt(j, "expected_patients", c.expected_patients);
  read_opt(j, "speed", c.speed);
  read_opt(j, "master_seed", c.master_seed);
  if (j.contains("objective")) {
    const auto mode = j.at("objective").get<std::string>();
    if (mode == "mean-journey-time") {
      c.objective = AisObjective::MeanJourney;
    } else if (mode == "sum-journey-time") {
      c.objective = AisObjective::SumJourney;
    } else if (mode == "fixed-30-patients") {
      c.objective = AisObjective::Fixed30;
    } else {
      throw InvalidInput("ais: unknown objective '" + mode + "'");
    }
  }
  c.validate();
  return c;
}

std::vector<std::string> simulator_names() { return {"synthetic-gp", "ato", "ais"}; }

std::unique_ptr<Simulator> make_simulator(const std::string& name, const nlohmann::json& cfg) {
  if (name == "synthetic-gp") return std::make_unique<SyntheticGp>(synthetic_config_from_json(cfg));
  if (name == "ato") return std::make_unique<Ato>(ato_config_from_json(cfg));
  if (name == "ais") return std::make_unique<Ais>(ais_config_from_json(cfg));
  throw InvalidInput("unknown benchmark '" + name + "'");
}

}  // namespace crnbo

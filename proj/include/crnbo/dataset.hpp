#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "crnbo/types.hpp"

namespace crnbo {

/// Observed triples (x, s, y) with the set of seeds seen so far.
/// Every (x, s) pair appears at most once: outputs are deterministic given the pair.
class Dataset {
 public:
  explicit Dataset(int dim);

  /// Appends an observation. Throws InvalidInput on dimension mismatch,
  /// a seed below 1, a non-finite output, or a repeated (x, s) pair.
  void add(const Point& x, Seed s, double y);

  int dim() const { return dim_; }
  std::size_t size() const { return xs_.size(); }
  bool empty() const { return xs_.empty(); }

  const Point& x(std::size_t i) const { return xs_[i]; }
  Seed seed(std::size_t i) const { return seeds_[i]; }
  double y(std::size_t i) const { return ys_[i]; }

  const std::vector<Point>& points() const { return xs_; }
  const std::vector<Seed>& seeds() const { return seeds_; }
  Eigen::VectorXd outputs() const;

  const std::set<Seed>& observed_seeds() const { return observed_; }
  bool seed_observed(Seed s) const { return observed_.count(s) > 0; }

  /// Largest observed seed, or 0 when empty.
  Seed max_seed() const { return observed_.empty() ? 0 : *observed_.rbegin(); }

  /// Index of the observation at exactly (x, s), if any.
  std::optional<std::size_t> find(const Point& x, Seed s) const;

  double mean_output() const;

 private:
  using Key = std::pair<Seed, std::vector<double>>;
  static Key key_of(const Point& x, Seed s);

  int dim_;
  std::vector<Point> xs_;
  std::vector<Seed> seeds_;
  std::vector<double> ys_;
  std::set<Seed> observed_;
  std::map<Key, std::size_t> index_;
};

}  // namespace crnbo

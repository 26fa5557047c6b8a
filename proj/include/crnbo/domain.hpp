#pragma once

#include <random>
#include <string>
#include <vector>

#include "crnbo/types.hpp"

namespace crnbo {

/// Solution space: a box [lower, upper], or the integer lattice inside it.
struct Domain {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  bool integer = false;

  static Domain box(Eigen::VectorXd lower, Eigen::VectorXd upper);
  static Domain lattice(Eigen::VectorXd lower, Eigen::VectorXd upper);

  int dim() const { return static_cast<int>(lower.size()); }
  Eigen::VectorXd width() const { return upper - lower; }

  bool contains(const Point& x) const;
  /// Projects onto the box and, for lattices, rounds to the nearest lattice point.
  Point project(const Point& x) const;

  /// Number of lattice points (infinity for boxes).
  double cardinality() const;
  /// All lattice points in lexicographic order (first coordinate fastest).
  std::vector<Point> enumerate() const;

  /// Throws InvalidInput if x has the wrong dimension or lies outside.
  void check(const Point& x, const std::string& what) const;
};

/// n-point Latin hypercube over the box: in each dimension the n points fall
/// into n distinct equal-width strata. Lattice domains round the result.
std::vector<Point> latin_hypercube(const Domain& domain, int n, std::mt19937_64& rng);

/// Uniform draw from [0, 1).
double uniform01(std::mt19937_64& rng);
/// Standard normal draw.
double standard_normal(std::mt19937_64& rng);

}  // namespace crnbo

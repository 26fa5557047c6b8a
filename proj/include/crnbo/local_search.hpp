#pragma once

#include <functional>

#include "crnbo/domain.hpp"

namespace crnbo {

/// Objective for local maximisation. When `grad` is non-null the callee fills it.
using ValueAndGradient = std::function<double(const Point& x, Eigen::VectorXd* grad)>;

struct AscentResult {
  Point x;
  double value = 0.0;
  int accepted_steps = 0;
};

/// Projected gradient ascent on a box with backtracking (up to 20 halvings per
/// step). Only improving steps are accepted, so the returned value is never
/// below the starting value.
AscentResult gradient_ascent(const ValueAndGradient& f, const Domain& box, const Point& start, int max_steps);

/// Coordinate ascent on a lattice over the 2d unit neighbours, moving to the
/// best strictly improving neighbour each step.
AscentResult lattice_ascent(const std::function<double(const Point&)>& f, const Domain& lattice,
                            const Point& start, int max_steps);

/// Dispatches to lattice_ascent or gradient_ascent depending on the domain.
AscentResult local_ascent(const ValueAndGradient& f, const Domain& domain, const Point& start, int max_steps);

/// Central finite-difference gradient with step h_i = rel_step * width_i,
/// shrunk near the box edges.
Eigen::VectorXd numerical_gradient(const std::function<double(const Point&)>& f, const Domain& box,
                                   const Point& x, double rel_step = 1e-5);

}  // namespace crnbo

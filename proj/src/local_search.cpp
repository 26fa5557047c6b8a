#include "crnbo/local_search.hpp"

#include <algorithm>
#include <cmath>

namespace crnbo {

AscentResult gradient_ascent(const ValueAndGradient& f, const Domain& box, const Point& start, int max_steps) {
  AscentResult res{box.project(start), 0.0, 0};
  Eigen::VectorXd grad(box.dim());
  res.value = f(res.x, &grad);
  const Eigen::VectorXd width = box.width().cwiseMax(1e-12);
  double step = -1.0;
  for (int it = 0; it < max_steps; ++it) {
    if (!grad.allFinite()) break;
    const double scaled = (grad.array().abs() / width.array()).maxCoeff();
    if (!(scaled > 0.0)) break;
    if (step <= 0.0) step = 0.1 / scaled;
    bool accepted = false;
    for (int halving = 0; halving <= 20; ++halving) {
      const Point cand = box.project(res.x + step * grad);
      if (((cand - res.x).array().abs() / width.array()).maxCoeff() < 1e-10) break;
      const double v = f(cand, nullptr);
      if (std::isfinite(v) && v > res.value) {
        res.x = cand;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    res.value = f(res.x, &grad);
    ++res.accepted_steps;
    step *= 2.0;
  }
  return res;
}

AscentResult lattice_ascent(const std::function<double(const Point&)>& f, const Domain& lattice, const Point& start,
                            int max_steps) {
  AscentResult res{lattice.project(start), 0.0, 0};
  res.value = f(res.x);
  for (int it = 0; it < max_steps; ++it) {
    Point best = res.x;
    double best_v = res.value;
    for (int d = 0; d < lattice.dim(); ++d) {
      for (double delta : {-1.0, 1.0}) {
        Point cand = res.x;
        cand[d] += delta;
        if (cand[d] < lattice.lower[d] || cand[d] > lattice.upper[d]) continue;
        const double v = f(cand);
        if (std::isfinite(v) && v > best_v) {
          best_v = v;
          best = cand;
        }
      }
    }
    if (best_v <= res.value) break;
    res.x = best;
    res.value = best_v;
    ++res.accepted_steps;
  }
  return res;
}

AscentResult local_ascent(const ValueAndGradient& f, const Domain& domain, const Point& start, int max_steps) {
  if (domain.integer) {
    return lattice_ascent([&](const Point& x) { return f(x, nullptr); }, domain, start, max_steps);
  }
  return gradient_ascent(f, domain, start, max_steps);
}

Eigen::VectorXd numerical_gradient(const std::function<double(const Point&)>& f, const Domain& box, const Point& x,
                                   double rel_step) {
  Eigen::VectorXd g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    const double h0 = rel_step * std::max(box.upper[i] - box.lower[i], 1e-12);
    const double up = std::min(h0, box.upper[i] - x[i]);
    const double down = std::min(h0, x[i] - box.lower[i]);
    Point hi = x, lo = x;
    hi[i] += up;
    lo[i] -= down;
    const double span = up + down;
    g[i] = span > 0.0 ? (f(hi) - f(lo)) / span : 0.0;
  }
  return g;
}

}  // namespace crnbo

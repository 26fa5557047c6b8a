#include "crnbo/domain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crnbo/errors.hpp"

namespace crnbo {

Domain Domain::box(Eigen::VectorXd lower, Eigen::VectorXd upper) {
  if (lower.size() != upper.size() || lower.size() == 0) throw InvalidInput("Domain: bad bounds");
  if ((upper.array() < lower.array()).any()) throw InvalidInput("Domain: upper < lower");
  return Domain{std::move(lower), std::move(upper), false};
}

Domain Domain::lattice(Eigen::VectorXd lower, Eigen::VectorXd upper) {
  Domain d = box(std::move(lower), std::move(upper));
  d.lower = d.lower.array().ceil();
  d.upper = d.upper.array().floor();
  if ((d.upper.array() < d.lower.array()).any()) throw InvalidInput("Domain: empty lattice");
  d.integer = true;
  return d;
}

bool Domain::contains(const Point& x) const {
  if (x.size() != lower.size()) return false;
  for (int i = 0; i < x.size(); ++i) {
    if (!(x[i] >= lower[i] && x[i] <= upper[i])) return false;
    if (integer && x[i] != std::round(x[i])) return false;
  }
  return true;
}

void Domain::check(const Point& x, const std::string& what) const {
  if (x.size() != lower.size()) throw InvalidInput(what + ": dimension mismatch");
  if (!contains(x)) throw InvalidInput(what + ": point outside the domain");
}

Point Domain::project(const Point& x) const {
  Point p = x.cwiseMax(lower).cwiseMin(upper);
  if (integer) p = p.array().round();
  return p;
}

double Domain::cardinality() const {
  if (!integer) return std::numeric_limits<double>::infinity();
  double c = 1.0;
  for (int i = 0; i < dim(); ++i) c *= (upper[i] - lower[i] + 1.0);
  return c;
}

std::vector<Point> Domain::enumerate() const {
  if (!integer) throw InvalidInput("Domain: cannot enumerate a continuous box");
  if (cardinality() > 5e6) throw InvalidInput("Domain: lattice too large to enumerate");
  std::vector<Point> out;
  out.reserve(static_cast<std::size_t>(cardinality()));
  Point p = lower;
  while (true) {
    out.push_back(p);
    int i = 0;
    while (i < dim()) {
      if (p[i] < upper[i]) {
        p[i] += 1.0;
        break;
      }
      p[i] = lower[i];
      ++i;
    }
    if (i == dim()) break;
  }
  return out;
}

double uniform01(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

double standard_normal(std::mt19937_64& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

std::vector<Point> latin_hypercube(const Domain& domain, int n, std::mt19937_64& rng) {
  std::vector<Point> pts(static_cast<std::size_t>(std::max(n, 0)), Point(domain.dim()));
  if (n <= 0) return pts;
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int d = 0; d < domain.dim(); ++d) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    // Lattice strata cover [lower - 1/2, upper + 1/2) so end points are not under-weighted.
    const double pad = domain.integer ? 0.5 - 1e-9 : 0.0;
    const double lo = domain.lower[d] - pad;
    const double w = domain.upper[d] - domain.lower[d] + 2.0 * pad;
    for (int i = 0; i < n; ++i) {
      const double u = (perm[static_cast<std::size_t>(i)] + uniform01(rng)) / n;
      pts[static_cast<std::size_t>(i)][d] = lo + u * w;
    }
  }
  if (domain.integer) {
    for (auto& p : pts) p = domain.project(p);
  }
  return pts;
}

}  // namespace crnbo

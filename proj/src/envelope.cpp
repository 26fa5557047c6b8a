#include "crnbo/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "crnbo/errors.hpp"

namespace crnbo {

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double expected_positive_part(double z) {
  if (z < -38.0) return 0.0;
  return z * normal_cdf(z) + normal_pdf(z);
}

namespace {

// Phi(hi) - Phi(lo) evaluated on the side of zero that avoids cancellation.
double normal_mass(double lo, double hi) {
  if (lo >= 0.0) return normal_cdf(-lo) - normal_cdf(-hi);
  return normal_cdf(hi) - normal_cdf(lo);
}

double pdf_or_zero(double z) { return std::isinf(z) ? 0.0 : normal_pdf(z); }

}  // namespace

EnvelopeResult expected_max_affine(std::span<const double> intercepts, std::span<const double> slopes,
                                   bool with_gradient) {
  const std::size_t m = intercepts.size();
  if (m == 0) throw InvalidInput("expected_max_affine: no lines");
  if (slopes.size() != m) throw InvalidInput("expected_max_affine: intercepts and slopes differ in length");
  for (std::size_t i = 0; i < m; ++i) {
    if (!std::isfinite(intercepts[i]) || !std::isfinite(slopes[i]))
      throw InvalidInput("expected_max_affine: non-finite line");
  }

  EnvelopeResult out;
  out.argmax_intercept = static_cast<int>(std::max_element(intercepts.begin(), intercepts.end()) - intercepts.begin());
  const double top = intercepts[out.argmax_intercept];

  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) {
    if (slopes[i] != slopes[j]) return slopes[i] < slopes[j];
    if (intercepts[i] != intercepts[j]) return intercepts[i] > intercepts[j];
    return i < j;
  });

  // Upper envelope as a stack of (line, breakpoint where it becomes the max).
  std::vector<int> hull;
  std::vector<double> start;
  const double neg_inf = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < m; ++k) {
    const int line = order[k];
    if (k > 0 && slopes[line] == slopes[order[k - 1]]) continue;
    double c = neg_inf;
    while (!hull.empty()) {
      const int last = hull.back();
      c = (intercepts[last] - intercepts[line]) / (slopes[line] - slopes[last]);
      if (c <= start.back()) {
        hull.pop_back();
        start.pop_back();
        c = neg_inf;
      } else {
        break;
      }
    }
    hull.push_back(line);
    start.push_back(hull.size() == 1 ? neg_inf : c);
  }

  double excess = 0.0;
  for (std::size_t j = 1; j < hull.size(); ++j) {
    excess += (slopes[hull[j]] - slopes[hull[j - 1]]) * expected_positive_part(-std::abs(start[j]));
  }
  out.excess = std::max(0.0, excess);
  out.expected_max = top + out.excess;

  if (with_gradient) {
    out.d_intercepts.assign(m, 0.0);
    out.d_slopes.assign(m, 0.0);
    const double pos_inf = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < hull.size(); ++j) {
      const double lo = start[j];
      const double hi = j + 1 < hull.size() ? start[j + 1] : pos_inf;
      out.d_intercepts[hull[j]] = normal_mass(lo, hi);
      out.d_slopes[hull[j]] = pdf_or_zero(lo) - pdf_or_zero(hi);
    }
  }
  return out;
}

}  // namespace crnbo

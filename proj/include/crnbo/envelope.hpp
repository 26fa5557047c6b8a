#pragma once

#include <span>
#include <vector>

namespace crnbo {

/// Lines a_i + b_i Z whose expected upper envelope is needed.
struct LinearEnvelopeInput {
  std::vector<double> intercepts;
  std::vector<double> slopes;
};

struct EnvelopeResult {
  /// E[max_i a_i + b_i Z], Z ~ N(0,1).
  double expected_max = 0.0;
  /// expected_max - max_i a_i, computed without cancellation; always >= 0.
  double excess = 0.0;
  /// Index of the largest intercept (lowest index on ties).
  int argmax_intercept = 0;
  /// d expected_max / d a_i and d expected_max / d b_i. Zero for lines that
  /// never attain the maximum.
  std::vector<double> d_intercepts;
  std::vector<double> d_slopes;
};

double normal_pdf(double z);
double normal_cdf(double z);
/// z * Phi(z) + phi(z), the expected positive part of (z + Z).
double expected_positive_part(double z);

/// Exact expectation of the maximum of affine functions of a standard normal.
///
/// Lines are sorted by slope; for equal slopes only the largest intercept is
/// kept (lowest index on exact ties). The surviving upper envelope has
/// breakpoints c_1 < ... < c_{k-1} and
///
///   E[max] = max_i a_i + sum_j (b_{j+1} - b_j) f(-|c_j|),  f(z) = z Phi(z) + phi(z).
///
/// Throws InvalidInput for empty or mismatched input, or non-finite values.
EnvelopeResult expected_max_affine(std::span<const double> intercepts, std::span<const double> slopes,
                                   bool with_gradient = false);

inline double expected_max_affine(const LinearEnvelopeInput& env) {
  return expected_max_affine(env.intercepts, env.slopes).expected_max;
}

}  // namespace crnbo

#pragma once

#include <string>

#include "crnbo/types.hpp"

namespace crnbo {

/// Kernel and noise parameters of the seed-augmented GP
///
///   k(x,s,x',s') = k_t(x,x') + [s == s' >= 1] (eta2 + k_b(x,x') + white * [x == x'])
///
/// where k_t and k_b are squared-exponential kernels sharing `lengthscales`
/// with amplitudes `target_variance` and `bias_variance`.
struct CrnHyperparams {
  Eigen::VectorXd lengthscales;
  double target_variance = 1.0;
  double offset_variance = 0.0;
  double bias_variance = 0.0;
  double white_variance = 0.0;
  double prior_mean = 0.0;

  int dim() const { return static_cast<int>(lengthscales.size()); }

  /// Correlation of differences under compound sphericity.
  double rho() const;

  /// Total variance of a difference function at a single point.
  double difference_variance() const { return offset_variance + bias_variance + white_variance; }

  /// Throws InvalidInput unless all lengthscales and target_variance are
  /// positive and the remaining variances are non-negative and finite.
  void validate() const;

  std::string describe() const;
};

/// exp(-0.5 (x-x')^T L (x-x')) with L = diag(1/l^2).
double se_correlation(const Point& x, const Point& x2, const Eigen::VectorXd& lengthscales);

/// True if two seeds share a random stream. Reserved labels never do.
inline bool same_stream(Seed s, Seed s2) { return s == s2 && is_observation_seed(s); }

/// Prior covariance between (x,s) and (x2,s2).
double prior_kernel(const Point& x, Seed s, const Point& x2, Seed s2, const CrnHyperparams& hp);

/// Gradient of prior_kernel with respect to `x2`, ignoring the white-noise
/// term (it is piecewise constant).
Eigen::VectorXd prior_kernel_grad(const Point& x, Seed s, const Point& x2, Seed s2, const CrnHyperparams& hp);

}  // namespace crnbo

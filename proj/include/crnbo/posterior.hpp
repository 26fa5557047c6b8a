#pragma once

#include <optional>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "crnbo/dataset.hpp"
#include "crnbo/kernel.hpp"

namespace crnbo {

/// Relative diagonal jitter ladder: starts at kJitterStart * target_variance
/// and grows x10 up to kJitterMax * target_variance.
inline constexpr double kJitterStart = 1e-8;
inline constexpr double kJitterMax = 1e-4;

/// GP posterior over (x, s) given noiseless observations of theta(x, s).
///
/// Immutable after construction; all queries are const and thread-safe.
///
/// The jitter on the diagonal of K is treated as a nugget that belongs to the
/// observed pairs: covariances involving an observed pair include it, so the
/// posterior interpolates observations exactly (up to rounding) and has zero
/// variance there.
class Posterior {
 public:
  /// Builds K over all observed pairs, factors K + jitter*I and stores
  /// K^{-1}(Y - prior_mean). An empty dataset yields the prior.
  /// Throws NumericalError when the largest jitter still fails.
  static Posterior fit(Dataset data, CrnHyperparams hp);

  const Dataset& data() const { return data_; }
  const CrnHyperparams& hyperparams() const { return hp_; }
  std::size_t size() const { return data_.size(); }
  double jitter() const { return jitter_; }

  /// Lower Cholesky factor of K + jitter*I.
  const Eigen::MatrixXd& chol_lower() const { return lower_; }
  /// K^{-1}(Y - prior_mean).
  const Eigen::VectorXd& weights() const { return weights_; }

  double mean(const Point& x, Seed s) const;
  double cov(const Point& x, Seed s, const Point& x2, Seed s2) const;
  double variance(const Point& x, Seed s) const { return cov(x, s, x, s); }

  /// Posterior mean and covariance of the seed-averaged target.
  double target_mean(const Point& x) const { return mean(x, kTargetSeed); }
  double target_cov(const Point& x, const Point& x2) const { return cov(x, kTargetSeed, x2, kTargetSeedAlt); }

  /// d mean(x, s) / dx (white-noise discontinuities ignored).
  Eigen::VectorXd mean_grad(const Point& x, Seed s) const;

  /// k0(X~, (x, s)), including the nugget when (x, s) is observed.
  Eigen::VectorXd cross_cov(const Point& x, Seed s) const;
  /// Row i holds d k0(x_i, s_i, x, s) / dx.
  Eigen::MatrixXd cross_cov_grad(const Point& x, Seed s) const;
  /// k0((x,s),(x2,s2)) plus the nugget when both are the same observed pair.
  double prior_cov(const Point& x, Seed s, const Point& x2, Seed s2) const;

  /// L^{-1} v and K^{-1} v.
  Eigen::VectorXd solve_lower(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd solve_lower(const Eigen::MatrixXd& m) const;
  Eigen::VectorXd solve(const Eigen::VectorXd& v) const;

  /// Applies the clamping rule to a computed variance: tiny negatives become
  /// 0, clearly negative values throw NumericalError.
  double clamp_variance(double v) const;

 private:
  Posterior(Dataset data, CrnHyperparams hp) : data_(std::move(data)), hp_(std::move(hp)) {}

  Dataset data_;
  CrnHyperparams hp_;
  double jitter_ = 0.0;
  Eigen::MatrixXd lower_;
  Eigen::VectorXd weights_;
};

/// Free-function spelling of Posterior::fit.
Posterior fit_posterior(Dataset data, CrnHyperparams hp);

/// Copy of `hp` with prior_mean set to the dataset's empirical mean.
CrnHyperparams with_empirical_mean(CrnHyperparams hp, const Dataset& data);

/// Covariance matrix k0(X~, X~) without jitter.
Eigen::MatrixXd prior_matrix(const Dataset& data, const CrnHyperparams& hp);

/// Attempts a Cholesky factorisation of m + jitter*I along the jitter ladder.
/// Returns the jitter used, or nullopt if every level failed.
std::optional<double> factor_with_jitter(const Eigen::MatrixXd& m, double target_variance,
                                         Eigen::MatrixXd& lower);

}  // namespace crnbo

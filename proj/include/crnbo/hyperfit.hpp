#pragma once

#include <random>
#include <vector>

#include "crnbo/dataset.hpp"
#include "crnbo/domain.hpp"
#include "crnbo/kernel.hpp"

namespace crnbo {

struct LikelihoodValue {
  double log_ml = 0.0;
};

/// Which difference components a model may use. A disabled component is
/// held at zero variance.
struct ModelFlags {
  bool allow_offset = true;
  bool allow_bias = true;
};

/// Search box for hyperparameters, in natural units.
struct HyperBounds {
  Eigen::VectorXd lengthscale_lower;
  Eigen::VectorXd lengthscale_upper;
  double variance_lower = 1e-6;
  double variance_upper = 1.0;

  /// Lengthscales in [1e-3, 2] x box width, variances up to
  /// 1.5 (max Y - min Y)^2 and down to 1e-6 of that.
  static HyperBounds for_data(const Domain& domain, const Dataset& data);
};

struct FitOptions {
  int screen = 1000;
  int starts = 20;
  int ascent_steps = 100;
  int nelder_mead_evals = 200;
  int joint_steps = 100;
  int warm_steps = 20;
  int full_until = 100;
  int full_every = 10;
  int min_points = 5;
};

enum class FitPlan { Full, WarmStart };

/// Full search up to `full_until` and on every `full_every`-th iteration after.
FitPlan refit_schedule(int iteration, const FitOptions& opts = {});

/// (alpha, beta) split of a fixed noise total:
///   eta2 = beta (1-alpha) total, bias = (1-beta)(1-alpha) total, white = alpha total.
struct SplitParams {
  double alpha = 1.0;
  double beta = 0.5;
};
CrnHyperparams apply_split(CrnHyperparams hp, double total, SplitParams split);

/// Log marginal likelihood of the outputs centred at hp.prior_mean, using
/// the same jitter ladder as the posterior. Throws NumericalError if K cannot
/// be factored. When `grad_log` is non-null it receives the derivative with
/// respect to log_parameters(hp) (zero-variance entries get zero).
LikelihoodValue log_marginal_likelihood(const Dataset& data, const CrnHyperparams& hp,
                                        Eigen::VectorXd* grad_log = nullptr);

/// Layout: [log l_1..log l_d, log target, log offset, log bias, log white].
Eigen::VectorXd log_parameters(const CrnHyperparams& hp);
CrnHyperparams from_log_parameters(const Eigen::VectorXd& theta, double prior_mean);

/// Defaults used when there are too few points to fit.
CrnHyperparams small_sample_defaults(const Domain& domain, const Dataset& data);

struct StageResult {
  CrnHyperparams hp;
  double log_ml = 0.0;
};

StageResult fit_stage1_independent(const Dataset& data, const HyperBounds& bounds, const FitOptions& opts,
                                   std::mt19937_64& rng);
StageResult fit_stage2_split(const Dataset& data, const StageResult& stage1, const ModelFlags& flags,
                             const FitOptions& opts);
StageResult fit_stage3_joint(const Dataset& data, const StageResult& start, const HyperBounds& bounds,
                             const ModelFlags& flags, int steps);

struct FitResult {
  CrnHyperparams hp;
  double log_ml = 0.0;
  FitPlan plan = FitPlan::Full;
  bool defaults_used = false;
  std::vector<double> stage_log_ml;
};

/// Maximum-likelihood fit. A full fit runs the three stages; a warm start
/// runs `warm_steps` joint steps from `warm` (required for WarmStart).
/// The prior mean is always the empirical mean of the outputs.
FitResult fit_hyperparameters(const Dataset& data, const Domain& domain, const ModelFlags& flags,
                              const FitOptions& opts, std::mt19937_64& rng, FitPlan plan = FitPlan::Full,
                              const CrnHyperparams* warm = nullptr);

/// Applies model flags to given hyperparameters. With `fold` set, disabled
/// variance moves into the white-noise term so the total is kept; otherwise
/// it is dropped.
CrnHyperparams apply_model_flags(CrnHyperparams hp, const ModelFlags& flags, bool fold);

}  // namespace crnbo

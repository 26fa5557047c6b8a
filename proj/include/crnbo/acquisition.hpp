#pragma once

#include <optional>
#include <random>
#include <vector>

#include "crnbo/domain.hpp"
#include "crnbo/posterior.hpp"

namespace crnbo {

/// Frozen inner-maximisation set for discretised Knowledge Gradient.
struct DiscretizationSet {
  std::vector<Point> points;
  int frozen_for_iteration = 0;
};

/// Latin hypercube with one point per observation, united with one Gaussian
/// perturbation (sd = perturb_scale * box width per dimension) of every
/// observed x, projected into the domain and deduplicated.
DiscretizationSet build_discretization(const Posterior& p, const Domain& domain, std::mt19937_64& rng,
                                       int iteration = 0, double perturb_scale = 0.1);

/// Solution domain times the seeds worth considering: every observed seed
/// plus exactly one fresh seed, max(S) + 1.
struct AcquisitionSpace {
  Domain domain;
  std::vector<Seed> candidate_seeds;
  Seed fresh_seed = 1;

  static AcquisitionSpace over(const Domain& domain, const Dataset& data);
  /// The same space restricted to the fresh seed, as standard KG sees it.
  AcquisitionSpace fresh_only() const;
};

/// Candidate variance at or below this fraction of target_variance counts as
/// already known.
inline constexpr double kDegenerateVariance = 1e-12;

/// KG values at or below this multiple of the target standard deviation are
/// rounding noise and count as no improvement.
inline constexpr double kNegligibleValue = 1e-10;

/// True when `value` is indistinguishable from zero on the scale of `p`.
bool negligible_value(const Posterior& p, double value);

/// Update coefficient of mu^{n+1}(x_pred, 0) per unit of the standardised
/// new observation at (x, s). nullopt when (x, s) is already known.
std::optional<double> sigma_tilde(const Posterior& p, const Point& x_pred, const Point& x, Seed s);

/// Knowledge-Gradient evaluator bound to one posterior and one frozen
/// discretisation. Precomputes the target-side quantities for the set so that
/// each candidate costs one triangular solve plus O(n |A|).
class KgEvaluator {
 public:
  /// `target` is the seed whose posterior mean is being maximised: the
  /// reserved target label by default.
  KgEvaluator(const Posterior& p, std::vector<Point> discretization, Seed target = kTargetSeed);

  /// KG^CRN(x, s; A): expected increase of max over A u {x} of the target
  /// mean after observing theta(x, s). Zero for known pairs.
  double kg(const Point& x, Seed s, Eigen::VectorXd* grad = nullptr) const;

  /// Pairwise value of observing x_i and x_j on the same fresh seed, halved
  /// to a per-sample value. Throws InvalidInput if x_i == x_j.
  double kg_pw(const Point& xi, const Point& xj) const;

  const Posterior& posterior() const { return *p_; }
  const std::vector<Point>& discretization() const { return set_; }
  Seed target() const { return target_; }
  Seed fresh_seed() const { return p_->data().max_seed() + 1; }

 private:
  const Posterior* p_;
  std::vector<Point> set_;
  Seed target_;
  Eigen::VectorXd mu_set_;    // mean at (a, target)
  Eigen::MatrixXd half_set_;  // L^{-1} k0(X~, (A, target))
  Eigen::MatrixXd full_set_;  // K^{-1} k0(X~, (A, target))
  double degenerate_;
};

/// Convenience wrappers matching the module's operation list.
double kg_crn(const Posterior& p, const Point& x, Seed s, const DiscretizationSet& a);
Eigen::VectorXd kg_crn_gradient(const Posterior& p, const Point& x, Seed s, const DiscretizationSet& a);
double kg_pw(const Posterior& p, const Point& xi, const Point& xj, const DiscretizationSet& a);

/// Stage sizes of the multi-start acquisition optimiser.
struct AcquisitionOptions {
  int screen = 1000;
  int starts = 20;
  int ascent_steps = 100;
  int finetune_steps = 20;
  /// Finite lattices with at most this many (x, s) candidates are searched exhaustively.
  double exhaustive_limit = 20000;
};

struct AcquisitionChoice {
  Point x;
  Seed seed = 1;
  double value = 0.0;
  /// Best value found when restricted to the fresh seed.
  double fresh_value = 0.0;
  /// True when no candidate had positive value.
  bool no_improvement = false;
};

/// Multi-start maximisation of KG^CRN over `space`:
///  1. screen a Latin hypercube over X x seeds,
///  2. local ascent in x from the best starts with the seed held fixed,
///  3. re-evaluate the best x on every candidate seed,
///  4. fine-tune x on the winning seed.
/// Stages 3-4 are skipped when only the fresh seed is allowed. When old seeds
/// are allowed the fresh-seed-only search is run first with the same stream
/// standard KG would use, and the overall answer is never worse than it.
AcquisitionChoice optimize_kg_crn(const KgEvaluator& eval, const AcquisitionSpace& space,
                                  const AcquisitionOptions& opts, std::mt19937_64& rng);

struct PairwiseDecision {
  bool pair = false;
  Point first;
  Point second;  // meaningful only when pair
  Seed seed = 1;
  /// Per-sample values of the best single and best pair.
  double single_value = 0.0;
  double pair_value = 0.0;
};

/// Best pair by KG^PW: conditional search with x1 fixed at the single-KG
/// argmax, then a joint multi-start search seeded with the best pair so far.
/// Small finite domains are enumerated instead.
PairwiseDecision best_pair(const KgEvaluator& eval, const Domain& domain, const Point& single_argmax,
                           const AcquisitionOptions& opts, std::mt19937_64& rng);

/// Serial-or-batch switch: whichever of the best single (fresh seed) and best
/// pair (same fresh seed) has the larger value per sample.
PairwiseDecision select_pw_mode(const KgEvaluator& eval, const AcquisitionSpace& space,
                                const AcquisitionOptions& opts, std::mt19937_64& rng, bool allow_pair = true);

struct RecommendOptions {
  int screen = 1000;
  int starts = 20;
  int ascent_steps = 100;
  double exhaustive_limit = 100000;
};

/// argmax of the target posterior mean: exhaustive on small lattices (lowest
/// index wins ties), otherwise screen-then-ascend from the best starts.
Point recommend(const Posterior& p, const Domain& domain, const RecommendOptions& opts, std::mt19937_64& rng);

}  // namespace crnbo

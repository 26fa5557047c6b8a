#include "crnbo/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "crnbo/envelope.hpp"
#include "crnbo/errors.hpp"
#include "crnbo/local_search.hpp"

namespace crnbo {

DiscretizationSet build_discretization(const Posterior& p, const Domain& domain, std::mt19937_64& rng,
                                       int iteration, double perturb_scale) {
  const Dataset& data = p.data();
  DiscretizationSet out;
  out.frozen_for_iteration = iteration;
  std::vector<Point> raw = latin_hypercube(domain, static_cast<int>(data.size()), rng);
  const Eigen::VectorXd sd = perturb_scale * domain.width();
  for (const Point& x : data.points()) {
    Point q = x;
    for (int d = 0; d < q.size(); ++d) q[d] += sd[d] * standard_normal(rng);
    raw.push_back(domain.project(q));
  }
  std::set<std::vector<double>> seen;
  for (Point& x : raw) {
    if (seen.insert(std::vector<double>(x.data(), x.data() + x.size())).second) out.points.push_back(std::move(x));
  }
  return out;
}

AcquisitionSpace AcquisitionSpace::over(const Domain& domain, const Dataset& data) {
  AcquisitionSpace space{domain, {}, data.max_seed() + 1};
  space.candidate_seeds.assign(data.observed_seeds().begin(), data.observed_seeds().end());
  space.candidate_seeds.push_back(space.fresh_seed);
  return space;
}

AcquisitionSpace AcquisitionSpace::fresh_only() const { return AcquisitionSpace{domain, {fresh_seed}, fresh_seed}; }

std::optional<double> sigma_tilde(const Posterior& p, const Point& x_pred, const Point& x, Seed s) {
  if (is_observation_seed(s) && p.data().find(x, s)) return std::nullopt;
  const double var = p.variance(x, s);
  if (var <= kDegenerateVariance * p.hyperparams().target_variance) return std::nullopt;
  return p.cov(x_pred, kTargetSeed, x, s) / std::sqrt(var);
}

KgEvaluator::KgEvaluator(const Posterior& p, std::vector<Point> discretization, Seed target)
    : p_(&p), set_(std::move(discretization)), target_(target) {
  const auto m = static_cast<Eigen::Index>(set_.size());
  const auto n = static_cast<Eigen::Index>(p.size());
  degenerate_ = kDegenerateVariance * p.hyperparams().target_variance;
  mu_set_.resize(m);
  Eigen::MatrixXd cross(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    mu_set_[j] = p.mean(set_[j], target_);
    if (n > 0) cross.col(j) = p.cross_cov(set_[j], target_);
  }
  if (n > 0) {
    half_set_ = p.solve_lower(cross);
    full_set_ = p.chol_lower().transpose().triangularView<Eigen::Upper>().solve(half_set_);
  } else {
    half_set_.resize(0, m);
    full_set_.resize(0, m);
  }
}

double KgEvaluator::kg(const Point& x, Seed s, Eigen::VectorXd* grad) const {
  const Posterior& p = *p_;
  const int d = static_cast<int>(x.size());
  if (grad) grad->setZero(d);
  if (is_observation_seed(s) && p.data().find(x, s)) return 0.0;

  const Eigen::VectorXd kc = p.cross_cov(x, s);
  const Eigen::VectorXd vc = p.solve_lower(kc);
  const double var = p.prior_cov(x, s, x, s) - vc.squaredNorm();
  if (var <= degenerate_) return 0.0;
  const double sd = std::sqrt(var);

  const auto m = static_cast<Eigen::Index>(set_.size());
  std::vector<double> a(static_cast<std::size_t>(m + 1)), b(static_cast<std::size_t>(m + 1));
  Eigen::VectorXd cov_set(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    cov_set[j] = p.prior_cov(set_[j], target_, x, s) - half_set_.col(j).dot(vc);
    a[static_cast<std::size_t>(j)] = mu_set_[j];
    b[static_cast<std::size_t>(j)] = cov_set[j] / sd;
  }
  const Eigen::VectorXd kt = p.cross_cov(x, target_);
  const Eigen::VectorXd ut = p.solve_lower(kt);
  const double mu_x = p.size() > 0 ? p.hyperparams().prior_mean + kt.dot(p.weights()) : p.hyperparams().prior_mean;
  const double cov_x = p.prior_cov(x, target_, x, s) - ut.dot(vc);
  a[static_cast<std::size_t>(m)] = mu_x;
  b[static_cast<std::size_t>(m)] = cov_x / sd;

  const EnvelopeResult env = expected_max_affine(a, b, grad != nullptr);
  const double value = env.excess;
  if (!grad || p.size() == 0) return value;

  const Eigen::MatrixXd dk = p.cross_cov_grad(x, s);
  const Eigen::MatrixXd dkt = p.cross_cov_grad(x, target_);
  const auto upper = p.chol_lower().transpose().triangularView<Eigen::Upper>();
  const Eigen::VectorXd alpha_c = upper.solve(vc);
  const Eigen::VectorXd alpha_t = upper.solve(ut);
  const Eigen::VectorXd dvar = -2.0 * dk.transpose() * alpha_c;
  const double var_sd = var * sd;

  Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double w = env.d_slopes[static_cast<std::size_t>(j)];
    if (w == 0.0) continue;
    const Eigen::VectorXd dcov =
        prior_kernel_grad(set_[j], target_, x, s, p.hyperparams()) - dk.transpose() * full_set_.col(j);
    g += w * (dcov / sd - (0.5 * cov_set[j] / var_sd) * dvar);
  }
  const Eigen::VectorXd dmu_x = dkt.transpose() * p.weights();
  const Eigen::VectorXd dcov_x = -(dkt.transpose() * alpha_c + dk.transpose() * alpha_t);
  g += env.d_slopes[static_cast<std::size_t>(m)] * (dcov_x / sd - (0.5 * cov_x / var_sd) * dvar);
  g += env.d_intercepts[static_cast<std::size_t>(m)] * dmu_x;
  if (env.argmax_intercept == static_cast<int>(m)) g -= dmu_x;
  *grad = g;
  return value;
}

namespace {

// Per-point quantities for a candidate on the fresh seed, reused across pairs.
struct FreshColumn {
  Point x;
  Eigen::VectorXd v;        // L^{-1} k0(X~, (x, f))
  Eigen::VectorXd u;        // L^{-1} k0(X~, (x, target))
  Eigen::VectorXd cov_set;  // k^n((a, target), (x, f)) over the discretisation
  double mu = 0.0;          // target mean at x
};

FreshColumn make_column(const Posterior& p, const std::vector<Point>& set, const Eigen::MatrixXd& half_set, Seed target,
                        Seed fresh, const Point& x) {
  FreshColumn c;
  c.x = x;
  const auto m = static_cast<Eigen::Index>(set.size());
  c.cov_set.resize(m);
  if (p.size() > 0) {
    c.v = p.solve_lower(p.cross_cov(x, fresh));
    c.u = p.solve_lower(p.cross_cov(x, target));
  } else {
    c.v.resize(0);
    c.u.resize(0);
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    c.cov_set[j] = p.prior_cov(set[j], target, x, fresh) - (p.size() > 0 ? half_set.col(j).dot(c.v) : 0.0);
  }
  c.mu = p.mean(x, target);
  return c;
}

double pair_value(const Posterior& p, const Eigen::VectorXd& mu_set, Seed target, Seed fresh, const FreshColumn& ci,
                  const FreshColumn& cj, double degenerate) {
  const double var_i = p.prior_cov(ci.x, fresh, ci.x, fresh) - ci.v.squaredNorm();
  const double var_j = p.prior_cov(cj.x, fresh, cj.x, fresh) - cj.v.squaredNorm();
  const double cov_ij = p.prior_cov(ci.x, fresh, cj.x, fresh) - ci.v.dot(cj.v);
  const double denom = var_i + var_j - 2.0 * cov_ij;
  if (!(denom >= degenerate)) return 0.0;
  const double sd = std::sqrt(denom);
  const auto m = static_cast<std::size_t>(mu_set.size());
  std::vector<double> a(m + 2), b(m + 2);
  for (std::size_t j = 0; j < m; ++j) {
    a[j] = mu_set[static_cast<Eigen::Index>(j)];
    b[j] = (ci.cov_set[static_cast<Eigen::Index>(j)] - cj.cov_set[static_cast<Eigen::Index>(j)]) / sd;
  }
  const Eigen::VectorXd dv = ci.v - cj.v;
  auto own_line = [&](const FreshColumn& c) {
    const double num = p.prior_cov(c.x, target, ci.x, fresh) - p.prior_cov(c.x, target, cj.x, fresh) -
                       (p.size() > 0 ? c.u.dot(dv) : 0.0);
    return num / sd;
  };
  a[m] = ci.mu;
  b[m] = own_line(ci);
  a[m + 1] = cj.mu;
  b[m + 1] = own_line(cj);
  return 0.5 * expected_max_affine(a, b).excess;
}

}  // namespace

double KgEvaluator::kg_pw(const Point& xi, const Point& xj) const {
  if (xi.size() != xj.size()) throw InvalidInput("kg_pw: dimension mismatch");
  if (xi == xj) throw InvalidInput("kg_pw: the two points of a pair must differ");
  const Seed fresh = fresh_seed();
  const FreshColumn ci = make_column(*p_, set_, half_set_, target_, fresh, xi);
  const FreshColumn cj = make_column(*p_, set_, half_set_, target_, fresh, xj);
  return pair_value(*p_, mu_set_, target_, fresh, ci, cj, degenerate_);
}

double kg_crn(const Posterior& p, const Point& x, Seed s, const DiscretizationSet& a) {
  return KgEvaluator(p, a.points).kg(x, s);
}

Eigen::VectorXd kg_crn_gradient(const Posterior& p, const Point& x, Seed s, const DiscretizationSet& a) {
  Eigen::VectorXd g;
  KgEvaluator(p, a.points).kg(x, s, &g);
  return g;
}

double kg_pw(const Posterior& p, const Point& xi, const Point& xj, const DiscretizationSet& a) {
  return KgEvaluator(p, a.points).kg_pw(xi, xj);
}

namespace {

struct Candidate {
  Point x;
  Seed seed = 1;
  double value = -1.0;
};

bool exhaustive_ok(const Domain& domain, double count, double limit) { return domain.integer && count <= limit; }

Candidate search_seeds(const KgEvaluator& eval, const Domain& domain, const std::vector<Seed>& seeds,
                       const AcquisitionOptions& opts, std::mt19937_64& rng, bool seed_stages) {
  Candidate best;
  auto consider = [&](const Point& x, Seed s, double v) {
    if (best.value < 0.0 || v > best.value) best = Candidate{x, s, v};
  };

  if (exhaustive_ok(domain, domain.cardinality() * static_cast<double>(seeds.size()), opts.exhaustive_limit)) {
    for (const Point& x : domain.enumerate()) {
      for (Seed s : seeds) consider(x, s, eval.kg(x, s));
    }
    return best;
  }

  const int screen = std::max(1, opts.screen);
  std::vector<Point> pts = latin_hypercube(domain, screen, rng);
  std::vector<Seed> assigned(static_cast<std::size_t>(screen));
  for (int i = 0; i < screen; ++i) assigned[static_cast<std::size_t>(i)] = seeds[static_cast<std::size_t>(i) % seeds.size()];
  std::shuffle(assigned.begin(), assigned.end(), rng);

  std::vector<double> vals(static_cast<std::size_t>(screen));
  for (int i = 0; i < screen; ++i) {
    const auto k = static_cast<std::size_t>(i);
    vals[k] = eval.kg(pts[k], assigned[k]);
    consider(pts[k], assigned[k], vals[k]);
  }
  std::vector<int> order(static_cast<std::size_t>(screen));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return vals[static_cast<std::size_t>(i)] > vals[static_cast<std::size_t>(j)]; });

  auto ascend = [&](const Point& start, Seed s, int steps) {
    const ValueAndGradient f = [&eval, s](const Point& x, Eigen::VectorXd* g) { return eval.kg(x, s, g); };
    const AscentResult r = local_ascent(f, domain, start, steps);
    consider(r.x, s, r.value);
  };

  const int starts = std::min(screen, std::max(0, opts.starts));
  for (int k = 0; k < starts; ++k) {
    const auto i = static_cast<std::size_t>(order[static_cast<std::size_t>(k)]);
    ascend(pts[i], assigned[i], opts.ascent_steps);
  }

  if (seed_stages && seeds.size() > 1) {
    const Point x = best.x;
    Seed best_seed = best.seed;
    double best_seed_value = best.value;
    for (Seed s : seeds) {
      const double v = eval.kg(x, s);
      if (v > best_seed_value) {
        best_seed_value = v;
        best_seed = s;
      }
    }
    consider(x, best_seed, best_seed_value);
    ascend(x, best_seed, opts.finetune_steps);
  }
  return best;
}

}  // namespace

bool negligible_value(const Posterior& p, double value) {
  return !(value > kNegligibleValue * std::sqrt(p.hyperparams().target_variance));
}

AcquisitionChoice optimize_kg_crn(const KgEvaluator& eval, const AcquisitionSpace& space,
                                  const AcquisitionOptions& opts, std::mt19937_64& rng) {
  if (space.candidate_seeds.empty()) throw InvalidInput("optimize_kg_crn: no candidate seeds");
  std::mt19937_64 fresh_rng(rng());
  std::mt19937_64 full_rng(rng());
  const Candidate fresh = search_seeds(eval, space.domain, {space.fresh_seed}, opts, fresh_rng, false);
  Candidate chosen = fresh;
  const bool old_allowed = space.candidate_seeds.size() > 1 ||
                           (space.candidate_seeds.size() == 1 && space.candidate_seeds.front() != space.fresh_seed);
  if (old_allowed) {
    const Candidate full = search_seeds(eval, space.domain, space.candidate_seeds, opts, full_rng, true);
    if (full.value > fresh.value) chosen = full;
  }
  AcquisitionChoice out;
  out.x = chosen.x;
  out.seed = chosen.seed;
  out.value = std::max(0.0, chosen.value);
  out.fresh_value = std::max(0.0, fresh.value);
  out.no_improvement = negligible_value(eval.posterior(), chosen.value);
  return out;
}

PairwiseDecision best_pair(const KgEvaluator& eval, const Domain& domain, const Point& single_argmax,
                           const AcquisitionOptions& opts, std::mt19937_64& rng) {
  const Posterior& p = eval.posterior();
  const Seed fresh = eval.fresh_seed();
  const Seed target = eval.target();
  const double degenerate = kDegenerateVariance * p.hyperparams().target_variance;

  // Rebuild the evaluator's precomputation locally; KgEvaluator keeps it private.
  const std::vector<Point>& set = eval.discretization();
  const auto n = static_cast<Eigen::Index>(p.size());
  const auto m = static_cast<Eigen::Index>(set.size());
  Eigen::VectorXd mu_set(m);
  Eigen::MatrixXd cross(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    mu_set[j] = p.mean(set[j], target);
    if (n > 0) cross.col(j) = p.cross_cov(set[j], target);
  }
  const Eigen::MatrixXd half_set = n > 0 ? p.solve_lower(cross) : Eigen::MatrixXd(0, m);
  auto column = [&](const Point& x) { return make_column(p, set, half_set, target, fresh, x); };
  auto value_of = [&](const FreshColumn& a, const FreshColumn& b) {
    if (a.x == b.x) return 0.0;
    return pair_value(p, mu_set, target, fresh, a, b, degenerate);
  };

  PairwiseDecision best;
  best.pair = true;
  best.seed = fresh;
  best.pair_value = -1.0;
  auto consider = [&](const Point& a, const Point& b, double v) {
    if (v > best.pair_value) {
      best.pair_value = v;
      best.first = a;
      best.second = b;
    }
  };

  const double card = domain.cardinality();
  if (domain.integer && card * (card - 1.0) / 2.0 <= opts.exhaustive_limit) {
    const std::vector<Point> all = domain.enumerate();
    std::vector<FreshColumn> cols;
    cols.reserve(all.size());
    for (const Point& x : all) cols.push_back(column(x));
    for (std::size_t i = 0; i < cols.size(); ++i) {
      for (std::size_t j = i + 1; j < cols.size(); ++j) consider(all[i], all[j], value_of(cols[i], cols[j]));
    }
    best.pair_value = std::max(0.0, best.pair_value);
    return best;
  }

  const int d = domain.dim();
  const int screen = std::max(1, opts.screen);
  const int starts = std::max(0, opts.starts);

  // Conditional search: first point fixed at the single-sample argmax.
  const FreshColumn c1 = column(single_argmax);
  auto cond_value = [&](const Point& x2) { return value_of(c1, column(x2)); };
  {
    std::vector<Point> pts = latin_hypercube(domain, screen, rng);
    std::vector<double> vals(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      vals[i] = cond_value(pts[i]);
      consider(single_argmax, pts[i], vals[i]);
    }
    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return vals[i] > vals[j]; });
    const ValueAndGradient f = [&](const Point& x, Eigen::VectorXd* g) {
      if (g) *g = numerical_gradient(cond_value, domain, x);
      return cond_value(x);
    };
    for (std::size_t k = 0; k < std::min<std::size_t>(static_cast<std::size_t>(starts), order.size()); ++k) {
      const AscentResult r = local_ascent(f, domain, pts[order[k]], opts.ascent_steps);
      consider(single_argmax, r.x, r.value);
    }
  }

  // Joint search over X x X, including the best pair so far as a start.
  Eigen::VectorXd lo(2 * d), hi(2 * d);
  lo << domain.lower, domain.lower;
  hi << domain.upper, domain.upper;
  const Domain product = domain.integer ? Domain::lattice(lo, hi) : Domain::box(lo, hi);
  auto joint_value = [&](const Point& z) { return value_of(column(z.head(d)), column(z.tail(d))); };
  {
    std::vector<Point> pts = latin_hypercube(product, screen, rng);
    std::vector<double> vals(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      vals[i] = joint_value(pts[i]);
      consider(pts[i].head(d), pts[i].tail(d), vals[i]);
    }
    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return vals[i] > vals[j]; });
    std::vector<Point> seeds_for_ascent;
    Point incumbent(2 * d);
    incumbent << best.first, best.second;
    seeds_for_ascent.push_back(incumbent);
    for (std::size_t k = 0; k + 1 < static_cast<std::size_t>(starts) && k < order.size(); ++k)
      seeds_for_ascent.push_back(pts[order[k]]);
    const ValueAndGradient f = [&](const Point& z, Eigen::VectorXd* g) {
      if (g) *g = numerical_gradient(joint_value, product, z);
      return joint_value(z);
    };
    for (const Point& start : seeds_for_ascent) {
      const AscentResult r = local_ascent(f, product, start, opts.ascent_steps);
      consider(r.x.head(d), r.x.tail(d), r.value);
    }
  }
  best.pair_value = std::max(0.0, best.pair_value);
  return best;
}

PairwiseDecision select_pw_mode(const KgEvaluator& eval, const AcquisitionSpace& space,
                                const AcquisitionOptions& opts, std::mt19937_64& rng, bool allow_pair) {
  const AcquisitionChoice single = optimize_kg_crn(eval, space.fresh_only(), opts, rng);
  PairwiseDecision out;
  out.first = single.x;
  out.seed = space.fresh_seed;
  out.single_value = single.value;
  if (!allow_pair) return out;
  const PairwiseDecision pair = best_pair(eval, space.domain, single.x, opts, rng);
  out.pair_value = pair.pair_value;
  if (pair.pair_value > single.value) {
    out.pair = true;
    out.first = pair.first;
    out.second = pair.second;
  }
  return out;
}

Point recommend(const Posterior& p, const Domain& domain, const RecommendOptions& opts, std::mt19937_64& rng) {
  if (domain.integer && domain.cardinality() <= opts.exhaustive_limit) {
    const std::vector<Point> all = domain.enumerate();
    std::size_t best = 0;
    double best_v = p.target_mean(all[0]);
    for (std::size_t i = 1; i < all.size(); ++i) {
      const double v = p.target_mean(all[i]);
      if (v > best_v) {
        best_v = v;
        best = i;
      }
    }
    return all[best];
  }
  std::vector<Point> pts = latin_hypercube(domain, std::max(1, opts.screen), rng);
  if (p.size() == 0) return pts.front();
  for (const Point& x : p.data().points()) pts.push_back(x);
  std::vector<double> vals(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) vals[i] = p.target_mean(pts[i]);
  std::vector<std::size_t> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return vals[i] > vals[j]; });
  Point best = pts[order[0]];
  double best_v = vals[order[0]];
  const ValueAndGradient f = [&p](const Point& x, Eigen::VectorXd* g) {
    if (g) *g = p.mean_grad(x, kTargetSeed);
    return p.target_mean(x);
  };
  for (std::size_t k = 0; k < std::min<std::size_t>(static_cast<std::size_t>(std::max(0, opts.starts)), order.size()); ++k) {
    const AscentResult r = local_ascent(f, domain, pts[order[k]], opts.ascent_steps);
    if (r.value > best_v) {
      best_v = r.value;
      best = r.x;
    }
  }
  return best;
}

}  // namespace crnbo

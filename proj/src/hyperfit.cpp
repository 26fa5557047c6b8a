#include "crnbo/hyperfit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "crnbo/errors.hpp"
#include "crnbo/local_search.hpp"
#include "crnbo/posterior.hpp"

namespace crnbo {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Pairwise quantities that do not depend on hyperparameters.
struct PairCache {
  std::vector<Eigen::MatrixXd> sq_diff;  // (x_ik - x_jk)^2 per dimension
  Eigen::MatrixXd same;                  // 1 where the seeds share a stream
  Eigen::VectorXd centred_base;          // outputs

  explicit PairCache(const Dataset& data) {
    const auto n = static_cast<Eigen::Index>(data.size());
    const int d = data.dim();
    sq_diff.assign(static_cast<std::size_t>(d), Eigen::MatrixXd(n, n));
    same.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const Point& xi = data.x(static_cast<std::size_t>(i));
        const Point& xj = data.x(static_cast<std::size_t>(j));
        for (int k = 0; k < d; ++k) {
          const double diff = xi[k] - xj[k];
          sq_diff[static_cast<std::size_t>(k)](i, j) = diff * diff;
        }
        same(i, j) = same_stream(data.seed(static_cast<std::size_t>(i)), data.seed(static_cast<std::size_t>(j))) ? 1.0 : 0.0;
      }
    }
    centred_base = data.outputs();
  }
};

LikelihoodValue lml_cached(const PairCache& c, const CrnHyperparams& hp, Eigen::VectorXd* grad_log) {
  const int d = hp.dim();
  const auto n = c.same.rows();
  if (n == 0) throw InvalidInput("log_marginal_likelihood: empty data");
  if (static_cast<int>(c.sq_diff.size()) != d) throw InvalidInput("log_marginal_likelihood: dimension mismatch");
  hp.validate();

  Eigen::MatrixXd scaled = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < d; ++k) {
    const double l2 = hp.lengthscales[k] * hp.lengthscales[k];
    scaled += c.sq_diff[static_cast<std::size_t>(k)] / l2;
  }
  const Eigen::MatrixXd corr = (-0.5 * scaled.array()).exp().matrix();
  Eigen::MatrixXd k_mat = hp.target_variance * corr;
  k_mat.array() += c.same.array() * (hp.offset_variance + hp.bias_variance * corr.array());
  k_mat.diagonal().array() += hp.white_variance;

  Eigen::MatrixXd lower;
  const auto jitter = factor_with_jitter(k_mat, hp.target_variance, lower);
  if (!jitter) throw NumericalError("log_marginal_likelihood: covariance matrix is not positive definite");

  const Eigen::VectorXd r = c.centred_base.array() - hp.prior_mean;
  const Eigen::VectorXd half = lower.triangularView<Eigen::Lower>().solve(r);
  const double log_det = 2.0 * lower.diagonal().array().log().sum();
  LikelihoodValue out;
  out.log_ml = -0.5 * (half.squaredNorm() + log_det + static_cast<double>(n) * std::log(2.0 * std::numbers::pi));

  if (grad_log) {
    const Eigen::VectorXd alpha = lower.transpose().triangularView<Eigen::Upper>().solve(half);
    Eigen::MatrixXd k_inv = Eigen::MatrixXd::Identity(n, n);
    lower.triangularView<Eigen::Lower>().solveInPlace(k_inv);
    lower.transpose().triangularView<Eigen::Upper>().solveInPlace(k_inv);
    const Eigen::MatrixXd w = alpha * alpha.transpose() - k_inv;
    // d logML / d theta = 0.5 tr(W dK) = 0.5 sum(W .* dK) for symmetric dK.
    auto half_trace = [&w](const Eigen::MatrixXd& dk) { return 0.5 * (w.array() * dk.array()).sum(); };

    grad_log->setZero(d + 4);
    const Eigen::ArrayXXd amp = hp.target_variance * corr.array() + hp.bias_variance * c.same.array() * corr.array();
    for (int k = 0; k < d; ++k) {
      const double l2 = hp.lengthscales[k] * hp.lengthscales[k];
      const Eigen::MatrixXd dk = (amp * c.sq_diff[static_cast<std::size_t>(k)].array() / l2).matrix();
      (*grad_log)[k] = half_trace(dk);
    }
    // The jitter is proportional to the target variance, so it moves with it.
    Eigen::MatrixXd d_target = hp.target_variance * corr;
    d_target.diagonal().array() += *jitter;
    (*grad_log)[d] = half_trace(d_target);
    if (hp.offset_variance > 0.0) (*grad_log)[d + 1] = half_trace(hp.offset_variance * c.same);
    if (hp.bias_variance > 0.0)
      (*grad_log)[d + 2] = half_trace((hp.bias_variance * c.same.array() * corr.array()).matrix());
    if (hp.white_variance > 0.0) (*grad_log)[d + 3] = 0.5 * hp.white_variance * w.trace();
  }
  return out;
}

double lml_or_neg_inf(const PairCache& c, const CrnHyperparams& hp) {
  try {
    return lml_cached(c, hp, nullptr).log_ml;
  } catch (const NumericalError&) {
    return kNegInf;
  }
}

// Log-space ascent over a subset of the parameters, the rest held fixed.
StageResult ascend_subset(const PairCache& c, const CrnHyperparams& start, const std::vector<int>& free,
                          const HyperBounds& bounds, int steps) {
  const int d = start.dim();
  const double prior_mean = start.prior_mean;
  Eigen::VectorXd full = log_parameters(start);
  const auto k = static_cast<Eigen::Index>(free.size());
  Eigen::VectorXd lo(k), hi(k), x0(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const int idx = free[static_cast<std::size_t>(i)];
    if (idx < d) {
      lo[i] = std::log(bounds.lengthscale_lower[idx]);
      hi[i] = std::log(bounds.lengthscale_upper[idx]);
    } else {
      lo[i] = std::log(bounds.variance_lower);
      hi[i] = std::log(bounds.variance_upper);
    }
    const double v = full[idx];
    x0[i] = std::isfinite(v) ? std::clamp(v, lo[i], hi[i]) : lo[i];
  }
  const Domain box = Domain::box(lo, hi);

  auto assemble = [&](const Point& z) {
    Eigen::VectorXd theta = full;
    for (Eigen::Index i = 0; i < k; ++i) theta[free[static_cast<std::size_t>(i)]] = z[i];
    return from_log_parameters(theta, prior_mean);
  };
  const ValueAndGradient f = [&](const Point& z, Eigen::VectorXd* g) {
    const CrnHyperparams hp = assemble(z);
    if (!g) return lml_or_neg_inf(c, hp);
    Eigen::VectorXd all;
    try {
      const double v = lml_cached(c, hp, &all).log_ml;
      g->resize(k);
      for (Eigen::Index i = 0; i < k; ++i) (*g)[i] = all[free[static_cast<std::size_t>(i)]];
      return v;
    } catch (const NumericalError&) {
      g->setZero(k);
      return kNegInf;
    }
  };
  const AscentResult r = gradient_ascent(f, box, x0, steps);
  return StageResult{assemble(r.x), r.value};
}

std::vector<int> free_indices(int d, bool target, const ModelFlags& flags, bool white) {
  std::vector<int> out(static_cast<std::size_t>(d));
  std::iota(out.begin(), out.end(), 0);
  if (target) out.push_back(d);
  if (flags.allow_offset) out.push_back(d + 1);
  if (flags.allow_bias) out.push_back(d + 2);
  if (white) out.push_back(d + 3);
  return out;
}

// Nelder-Mead maximisation on [0,1]^k with coordinates clipped after each move.
std::pair<Eigen::VectorXd, double> nelder_mead_unit(const std::function<double(const Eigen::VectorXd&)>& f,
                                                    std::vector<Eigen::VectorXd> simplex, int max_evals) {
  const auto k = simplex.front().size();
  auto clip = [](Eigen::VectorXd v) { return v.cwiseMax(0.0).cwiseMin(1.0); };
  std::vector<double> vals;
  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& v) {
    ++evals;
    return f(v);
  };
  for (auto& v : simplex) {
    v = clip(v);
    vals.push_back(eval(v));
  }
  std::vector<std::size_t> order(simplex.size());
  while (evals < max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second_worst = order[order.size() - 2];
    double spread = 0.0;
    for (const auto& v : simplex) spread = std::max(spread, (v - simplex[best]).cwiseAbs().maxCoeff());
    if (spread < 1e-6) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(k);
    for (std::size_t i = 0; i + 1 < order.size(); ++i) centroid += simplex[order[i]];
    centroid /= static_cast<double>(order.size() - 1);

    const Eigen::VectorXd reflected = clip(centroid + (centroid - simplex[worst]));
    const double fr = eval(reflected);
    if (fr > vals[best]) {
      const Eigen::VectorXd expanded = clip(centroid + 2.0 * (centroid - simplex[worst]));
      const double fe = eval(expanded);
      if (fe > fr) {
        simplex[worst] = expanded;
        vals[worst] = fe;
      } else {
        simplex[worst] = reflected;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr > vals[second_worst]) {
      simplex[worst] = reflected;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr > vals[worst];
    const Eigen::VectorXd contracted =
        outside ? clip(centroid + 0.5 * (reflected - centroid)) : clip(centroid + 0.5 * (simplex[worst] - centroid));
    const double fc = eval(contracted);
    if (fc > (outside ? fr : vals[worst])) {
      simplex[worst] = contracted;
      vals[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i < simplex.size(); ++i) {
      if (i == best) continue;
      simplex[i] = clip(simplex[best] + 0.5 * (simplex[i] - simplex[best]));
      vals[i] = eval(simplex[i]);
    }
  }
  const auto it = std::max_element(vals.begin(), vals.end());
  return {simplex[static_cast<std::size_t>(it - vals.begin())], *it};
}

}  // namespace

HyperBounds HyperBounds::for_data(const Domain& domain, const Dataset& data) {
  HyperBounds b;
  const Eigen::VectorXd width = domain.width().cwiseMax(1e-12);
  b.lengthscale_lower = 1e-3 * width;
  b.lengthscale_upper = 2.0 * width;
  double range = 0.0;
  if (!data.empty()) {
    const Eigen::VectorXd y = data.outputs();
    range = y.maxCoeff() - y.minCoeff();
  }
  b.variance_upper = range > 0.0 ? 1.5 * range * range : 1.0;
  b.variance_lower = 1e-6 * b.variance_upper;
  return b;
}

FitPlan refit_schedule(int iteration, const FitOptions& opts) {
  if (iteration < 0) throw InvalidInput("refit_schedule: negative iteration");
  if (iteration <= opts.full_until) return FitPlan::Full;
  if (opts.full_every > 0 && iteration % opts.full_every == 0) return FitPlan::Full;
  return FitPlan::WarmStart;
}

CrnHyperparams apply_split(CrnHyperparams hp, double total, SplitParams split) {
  const double a = std::clamp(split.alpha, 0.0, 1.0);
  const double b = std::clamp(split.beta, 0.0, 1.0);
  hp.offset_variance = b * (1.0 - a) * total;
  hp.bias_variance = (1.0 - b) * (1.0 - a) * total;
  hp.white_variance = a * total;
  return hp;
}

LikelihoodValue log_marginal_likelihood(const Dataset& data, const CrnHyperparams& hp, Eigen::VectorXd* grad_log) {
  if (data.empty()) throw InvalidInput("log_marginal_likelihood: empty data");
  if (hp.dim() != data.dim()) throw InvalidInput("log_marginal_likelihood: dimension mismatch");
  return lml_cached(PairCache(data), hp, grad_log);
}

Eigen::VectorXd log_parameters(const CrnHyperparams& hp) {
  const int d = hp.dim();
  Eigen::VectorXd t(d + 4);
  t.head(d) = hp.lengthscales.array().log().matrix();
  auto safe_log = [](double v) { return v > 0.0 ? std::log(v) : kNegInf; };
  t[d] = safe_log(hp.target_variance);
  t[d + 1] = safe_log(hp.offset_variance);
  t[d + 2] = safe_log(hp.bias_variance);
  t[d + 3] = safe_log(hp.white_variance);
  return t;
}

CrnHyperparams from_log_parameters(const Eigen::VectorXd& theta, double prior_mean) {
  const auto d = theta.size() - 4;
  if (d < 1) throw InvalidInput("from_log_parameters: vector too short");
  CrnHyperparams hp;
  hp.lengthscales = theta.head(d).array().exp().matrix();
  hp.target_variance = std::exp(theta[d]);
  hp.offset_variance = std::exp(theta[d + 1]);
  hp.bias_variance = std::exp(theta[d + 2]);
  hp.white_variance = std::exp(theta[d + 3]);
  hp.prior_mean = prior_mean;
  return hp;
}

CrnHyperparams small_sample_defaults(const Domain& domain, const Dataset& data) {
  CrnHyperparams hp;
  hp.lengthscales = (0.2 * domain.width()).cwiseMax(1e-12);
  double var = 1.0;
  if (data.size() >= 2) {
    const Eigen::VectorXd y = data.outputs();
    const double m = y.mean();
    var = (y.array() - m).square().sum() / static_cast<double>(y.size() - 1);
    if (!(var > 0.0)) var = 1.0;
  }
  hp.target_variance = var;
  hp.white_variance = 0.1 * var;
  hp.prior_mean = data.empty() ? 0.0 : data.mean_output();
  return hp;
}

StageResult fit_stage1_independent(const Dataset& data, const HyperBounds& bounds, const FitOptions& opts,
                                   std::mt19937_64& rng) {
  const PairCache cache(data);
  const int d = data.dim();
  const double mean = data.mean_output();
  const int screen = std::max(1, opts.screen);

  std::vector<CrnHyperparams> candidates;
  std::vector<double> scores;
  candidates.reserve(static_cast<std::size_t>(screen));
  for (int i = 0; i < screen; ++i) {
    CrnHyperparams hp;
    hp.lengthscales.resize(d);
    for (int k = 0; k < d; ++k) {
      hp.lengthscales[k] =
          bounds.lengthscale_lower[k] + uniform01(rng) * (bounds.lengthscale_upper[k] - bounds.lengthscale_lower[k]);
    }
    hp.target_variance = bounds.variance_lower + uniform01(rng) * (bounds.variance_upper - bounds.variance_lower);
    hp.white_variance = bounds.variance_lower + uniform01(rng) * (bounds.variance_upper - bounds.variance_lower);
    hp.prior_mean = mean;
    scores.push_back(lml_or_neg_inf(cache, hp));
    candidates.push_back(std::move(hp));
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  if (!std::isfinite(scores[order.front()])) throw FittingError("stage 1: every candidate failed to factor");

  const std::vector<int> free = free_indices(d, true, ModelFlags{false, false}, true);
  StageResult best{candidates[order.front()], scores[order.front()]};
  const int starts = std::min<int>(std::max(1, opts.starts), static_cast<int>(order.size()));
  for (int i = 0; i < starts; ++i) {
    const std::size_t idx = order[static_cast<std::size_t>(i)];
    if (!std::isfinite(scores[idx])) break;
    const StageResult r = ascend_subset(cache, candidates[idx], free, bounds, opts.ascent_steps);
    if (r.log_ml > best.log_ml) best = r;
  }
  best.hp.offset_variance = 0.0;
  best.hp.bias_variance = 0.0;
  return best;
}

StageResult fit_stage2_split(const Dataset& data, const StageResult& stage1, const ModelFlags& flags,
                             const FitOptions& opts) {
  if (!flags.allow_offset && !flags.allow_bias) return stage1;
  const PairCache cache(data);
  const double total = stage1.hp.white_variance;

  // Free coordinates: alpha always; beta only when both components exist.
  const bool beta_free = flags.allow_offset && flags.allow_bias;
  const double fixed_beta = flags.allow_offset ? 1.0 : 0.0;
  auto to_split = [&](const Eigen::VectorXd& v) {
    return SplitParams{v[0], beta_free ? v[1] : fixed_beta};
  };
  const std::function<double(const Eigen::VectorXd&)> f = [&](const Eigen::VectorXd& v) {
    return lml_or_neg_inf(cache, apply_split(stage1.hp, total, to_split(v)));
  };
  std::vector<Eigen::VectorXd> simplex;
  if (beta_free) {
    simplex = {Eigen::Vector2d(1.0, 0.5), Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(0.75, 0.1)};
  } else {
    simplex = {Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 0.5)};
  }
  const auto [arg, value] = nelder_mead_unit(f, simplex, opts.nelder_mead_evals);
  StageResult out{apply_split(stage1.hp, total, to_split(arg)), value};
  // The alpha = 1 corner reproduces stage 1; never return anything worse.
  if (!(out.log_ml >= stage1.log_ml)) return stage1;
  return out;
}

StageResult fit_stage3_joint(const Dataset& data, const StageResult& start, const HyperBounds& bounds,
                             const ModelFlags& flags, int steps) {
  const PairCache cache(data);
  const std::vector<int> free = free_indices(start.hp.dim(), true, flags, true);
  StageResult r = ascend_subset(cache, start.hp, free, bounds, steps);
  if (!flags.allow_offset) r.hp.offset_variance = 0.0;
  if (!flags.allow_bias) r.hp.bias_variance = 0.0;
  r.log_ml = lml_or_neg_inf(cache, r.hp);
  if (!(r.log_ml >= start.log_ml)) return start;
  return r;
}

CrnHyperparams apply_model_flags(CrnHyperparams hp, const ModelFlags& flags, bool fold) {
  if (!flags.allow_offset) {
    if (fold) hp.white_variance += hp.offset_variance;
    hp.offset_variance = 0.0;
  }
  if (!flags.allow_bias) {
    if (fold) hp.white_variance += hp.bias_variance;
    hp.bias_variance = 0.0;
  }
  return hp;
}

FitResult fit_hyperparameters(const Dataset& data, const Domain& domain, const ModelFlags& flags,
                              const FitOptions& opts, std::mt19937_64& rng, FitPlan plan,
                              const CrnHyperparams* warm) {
  if (data.dim() != domain.dim()) throw InvalidInput("fit_hyperparameters: dimension mismatch");
  FitResult out;
  out.plan = plan;
  if (static_cast<int>(data.size()) < std::max(1, opts.min_points)) {
    out.hp = small_sample_defaults(domain, data);
    out.defaults_used = true;
    out.log_ml = data.empty() ? 0.0 : lml_or_neg_inf(PairCache(data), out.hp);
    return out;
  }
  const HyperBounds bounds = HyperBounds::for_data(domain, data);
  const double mean = data.mean_output();

  if (plan == FitPlan::WarmStart && warm != nullptr) {
    CrnHyperparams start = apply_model_flags(*warm, flags, false);
    start.prior_mean = mean;
    const PairCache cache(data);
    const StageResult s{start, lml_or_neg_inf(cache, start)};
    const StageResult r = fit_stage3_joint(data, s, bounds, flags, opts.warm_steps);
    if (std::isfinite(r.log_ml)) {
      out.hp = r.hp;
      out.log_ml = r.log_ml;
      out.stage_log_ml = {r.log_ml};
      return out;
    }
    out.plan = FitPlan::Full;
  }

  const StageResult s1 = fit_stage1_independent(data, bounds, opts, rng);
  const StageResult s2 = fit_stage2_split(data, s1, flags, opts);
  const StageResult s3 = fit_stage3_joint(data, s2, bounds, flags, opts.joint_steps);
  out.hp = s3.hp;
  out.log_ml = s3.log_ml;
  out.stage_log_ml = {s1.log_ml, s2.log_ml, s3.log_ml};
  return out;
}

}  // namespace crnbo

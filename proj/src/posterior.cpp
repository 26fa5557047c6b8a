#include "crnbo/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "crnbo/errors.hpp"

namespace crnbo {

Eigen::MatrixXd prior_matrix(const Dataset& data, const CrnHyperparams& hp) {
  const auto n = static_cast<Eigen::Index>(data.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      k(i, j) = prior_kernel(data.x(i), data.seed(i), data.x(j), data.seed(j), hp);
      k(j, i) = k(i, j);
    }
  }
  return k;
}

std::optional<double> factor_with_jitter(const Eigen::MatrixXd& m, double target_variance,
                                         Eigen::MatrixXd& lower) {
  for (double rel = kJitterStart; rel <= kJitterMax * 1.0000001; rel *= 10.0) {
    const double jitter = rel * target_variance;
    Eigen::MatrixXd a = m;
    a.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().minCoeff() > 0.0) {
      lower = llt.matrixL();
      return jitter;
    }
  }
  return std::nullopt;
}

Posterior Posterior::fit(Dataset data, CrnHyperparams hp) {
  hp.validate();
  if (hp.dim() != data.dim()) throw InvalidInput("fit_posterior: hyperparameter dimension does not match data");
  Posterior p(std::move(data), std::move(hp));
  const auto n = static_cast<Eigen::Index>(p.data_.size());
  if (n == 0) {
    p.lower_.resize(0, 0);
    p.weights_.resize(0);
    return p;
  }
  const Eigen::MatrixXd k = prior_matrix(p.data_, p.hp_);
  const auto jitter = factor_with_jitter(k, p.hp_.target_variance, p.lower_);
  if (!jitter) {
    std::ostringstream os;
    os << "fit_posterior: Cholesky failed at jitter " << kJitterMax * p.hp_.target_variance << " (= "
       << kJitterMax << " * target_variance) on " << n << " observations";
    throw NumericalError(os.str());
  }
  p.jitter_ = *jitter;
  const Eigen::VectorXd centred = p.data_.outputs().array() - p.hp_.prior_mean;
  p.weights_ = p.solve(centred);
  return p;
}

Posterior fit_posterior(Dataset data, CrnHyperparams hp) { return Posterior::fit(std::move(data), std::move(hp)); }

CrnHyperparams with_empirical_mean(CrnHyperparams hp, const Dataset& data) {
  hp.prior_mean = data.mean_output();
  return hp;
}

Eigen::VectorXd Posterior::solve_lower(const Eigen::VectorXd& v) const {
  return lower_.triangularView<Eigen::Lower>().solve(v);
}

Eigen::MatrixXd Posterior::solve_lower(const Eigen::MatrixXd& m) const {
  return lower_.triangularView<Eigen::Lower>().solve(m);
}

Eigen::VectorXd Posterior::solve(const Eigen::VectorXd& v) const {
  const Eigen::VectorXd half = solve_lower(v);
  return lower_.transpose().triangularView<Eigen::Upper>().solve(half);
}

Eigen::VectorXd Posterior::cross_cov(const Point& x, Seed s) const {
  const auto n = static_cast<Eigen::Index>(data_.size());
  Eigen::VectorXd k(n);
  for (Eigen::Index i = 0; i < n; ++i) k[i] = prior_kernel(data_.x(i), data_.seed(i), x, s, hp_);
  if (n > 0 && is_observation_seed(s)) {
    if (auto idx = data_.find(x, s)) k[static_cast<Eigen::Index>(*idx)] += jitter_;
  }
  return k;
}

Eigen::MatrixXd Posterior::cross_cov_grad(const Point& x, Seed s) const {
  const auto n = static_cast<Eigen::Index>(data_.size());
  Eigen::MatrixXd g(n, x.size());
  for (Eigen::Index i = 0; i < n; ++i) g.row(i) = prior_kernel_grad(data_.x(i), data_.seed(i), x, s, hp_).transpose();
  return g;
}

double Posterior::prior_cov(const Point& x, Seed s, const Point& x2, Seed s2) const {
  double k = prior_kernel(x, s, x2, s2, hp_);
  if (jitter_ > 0.0 && s == s2 && is_observation_seed(s) && x == x2 && data_.find(x, s)) k += jitter_;
  return k;
}

double Posterior::mean(const Point& x, Seed s) const {
  if (x.size() != hp_.dim()) throw InvalidInput("posterior_mean: dimension mismatch");
  if (data_.empty()) return hp_.prior_mean;
  return hp_.prior_mean + cross_cov(x, s).dot(weights_);
}

Eigen::VectorXd Posterior::mean_grad(const Point& x, Seed s) const {
  if (x.size() != hp_.dim()) throw InvalidInput("posterior_mean: dimension mismatch");
  if (data_.empty()) return Eigen::VectorXd::Zero(x.size());
  return cross_cov_grad(x, s).transpose() * weights_;
}

double Posterior::clamp_variance(double v) const {
  if (v >= 0.0) return v;
  const double scale = std::max(1.0, hp_.target_variance + hp_.difference_variance());
  if (v >= -1e-9 * scale) return 0.0;
  std::ostringstream os;
  os << "posterior variance " << v << " is negative beyond tolerance (jitter " << jitter_ << ")";
  throw NumericalError(os.str());
}

double Posterior::cov(const Point& x, Seed s, const Point& x2, Seed s2) const {
  if (x.size() != hp_.dim() || x2.size() != hp_.dim()) throw InvalidInput("posterior_cov: dimension mismatch");
  const double prior = prior_cov(x, s, x2, s2);
  if (data_.empty()) return prior;
  const Eigen::VectorXd a = solve_lower(cross_cov(x, s));
  const bool same = (s == s2) && (x == x2);
  const Eigen::VectorXd b = same ? a : solve_lower(cross_cov(x2, s2));
  const double k = prior - a.dot(b);
  return same ? clamp_variance(k) : k;
}

}  // namespace crnbo

#include "crnbo/kernel.hpp"

#include <cmath>
#include <sstream>

#include "crnbo/errors.hpp"

namespace crnbo {

double CrnHyperparams::rho() const {
  const double denom = offset_variance + white_variance;
  return denom > 0.0 ? offset_variance / denom : 0.0;
}

void CrnHyperparams::validate() const {
  if (lengthscales.size() == 0) throw InvalidInput("hyperparameters: no lengthscales");
  for (int i = 0; i < lengthscales.size(); ++i) {
    if (!(lengthscales[i] > 0.0) || !std::isfinite(lengthscales[i]))
      throw InvalidInput("hyperparameters: lengthscales must be positive");
  }
  if (!(target_variance > 0.0) || !std::isfinite(target_variance))
    throw InvalidInput("hyperparameters: target_variance must be positive");
  for (double v : {offset_variance, bias_variance, white_variance}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidInput("hyperparameters: variances must be non-negative");
  }
  if (!std::isfinite(prior_mean)) throw InvalidInput("hyperparameters: prior_mean must be finite");
}

std::string CrnHyperparams::describe() const {
  std::ostringstream os;
  os << "lengthscales=[";
  for (int i = 0; i < lengthscales.size(); ++i) os << (i ? "," : "") << lengthscales[i];
  os << "] target_variance=" << target_variance << " offset_variance=" << offset_variance
     << " bias_variance=" << bias_variance << " white_variance=" << white_variance
     << " prior_mean=" << prior_mean << " rho=" << rho();
  return os.str();
}

double se_correlation(const Point& x, const Point& x2, const Eigen::VectorXd& lengthscales) {
  const Eigen::ArrayXd scaled = (x - x2).array() / lengthscales.array();
  return std::exp(-0.5 * scaled.square().sum());
}

namespace {

void check_dims(const Point& x, const Point& x2, const CrnHyperparams& hp) {
  if (x.size() != hp.lengthscales.size() || x2.size() != hp.lengthscales.size())
    throw InvalidInput("prior_kernel: dimension mismatch");
}

}  // namespace

double prior_kernel(const Point& x, Seed s, const Point& x2, Seed s2, const CrnHyperparams& hp) {
  check_dims(x, x2, hp);
  const double corr = se_correlation(x, x2, hp.lengthscales);
  double k = hp.target_variance * corr;
  if (same_stream(s, s2)) {
    k += hp.offset_variance + hp.bias_variance * corr;
    if (hp.white_variance > 0.0 && x == x2) k += hp.white_variance;
  }
  return k;
}

Eigen::VectorXd prior_kernel_grad(const Point& x, Seed s, const Point& x2, Seed s2, const CrnHyperparams& hp) {
  check_dims(x, x2, hp);
  const double corr = se_correlation(x, x2, hp.lengthscales);
  double amp = hp.target_variance;
  if (same_stream(s, s2)) amp += hp.bias_variance;
  return (amp * corr) * ((x - x2).array() / hp.lengthscales.array().square()).matrix();
}

}  // namespace crnbo

#include "crnbo/dataset.hpp"

#include <cmath>
#include <string>

#include "crnbo/errors.hpp"

namespace crnbo {

Dataset::Dataset(int dim) : dim_(dim) {
  if (dim < 1) throw InvalidInput("Dataset: dimension must be at least 1");
}

Dataset::Key Dataset::key_of(const Point& x, Seed s) {
  return {s, std::vector<double>(x.data(), x.data() + x.size())};
}

void Dataset::add(const Point& x, Seed s, double y) {
  if (x.size() != dim_)
    throw InvalidInput("Dataset: point has dimension " + std::to_string(x.size()) + ", expected " +
                       std::to_string(dim_));
  if (!is_observation_seed(s)) throw InvalidInput("Dataset: observation seeds must be >= 1");
  if (!std::isfinite(y)) throw InvalidInput("Dataset: output must be finite");
  auto [it, inserted] = index_.emplace(key_of(x, s), xs_.size());
  if (!inserted) throw InvalidInput("Dataset: duplicate (x, s) pair");
  xs_.push_back(x);
  seeds_.push_back(s);
  ys_.push_back(y);
  observed_.insert(s);
}

Eigen::VectorXd Dataset::outputs() const {
  return Eigen::Map<const Eigen::VectorXd>(ys_.data(), static_cast<Eigen::Index>(ys_.size()));
}

std::optional<std::size_t> Dataset::find(const Point& x, Seed s) const {
  if (x.size() != dim_) return std::nullopt;
  auto it = index_.find(key_of(x, s));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

double Dataset::mean_output() const {
  if (ys_.empty()) return 0.0;
  double sum = 0.0;
  for (double y : ys_) sum += y;
  return sum / static_cast<double>(ys_.size());
}

}  // namespace crnbo

#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace crnbo {

/// A candidate solution, in problem units.
using Point = Eigen::VectorXd;

/// Random-number seed label. Observation seeds are >= 1.
using Seed = std::int64_t;

/// Reserved labels for two distinct never-observed seeds. Predictions at these
/// labels are predictions of the seed-averaged target.
inline constexpr Seed kTargetSeed = 0;
inline constexpr Seed kTargetSeedAlt = -1;

inline bool is_observation_seed(Seed s) { return s >= 1; }

}  // namespace crnbo

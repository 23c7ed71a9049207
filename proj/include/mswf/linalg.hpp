#pragma once

#include <Eigen/Core>

namespace mswf {

inline constexpr int kMaxDim = 3;

// Phase-space vectors live in R^n with n <= 3; the fixed upper bound keeps
// them on the stack inside the ODE right-hand side.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

/// Japanese bracket <x> = (1 + |x|^2)^{1/2}.
inline double bracket(const Vec& x) { return std::sqrt(1.0 + x.squaredNorm()); }

}  // namespace mswf

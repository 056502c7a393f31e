#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/LU>

namespace nocutoff {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kHalfPi = std::numbers::pi / 2.0;

//---------------------------------------------------------------------------//
// Error taxonomy. The CLI maps ConfigError -> exit 2, NumericError -> exit 3.
//---------------------------------------------------------------------------//

/// Parameters or inputs that violate an admissibility constraint.
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// Quadrature non-convergence, overflow and similar numeric failures.
class NumericError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Operator (spectral) norm of a 2x2 matrix.
inline double op_norm(const Mat2& m) {
    // largest singular value, (|(a+d, c-b)| + |(a-d, b+c)|)/2; no cancellation
    // when the two singular values are close
    const double a = m(0, 0), b = m(0, 1), c = m(1, 0), d = m(1, 1);
    return 0.5 * (std::hypot(a + d, c - b) + std::hypot(a - d, b + c));
}

}  // namespace nocutoff

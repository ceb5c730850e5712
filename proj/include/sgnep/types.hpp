#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace sgnep {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Thrown when vector or matrix sizes disagree with the problem layout.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require_size(Index actual, Index expected, const char *what) {
  if (actual != expected) {
    throw DimensionError(std::string(what) + ": expected size " + std::to_string(expected) +
                         ", got " + std::to_string(actual));
  }
}

/// Stacked primal/auxiliary/dual iterate col(x, z, lambda).
struct StackedPoint {
  Vector x;
  Vector z;
  Vector lambda;

  Index size() const { return x.size() + z.size() + lambda.size(); }

  Vector flatten() const {
    Vector out(size());
    out << x, z, lambda;
    return out;
  }

  static StackedPoint unflatten(const Vector &v, Index primal, Index dual) {
    require_size(v.size(), primal + 2 * dual, "StackedPoint::unflatten");
    return {v.head(primal), v.segment(primal, dual), v.tail(dual)};
  }

  StackedPoint &operator+=(const StackedPoint &o) {
    x += o.x;
    z += o.z;
    lambda += o.lambda;
    return *this;
  }
  StackedPoint &operator-=(const StackedPoint &o) {
    x -= o.x;
    z -= o.z;
    lambda -= o.lambda;
    return *this;
  }
  StackedPoint &operator*=(double s) {
    x *= s;
    z *= s;
    lambda *= s;
    return *this;
  }

  friend StackedPoint operator+(StackedPoint a, const StackedPoint &b) { return a += b; }
  friend StackedPoint operator-(StackedPoint a, const StackedPoint &b) { return a -= b; }
  friend StackedPoint operator*(double s, StackedPoint a) { return a *= s; }

  double squared_norm() const {
    return x.squaredNorm() + z.squaredNorm() + lambda.squaredNorm();
  }
  double norm() const { return std::sqrt(squared_norm()); }
  bool all_finite() const { return x.allFinite() && z.allFinite() && lambda.allFinite(); }
};

}  // namespace sgnep

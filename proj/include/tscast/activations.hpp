#pragma once

#include <cmath>

#include "tscast/matrix.hpp"

namespace tscast {

/// Numerically stable logistic sigmoid: never overflows, output in (0, 1).
inline double sigmoid_scalar(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Element-wise sigmoid.
inline Matrix sigmoid(const Matrix& x) {
  return map(x, [](double v) { return sigmoid_scalar(v); });
}

/// Element-wise hyperbolic tangent.
inline Matrix tanh(const Matrix& x) {
  return map(x, [](double v) { return std::tanh(v); });
}

}  // namespace tscast

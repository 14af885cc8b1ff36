#pragma once

// Central finite differences over a scalar function of a matrix. Test
// oracle for the hand-derived backpropagation; also usable on its own.

#include <algorithm>
#include <cmath>
#include <string>

#include "tscast/errors.hpp"
#include "tscast/matrix.hpp"

namespace tscast {

/// d f / d x_ij ~= (f(x + eps e_ij) - f(x - eps e_ij)) / (2 eps), element
/// by element. f must evaluate finite on all perturbations.
template <typename F>
Matrix finite_difference_grad(F&& f, Matrix x, double eps = 1e-5) {
  if (!(eps > 0.0)) {
    throw NumericError("finite_difference_grad: eps must be positive");
  }
  Matrix grad(x.rows(), x.cols());
  auto xd = x.data();
  auto gd = grad.data();
  for (std::size_t i = 0; i < xd.size(); ++i) {
    const double saved = xd[i];
    xd[i] = saved + eps;
    const double fp = f(x);
    xd[i] = saved - eps;
    const double fm = f(x);
    xd[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("finite_difference_grad: non-finite objective at entry " +
                         std::to_string(i));
    }
    gd[i] = (fp - fm) / (2.0 * eps);
  }
  return grad;
}

/// Symmetric relative error used by the gradient checks. The floor keeps
/// near-zero gradients, where the finite-difference oracle itself is only
/// accurate to ~1e-10 absolute, from dominating the comparison.
inline double relative_error(double a, double b, double floor = 1e-3) {
  const double denom = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / denom;
}

}  // namespace tscast

#pragma once

#include <cmath>
#include <cstddef>

namespace gridincent::kernels {

template <class Apply>
double power_iteration(std::size_t n, const Apply& apply, double tol, long max_iterations) {
  if (n == 0) return 0.0;
  Vector x(n, 1.0 / std::sqrt(static_cast<double>(n)));
  Vector y(n, 0.0);
  double lambda = 0.0;
  std::size_t restarts = 0;
  for (long it = 0; it < max_iterations; ++it) {
    apply(x, y);
    const double estimate = dot(x, y);  // Rayleigh quotient, x has unit norm
    const double ny = std::sqrt(dot(y, y));
    if (ny == 0.0) {
      // x landed in the null space; restart from a basis vector.
      if (restarts >= n) return 0.0;
      for (auto& v : x) v = 0.0;
      x[restarts++] = 1.0;
      lambda = 0.0;
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / ny;
    if (it > 0 && std::abs(estimate - lambda) <= tol * std::max(1.0, std::abs(estimate)))
      return estimate;
    lambda = estimate;
  }
  return lambda;
}

}  // namespace gridincent::kernels

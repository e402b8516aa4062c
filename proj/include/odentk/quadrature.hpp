#pragma once

#include <span>
#include <vector>

namespace odentk {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  std::size_t size() const noexcept { return nodes.size(); }
};

// Gauss-Hermite rule for the standard normal measure: sum_i w_i g(x_i) ~= E g(Z).
// Weights sum to one. Rules are cached; the returned reference stays valid for
// the lifetime of the process. Thread-safe.
const QuadratureRule& gauss_hermite(int order);

// Gauss-Legendre rule on [-1, 1] (weights sum to 2). Cached, thread-safe.
const QuadratureRule& gauss_legendre(int order);

// Normalized probabilists' Hermite polynomials h_n = He_n / sqrt(n!) at x, n = 0..count-1.
void normalized_hermite(double x, std::span<double> out) noexcept;

}  // namespace odentk

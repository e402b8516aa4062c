#include "odentk/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "odentk/error.hpp"

namespace odentk {

namespace {

// h_{order} and h_{order-1} at x, rescaled jointly to avoid overflow.
struct HermiteEval {
  double top;
  double below;
};

HermiteEval hermite_top(double x, int order) {
  double p0 = 1.0;
  double p1 = x;
  if (order == 1) return {p1, p0};
  for (int k = 1; k < order; ++k) {
    const double p2 = (x * p1 - std::sqrt(static_cast<double>(k)) * p0) / std::sqrt(static_cast<double>(k + 1));
    p0 = p1;
    p1 = p2;
    if (std::abs(p1) > 1e100) {
      p0 *= 1e-100;
      p1 *= 1e-100;
    }
  }
  return {p1, p0};
}

QuadratureRule build_hermite(int order) {
  // Golub-Welsch for starting nodes: Jacobi matrix of the monic He recurrence.
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(order);
  Eigen::VectorXd sub(order > 1 ? order - 1 : 0);
  for (int k = 1; k < order; ++k) sub[k - 1] = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  require(es.info() == Eigen::Success, ErrorCode::numeric, "Gauss-Hermite: tridiagonal eigensolve failed");

  QuadratureRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  for (int i = 0; i < order; ++i) {
    double x = es.eigenvalues()[i];
    for (int it = 0; it < 6; ++it) {
      const HermiteEval e = hermite_top(x, order);
      const double step = e.top / (std::sqrt(static_cast<double>(order)) * e.below);
      x -= step;
      if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(x))) break;
    }
    rule.nodes[i] = x;
  }
  // Christoffel weights w_i = 1 / sum_{k<order} h_k(x_i)^2, evaluated without rescaling
  // where possible; large nodes fall back to the eigenvector weights.
  double total = 0.0;
  for (int i = 0; i < order; ++i) {
    const double x = rule.nodes[i];
    double p0 = 1.0, p1 = x, sum = 1.0 + x * x;
    bool overflow = false;
    for (int k = 1; k + 1 < order; ++k) {
      const double p2 = (x * p1 - std::sqrt(static_cast<double>(k)) * p0) / std::sqrt(static_cast<double>(k + 1));
      p0 = p1;
      p1 = p2;
      sum += p1 * p1;
      if (!std::isfinite(sum)) {
        overflow = true;
        break;
      }
    }
    if (order == 1) sum = 1.0;
    const double v0 = es.eigenvectors()(0, i);
    rule.weights[i] = overflow ? v0 * v0 : 1.0 / sum;
    total += rule.weights[i];
  }
  for (double& w : rule.weights) w /= total;
  return rule;
}

QuadratureRule build_legendre(int order) {
  QuadratureRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  for (int i = 0; i < order; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= order; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (order == 1) {
        p1 = x;
        p0 = 1.0;
      }
      dp = order * (x * p1 - p0) / (x * x - 1.0);
      const double step = p1 / dp;
      x -= step;
      if (std::abs(step) < 1e-16) break;
    }
    rule.nodes[order - 1 - i] = x;
    rule.weights[order - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

template <class Build>
const QuadratureRule& cached(std::map<int, std::unique_ptr<QuadratureRule>>& cache, std::mutex& mu, int order,
                             Build build) {
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, std::make_unique<QuadratureRule>(build(order))).first;
  return *it->second;
}

}  // namespace

const QuadratureRule& gauss_hermite(int order) {
  require(order >= 1 && order <= 1024, ErrorCode::config, "Gauss-Hermite order must be in [1, 1024]");
  static std::map<int, std::unique_ptr<QuadratureRule>> cache;
  static std::mutex mu;
  return cached(cache, mu, order, build_hermite);
}

const QuadratureRule& gauss_legendre(int order) {
  require(order >= 1 && order <= 4096, ErrorCode::config, "Gauss-Legendre order must be in [1, 4096]");
  static std::map<int, std::unique_ptr<QuadratureRule>> cache;
  static std::mutex mu;
  return cached(cache, mu, order, build_legendre);
}

void normalized_hermite(double x, std::span<double> out) noexcept {
  if (out.empty()) return;
  out[0] = 1.0;
  if (out.size() == 1) return;
  out[1] = x;
  for (std::size_t k = 1; k + 1 < out.size(); ++k) {
    out[k + 1] = (x * out[k] - std::sqrt(static_cast<double>(k)) * out[k - 1]) / std::sqrt(static_cast<double>(k + 1));
  }
}

}  // namespace odentk

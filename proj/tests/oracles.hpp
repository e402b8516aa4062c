#pragma once

// Independent reference computations for the unit and acceptance tests. None
// of these call into the library's numerical code; each one derives the
// expected value by a different route (closed forms, brute-force sums,
// free-probability moments, Monte Carlo, hand-rolled byte encoders).

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

// I_0(x) = sum_k (x/2)^{2k} / (k!)^2.
inline double bessel_i0(double x) {
  double term = 1.0, sum = 1.0;
  const double q = 0.25 * x * x;
  for (int k = 1; k < 500 && term > 1e-18 * sum; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
  }
  return sum;
}

// Identity activation, tied weights: h^L = (I + b)^L h^0 with b = a W / sqrt(n).
// W is asymptotically circular, so tau(b*^j b^k) = delta_jk a^{2k} and
//   lim (1/n) |h^L|^2 / (1/n) |h^0|^2 = sum_k C(L,k)^2 a^{2k}.
inline double identity_depth_gain(int L, double a) {
  double sum = 0.0, binom = 1.0;
  for (int k = 0; k <= L; ++k) {
    sum += binom * binom * std::pow(a, 2 * k);
    binom = binom * (L - k) / (k + 1);
  }
  return sum;
}

// Hand-expanded infinite-width NTK of the identity network at L = 2:
//   v and U blocks: sigma_v^2 c00 (1 + 4a^2 + a^4) each,
//   W block: sigma_v^2 c00 a^2 (4 + 2a^2),
// with a = kappa sigma_w.
inline double identity_ntk_L2(double c00, double a, double sigma_v) {
  const double a2 = a * a;
  return sigma_v * sigma_v * c00 * (2.0 * (1.0 + 4.0 * a2 + a2 * a2) + a2 * (4.0 + 2.0 * a2));
}

// D[l,k] = dT + kappa^2 sum_{i>l, j>k} Edot[i-1,j-1] D[i,j] by direct summation,
// filling from (L, L) downwards. O(L^4).
inline Eigen::MatrixXd naive_d_table(const Eigen::MatrixXd& Edot, double dT, double kappa, int L) {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(L + 1, L + 1);
  for (int l = L; l >= 0; --l)
    for (int k = L; k >= 0; --k) {
      double s = 0.0;
      for (int i = l + 1; i <= L; ++i)
        for (int j = k + 1; j <= L; ++j) s += Edot(i - 1, j - 1) * D(i, j);
      D(l, k) = dT + kappa * kappa * s;
    }
  return D;
}

// Arc-cosine forms for relu with covariance [[va, c], [c, vb]].
inline double relu_dual_value(double va, double vb, double c) {
  const double s = std::sqrt(va * vb);
  const double rho = std::clamp(c / s, -1.0, 1.0);
  const double th = std::acos(rho);
  return s / (2.0 * std::numbers::pi) * (std::sin(th) + (std::numbers::pi - th) * std::cos(th));
}
inline double relu_dual_deriv(double va, double vb, double c) {
  const double rho = std::clamp(c / std::sqrt(va * vb), -1.0, 1.0);
  return (std::numbers::pi - std::acos(rho)) / (2.0 * std::numbers::pi);
}

struct McEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

// Monte Carlo E g(u, ubar) for a centered Gaussian pair, std::mt19937_64 draws.
template <class G>
McEstimate monte_carlo_pair(G&& g, double va, double vb, double c, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sa = std::sqrt(va);
  const double rho = c / std::sqrt(va * vb);
  const double sb = std::sqrt(vb);
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double z1 = normal(rng), z2 = normal(rng);
    const double u = sa * z1;
    const double ub = sb * (rho * z1 + std::sqrt(1.0 - rho * rho) * z2);
    const double y = g(u, ub);
    s += y;
    s2 += y * y;
  }
  McEstimate e;
  e.mean = s / samples;
  e.stderr_ = std::sqrt(std::max(0.0, s2 / samples - e.mean * e.mean) / samples);
  return e;
}

// Largest eigenvalue of X^T X by power iteration.
inline double power_iteration_smax2(const Eigen::MatrixXd& X, int iters = 2000) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(X.cols()).normalized();
  double lambda = 0.0;
  for (int i = 0; i < iters; ++i) {
    const Eigen::VectorXd w = X.transpose() * (X * v);
    lambda = w.norm();
    v = w / lambda;
  }
  return lambda;
}

// Big-endian IDX writers built byte by byte.
inline void put_be32(std::vector<std::uint8_t>& out, std::uint32_t x) {
  out.push_back(static_cast<std::uint8_t>(x >> 24));
  out.push_back(static_cast<std::uint8_t>(x >> 16));
  out.push_back(static_cast<std::uint8_t>(x >> 8));
  out.push_back(static_cast<std::uint8_t>(x));
}
inline std::vector<std::uint8_t> idx_images(std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
                                            const std::vector<std::uint8_t>& pixels) {
  std::vector<std::uint8_t> out = {0, 0, 0x08, 0x03};
  put_be32(out, count);
  put_be32(out, rows);
  put_be32(out, cols);
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}
inline std::vector<std::uint8_t> idx_labels(const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> out = {0, 0, 0x08, 0x01};
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

// Kolmogorov-Smirnov distance of a sample against N(mean, std^2), computed
// by sorting and scanning both sides of each step.
inline double ks_distance(std::vector<double> x, double mean, double sd) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double F = 0.5 * std::erfc(-(x[i] - mean) / (sd * std::sqrt(2.0)));
    d = std::max({d, (i + 1) / n - F, F - i / n});
  }
  return d;
}

}  // namespace oracle

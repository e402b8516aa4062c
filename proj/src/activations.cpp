#include "odentk/activations.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "odentk/error.hpp"
#include "odentk/quadrature.hpp"

namespace odentk {

namespace {

using Fn = double (*)(double);

double softplus_raw(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
double softplus_shifted(double x) { return softplus_raw(x) - std::numbers::ln2; }
double relu(double x) { return x > 0.0 ? x : 0.0; }
double relu_deriv(double x) { return x > 0.0 ? 1.0 : 0.0; }
double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
double gelu(double x) { return x * normal_cdf(x); }
double gelu_deriv(double x) { return normal_cdf(x) + x * normal_pdf(x); }
double tanh_fn(double x) { return std::tanh(x); }
double tanh_deriv(double x) {
  const double t = std::tanh(x);
  return 1.0 - t * t;
}
double quadratic(double x) { return x * x; }
double quadratic_deriv(double x) { return 2.0 * x; }
double identity(double x) { return x; }
double one(double) { return 1.0; }

// max of gelu' is attained at x = sqrt(2); max |gelu''| at 0.
const double kGeluL1 = gelu_deriv(std::numbers::sqrt2);
const double kGeluL2 = 2.0 / std::sqrt(2.0 * std::numbers::pi);

const std::array<Activation, 7>& table() {
  static const std::array<Activation, 7> acts = {{
      {ActivationId::softplus_shifted, "softplus-shifted", softplus_shifted, sigmoid, 1.0, 0.25, false, true, false},
      {ActivationId::softplus_raw, "softplus-raw", softplus_raw, sigmoid, 1.0, 0.25, false, false, false},
      {ActivationId::relu, "relu", relu, relu_deriv, 1.0, kUnbounded, false, true, true},
      {ActivationId::gelu, "gelu", gelu, gelu_deriv, kGeluL1, kGeluL2, false, true, false},
      {ActivationId::tanh, "tanh", tanh_fn, tanh_deriv, 1.0, 4.0 / (3.0 * std::sqrt(3.0)), false, true, false},
      {ActivationId::quadratic, "quadratic", quadratic, quadratic_deriv, kUnbounded, 2.0, true, true, false},
      {ActivationId::identity, "identity", identity, one, 1.0, 0.0, true, true, false},
  }};
  return acts;
}

void validate(const PairCovariance& c) {
  require(std::isfinite(c.var_a) && std::isfinite(c.var_b) && std::isfinite(c.cov), ErrorCode::domain,
          "covariance entries must be finite");
  require(c.var_a >= 0.0 && c.var_b >= 0.0, ErrorCode::input, "variances must be nonnegative");
  require(c.cov * c.cov <= c.var_a * c.var_b + 1e-10, ErrorCode::input, "covariance matrix is not positive semidefinite");
}

// One-dimensional E g(sigma Z) h(sign * sigma_b * Z): the rank-1 case.
double expect_rank1(Fn fa, Fn fb, double sa, double sb, const QuadratureRule& rule) {
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double z = rule.nodes[i];
    acc += rule.weights[i] * fa(sa * z) * fb(sb * z);
  }
  return acc;
}

// Tensor-product Gauss-Hermite after Cholesky whitening:
//   u = sa z1,  ubar = (cov / sa) z1 + sqrt(var_b - cov^2 / var_a) z2.
double expect_tensor(Fn fa, Fn fb, const PairCovariance& c, int order) {
  const QuadratureRule& rule = gauss_hermite(order);
  const double sa = std::sqrt(c.var_a);
  const double sb = std::sqrt(c.var_b);
  if (sa == 0.0 || sb == 0.0) {
    const double fa0 = sa == 0.0 ? fa(0.0) : 0.0;
    const double fb0 = sb == 0.0 ? fb(0.0) : 0.0;
    if (sa == 0.0 && sb == 0.0) return fa(0.0) * fb(0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) {
      const double z = rule.nodes[i];
      acc += rule.weights[i] * (sa == 0.0 ? fb(sb * z) : fa(sa * z));
    }
    return acc * (sa == 0.0 ? fa0 : fb0);
  }
  const double det = c.var_a * c.var_b - c.cov * c.cov;
  if (det <= 1e-14 * c.var_a * c.var_b) {
    return expect_rank1(fa, fb, sa, std::copysign(sb, c.cov), rule);
  }
  const double m = c.cov / sa;
  const double s = std::sqrt(det / c.var_a);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double z1 = rule.nodes[i];
    const double fu = fa(sa * z1);
    if (fu == 0.0) continue;
    double inner = 0.0;
    for (std::size_t j = 0; j < rule.size(); ++j) inner += rule.weights[j] * fb(m * z1 + s * rule.nodes[j]);
    acc += rule.weights[i] * fu * inner;
  }
  return acc;
}

// Polar rule for integrands with kinks on the rays u = 0 and ubar = 0.
//   z = r (cos t, sin t);  E g(z) = (1 / 2pi) int_0^{2pi} dt int_0^inf r e^{-r^2/2} g(r e_t) dr.
// Angular Gauss-Legendre panels split at the kink angles (so each panel's
// integrand is smooth), radial Gauss-Legendre on [0, 12].
double expect_polar(Fn fa, Fn fb, const PairCovariance& c, int order) {
  const double sa = std::sqrt(c.var_a);
  const double sb = std::sqrt(c.var_b);
  double rho = (sa > 0.0 && sb > 0.0) ? c.cov / (sa * sb) : 0.0;
  rho = std::clamp(rho, -1.0, 1.0);
  const double s = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  const double two_pi = 2.0 * std::numbers::pi;
  const double beta = std::atan2(s, rho);  // direction of ubar in the (z1, z2) plane
  const auto wrap = [two_pi](double t) {
    t = std::fmod(t, two_pi);
    return t < 0.0 ? t + two_pi : t;
  };
  std::array<double, 6> cuts = {0.0,
                                wrap(0.5 * std::numbers::pi),
                                wrap(1.5 * std::numbers::pi),
                                wrap(beta + 0.5 * std::numbers::pi),
                                wrap(beta - 0.5 * std::numbers::pi),
                                two_pi};
  std::sort(cuts.begin(), cuts.end());

  constexpr double kRadius = 12.0;
  const QuadratureRule& radial = gauss_legendre(order);
  const QuadratureRule& angular = gauss_legendre(std::max(8, order / 2));
  double acc = 0.0;
  for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
    const double t0 = cuts[p];
    const double t1 = cuts[p + 1];
    if (t1 - t0 < 1e-15) continue;
    const double half_t = 0.5 * (t1 - t0);
    for (std::size_t i = 0; i < angular.size(); ++i) {
      const double t = t0 + half_t * (angular.nodes[i] + 1.0);
      const double ca = std::cos(t), sn = std::sin(t);
      const double dir_a = sa * ca;
      const double dir_b = sb * (rho * ca + s * sn);
      double radial_acc = 0.0;
      for (std::size_t k = 0; k < radial.size(); ++k) {
        const double r = 0.5 * kRadius * (radial.nodes[k] + 1.0);
        radial_acc += radial.weights[k] * r * std::exp(-0.5 * r * r) * fa(r * dir_a) * fb(r * dir_b);
      }
      acc += angular.weights[i] * half_t * 0.5 * kRadius * radial_acc;
    }
  }
  return acc / two_pi;
}

double expect_pair(const Activation& a, Fn fa, Fn fb, const PairCovariance& c, const QuadratureOptions& opts) {
  require(opts.order >= 2, ErrorCode::config, "quadrature order must be at least 2");
  validate(c);
  // Whiten the larger-variance coordinate first so that swapping (var_a, var_b)
  // reproduces the same arithmetic.
  PairCovariance cc = c;
  if (cc.var_b > cc.var_a) {
    std::swap(cc.var_a, cc.var_b);
    std::swap(fa, fb);
  }
  if (a.kink_at_zero) return expect_polar(fa, fb, cc, opts.order);
  return expect_tensor(fa, fb, cc, opts.order);
}

std::vector<double> coefficients(const Activation& a, Fn fn, double input_std, int count, int quad_order) {
  require(count >= 1, ErrorCode::config, "coefficient count must be >= 1");
  require(input_std > 0.0 && std::isfinite(input_std), ErrorCode::config, "input_std must be positive");
  std::vector<double> out(count, 0.0);
  std::vector<double> h(count);
  auto accumulate = [&](double z, double w) {
    const double f = fn(input_std * z);
    if (f == 0.0) return;
    normalized_hermite(z, h);
    for (int n = 0; n < count; ++n) out[n] += w * f * h[n];
  };
  if (!a.kink_at_zero) {
    const int order = quad_order > 0 ? quad_order : std::max(2 * count + 32, 128);
    const QuadratureRule& rule = gauss_hermite(std::min(order, 1024));
    for (std::size_t i = 0; i < rule.size(); ++i) accumulate(rule.nodes[i], rule.weights[i]);
    return out;
  }
  // Kinked: Gauss-Legendre panels on [-R, 0] and [0, R] against the Gaussian density.
  const double radius = std::sqrt(4.0 * count) + 10.0;
  const int order = quad_order > 0 ? quad_order : std::max(4 * count + 64, 128);
  const QuadratureRule& rule = gauss_legendre(std::min(order, 4096));
  const double half = 0.5 * radius;
  for (const double sign : {-1.0, 1.0}) {
    for (std::size_t i = 0; i < rule.size(); ++i) {
      const double z = sign * half * (rule.nodes[i] + 1.0);
      accumulate(z, rule.weights[i] * half * normal_pdf(z));
    }
  }
  return out;
}

}  // namespace

double Activation::eval(double x) const {
  require(std::isfinite(x), ErrorCode::domain, "activation input must be finite");
  return value(x);
}

double Activation::deriv(double x) const {
  require(std::isfinite(x), ErrorCode::domain, "activation input must be finite");
  return derivative(x);
}

const Activation& activation(ActivationId id) {
  for (const Activation& a : table())
    if (a.id == id) return a;
  fail(ErrorCode::config, "no built-in activation for this id");
}

const Activation& activation_by_name(std::string_view name) {
  for (const Activation& a : table())
    if (a.name == name) return a;
  if (name == "softplus") return activation(ActivationId::softplus_shifted);
  fail(ErrorCode::config, "unknown activation '" + std::string(name) + "'");
}

std::vector<std::string_view> activation_names() {
  std::vector<std::string_view> names;
  for (const Activation& a : table()) names.push_back(a.name);
  return names;
}

double dual_value(const Activation& a, const PairCovariance& c, const QuadratureOptions& opts) {
  return expect_pair(a, a.value, a.value, c, opts);
}

double dual_deriv(const Activation& a, const PairCovariance& c, const QuadratureOptions& opts) {
  return expect_pair(a, a.derivative, a.derivative, c, opts);
}

std::vector<double> hermite_coeffs(const Activation& a, double input_std, int count, int quad_order) {
  return coefficients(a, a.value, input_std, count, quad_order);
}

std::vector<double> hermite_coeffs_deriv(const Activation& a, double input_std, int count, int quad_order) {
  return coefficients(a, a.derivative, input_std, count, quad_order);
}

NonpolyReport nonpoly_witness(const Activation& a, double input_std, int count, double threshold) {
  require(count >= 8, ErrorCode::config, "nonpoly witness needs count >= 8");
  require(threshold > 0.0, ErrorCode::config, "threshold must be positive");
  const std::vector<double> coeffs = hermite_coeffs(a, input_std, count);
  NonpolyReport report;
  report.window_begin = count / 2;
  report.window_end = count;
  for (int n = report.window_begin; n < count; ++n) {
    if (coeffs[n] * coeffs[n] <= threshold) continue;
    (n % 2 == 0 ? report.even_hits : report.odd_hits) += 1;
  }
  report.passes = report.even_hits > 0 && report.odd_hits > 0;
  return report;
}

}  // namespace odentk

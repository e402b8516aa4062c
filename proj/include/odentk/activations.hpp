#pragma once

#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace odentk {

enum class ActivationId { softplus_shifted, softplus_raw, relu, gelu, tanh, quadratic, identity, custom };

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

// Scalar activation with the smoothness metadata used by the convergence
// theory (L1 = Lipschitz constant of phi, L2 = Lipschitz constant of phi').
// Held by value; `custom` lets callers plug in test shims.
struct Activation {
  ActivationId id = ActivationId::softplus_shifted;
  std::string_view name;
  double (*value)(double) = nullptr;
  double (*derivative)(double) = nullptr;
  double lipschitz_l1 = kUnbounded;
  double lipschitz_l2 = kUnbounded;
  bool is_polynomial = false;
  bool zero_at_zero = false;
  // phi' jumps at the origin; quadrature then splits at the kink.
  bool kink_at_zero = false;

  double eval(double x) const;
  double deriv(double x) const;
};

const Activation& activation(ActivationId id);
// Accepts the canonical names ("softplus-shifted", "relu", ...); throws config error otherwise.
const Activation& activation_by_name(std::string_view name);
std::vector<std::string_view> activation_names();

struct PairCovariance {
  double var_a = 1.0;
  double var_b = 1.0;
  double cov = 0.0;
};

struct QuadratureOptions {
  int order = 64;  // nodes per axis
};

// E[phi(u) phi(ubar)] for centered Gaussian (u, ubar) with covariance c.
double dual_value(const Activation& a, const PairCovariance& c, const QuadratureOptions& opts = {});
// E[phi'(u) phi'(ubar)].
double dual_deriv(const Activation& a, const PairCovariance& c, const QuadratureOptions& opts = {});

// Normalized-Hermite coefficients a_0..a_{count-1} of mu(z) = phi(input_std * z)
// under the standard Gaussian measure. `quad_order` = 0 picks max(2*count+32, 128).
std::vector<double> hermite_coeffs(const Activation& a, double input_std, int count, int quad_order = 0);
// Same for phi'.
std::vector<double> hermite_coeffs_deriv(const Activation& a, double input_std, int count, int quad_order = 0);

struct NonpolyReport {
  int even_hits = 0;
  int odd_hits = 0;
  bool passes = false;
  int window_begin = 0;
  int window_end = 0;
};

// Finite-truncation witness for "infinitely many even and odd nonzero Hermite
// coefficients": counts a_n^2 > threshold over n in [count/2, count).
NonpolyReport nonpoly_witness(const Activation& a, double input_std, int count, double threshold);

}  // namespace odentk

#include <doctest.h>

#include <cmath>

#include "odentk/activations.hpp"
#include "odentk/error.hpp"
#include "odentk/quadrature.hpp"
#include "oracles.hpp"

using namespace odentk;

TEST_CASE("derivatives match central differences") {
  for (ActivationId id : {ActivationId::softplus_shifted, ActivationId::softplus_raw, ActivationId::gelu,
                          ActivationId::tanh, ActivationId::quadratic, ActivationId::identity}) {
    const Activation& a = activation(id);
    for (double x : {-3.0, -0.7, 0.1, 0.9, 4.0}) {
      const double h = 1e-6;
      const double fd = (a.eval(x + h) - a.eval(x - h)) / (2 * h);
      CHECK(a.deriv(x) == doctest::Approx(fd).epsilon(1e-7));
    }
  }
}

TEST_CASE("shifted softplus vanishes at zero and has slope one half") {
  const Activation& a = activation(ActivationId::softplus_shifted);
  CHECK(std::abs(a.eval(0.0)) < 1e-15);
  CHECK(a.deriv(0.0) == doctest::Approx(0.5));
  CHECK(a.zero_at_zero);
  CHECK(std::isfinite(a.eval(800.0)));
  CHECK(std::isfinite(a.eval(-800.0)));
}

TEST_CASE("names round trip and unknown names raise config errors") {
  for (auto name : activation_names()) CHECK(activation_by_name(name).name == name);
  try {
    activation_by_name("swish");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config);
  }
}

TEST_CASE("Gauss-Hermite rules integrate Gaussian moments") {
  const QuadratureRule& r = gauss_hermite(32);
  double m0 = 0, m2 = 0, m4 = 0, m6 = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double x = r.nodes[i], w = r.weights[i];
    m0 += w;
    m2 += w * x * x;
    m4 += w * std::pow(x, 4);
    m6 += w * std::pow(x, 6);
  }
  CHECK(m0 == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(m2 == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(m4 == doctest::Approx(3.0).epsilon(1e-13));
  CHECK(m6 == doctest::Approx(15.0).epsilon(1e-12));
}

TEST_CASE("relu duals match the arc-cosine forms") {
  const Activation& a = activation(ActivationId::relu);
  for (double rho : {-0.95, -0.3, 0.0, 0.4, 0.9, 0.999}) {
    const PairCovariance c{1.7, 0.6, rho * std::sqrt(1.7 * 0.6)};
    CHECK(dual_value(a, c) == doctest::Approx(oracle::relu_dual_value(c.var_a, c.var_b, c.cov)).epsilon(1e-8));
    CHECK(dual_deriv(a, c) == doctest::Approx(oracle::relu_dual_deriv(c.var_a, c.var_b, c.cov)).epsilon(1e-8));
  }
}

TEST_CASE("smooth duals agree with Monte Carlo") {
  const PairCovariance c{1.2, 0.8, 0.5};
  for (ActivationId id : {ActivationId::softplus_shifted, ActivationId::gelu, ActivationId::tanh}) {
    const Activation& a = activation(id);
    const auto v = oracle::monte_carlo_pair([&](double u, double ub) { return a.eval(u) * a.eval(ub); }, c.var_a,
                                            c.var_b, c.cov, 400000, 17);
    const auto d = oracle::monte_carlo_pair([&](double u, double ub) { return a.deriv(u) * a.deriv(ub); }, c.var_a,
                                            c.var_b, c.cov, 400000, 18);
    CHECK(std::abs(dual_value(a, c) - v.mean) < 5 * v.stderr_);
    CHECK(std::abs(dual_deriv(a, c) - d.mean) < 5 * d.stderr_);
  }
}

TEST_CASE("Hermite coefficients reproduce the dual by Mehler's formula") {
  const Activation& a = activation(ActivationId::softplus_shifted);
  const double s = 0.9, rho = 0.6;
  const auto h = hermite_coeffs(a, s, 64);
  double mehler = 0.0;
  for (int n = 0; n < 64; ++n) mehler += h[n] * h[n] * std::pow(rho, n);
  const PairCovariance c{s * s, s * s, rho * s * s};
  CHECK(mehler == doctest::Approx(dual_value(a, c)).epsilon(1e-10));
}

TEST_CASE("polynomials have finitely many Hermite coefficients") {
  const auto q = hermite_coeffs(activation(ActivationId::quadratic), 1.0, 16);
  for (int n = 3; n < 16; ++n) CHECK(std::abs(q[n]) < 1e-12);
  const NonpolyReport r = nonpoly_witness(activation(ActivationId::quadratic), 1.0, 64, 1e-12);
  CHECK(!r.passes);
}

TEST_CASE("odd-symmetric activations only populate odd coefficients") {
  const NonpolyReport r = nonpoly_witness(activation(ActivationId::tanh), 1.0, 64, 1e-12);
  CHECK(r.odd_hits > 0);
  CHECK(r.even_hits == 0);
  CHECK(!r.passes);
}

// softplus(x) = x/2 + log(2 cosh(x/2)): beyond a_1 the odd part is zero. The
// even coefficients are nonzero but decay geometrically, so past n = 32 they
// also drop below 1e-12 and the finite witness rejects softplus outright.
TEST_CASE("shifted softplus has no odd coefficients past the linear term") {
  const Activation& a = activation(ActivationId::softplus_shifted);
  const auto h = hermite_coeffs(a, 1.0, 32);
  CHECK(std::abs(h[1]) > 0.1);
  for (int n = 3; n < 32; n += 2) CHECK(std::abs(h[n]) < 1e-13);
  for (int n = 2; n <= 12; n += 2) CHECK(std::abs(h[n]) > 1e-9);
  const NonpolyReport r = nonpoly_witness(a, 1.0, 64, 1e-12);
  CHECK(r.odd_hits == 0);
  CHECK(!r.passes);
}

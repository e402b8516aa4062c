#include <doctest.h>

#include <cmath>

#include "odentk/error.hpp"
#include "odentk/kernels.hpp"
#include "oracles.hpp"

using namespace odentk;

namespace {

ModelConfig identity_cfg(double T = 1.0, double sigma_w = 1.0) {
  ModelConfig c;
  c.input_dim = 3;
  c.horizon = T;
  c.sigma_w = sigma_w;
  c.sigma_v = 1.3;
  c.sigma_u = 0.9;
  c.activation = activation(ActivationId::identity);
  return c;
}

Vector unit(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v.normalized();
}

}  // namespace

TEST_CASE("identity NNGP equals the tied-weight depth gain at every depth") {
  const ModelConfig c = identity_cfg(1.0, 0.8);
  const Vector x = unit({1, 0.2, -0.4}), xb = unit({0.3, 1, 0.5});
  for (int L : {1, 2, 3, 5, 8, 16}) {
    const KernelTables t = nngp_tables(c, x, xb, L);
    const double a = c.sigma_w * c.horizon / L;
    const double c00 = c.sigma_u * c.sigma_u * x.dot(xb) / c.input_dim;
    const double want = c.sigma_v * c.sigma_v * c00 * oracle::identity_depth_gain(L, a);
    CHECK(t.output_nngp == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("identity NNGP limit matches the Bessel I0 closed form") {
  const ModelConfig c = identity_cfg(1.0, 1.0);
  const Vector x = unit({1, 2, 2});
  const KernelTables t = nngp_tables(c, x, x, 512);
  const double c00 = c.sigma_u * c.sigma_u / c.input_dim;
  const double want = c.sigma_v * c.sigma_v * c00 * oracle::bessel_i0(2.0 * c.sigma_w * c.horizon);
  CHECK(std::abs(t.output_nngp / want - 1.0) < 1e-3);
}

TEST_CASE("identity NTK at depth two matches the hand expansion") {
  for (double sw : {0.5, 1.0, 2.0}) {
    const ModelConfig c = identity_cfg(1.0, sw);
    const Vector x = unit({1, 0, 1}), xb = unit({0.5, 1, -0.2});
    const KernelTables t = kernel_tables(c, x, xb, 2);
    const double c00 = c.sigma_u * c.sigma_u * x.dot(xb) / c.input_dim;
    CHECK(t.ntk == doctest::Approx(oracle::identity_ntk_L2(c00, sw / 2, c.sigma_v)).epsilon(1e-12));
  }
}

TEST_CASE("dynamic-programming D table equals the naive quadruple sum") {
  ModelConfig c;
  c.input_dim = 4;
  const Vector x = unit({1, 0.3, -0.2, 0.7}), xb = unit({-0.1, 1, 0.4, 0.2});
  for (ActivationId id : {ActivationId::softplus_shifted, ActivationId::tanh, ActivationId::relu}) {
    c.activation = activation(id);
    for (int L = 1; L <= 8; ++L) {
      const KernelTables t = kernel_tables(c, x, xb, L);
      const Eigen::MatrixXd D = oracle::naive_d_table(t.Edot, t.d_terminal, t.kappa, L);
      CHECK((t.D - D).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, D.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("series and quadrature backends agree") {
  ModelConfig c;
  c.input_dim = 4;
  const Vector x = unit({1, 0.3, -0.2, 0.7}), xb = unit({-0.1, 1, 0.4, 0.2});
  KernelOptions q;
  q.backend = KernelBackend::quadrature;
  for (ActivationId id : {ActivationId::softplus_shifted, ActivationId::gelu, ActivationId::relu}) {
    c.activation = activation(id);
    const KernelTables a = kernel_tables(c, x, xb, 6);
    const KernelTables b = kernel_tables(c, x, xb, 6, q);
    CHECK(a.ntk == doctest::Approx(b.ntk).epsilon(1e-8));
    CHECK(a.output_nngp == doctest::Approx(b.output_nngp).epsilon(1e-8));
  }
}

TEST_CASE("ntk_tables without forward tables is a sequencing error") {
  KernelTables t;
  ModelConfig c;
  try {
    ntk_tables(c, t);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::sequencing);
  }
}

TEST_CASE("depth gaps halve for a smooth activation") {
  ModelConfig c;
  const Vector x = unit({1, 0, 0, 0, 0, 0, 0, 0}), xb = unit({1, 1, 0, 0, 0, 0, 0, 0});
  for (KernelQuantity q : {KernelQuantity::nngp, KernelQuantity::ntk}) {
    const LimitReport r = kernel_limit_extrapolate(c, x, xb, {32, 64, 128, 256}, q);
    REQUIRE(r.gap_ratios.size() == 2);
    for (double g : r.gap_ratios) CHECK((g > 0.4 && g < 0.6));
    CHECK(r.gaps_monotone);
  }
}

TEST_CASE("limit Grams are symmetric and the NTK Gram is positive definite") {
  ModelConfig c;
  Matrix X(5, 8);
  X.setRandom();
  X.rowwise().normalize();
  GramRequest req;
  req.L = 64;
  for (GramKind k : {GramKind::nngp_limit, GramKind::ntk_limit}) {
    const GramMatrix g = gram(c, X, k, req);
    CHECK((g.values - g.values.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  }
  CHECK(min_eig(gram(c, X, GramKind::ntk_limit, req)) > 0.0);
}

TEST_CASE("S* diagonal is constant on the sphere") {
  ModelConfig c;
  Matrix X(4, 8);
  X.setRandom();
  X.rowwise().normalize();
  const SStarReport r = s_star_checks(c, X, 32);
  CHECK(r.diagonal_equal);
  CHECK(r.gaps_positive);
  Matrix Y = X;
  Y.row(0) *= 2.0;
  CHECK_THROWS_AS(s_star_checks(c, Y, 32), Error);
}

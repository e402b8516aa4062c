#include <doctest.h>

#include <cmath>

#include "odentk/error.hpp"
#include "odentk/gradients.hpp"
#include "odentk/parallel.hpp"
#include "odentk/solvers.hpp"

using namespace odentk;

namespace {

ModelConfig small_cfg(ActivationId id = ActivationId::softplus_shifted) {
  ModelConfig c;
  c.width = 12;
  c.input_dim = 4;
  c.activation = activation(id);
  c.seed = 3;
  return c;
}

Vector unit_x(int d) {
  Vector x = Vector::LinSpaced(d, -1.0, 2.0);
  return x.normalized();
}

}  // namespace

TEST_CASE("discrete gradient matches central differences of the same map") {
  ModelConfig c = small_cfg();
  const Params p = init_params(c);
  const Vector x = unit_x(c.input_dim);
  const Grads g = grad_discrete(c, p, x, 16);
  const Grads fd = grad_fd(c, p, x, 1e-5, FdTarget::discrete_map(16));
  const GradReport r = compare_grads(g, fd);
  for (const auto& [name, b] : r.per_block) CHECK(b.rel < 1e-6);
}

TEST_CASE("adjoint gradient matches central differences of the continuous map") {
  ModelConfig c = small_cfg(ActivationId::tanh);
  const Params p = init_params(c);
  const Vector x = unit_x(c.input_dim);
  const Grads g = grad_adjoint(c, p, x, SolverSpec::adaptive(1e-11, 1e-13));
  const Grads fd = grad_fd(c, p, x, 1e-5, FdTarget::continuous());
  CHECK(compare_grads(g, fd).rel_diff < 1e-6);
}

TEST_CASE("batched pass reproduces the single-example pass") {
  ModelConfig c = small_cfg();
  const Params p = init_params(c);
  Matrix X(3, c.input_dim);
  X.setRandom();
  X.rowwise().normalize();
  DiscreteBatch b = discrete_forward_batch(c, p, X, 8);
  discrete_backward_batch(c, p, b);
  const Vector w = Vector::Constant(3, 1.0);
  Grads sum = Grads::zeros(c);
  for (int i = 0; i < 3; ++i) {
    const Vector x = X.row(i).transpose();
    CHECK(b.f[i] == doctest::Approx(model_output(c, p, x, Pipeline::discrete(8))).epsilon(1e-13));
    sum += grad_discrete(c, p, x, 8);
  }
  const Grads g = weighted_grads(c, b, w);
  CHECK((g.dW - sum.dW).cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::MatrixXd K = discrete_ntk_gram(c, b);
  const Vector x0 = X.row(0).transpose(), x1 = X.row(1).transpose();
  CHECK(K(0, 1) == doctest::Approx(dot(grad_discrete(c, p, x0, 8), grad_discrete(c, p, x1, 8))).epsilon(1e-12));
}

TEST_CASE("Euler ResNet forward equals the Euler solver bit for bit") {
  ModelConfig c = small_cfg();
  const Params p = init_params(c);
  const Vector x = unit_x(c.input_dim);
  const auto h = discretize_resnet_forward(c, p, x, 10);
  const Trajectory t = solve_forward(c, p, x, SolverSpec::euler(10));
  REQUIRE(t.size() == h.size());
  for (std::size_t i = 0; i < h.size(); ++i) CHECK((t.states[i] - h[i]).cwiseAbs().maxCoeff() == 0.0);
}

// d/dt lambda^T F(h) = -lambda^T J F + lambda^T J F = 0 along exact solutions.
TEST_CASE("lambda^T F(h) is conserved along the adjoint solution") {
  ModelConfig c = small_cfg(ActivationId::tanh);
  const Params p = init_params(c);
  const Vector x = unit_x(c.input_dim);
  const SolverSpec s = SolverSpec::rk4(400);
  const Trajectory fwd = solve_forward(c, p, x, s);
  const Trajectory bwd = solve_backward_adjoint(c, p, fwd, s);
  const double ref = bwd.states.front().dot(vector_field(c, p, fwd.interpolate(bwd.times.front())));
  double worst = 0.0;
  for (std::size_t i = 0; i < bwd.size(); i += 40) {
    const Vector h = fwd.interpolate(bwd.times[i]);
    worst = std::max(worst, std::abs(bwd.states[i].dot(vector_field(c, p, h)) - ref));
  }
  CHECK(worst < 1e-9 * std::max(1.0, std::abs(ref)));
}

TEST_CASE("augmented backward solve reproduces the stored-trajectory adjoint") {
  ModelConfig c = small_cfg();
  const Params p = init_params(c);
  const Vector x = unit_x(c.input_dim);
  const SolverSpec s = SolverSpec::adaptive(1e-10, 1e-12);
  const Trajectory fwd = solve_forward(c, p, x, s);
  const AugmentedResult a = solve_augmented(c, p, fwd.terminal(), s);
  const Grads g = grad_adjoint(c, p, x, s);
  CHECK((a.h0 - fwd.initial()).norm() < 1e-8);
  CHECK((a.g0 - g.dW).norm() < 1e-7 * g.dW.norm());
}

TEST_CASE("solvers reach their nominal orders on a linear system") {
  const Rhs rhs = [](double, const Vector& y, Vector& dy) { dy = -y; };
  const Vector y0 = Vector::Constant(1, 1.0);
  auto terminal = [&](const SolverSpec& s) {
    double out = 0.0;
    integrate(rhs, y0, 1.0, s, [&](double, const Vector& y, const Vector&) { out = y[0]; });
    return std::abs(out - std::exp(-1.0));
  };
  CHECK(std::log2(terminal(SolverSpec::euler(100)) / terminal(SolverSpec::euler(200))) ==
        doctest::Approx(1.0).epsilon(0.02));
  CHECK(std::log2(terminal(SolverSpec::rk4(10)) / terminal(SolverSpec::rk4(20))) ==
        doctest::Approx(4.0).epsilon(0.05));
  CHECK(terminal(SolverSpec::adaptive(1e-10, 1e-12)) < 1e-9);
}

TEST_CASE("adaptive solver reports its step budget") {
  const Rhs rhs = [](double, const Vector& y, Vector& dy) { dy = 50.0 * y.cwiseProduct(y); };
  SolverSpec s = SolverSpec::adaptive(1e-8, 1e-10);
  s.max_steps = 50;
  try {
    integrate(rhs, Vector::Constant(1, 1.0), 1.0, s, [](double, const Vector&, const Vector&) {});
    FAIL("expected a solver failure");
  } catch (const SolverFailure& e) {
    CHECK(e.code() == ErrorCode::solver);
    CHECK(e.last_time() < 1.0);
  }
}

TEST_CASE("Hermite interpolation returns nodes exactly") {
  ModelConfig c = small_cfg();
  const Params p = init_params(c);
  const Trajectory t = solve_forward(c, p, unit_x(c.input_dim), SolverSpec::rk4(8));
  CHECK((t.interpolate(t.times[3]) - t.states[3]).norm() == 0.0);
  CHECK(t.node_index(t.times[5]) == 5);
  CHECK(t.node_index(0.5 * (t.times[1] + t.times[2])) == -1);
}

TEST_CASE("finite differences do not depend on the thread count") {
  ModelConfig c = small_cfg();
  const Params p = init_params(c);
  const Vector x = unit_x(c.input_dim);
  const Grads a = grad_fd(c, p, x, 1e-5, FdTarget::discrete_map(8), 1);
  const Grads b = grad_fd(c, p, x, 1e-5, FdTarget::discrete_map(8), 3);
  CHECK((a.dW - b.dW).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.dU - b.dU).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("shape and domain checks") {
  ModelConfig c = small_cfg();
  Params p = init_params(c);
  p.W.resize(3, 3);
  CHECK_THROWS_AS(check_params(c, p), Error);
  const Vector bad = Vector::Constant(c.width, std::nan(""));
  CHECK_THROWS_AS(apply_value(c.activation, bad), Error);
  ModelConfig z = c;
  z.horizon = 0.0;
  CHECK_THROWS_AS(z.validate(), Error);
}

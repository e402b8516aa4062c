#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "odentk/model.hpp"

namespace odentk {

enum class SolverMethod { euler, rk4, adaptive };

const char* solver_method_name(SolverMethod m) noexcept;
SolverMethod solver_method_from_name(std::string_view name);

struct SolverSpec {
  SolverMethod method = SolverMethod::rk4;
  int steps = 64;  // L, fixed-step methods only
  double rel_tol = 1e-6;
  double abs_tol = 1e-9;
  long max_steps = 1'000'000;  // attempted steps, adaptive only

  static SolverSpec euler(int steps);
  static SolverSpec rk4(int steps);
  static SolverSpec adaptive(double rel_tol = 1e-6, double abs_tol = 1e-9);

  void validate() const;
};

enum class Direction { forward, backward };

// Forward trajectories run t = 0 -> T, backward ones t = T -> 0. slopes[i] is
// d states[i] / dt, which makes the trajectory a piecewise cubic Hermite curve.
struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> slopes;
  Direction direction = Direction::forward;

  std::size_t size() const noexcept { return times.size(); }
  const Vector& initial() const { return states.front(); }
  const Vector& terminal() const { return states.back(); }
  // Stored state when t is a node (to 1e-13 relative), cubic Hermite otherwise.
  Vector interpolate(double t) const;
  // Index of the node equal to t, or -1.
  long node_index(double t) const;
};

// Single integrator core: y' = rhs(s, y) on [0, s_end]. Calls on_accept for the
// initial point and every accepted step with (s, y, rhs(s, y)).
using Rhs = std::function<void(double s, const Vector& y, Vector& dy)>;
using AcceptFn = std::function<void(double s, const Vector& y, const Vector& dy)>;
void integrate(const Rhs& rhs, const Vector& y0, double s_end, const SolverSpec& spec, const AcceptFn& on_accept);

Trajectory solve_forward(const ModelConfig& cfg, const Params& p, const Vector& x, const SolverSpec& s);

// lambda from T down to 0 under d lambda/dt = -sigma_w/sqrt(n) phi'(h_t) .* W^T lambda.
Trajectory solve_backward_adjoint(const ModelConfig& cfg, const Params& p, const Trajectory& fwd,
                                  const SolverSpec& s);

struct AugmentedResult {
  Vector h0;
  Vector lambda0;
  Matrix g0;  // equals df/dW
};

// Integrates (h, lambda, g) backward from (h_T, lambda_T, 0) without a stored trajectory.
AugmentedResult solve_augmented(const ModelConfig& cfg, const Params& p, const Vector& h_T, const SolverSpec& s);

// h^0 = h_0, h^l = h^{l-1} + (T/L) F(h^{l-1}); bitwise equal to solve_forward with euler(L).
std::vector<Vector> discretize_resnet_forward(const ModelConfig& cfg, const Params& p, const Vector& x, int L);

// Columns: t, state_0 .. state_{n-1}.
void write_trajectory_csv(const Trajectory& traj, std::ostream& out);

}  // namespace odentk

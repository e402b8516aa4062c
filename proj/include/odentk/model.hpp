#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "odentk/activations.hpp"
#include "odentk/error.hpp"

namespace odentk {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct ModelConfig {
  int width = 64;      // n
  int input_dim = 8;   // d
  double horizon = 1;  // T
  double sigma_u = 1.0;
  double sigma_w = 1.0;
  double sigma_v = 1.0;
  Activation activation = odentk::activation(ActivationId::softplus_shifted);
  std::uint64_t seed = 0;

  // Throws config error on n < 1, d < 1, T <= 0 or a non-positive sigma.
  void validate() const;
};

// Weights of f(x) = sigma_v v^T phi(h_T) / sqrt(n), h_0 = sigma_u U x / sqrt(d),
// dh/dt = sigma_w W phi(h) / sqrt(n).
struct Params {
  Matrix U;  // n x d
  Matrix W;  // n x n
  Vector v;  // n
};

struct Grads {
  Matrix dU;
  Matrix dW;
  Vector dv;

  static Grads zeros(const ModelConfig& cfg);
  double squared_norm() const;
  double norm() const;
  Grads& operator+=(const Grads& o);
  Grads& operator*=(double a);
};

// Euclidean inner product over the concatenation (dU, dW, dv).
double dot(const Grads& a, const Grads& b);

Params init_params(const ModelConfig& cfg);

// Shape checks against cfg; throw shape errors.
void check_params(const ModelConfig& cfg, const Params& p);
void check_same_shape(const Grads& a, const Grads& b);

Vector initial_state(const ModelConfig& cfg, const Params& p, const Vector& x);
Vector vector_field(const ModelConfig& cfg, const Params& p, const Vector& h);
double readout(const ModelConfig& cfg, const Params& p, const Vector& h_T);
// lambda_T = sigma_v phi'(h_T) .* v / sqrt(n).
Vector adjoint_terminal(const ModelConfig& cfg, const Params& p, const Vector& h_T);
// sigma_w / sqrt(n) phi'(h) .* (W^T lambda): the adjoint right-hand side with sign dropped.
Vector adjoint_field(const ModelConfig& cfg, const Params& p, const Vector& h, const Vector& lambda);

double param_distance(const Params& a, const Params& b);

// Componentwise phi and phi'. Non-finite entries raise a domain error.
Vector apply_value(const Activation& a, const Vector& x);
Vector apply_deriv(const Activation& a, const Vector& x);
Eigen::MatrixXd apply_value(const Activation& a, const Eigen::MatrixXd& x);
Eigen::MatrixXd apply_deriv(const Activation& a, const Eigen::MatrixXd& x);

// Params with each block replaced by p - eta * g.
Params apply_update(const Params& p, const Grads& g, double eta);

}  // namespace odentk

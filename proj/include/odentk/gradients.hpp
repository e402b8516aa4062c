#pragma once

#include <map>
#include <string>
#include <vector>

#include "odentk/model.hpp"
#include "odentk/solvers.hpp"

namespace odentk {

// Which map f is differentiated: the continuous model through the adjoint
// equations, or the L-step Euler ResNet by exact reverse accumulation.
struct Pipeline {
  enum class Kind { adjoint, discrete };
  Kind kind = Kind::discrete;
  SolverSpec solver = SolverSpec::adaptive();
  int L = 64;

  static Pipeline adjoint(const SolverSpec& s);
  static Pipeline discrete(int L);
  std::string describe() const;
};

struct BlockDiff {
  double abs = 0.0;
  double rel = 0.0;
};

struct GradReport {
  double abs_diff = 0.0;
  double rel_diff = 0.0;
  std::map<std::string, BlockDiff> per_block;  // keys dU, dW, dv

  std::string to_json() const;
};

// dv = sigma_v phi(h_T)/sqrt(n); dW = int sigma_w/sqrt(n) lambda_t phi(h_t)^T dt
// (trapezoid on fixed grids, 3-point Gauss-Legendre per step on adaptive ones);
// dU = sigma_u/sqrt(d) lambda_0 x^T.
Grads grad_adjoint(const ModelConfig& cfg, const Params& p, const Vector& x, const SolverSpec& s);

// States h^0..h^L and backpropagated adjoints delta^0..delta^L of the Euler ResNet:
//   delta^L = lambda_T(h^L),  delta^{l-1} = delta^l + kappa sigma_w/sqrt(n) phi'(h^{l-1}) .* W^T delta^l.
struct DiscretePass {
  std::vector<Vector> h;
  std::vector<Vector> delta;
};
DiscretePass discrete_pass(const ModelConfig& cfg, const Params& p, const Vector& x, int L);

// Exact gradient of f^L; dW sums the L per-layer terms kappa sigma_w/sqrt(n) delta^l phi(h^{l-1})^T.
Grads grad_discrete(const ModelConfig& cfg, const Params& p, const Vector& x, int L);

double model_output(const ModelConfig& cfg, const Params& p, const Vector& x, const Pipeline& pipe);
Grads model_grad(const ModelConfig& cfg, const Params& p, const Vector& x, const Pipeline& pipe);

struct FdTarget {
  bool discrete = false;
  int L = 0;
  static FdTarget continuous() { return {false, 0}; }
  static FdTarget discrete_map(int L) { return {true, L}; }
};

// Central differences over every entry (U row-major, then W, then v). The
// continuous target uses an adaptive solve at rel 1e-12. |epsilon| in [1e-7, 1e-2].
Grads grad_fd(const ModelConfig& cfg, const Params& p, const Vector& x, double epsilon, const FdTarget& target,
              int threads = 0);

// rel_diff is measured against g_ref.
GradReport compare_grads(const Grads& g, const Grads& g_ref);

// Batched Euler ResNet over the columns of X^T (X is N x d, one example per row).
struct DiscreteBatch {
  int L = 0;
  double kappa = 0.0;
  Eigen::MatrixXd X;                  // N x d copy of the inputs
  std::vector<Eigen::MatrixXd> H;     // H[l] is n x N
  std::vector<Eigen::MatrixXd> Phi;   // phi(H[l])
  std::vector<Eigen::MatrixXd> Delta; // adjoints, filled by discrete_backward_batch
  Vector f;                           // outputs, length N
};
DiscreteBatch discrete_forward_batch(const ModelConfig& cfg, const Params& p, const Matrix& X, int L);
void discrete_backward_batch(const ModelConfig& cfg, const Params& p, DiscreteBatch& batch);
// sum_i weights[i] * grad f(x_i); requires adjoints.
Grads weighted_grads(const ModelConfig& cfg, const DiscreteBatch& batch, const Vector& weights);
// Empirical NTK Gram <grad f(x_i), grad f(x_j)> from the stored states and adjoints.
Eigen::MatrixXd discrete_ntk_gram(const ModelConfig& cfg, const DiscreteBatch& batch);
// Readout-feature Gram sigma_v^2/n phi(h^L_i) . phi(h^L_j) (the v block of the NTK).
Eigen::MatrixXd discrete_feature_gram(const ModelConfig& cfg, const DiscreteBatch& batch);

}  // namespace odentk

#include "odentk/gradients.hpp"

#include <cmath>
#include <json.hpp>
#include <sstream>

#include "odentk/error.hpp"
#include "odentk/parallel.hpp"
#include "odentk/quadrature.hpp"

namespace odentk {

namespace {

double inv_sqrt(int n) { return 1.0 / std::sqrt(static_cast<double>(n)); }

BlockDiff block_diff(double diff_sq, double ref_sq) {
  const double a = std::sqrt(diff_sq);
  return {a, a / std::max(std::sqrt(ref_sq), 1e-30)};
}

double continuous_output(const ModelConfig& cfg, const Params& p, const Vector& x) {
  SolverSpec s = SolverSpec::adaptive(1e-12, 1e-14);
  const Trajectory t = solve_forward(cfg, p, x, s);
  return readout(cfg, p, t.terminal());
}

}  // namespace

Pipeline Pipeline::adjoint(const SolverSpec& s) {
  Pipeline p;
  p.kind = Kind::adjoint;
  p.solver = s;
  return p;
}

Pipeline Pipeline::discrete(int L) {
  Pipeline p;
  p.kind = Kind::discrete;
  p.L = L;
  return p;
}

std::string Pipeline::describe() const {
  std::ostringstream os;
  if (kind == Kind::discrete) {
    os << "discrete(L=" << L << ")";
  } else if (solver.method == SolverMethod::adaptive) {
    os << "adjoint(adaptive, rtol=" << solver.rel_tol << ", atol=" << solver.abs_tol << ")";
  } else {
    os << "adjoint(" << solver_method_name(solver.method) << ", L=" << solver.steps << ")";
  }
  return os.str();
}

std::string GradReport::to_json() const {
  nlohmann::json j;
  j["abs_diff"] = abs_diff;
  j["rel_diff"] = rel_diff;
  for (const auto& [k, v] : per_block) j["per_block"][k] = {{"abs", v.abs}, {"rel", v.rel}};
  return j.dump();
}

Grads grad_adjoint(const ModelConfig& cfg, const Params& p, const Vector& x, const SolverSpec& s) {
  const Trajectory fwd = solve_forward(cfg, p, x, s);
  const Trajectory back = solve_backward_adjoint(cfg, p, fwd, s);
  const int n = cfg.width;
  const double sw = cfg.sigma_w * inv_sqrt(n);

  Grads g;
  g.dv = (cfg.sigma_v * inv_sqrt(n)) * apply_value(cfg.activation, fwd.terminal());
  g.dU = (cfg.sigma_u * inv_sqrt(cfg.input_dim)) * back.terminal() * x.transpose();

  Eigen::MatrixXd lam, phi;
  if (s.method != SolverMethod::adaptive && fwd.size() == back.size()) {
    // Trapezoid on the shared grid; back runs T -> 0.
    const std::size_t m = fwd.size();
    lam.resize(n, m);
    phi.resize(n, m);
    for (std::size_t i = 0; i < m; ++i) {
      const double dt_left = i > 0 ? fwd.times[i] - fwd.times[i - 1] : 0.0;
      const double dt_right = i + 1 < m ? fwd.times[i + 1] - fwd.times[i] : 0.0;
      lam.col(i) = (0.5 * (dt_left + dt_right)) * back.states[m - 1 - i];
      phi.col(i) = apply_value(cfg.activation, fwd.states[i]);
    }
  } else {
    // Gauss-Legendre(3) per backward step on the cubic Hermite interpolants.
    const QuadratureRule& gl = gauss_legendre(3);
    const std::size_t steps = back.size() - 1;
    lam.resize(n, 3 * steps);
    phi.resize(n, 3 * steps);
    for (std::size_t k = 0; k < steps; ++k) {
      const double a = back.times[k + 1], b = back.times[k];
      const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
      for (int q = 0; q < 3; ++q) {
        const double t = mid + half * gl.nodes[q];
        lam.col(3 * k + q) = (half * gl.weights[q]) * back.interpolate(t);
        phi.col(3 * k + q) = apply_value(cfg.activation, fwd.interpolate(t));
      }
    }
  }
  g.dW = sw * (lam * phi.transpose());
  return g;
}

DiscretePass discrete_pass(const ModelConfig& cfg, const Params& p, const Vector& x, int L) {
  DiscretePass pass;
  pass.h = discretize_resnet_forward(cfg, p, x, L);
  const double kappa = cfg.horizon / L;
  pass.delta.resize(L + 1);
  pass.delta[L] = adjoint_terminal(cfg, p, pass.h[L]);
  for (int l = L; l >= 1; --l) pass.delta[l - 1] = pass.delta[l] + kappa * adjoint_field(cfg, p, pass.h[l - 1], pass.delta[l]);
  return pass;
}

Grads grad_discrete(const ModelConfig& cfg, const Params& p, const Vector& x, int L) {
  const DiscretePass pass = discrete_pass(cfg, p, x, L);
  const int n = cfg.width;
  const double kappa = cfg.horizon / L;
  Eigen::MatrixXd dl(n, L), ph(n, L);
  for (int l = 1; l <= L; ++l) {
    dl.col(l - 1) = pass.delta[l];
    ph.col(l - 1) = apply_value(cfg.activation, pass.h[l - 1]);
  }
  Grads g;
  g.dW = (kappa * cfg.sigma_w * inv_sqrt(n)) * (dl * ph.transpose());
  g.dv = (cfg.sigma_v * inv_sqrt(n)) * apply_value(cfg.activation, pass.h[L]);
  g.dU = (cfg.sigma_u * inv_sqrt(cfg.input_dim)) * pass.delta[0] * x.transpose();
  return g;
}

double model_output(const ModelConfig& cfg, const Params& p, const Vector& x, const Pipeline& pipe) {
  if (pipe.kind == Pipeline::Kind::discrete) return readout(cfg, p, discretize_resnet_forward(cfg, p, x, pipe.L).back());
  return readout(cfg, p, solve_forward(cfg, p, x, pipe.solver).terminal());
}

Grads model_grad(const ModelConfig& cfg, const Params& p, const Vector& x, const Pipeline& pipe) {
  if (pipe.kind == Pipeline::Kind::discrete) return grad_discrete(cfg, p, x, pipe.L);
  return grad_adjoint(cfg, p, x, pipe.solver);
}

Grads grad_fd(const ModelConfig& cfg, const Params& p, const Vector& x, double epsilon, const FdTarget& target,
              int threads) {
  cfg.validate();
  check_params(cfg, p);
  require(std::isfinite(epsilon) && std::abs(epsilon) >= 1e-7 && std::abs(epsilon) <= 1e-2, ErrorCode::config,
          "finite-difference epsilon must satisfy 1e-7 <= |epsilon| <= 1e-2");
  if (target.discrete) require(target.L >= 1, ErrorCode::config, "discrete target needs L >= 1");
  const auto f = [&](const Params& q) {
    return target.discrete ? readout(cfg, q, discretize_resnet_forward(cfg, q, x, target.L).back())
                           : continuous_output(cfg, q, x);
  };
  const std::size_t nu = p.U.size(), nw = p.W.size(), nv = p.v.size();
  std::vector<double> out(nu + nw + nv);
  const auto entry = [](Params& q, std::size_t k, std::size_t nu_, std::size_t nw_) -> double& {
    if (k < nu_) return q.U.data()[k];
    if (k < nu_ + nw_) return q.W.data()[k - nu_];
    return q.v.data()[k - nu_ - nw_];
  };
  const std::size_t total = out.size();
  int workers = threads <= 0 ? default_threads() : threads;
  workers = static_cast<int>(std::min<std::size_t>(std::max(1, workers), total));
  std::vector<Params> copies(workers, p);
  parallel_for(
      workers,
      [&](std::size_t w) {
        Params& q = copies[w];
        const std::size_t begin = total * w / workers, end = total * (w + 1) / workers;
        for (std::size_t k = begin; k < end; ++k) {
          double& e = entry(q, k, nu, nw);
          const double orig = e;
          e = orig + epsilon;
          const double fp = f(q);
          e = orig - epsilon;
          const double fm = f(q);
          e = orig;
          out[k] = (fp - fm) / (2.0 * epsilon);
        }
      },
      workers);
  Grads g = Grads::zeros(cfg);
  std::copy(out.begin(), out.begin() + nu, g.dU.data());
  std::copy(out.begin() + nu, out.begin() + nu + nw, g.dW.data());
  std::copy(out.begin() + nu + nw, out.end(), g.dv.data());
  return g;
}

GradReport compare_grads(const Grads& g, const Grads& ref) {
  check_same_shape(g, ref);
  GradReport r;
  const double du = (g.dU - ref.dU).squaredNorm(), dw = (g.dW - ref.dW).squaredNorm(), dv = (g.dv - ref.dv).squaredNorm();
  r.per_block["dU"] = block_diff(du, ref.dU.squaredNorm());
  r.per_block["dW"] = block_diff(dw, ref.dW.squaredNorm());
  r.per_block["dv"] = block_diff(dv, ref.dv.squaredNorm());
  r.abs_diff = std::sqrt(du + dw + dv);
  r.rel_diff = r.abs_diff / std::max(ref.norm(), 1e-30);
  return r;
}

DiscreteBatch discrete_forward_batch(const ModelConfig& cfg, const Params& p, const Matrix& X, int L) {
  cfg.validate();
  check_params(cfg, p);
  require(L >= 1, ErrorCode::config, "L must be >= 1");
  require(X.cols() == cfg.input_dim, ErrorCode::shape, "inputs must have d columns");
  require(X.allFinite(), ErrorCode::domain, "inputs have non-finite entries");
  const int n = cfg.width;
  DiscreteBatch b;
  b.L = L;
  b.kappa = cfg.horizon / L;
  b.X = X;
  b.H.reserve(L + 1);
  b.Phi.reserve(L + 1);
  b.H.push_back((cfg.sigma_u * inv_sqrt(cfg.input_dim)) * (p.U * X.transpose()));
  const double step = b.kappa * cfg.sigma_w * inv_sqrt(n);
  for (int l = 0; l <= L; ++l) {
    b.Phi.push_back(apply_value(cfg.activation, b.H.back()));
    if (l < L) b.H.push_back(b.H.back() + step * (p.W * b.Phi.back()));
  }
  b.f = (cfg.sigma_v * inv_sqrt(n)) * (b.Phi.back().transpose() * p.v);
  return b;
}

void discrete_backward_batch(const ModelConfig& cfg, const Params& p, DiscreteBatch& b) {
  const int n = cfg.width;
  const int L = b.L;
  require(static_cast<int>(b.H.size()) == L + 1, ErrorCode::sequencing, "forward batch missing");
  b.Delta.assign(L + 1, Eigen::MatrixXd());
  b.Delta[L] = (cfg.sigma_v * inv_sqrt(n)) * (apply_deriv(cfg.activation, b.H[L]).array().colwise() * p.v.array()).matrix();
  const double step = b.kappa * cfg.sigma_w * inv_sqrt(n);
  for (int l = L; l >= 1; --l) {
    b.Delta[l - 1] = b.Delta[l] + step * apply_deriv(cfg.activation, b.H[l - 1]).cwiseProduct(p.W.transpose() * b.Delta[l]);
  }
}

Grads weighted_grads(const ModelConfig& cfg, const DiscreteBatch& b, const Vector& w) {
  const int n = cfg.width;
  const int L = b.L;
  const Eigen::Index N = b.X.rows();
  require(w.size() == N, ErrorCode::shape, "weights must have one entry per example");
  require(static_cast<int>(b.Delta.size()) == L + 1, ErrorCode::sequencing, "backward batch missing");
  Eigen::MatrixXd A(n, L * N), B(n, L * N);
  for (int l = 1; l <= L; ++l) {
    A.middleCols((l - 1) * N, N) = b.Delta[l] * w.asDiagonal();
    B.middleCols((l - 1) * N, N) = b.Phi[l - 1];
  }
  Grads g;
  g.dW = (b.kappa * cfg.sigma_w * inv_sqrt(n)) * (A * B.transpose());
  g.dv = (cfg.sigma_v * inv_sqrt(n)) * (b.Phi[L] * w);
  g.dU = (cfg.sigma_u * inv_sqrt(cfg.input_dim)) * (b.Delta[0] * w.asDiagonal() * b.X);
  return g;
}

Eigen::MatrixXd discrete_ntk_gram(const ModelConfig& cfg, const DiscreteBatch& b) {
  const int n = cfg.width;
  const int L = b.L;
  const Eigen::Index N = b.X.rows();
  require(static_cast<int>(b.Delta.size()) == L + 1, ErrorCode::sequencing, "backward batch missing");
  Eigen::MatrixXd A(n, L * N), B(n, L * N);
  for (int l = 1; l <= L; ++l) {
    A.middleCols((l - 1) * N, N) = b.Delta[l];
    B.middleCols((l - 1) * N, N) = b.Phi[l - 1];
  }
  Eigen::MatrixXd GA(L * N, L * N), GB(L * N, L * N);
  GA.noalias() = A.transpose() * A;
  GB.noalias() = B.transpose() * B;
  const Eigen::MatrixXd prod = GA.cwiseProduct(GB);
  Eigen::MatrixXd KW = Eigen::MatrixXd::Zero(N, N);
  for (int l = 0; l < L; ++l)
    for (int k = 0; k < L; ++k) KW += prod.block(l * N, k * N, N, N);
  const double cw = b.kappa * b.kappa * cfg.sigma_w * cfg.sigma_w / n;
  Eigen::MatrixXd K = cw * KW + discrete_feature_gram(cfg, b);
  const Eigen::MatrixXd XX = b.X * b.X.transpose();
  const Eigen::MatrixXd DD = b.Delta[0].transpose() * b.Delta[0];
  K += (cfg.sigma_u * cfg.sigma_u / cfg.input_dim) * XX.cwiseProduct(DD);
  return 0.5 * (K + K.transpose());
}

Eigen::MatrixXd discrete_feature_gram(const ModelConfig& cfg, const DiscreteBatch& b) {
  const Eigen::MatrixXd& phi = b.Phi.back();
  Eigen::MatrixXd G = (cfg.sigma_v * cfg.sigma_v / cfg.width) * (phi.transpose() * phi);
  return 0.5 * (G + G.transpose());
}

}  // namespace odentk

#include "odentk/model.hpp"

#include <cmath>
#include <new>
#include <string>

#include "odentk/error.hpp"
#include "odentk/rng.hpp"

namespace odentk {

namespace {

constexpr long long kMaxEntries = 1LL << 28;  // 2 GiB of doubles

void check_finite(const Vector& x, const char* what) {
  require(x.allFinite(), ErrorCode::domain, std::string(what) + " has non-finite entries");
}

template <class M>
void fill_normal(M& m, std::uint64_t seed, std::uint64_t stream) {
  RandomStream rs(seed, stream);
  double* data = m.data();
  for (Eigen::Index i = 0; i < m.size(); ++i) data[i] = rs.normal();
}

}  // namespace

void ModelConfig::validate() const {
  require(width >= 1, ErrorCode::config, "width must be >= 1");
  require(input_dim >= 1, ErrorCode::config, "input_dim must be >= 1");
  require(std::isfinite(horizon) && horizon > 0.0, ErrorCode::config, "horizon must be positive");
  require(sigma_u > 0.0 && sigma_w > 0.0 && sigma_v > 0.0 && std::isfinite(sigma_u) && std::isfinite(sigma_w) &&
              std::isfinite(sigma_v),
          ErrorCode::config, "sigmas must be positive and finite");
  require(activation.value != nullptr && activation.derivative != nullptr, ErrorCode::config,
          "activation has no function pointers");
}

Grads Grads::zeros(const ModelConfig& cfg) {
  return {Matrix::Zero(cfg.width, cfg.input_dim), Matrix::Zero(cfg.width, cfg.width), Vector::Zero(cfg.width)};
}

double Grads::squared_norm() const { return dU.squaredNorm() + dW.squaredNorm() + dv.squaredNorm(); }

double Grads::norm() const { return std::sqrt(squared_norm()); }

Grads& Grads::operator+=(const Grads& o) {
  check_same_shape(*this, o);
  dU += o.dU;
  dW += o.dW;
  dv += o.dv;
  return *this;
}

Grads& Grads::operator*=(double a) {
  dU *= a;
  dW *= a;
  dv *= a;
  return *this;
}

double dot(const Grads& a, const Grads& b) {
  check_same_shape(a, b);
  return (a.dU.array() * b.dU.array()).sum() + (a.dW.array() * b.dW.array()).sum() + a.dv.dot(b.dv);
}

Params init_params(const ModelConfig& cfg) {
  cfg.validate();
  const long long n = cfg.width;
  const long long d = cfg.input_dim;
  require(n * n + n * d + n <= kMaxEntries, ErrorCode::resource, "parameter count exceeds the allocation guard");
  Params p;
  try {
    p.U.resize(n, d);
    p.W.resize(n, n);
    p.v.resize(n);
  } catch (const std::bad_alloc&) {
    fail(ErrorCode::resource, "allocation of parameters failed");
  }
  fill_normal(p.U, cfg.seed, streams::params_u);
  fill_normal(p.W, cfg.seed, streams::params_w);
  fill_normal(p.v, cfg.seed, streams::params_v);
  return p;
}

void check_params(const ModelConfig& cfg, const Params& p) {
  require(p.U.rows() == cfg.width && p.U.cols() == cfg.input_dim, ErrorCode::shape, "U must be n x d");
  require(p.W.rows() == cfg.width && p.W.cols() == cfg.width, ErrorCode::shape, "W must be n x n");
  require(p.v.size() == cfg.width, ErrorCode::shape, "v must have length n");
}

void check_same_shape(const Grads& a, const Grads& b) {
  require(a.dU.rows() == b.dU.rows() && a.dU.cols() == b.dU.cols() && a.dW.rows() == b.dW.rows() &&
              a.dW.cols() == b.dW.cols() && a.dv.size() == b.dv.size(),
          ErrorCode::shape, "gradient shapes differ");
}

Vector apply_value(const Activation& a, const Vector& x) {
  check_finite(x, "activation input");
  return x.unaryExpr(a.value);
}

Vector apply_deriv(const Activation& a, const Vector& x) {
  check_finite(x, "activation input");
  return x.unaryExpr(a.derivative);
}

Eigen::MatrixXd apply_value(const Activation& a, const Eigen::MatrixXd& x) {
  require(x.allFinite(), ErrorCode::domain, "activation input has non-finite entries");
  return x.unaryExpr(a.value);
}

Eigen::MatrixXd apply_deriv(const Activation& a, const Eigen::MatrixXd& x) {
  require(x.allFinite(), ErrorCode::domain, "activation input has non-finite entries");
  return x.unaryExpr(a.derivative);
}

Vector initial_state(const ModelConfig& cfg, const Params& p, const Vector& x) {
  check_params(cfg, p);
  require(x.size() == cfg.input_dim, ErrorCode::shape, "x must have length d");
  check_finite(x, "x");
  return (cfg.sigma_u / std::sqrt(static_cast<double>(cfg.input_dim))) * (p.U * x);
}

Vector vector_field(const ModelConfig& cfg, const Params& p, const Vector& h) {
  require(h.size() == cfg.width, ErrorCode::shape, "h must have length n");
  require(p.W.rows() == cfg.width && p.W.cols() == cfg.width, ErrorCode::shape, "W must be n x n");
  const Vector phi = apply_value(cfg.activation, h);
  return (cfg.sigma_w / std::sqrt(static_cast<double>(cfg.width))) * (p.W * phi);
}

double readout(const ModelConfig& cfg, const Params& p, const Vector& h_T) {
  require(h_T.size() == cfg.width && p.v.size() == cfg.width, ErrorCode::shape, "h_T and v must have length n");
  return cfg.sigma_v / std::sqrt(static_cast<double>(cfg.width)) * p.v.dot(apply_value(cfg.activation, h_T));
}

Vector adjoint_terminal(const ModelConfig& cfg, const Params& p, const Vector& h_T) {
  require(h_T.size() == cfg.width && p.v.size() == cfg.width, ErrorCode::shape, "h_T and v must have length n");
  return (cfg.sigma_v / std::sqrt(static_cast<double>(cfg.width))) *
         apply_deriv(cfg.activation, h_T).cwiseProduct(p.v);
}

Vector adjoint_field(const ModelConfig& cfg, const Params& p, const Vector& h, const Vector& lambda) {
  require(h.size() == cfg.width && lambda.size() == cfg.width, ErrorCode::shape, "h and lambda must have length n");
  const Vector wt = p.W.transpose() * lambda;
  return (cfg.sigma_w / std::sqrt(static_cast<double>(cfg.width))) * apply_deriv(cfg.activation, h).cwiseProduct(wt);
}

double param_distance(const Params& a, const Params& b) {
  require(a.U.rows() == b.U.rows() && a.U.cols() == b.U.cols() && a.W.rows() == b.W.rows() &&
              a.W.cols() == b.W.cols() && a.v.size() == b.v.size(),
          ErrorCode::shape, "parameter shapes differ");
  return std::sqrt((a.U - b.U).squaredNorm() + (a.W - b.W).squaredNorm() + (a.v - b.v).squaredNorm());
}

Params apply_update(const Params& p, const Grads& g, double eta) {
  require(p.U.rows() == g.dU.rows() && p.U.cols() == g.dU.cols() && p.W.rows() == g.dW.rows() &&
              p.v.size() == g.dv.size(),
          ErrorCode::shape, "gradient shape does not match parameters");
  return {p.U - eta * g.dU, p.W - eta * g.dW, p.v - eta * g.dv};
}

}  // namespace odentk

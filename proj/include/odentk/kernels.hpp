#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "odentk/gradients.hpp"
#include "odentk/model.hpp"

namespace odentk {

// How E phi(u) phi(ubar) is evaluated inside the depth recursions.
//   series:     Mehler expansion sum_n a_n(sigma_a) a_n(sigma_b) rho^n with per-row
//               Hermite coefficients; relu uses its arc-cosine closed forms.
//   quadrature: dual_value / dual_deriv per table entry (slow; for validation).
enum class KernelBackend { series, quadrature };

struct KernelOptions {
  KernelBackend backend = KernelBackend::series;
  int hermite_terms = 128;
  int quadrature_order = 64;
};

namespace detail {
struct KernelSides;
}

// Depth-L tables for one input pair (x, xbar), kappa = T/L.
//   C[0,k] = delta_{0k} c00, c00 = sigma_u^2 x.xbar / d
//   C[l,k] = sigma_w^2 E phi(u^{l-1}) phi(ubar^{k-1}),  l, k = 1..L+1
//   S[l,k] = c00 + kappa^2 sum_{1<=i<=l, 1<=j<=k} C[i,j] = E u^l ubar^k
//   Edot[a,b] = sigma_w^2 E phi'(u^a) phi'(ubar^b)
//   D[l,k] = D_T + kappa^2 sum_{i>l, j>k} Edot[i-1,j-1] D[i,j],  D_T = sigma_v^2 E phi'(u^L) phi'(ubar^L)
//   K = sigma_v^2 E phi(u^L) phi(ubar^L) + kappa^2 sum_{l,k=1..L} C[l,k] D[l,k] + c00 D[0,0]
struct KernelTables {
  int L = 0;
  double kappa = 0.0;
  double c00 = 0.0;
  Eigen::MatrixXd C;     // (L+2) x (L+2)
  Eigen::MatrixXd S;     // (L+1) x (L+1)
  Eigen::VectorXd var_a; // S_xx[l,l], l = 0..L
  Eigen::VectorXd var_b; // S_xbarxbar[k,k]
  double nngp = 0.0;         // Sigma^{L+1} = C[L+1,L+1]
  double output_nngp = 0.0;  // sigma_v^2 E phi(u^L) phi(ubar^L), the covariance of f
  // Filled by ntk_tables.
  Eigen::MatrixXd Edot;  // (L+1) x (L+1)
  Eigen::MatrixXd D;     // (L+1) x (L+1)
  double d_terminal = 0.0;
  double ntk = 0.0;
  bool has_ntk = false;

  std::shared_ptr<const detail::KernelSides> sides;
};

KernelTables nngp_tables(const ModelConfig& cfg, const Vector& x, const Vector& xbar, int L,
                         const KernelOptions& opts = {});
// Fills Edot, D, d_terminal and ntk; returns ntk. Sequencing error without C/S.
double ntk_tables(const ModelConfig& cfg, KernelTables& t, const KernelOptions& opts = {});
KernelTables kernel_tables(const ModelConfig& cfg, const Vector& x, const Vector& xbar, int L,
                           const KernelOptions& opts = {});

enum class KernelQuantity { nngp, ntk };

struct LimitReport {
  std::vector<int> depths;
  std::vector<double> values;
  std::vector<double> gaps;        // |v[i+1] - v[i]|
  std::vector<double> gap_ratios;  // gaps[i+1] / gaps[i]
  double extrapolated = 0.0;       // first-order Richardson on the last two depths
  bool gaps_monotone = true;       // false triggers the divergence warning
  std::string warning;
};

LimitReport kernel_limit_extrapolate(const ModelConfig& cfg, const Vector& x, const Vector& xbar,
                                     const std::vector<int>& depths, KernelQuantity q,
                                     const KernelOptions& opts = {});

struct SStarReport {
  int L = 0;
  std::vector<double> diagonal;  // S[L,L](x_i, x_i)
  double diagonal_spread = 0.0;  // max - min
  double min_gap = 0.0;          // min_{i != j} S(x_i,x_i) - S(x_i,x_j)
  bool diagonal_equal = false;   // spread <= 1e-8
  bool gaps_positive = false;
};

// Rows of X must be unit norm (input error otherwise).
SStarReport s_star_checks(const ModelConfig& cfg, const Matrix& X, int L, const KernelOptions& opts = {});

enum class GramKind { nngp_limit, ntk_limit, empirical_nngp, empirical_ntk };
const char* gram_kind_name(GramKind k) noexcept;

struct GramMatrix {
  Eigen::MatrixXd values;
  GramKind kind = GramKind::ntk_limit;
  std::string meta;  // JSON: L or width, activation, sigmas, T
};

// <grad f(x), grad f(xbar)> with both gradients from the chosen pipeline.
double empirical_ntk(const ModelConfig& cfg, const Params& p, const Vector& x, const Vector& xbar,
                     const Pipeline& pipe);

// Sample covariance of f(x_i) across models initialized from `seeds` (cfg.seed replaced).
GramMatrix empirical_nngp(const ModelConfig& cfg, const std::vector<std::uint64_t>& seeds, const Matrix& X,
                          const Pipeline& pipe, int threads = 0);

struct GramRequest {
  int L = 256;                          // limit kinds
  KernelOptions kernel;                 // limit kinds
  const Params* params = nullptr;       // empirical_ntk
  Pipeline pipeline = Pipeline::discrete(64);  // empirical kinds
  std::vector<std::uint64_t> seeds;     // empirical_nngp
  int threads = 0;
};

GramMatrix gram(const ModelConfig& cfg, const Matrix& X, GramKind kind, const GramRequest& req = {});
double min_eig(const GramMatrix& g);
Eigen::VectorXd spectrum(const GramMatrix& g);

struct SpdReport {
  double input_std = 0.0;  // sqrt(S[L,L](x,x)) of the first input
  NonpolyReport nonpoly;
  double min_eig = 0.0;    // of the nngp-limit Gram
  bool nonpoly_pass = false;
  bool eig_pass = false;   // min_eig > 1e-8
};

SpdReport spd_witness(const ModelConfig& cfg, const Matrix& X, int L = 256, int count = 64, double threshold = 1e-12,
                      const KernelOptions& opts = {});

// CSV with row/col headers = input indices; meta goes to a separate JSON block.
void write_gram_csv(const GramMatrix& g, std::ostream& out);
void write_table_csv(const Eigen::MatrixXd& table, std::ostream& out);

}  // namespace odentk

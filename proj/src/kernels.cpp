#include "odentk/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <json.hpp>
#include <numbers>
#include <ostream>

#include "odentk/error.hpp"
#include "odentk/parallel.hpp"

namespace odentk {

namespace detail {

// Diagonal profile of one input: S_xx[l,l] and, for the series backend, the
// Hermite coefficients of phi and phi' at input_std = sqrt(S_xx[l,l]).
struct Side {
  Eigen::VectorXd var;
  // terms x (L+1), row-major so that consecutive depth rows are contiguous.
  Matrix val_coef;
  Matrix der_coef;
};

struct KernelSides {
  std::shared_ptr<const Side> a;
  std::shared_ptr<const Side> b;
};

}  // namespace detail

namespace {

using detail::Side;

enum class Which { value, deriv };

struct Context {
  const ModelConfig& cfg;
  const KernelOptions& opts;
  int L;
  bool closed_relu() const { return cfg.activation.id == ActivationId::relu; }
  bool series() const { return opts.backend == KernelBackend::series && !closed_relu(); }
};

void validate_options(const KernelOptions& opts) {
  require(opts.hermite_terms >= 2 && opts.hermite_terms <= 480, ErrorCode::config,
          "hermite_terms must be in [2, 480]");
  require(opts.quadrature_order >= 2, ErrorCode::config, "quadrature order must be at least 2");
}

void fill_coefficients(const Context& ctx, Side& s, int row) {
  if (!ctx.series()) return;
  const double sd = std::sqrt(s.var[row]);
  const int terms = ctx.opts.hermite_terms;
  const int order = 2 * terms + 32;
  const std::vector<double> a = hermite_coeffs(ctx.cfg.activation, sd, terms, order);
  const std::vector<double> b = hermite_coeffs_deriv(ctx.cfg.activation, sd, terms, order);
  for (int n = 0; n < terms; ++n) {
    s.val_coef(n, row) = a[n];
    s.der_coef(n, row) = b[n];
  }
}

Side make_side(const Context& ctx) {
  Side s;
  s.var = Eigen::VectorXd::Zero(ctx.L + 1);
  if (ctx.series()) {
    s.val_coef = Matrix::Zero(ctx.opts.hermite_terms, ctx.L + 1);
    s.der_coef = Matrix::Zero(ctx.opts.hermite_terms, ctx.L + 1);
  }
  return s;
}

double correlation(double cov, double va, double vb) {
  const double denom = std::sqrt(va * vb);
  if (denom <= 0.0) return 0.0;
  return std::clamp(cov / denom, -1.0, 1.0);
}

// out[k] = E g(u^row) g(ubar^{first+k}), k < count, where the fixed side owns
// `row` and the other side owns the contiguous block of rows. cov[k] is the
// cross covariance of each pair.
void expectation_row(const Context& ctx, Which w, const Side& fixed, int row, const Side& other, int first, int count,
                     const double* cov, double* out) {
  const Activation& act = ctx.cfg.activation;
  if (count <= 0) return;
  const double vf = fixed.var[row];
  if (ctx.closed_relu()) {
    for (int k = 0; k < count; ++k) {
      const double vo = other.var[first + k];
      const double rho = correlation(cov[k], vf, vo);
      if (w == Which::value) {
        out[k] = std::sqrt(vf * vo) * (std::sqrt(std::max(0.0, 1.0 - rho * rho)) + rho * (std::numbers::pi - std::acos(rho))) /
                 (2.0 * std::numbers::pi);
      } else {
        out[k] = (std::numbers::pi - std::acos(rho)) / (2.0 * std::numbers::pi);
      }
    }
    return;
  }
  if (!ctx.series()) {
    const QuadratureOptions q{ctx.opts.quadrature_order};
    for (int k = 0; k < count; ++k) {
      const double vo = other.var[first + k];
      // Keep the 2x2 matrix within the PSD tolerance of dual_value.
      const double bound = std::sqrt(vf * vo);
      const PairCovariance c{vf, vo, std::clamp(cov[k], -bound, bound)};
      out[k] = w == Which::value ? dual_value(act, c, q) : dual_deriv(act, c, q);
    }
    return;
  }
  const Matrix& cf = w == Which::value ? fixed.val_coef : fixed.der_coef;
  const Matrix& co = w == Which::value ? other.val_coef : other.der_coef;
  const int terms = ctx.opts.hermite_terms;
  std::vector<double> rho(count), pw(count, 1.0);
  for (int k = 0; k < count; ++k) {
    rho[k] = correlation(cov[k], vf, other.var[first + k]);
    out[k] = 0.0;
  }
  for (int n = 0; n < terms; ++n) {
    const double a = cf(n, row);
    const double* b = co.data() + static_cast<std::size_t>(n) * co.cols() + first;
    for (int k = 0; k < count; ++k) {
      out[k] += (a * b[k]) * pw[k];
      pw[k] *= rho[k];
    }
  }
}

// Fills C and S in square-shell order: shell m
// holds C[m, 1..m], C[1..m-1, m] and then S[m, 0..m], S[0..m-1, m]. Every entry
// of shell m reads only shells < m. A non-null `filling` is the self profile
// under construction (sa and sb then both refer to it).
void build_nngp(const Context& ctx, double c00, const Side& sa, const Side& sb, Side* filling, KernelTables& t) {
  const int L = ctx.L;
  const double k2 = t.kappa * t.kappa;
  const double sw2 = ctx.cfg.sigma_w * ctx.cfg.sigma_w;
  t.C = Eigen::MatrixXd::Zero(L + 2, L + 2);
  t.S = Eigen::MatrixXd::Zero(L + 1, L + 1);
  t.C(0, 0) = c00;
  t.S(0, 0) = c00;
  if (filling) {
    filling->var[0] = c00;
    fill_coefficients(ctx, *filling, 0);
  }
  std::vector<double> cov(L + 2), out(L + 2);
  for (int m = 1; m <= L + 1; ++m) {
    // C[m, k] for k = 1..m uses S[m-1, k-1].
    for (int k = 1; k <= m; ++k) cov[k - 1] = t.S(m - 1, k - 1);
    expectation_row(ctx, Which::value, sa, m - 1, sb, 0, m, cov.data(), out.data());
    for (int k = 1; k <= m; ++k) t.C(m, k) = sw2 * out[k - 1];
    // C[k, m] for k = 1..m-1 uses S[k-1, m-1].
    for (int k = 1; k < m; ++k) cov[k - 1] = t.S(k - 1, m - 1);
    expectation_row(ctx, Which::value, sb, m - 1, sa, 0, m - 1, cov.data(), out.data());
    for (int k = 1; k < m; ++k) t.C(k, m) = sw2 * out[k - 1];
    if (m > L) break;
    t.S(0, m) = c00;
    for (int k = 1; k < m; ++k) t.S(k, m) = t.S(k - 1, m) + t.S(k, m - 1) - t.S(k - 1, m - 1) + k2 * t.C(k, m);
    t.S(m, 0) = c00;
    for (int k = 1; k < m; ++k) t.S(m, k) = t.S(m - 1, k) + t.S(m, k - 1) - t.S(m - 1, k - 1) + k2 * t.C(m, k);
    t.S(m, m) = t.S(m - 1, m) + t.S(m, m - 1) - t.S(m - 1, m - 1) + k2 * t.C(m, m);
    if (filling) {
      filling->var[m] = t.S(m, m);
      fill_coefficients(ctx, *filling, m);
    }
  }
  t.nngp = t.C(L + 1, L + 1);
  t.output_nngp = ctx.cfg.sigma_v * ctx.cfg.sigma_v * (t.nngp / sw2);
}

std::uint64_t bits_of(double v) {
  std::uint64_t b;
  std::memcpy(&b, &v, sizeof b);
  return b;
}

// Self profiles keyed by the bit pattern of the input's squared norm, since
// the kernel depends on x only through |x|^2, |xbar|^2 and x.xbar.
class SideCache {
 public:
  SideCache(const ModelConfig& cfg, const KernelOptions& opts, int L) : cfg_(cfg), opts_(opts), L_(L) {}

  std::shared_ptr<const Side> get(double sq_norm) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = cache_.find(bits_of(sq_norm));
      if (it != cache_.end()) return it->second;
    }
    const Context ctx{cfg_, opts_, L_};
    auto side = std::make_shared<Side>(make_side(ctx));
    KernelTables scratch;
    scratch.L = L_;
    scratch.kappa = cfg_.horizon / L_;
    const double c00 = cfg_.sigma_u * cfg_.sigma_u * sq_norm / cfg_.input_dim;
    build_nngp(ctx, c00, *side, *side, side.get(), scratch);
    std::lock_guard<std::mutex> lock(mu_);
    return cache_.emplace(bits_of(sq_norm), side).first->second;
  }

 private:
  ModelConfig cfg_;
  KernelOptions opts_;
  int L_;
  std::mutex mu_;
  std::map<std::uint64_t, std::shared_ptr<const Side>> cache_;
};

void check_inputs(const ModelConfig& cfg, const Vector& x, const Vector& xbar, int L) {
  cfg.validate();
  require(L >= 1, ErrorCode::config, "L must be >= 1");
  require(x.size() == cfg.input_dim && xbar.size() == cfg.input_dim, ErrorCode::shape, "inputs must have length d");
  require(x.allFinite() && xbar.allFinite(), ErrorCode::domain, "inputs must be finite");
  require(x.squaredNorm() > 0.0 && xbar.squaredNorm() > 0.0, ErrorCode::input, "inputs must be nonzero");
}

KernelTables cross_tables(const ModelConfig& cfg, const KernelOptions& opts, int L, const Vector& x,
                          const Vector& xbar, std::shared_ptr<const Side> sa, std::shared_ptr<const Side> sb) {
  const Context ctx{cfg, opts, L};
  KernelTables t;
  t.L = L;
  t.kappa = cfg.horizon / L;
  t.c00 = cfg.sigma_u * cfg.sigma_u * x.dot(xbar) / cfg.input_dim;
  build_nngp(ctx, t.c00, *sa, *sb, nullptr, t);
  t.var_a = sa->var;
  t.var_b = sb->var;
  t.sides = std::make_shared<detail::KernelSides>(detail::KernelSides{std::move(sa), std::move(sb)});
  return t;
}

std::string meta_json(const ModelConfig& cfg, GramKind kind, const nlohmann::json& extra) {
  nlohmann::json j = extra;
  j["kind"] = gram_kind_name(kind);
  j["activation"] = std::string(cfg.activation.name);
  j["sigma_u"] = cfg.sigma_u;
  j["sigma_w"] = cfg.sigma_w;
  j["sigma_v"] = cfg.sigma_v;
  j["T"] = cfg.horizon;
  j["width"] = cfg.width;
  j["input_dim"] = cfg.input_dim;
  return j.dump();
}

GramMatrix limit_gram(const ModelConfig& cfg, const Matrix& X, GramKind kind, int L, const KernelOptions& opts,
                      int threads) {
  cfg.validate();
  validate_options(opts);
  require(X.rows() >= 1 && X.cols() == cfg.input_dim, ErrorCode::shape, "X must be N x d with N >= 1");
  const Eigen::Index N = X.rows();
  SideCache cache(cfg, opts, L);
  std::vector<std::shared_ptr<const Side>> sides(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    const Vector xi = X.row(i).transpose();
    require(xi.allFinite() && xi.squaredNorm() > 0.0, ErrorCode::input, "inputs must be finite and nonzero");
    sides[i] = cache.get(xi.squaredNorm());
  }
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index j = i; j < N; ++j) pairs.emplace_back(i, j);
  std::vector<double> vals(pairs.size());
  parallel_for(
      pairs.size(),
      [&](std::size_t k) {
        const auto [i, j] = pairs[k];
        KernelTables t = cross_tables(cfg, opts, L, X.row(i).transpose(), X.row(j).transpose(), sides[i], sides[j]);
        vals[k] = kind == GramKind::nngp_limit ? t.output_nngp : ntk_tables(cfg, t, opts);
      },
      threads);
  GramMatrix g;
  g.kind = kind;
  g.values.resize(N, N);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    g.values(pairs[k].first, pairs[k].second) = vals[k];
    g.values(pairs[k].second, pairs[k].first) = vals[k];
  }
  g.meta = meta_json(cfg, kind, {{"L", L}, {"kappa", cfg.horizon / L}});
  return g;
}

}  // namespace

KernelTables nngp_tables(const ModelConfig& cfg, const Vector& x, const Vector& xbar, int L,
                         const KernelOptions& opts) {
  check_inputs(cfg, x, xbar, L);
  validate_options(opts);
  SideCache cache(cfg, opts, L);
  auto sa = cache.get(x.squaredNorm());
  auto sb = cache.get(xbar.squaredNorm());
  return cross_tables(cfg, opts, L, x, xbar, std::move(sa), std::move(sb));
}

double ntk_tables(const ModelConfig& cfg, KernelTables& t, const KernelOptions& opts) {
  require(t.L >= 1 && t.C.rows() == t.L + 2 && t.S.rows() == t.L + 1 && t.sides, ErrorCode::sequencing,
          "ntk_tables needs the C and S tables from nngp_tables");
  validate_options(opts);
  const int L = t.L;
  const Context ctx{cfg, opts, L};
  const Side& sa = *t.sides->a;
  const Side& sb = *t.sides->b;
  const double sw2 = cfg.sigma_w * cfg.sigma_w;
  const double sv2 = cfg.sigma_v * cfg.sigma_v;
  const double k2 = t.kappa * t.kappa;

  t.Edot.resize(L + 1, L + 1);
  std::vector<double> cov(L + 1), out(L + 1);
  for (int a = 0; a <= L; ++a) {
    for (int b = 0; b <= L; ++b) cov[b] = t.S(a, b);
    expectation_row(ctx, Which::deriv, sa, a, sb, 0, L + 1, cov.data(), out.data());
    for (int b = 0; b <= L; ++b) t.Edot(a, b) = sw2 * out[b];
  }
  {
    double dt = 0.0;
    const double c = t.S(L, L);
    expectation_row(ctx, Which::deriv, sa, L, sb, L, 1, &c, &dt);
    t.d_terminal = sv2 * dt;
  }
  // Suffix sums Q[i,j] = sum_{i'>=i, j'>=j} Edot[i'-1,j'-1] D[i',j'], Q = 0 beyond L.
  t.D.resize(L + 1, L + 1);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(L + 2, L + 2);
  for (int i = L; i >= 0; --i) {
    for (int j = L; j >= 0; --j) {
      t.D(i, j) = t.d_terminal + k2 * Q(i + 1, j + 1);
      if (i >= 1 && j >= 1) Q(i, j) = t.Edot(i - 1, j - 1) * t.D(i, j) + Q(i + 1, j) + Q(i, j + 1) - Q(i + 1, j + 1);
    }
  }
  double interior = 0.0;
  for (int l = 1; l <= L; ++l)
    for (int k = 1; k <= L; ++k) interior += t.C(l, k) * t.D(l, k);
  t.ntk = t.output_nngp + k2 * interior + t.c00 * t.D(0, 0);
  t.has_ntk = true;
  return t.ntk;
}

KernelTables kernel_tables(const ModelConfig& cfg, const Vector& x, const Vector& xbar, int L,
                           const KernelOptions& opts) {
  KernelTables t = nngp_tables(cfg, x, xbar, L, opts);
  ntk_tables(cfg, t, opts);
  return t;
}

LimitReport kernel_limit_extrapolate(const ModelConfig& cfg, const Vector& x, const Vector& xbar,
                                     const std::vector<int>& depths, KernelQuantity q, const KernelOptions& opts) {
  require(depths.size() >= 3, ErrorCode::config, "need at least three depths");
  for (std::size_t i = 1; i < depths.size(); ++i)
    require(depths[i] > depths[i - 1], ErrorCode::config, "depths must be increasing");
  LimitReport r;
  r.depths = depths;
  for (int L : depths) {
    KernelTables t = nngp_tables(cfg, x, xbar, L, opts);
    r.values.push_back(q == KernelQuantity::nngp ? t.nngp : ntk_tables(cfg, t, opts));
  }
  for (std::size_t i = 1; i < r.values.size(); ++i) r.gaps.push_back(std::abs(r.values[i] - r.values[i - 1]));
  for (std::size_t i = 1; i < r.gaps.size(); ++i) {
    r.gap_ratios.push_back(r.gaps[i - 1] > 0.0 ? r.gaps[i] / r.gaps[i - 1] : 0.0);
    if (r.gaps[i] > r.gaps[i - 1]) r.gaps_monotone = false;
  }
  if (!r.gaps_monotone) r.warning = "depth gaps are not shrinking; the sequence may not have entered its 1/L regime";
  const std::size_t m = r.values.size();
  const double l1 = depths[m - 2], l2 = depths[m - 1];
  r.extrapolated = (l2 * r.values[m - 1] - l1 * r.values[m - 2]) / (l2 - l1);
  return r;
}

SStarReport s_star_checks(const ModelConfig& cfg, const Matrix& X, int L, const KernelOptions& opts) {
  cfg.validate();
  require(X.rows() >= 1 && X.cols() == cfg.input_dim, ErrorCode::shape, "X must be N x d");
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    require(std::abs(X.row(i).norm() - 1.0) <= 1e-10, ErrorCode::input, "s_star_checks needs unit-norm rows");
  const Eigen::Index N = X.rows();
  SStarReport r;
  r.L = L;
  Eigen::MatrixXd S(N, N);
  for (Eigen::Index i = 0; i < N; ++i) {
    for (Eigen::Index j = i; j < N; ++j) {
      const KernelTables t = nngp_tables(cfg, X.row(i).transpose(), X.row(j).transpose(), L, opts);
      S(i, j) = S(j, i) = t.S(L, L);
    }
  }
  for (Eigen::Index i = 0; i < N; ++i) r.diagonal.push_back(S(i, i));
  const auto [lo, hi] = std::minmax_element(r.diagonal.begin(), r.diagonal.end());
  r.diagonal_spread = *hi - *lo;
  r.diagonal_equal = r.diagonal_spread <= 1e-8;
  r.min_gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index j = 0; j < N; ++j)
      if (i != j) r.min_gap = std::min(r.min_gap, S(i, i) - S(i, j));
  r.gaps_positive = N < 2 || r.min_gap > 0.0;
  return r;
}

const char* gram_kind_name(GramKind k) noexcept {
  switch (k) {
    case GramKind::nngp_limit:
      return "nngp-limit";
    case GramKind::ntk_limit:
      return "ntk-limit";
    case GramKind::empirical_nngp:
      return "empirical-nngp";
    case GramKind::empirical_ntk:
      return "empirical-ntk";
  }
  return "?";
}

double empirical_ntk(const ModelConfig& cfg, const Params& p, const Vector& x, const Vector& xbar,
                     const Pipeline& pipe) {
  if (pipe.kind == Pipeline::Kind::discrete) {
    Matrix X(2, cfg.input_dim);
    X.row(0) = x.transpose();
    X.row(1) = xbar.transpose();
    DiscreteBatch b = discrete_forward_batch(cfg, p, X, pipe.L);
    discrete_backward_batch(cfg, p, b);
    const Grads g1 = weighted_grads(cfg, b, Vector::Unit(2, 0));
    const Grads g2 = weighted_grads(cfg, b, Vector::Unit(2, 1));
    return dot(g1, g2);
  }
  const Grads g1 = grad_adjoint(cfg, p, x, pipe.solver);
  const Grads g2 = grad_adjoint(cfg, p, xbar, pipe.solver);
  return dot(g1, g2);
}

GramMatrix empirical_nngp(const ModelConfig& cfg, const std::vector<std::uint64_t>& seeds, const Matrix& X,
                          const Pipeline& pipe, int threads) {
  require(seeds.size() >= 2, ErrorCode::config, "empirical_nngp needs at least two seeds");
  require(X.rows() >= 1 && X.cols() == cfg.input_dim, ErrorCode::shape, "X must be N x d");
  const Eigen::Index N = X.rows();
  const std::size_t S = seeds.size();
  Eigen::MatrixXd F(S, N);
  parallel_for(
      S,
      [&](std::size_t s) {
        ModelConfig c = cfg;
        c.seed = seeds[s];
        const Params p = init_params(c);
        if (pipe.kind == Pipeline::Kind::discrete) {
          F.row(s) = discrete_forward_batch(c, p, X, pipe.L).f.transpose();
        } else {
          for (Eigen::Index i = 0; i < N; ++i) F(s, i) = model_output(c, p, X.row(i).transpose(), pipe);
        }
      },
      threads);
  const Eigen::RowVectorXd mean = F.colwise().mean();
  const Eigen::MatrixXd centered = F.rowwise() - mean;
  GramMatrix g;
  g.kind = GramKind::empirical_nngp;
  g.values = (centered.transpose() * centered) / static_cast<double>(S - 1);
  g.values = 0.5 * (g.values + g.values.transpose()).eval();
  g.meta = meta_json(cfg, g.kind, {{"seeds", S}, {"pipeline", pipe.describe()}});
  return g;
}

GramMatrix gram(const ModelConfig& cfg, const Matrix& X, GramKind kind, const GramRequest& req) {
  switch (kind) {
    case GramKind::nngp_limit:
    case GramKind::ntk_limit:
      return limit_gram(cfg, X, kind, req.L, req.kernel, req.threads);
    case GramKind::empirical_nngp:
      return empirical_nngp(cfg, req.seeds, X, req.pipeline, req.threads);
    case GramKind::empirical_ntk: {
      require(req.params != nullptr, ErrorCode::config, "empirical-ntk Gram needs parameters");
      const Params& p = *req.params;
      check_params(cfg, p);
      GramMatrix g;
      g.kind = kind;
      if (req.pipeline.kind == Pipeline::Kind::discrete) {
        DiscreteBatch b = discrete_forward_batch(cfg, p, X, req.pipeline.L);
        discrete_backward_batch(cfg, p, b);
        g.values = discrete_ntk_gram(cfg, b);
      } else {
        const Eigen::Index N = X.rows();
        std::vector<Grads> grads(N);
        parallel_for(
            N, [&](std::size_t i) { grads[i] = grad_adjoint(cfg, p, X.row(i).transpose(), req.pipeline.solver); },
            req.threads);
        g.values.resize(N, N);
        for (Eigen::Index i = 0; i < N; ++i)
          for (Eigen::Index j = i; j < N; ++j) g.values(i, j) = g.values(j, i) = dot(grads[i], grads[j]);
      }
      g.meta = meta_json(cfg, kind, {{"pipeline", req.pipeline.describe()}});
      return g;
    }
  }
  fail(ErrorCode::config, "unknown Gram kind");
}

Eigen::VectorXd spectrum(const GramMatrix& g) {
  require(g.values.rows() == g.values.cols() && g.values.rows() >= 1, ErrorCode::shape, "Gram must be square");
  require(g.values.allFinite(), ErrorCode::numeric, "Gram has non-finite entries");
  const double asym = (g.values - g.values.transpose()).cwiseAbs().maxCoeff();
  require(asym <= 1e-10 * std::max(1.0, g.values.cwiseAbs().maxCoeff()), ErrorCode::input, "Gram is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.values, Eigen::EigenvaluesOnly);
  require(es.info() == Eigen::Success, ErrorCode::numeric, "symmetric eigensolver did not converge");
  return es.eigenvalues();
}

double min_eig(const GramMatrix& g) { return spectrum(g)[0]; }

SpdReport spd_witness(const ModelConfig& cfg, const Matrix& X, int L, int count, double threshold,
                      const KernelOptions& opts) {
  require(X.rows() >= 1, ErrorCode::input, "spd_witness needs inputs");
  SpdReport r;
  const Vector x0 = X.row(0).transpose();
  const KernelTables t = nngp_tables(cfg, x0, x0, L, opts);
  r.input_std = std::sqrt(t.S(L, L));
  r.nonpoly = nonpoly_witness(cfg.activation, r.input_std, count, threshold);
  r.nonpoly_pass = r.nonpoly.passes;
  GramRequest req;
  req.L = L;
  req.kernel = opts;
  r.min_eig = min_eig(gram(cfg, X, GramKind::nngp_limit, req));
  r.eig_pass = r.min_eig > 1e-8;
  return r;
}

void write_gram_csv(const GramMatrix& g, std::ostream& out) {
  const Eigen::Index N = g.values.rows();
  out << "index";
  for (Eigen::Index j = 0; j < N; ++j) out << ',' << j;
  out << '\n';
  out.precision(17);
  for (Eigen::Index i = 0; i < N; ++i) {
    out << i;
    for (Eigen::Index j = 0; j < N; ++j) out << ',' << g.values(i, j);
    out << '\n';
  }
}

void write_table_csv(const Eigen::MatrixXd& table, std::ostream& out) {
  GramMatrix g;
  g.values = table;
  write_gram_csv(g, out);
}

}  // namespace odentk

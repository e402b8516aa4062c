#include "odentk/studies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "odentk/data_io.hpp"
#include "odentk/error.hpp"
#include "odentk/parallel.hpp"

namespace odentk {

namespace {

double diff_norm(const Matrix& a, const Matrix& b) { return (a - b).norm(); }

std::size_t depth_index(const std::vector<int>& depths, int L) {
  for (std::size_t i = 0; i < depths.size(); ++i)
    if (depths[i] == L) return i;
  fail(ErrorCode::config, "depth " + std::to_string(L) + " is not in the sweep");
}

SolverSpec tight_adaptive(double tol) { return SolverSpec::adaptive(tol, tol * 1e-2); }

}  // namespace

std::vector<std::uint64_t> seed_range(std::uint64_t first, int count) {
  std::vector<std::uint64_t> s;
  for (int i = 0; i < count; ++i) s.push_back(first + static_cast<std::uint64_t>(i));
  return s;
}

Vector sphere_point(int d, std::uint64_t seed) {
  return synth_sphere(1, d, seed, LabelRule::random_pm1).X.row(0).transpose();
}

DepthSweepResult depth_sweep(const ModelConfig& cfg, const DepthSweepOptions& opts) {
  require(opts.depths.size() >= 2, ErrorCode::config, "depth sweep needs >= 2 depths");
  require(!opts.seeds.empty(), ErrorCode::config, "depth sweep needs seeds");
  const std::size_t from = depth_index(opts.depths, opts.plateau_from);
  const std::size_t to = depth_index(opts.depths, opts.plateau_to);
  const Vector x = sphere_point(cfg.input_dim, opts.input_seed);
  const std::size_t S = opts.seeds.size(), D = opts.depths.size();
  std::vector<DepthSweepRow> rows(S * D);
  parallel_for(
      S,
      [&](std::size_t s) {
        ModelConfig c = cfg;
        c.seed = opts.seeds[s];
        const Params p = init_params(c);
        Grads g_ref;
        double f_ref;
        if (opts.discrete_reference) {
          g_ref = grad_discrete(c, p, x, opts.reference_L);
          f_ref = model_output(c, p, x, Pipeline::discrete(opts.reference_L));
        } else {
          const SolverSpec ref = tight_adaptive(opts.reference_tol);
          g_ref = grad_adjoint(c, p, x, ref);
          f_ref = model_output(c, p, x, Pipeline::adjoint(ref));
        }
        for (std::size_t k = 0; k < D; ++k) {
          const int L = opts.depths[k];
          const Grads g = grad_discrete(c, p, x, L);
          DepthSweepRow& r = rows[s * D + k];
          r.seed = c.seed;
          r.L = L;
          r.output_diff = std::fabs(model_output(c, p, x, Pipeline::discrete(L)) - f_ref);
          r.dU = diff_norm(g.dU, g_ref.dU);
          r.dW = diff_norm(g.dW, g_ref.dW);
          r.dv = (g.dv - g_ref.dv).norm();
          r.grad_diff = std::sqrt(r.dU * r.dU + r.dW * r.dW + r.dv * r.dv);
        }
      },
      opts.threads);

  DepthSweepResult res;
  res.rows = rows;
  std::vector<double> xs(opts.depths.begin(), opts.depths.end());
  std::vector<double> os, gs, ps;
  for (std::size_t s = 0; s < S; ++s) {
    std::vector<double> out, grad;
    for (std::size_t k = 0; k < D; ++k) {
      out.push_back(rows[s * D + k].output_diff);
      grad.push_back(rows[s * D + k].grad_diff);
    }
    DepthSweepSeed ps_row;
    ps_row.seed = opts.seeds[s];
    ps_row.output_slope = loglog_slope(xs, out);
    ps_row.grad_slope = loglog_slope(xs, grad);
    ps_row.plateau_ratio = grad[to] / grad[from];
    res.per_seed.push_back(ps_row);
    os.push_back(ps_row.output_slope);
    gs.push_back(ps_row.grad_slope);
    ps.push_back(ps_row.plateau_ratio);
  }
  res.median_output_slope = median(os);
  res.median_grad_slope = median(gs);
  res.median_plateau_ratio = median(ps);
  res.min_grad_slope = *std::min_element(gs.begin(), gs.end());
  res.max_grad_slope = *std::max_element(gs.begin(), gs.end());
  res.min_output_slope = *std::min_element(os.begin(), os.end());
  res.max_output_slope = *std::max_element(os.begin(), os.end());
  return res;
}

SolverOrderResult solver_order_study(const ModelConfig& cfg, const Vector& x, const SolverOrderOptions& opts) {
  const Params p = init_params(cfg);
  const Vector ref = solve_forward(cfg, p, x, tight_adaptive(opts.reference_tol)).terminal();
  SolverOrderResult res;
  auto sweep = [&](const char* name, const std::vector<int>& depths, auto make) {
    std::vector<double> xs, ys;
    for (int L : depths) {
      const double e = (solve_forward(cfg, p, x, make(L)).terminal() - ref).norm();
      res.rows.push_back({name, L, e});
      xs.push_back(L);
      ys.push_back(e);
    }
    return loglog_slope(xs, ys);
  };
  res.euler_slope = sweep("euler", opts.euler_depths, [](int L) { return SolverSpec::euler(L); });
  res.rk4_slope = sweep("rk4", opts.rk4_depths, [](int L) { return SolverSpec::rk4(L); });
  return res;
}

WidthStudyResult ntk_width_study(const ModelConfig& cfg, const WidthStudyOptions& opts) {
  require(opts.widths.size() >= 2 && !opts.seeds.empty(), ErrorCode::config, "width study needs >= 2 widths and seeds");
  const Dataset ds = synth_sphere(opts.points, cfg.input_dim, opts.data_seed, LabelRule::random_pm1);
  GramRequest rq;
  rq.L = opts.L;
  rq.kernel = opts.kernel;
  rq.threads = opts.threads;
  WidthStudyResult res;
  res.limit_gram = gram(cfg, ds.X, GramKind::ntk_limit, rq).values;
  const int P = opts.points;
  for (int n : opts.widths) {
    std::vector<double> err(opts.seeds.size());
    parallel_for(
        opts.seeds.size(),
        [&](std::size_t s) {
          ModelConfig c = cfg;
          c.width = n;
          c.seed = opts.seeds[s];
          const Params p = init_params(c);
          DiscreteBatch b = discrete_forward_batch(c, p, ds.X, opts.L);
          discrete_backward_batch(c, p, b);
          const Eigen::MatrixXd G = discrete_ntk_gram(c, b);
          double a = 0.0;
          int m = 0;
          for (int i = 0; i < P; ++i)
            for (int j = i; j < P; ++j, ++m) a += std::fabs(G(i, j) - res.limit_gram(i, j));
          err[s] = a / m;
        },
        opts.threads);
    for (std::size_t s = 0; s < opts.seeds.size(); ++s) res.rows.push_back({n, opts.seeds[s], err[s]});
    res.medians.push_back(median(err));
  }
  std::vector<double> xs(opts.widths.begin(), opts.widths.end());
  res.slope = loglog_slope(xs, res.medians);
  res.strictly_decreasing = true;
  for (std::size_t i = 1; i < res.medians.size(); ++i)
    if (!(res.medians[i] < res.medians[i - 1])) res.strictly_decreasing = false;
  return res;
}

SpdStudyResult spd_study(const ModelConfig& cfg, int N, int L, std::uint64_t data_seed, const KernelOptions& kernel,
                         int threads) {
  require(N >= 2, ErrorCode::config, "spd study needs N >= 2");
  const Dataset ds = synth_sphere(N, cfg.input_dim, data_seed, LabelRule::random_pm1);
  GramRequest rq;
  rq.L = L;
  rq.kernel = kernel;
  rq.threads = threads;
  SpdStudyResult r;
  r.N = N;
  const GramMatrix g = gram(cfg, ds.X, GramKind::ntk_limit, rq);
  r.spectrum = spectrum(g);
  r.min_eig_distinct = r.spectrum[0];
  Matrix dup = ds.X;
  dup.row(N - 1) = dup.row(0);
  r.min_eig_duplicate = min_eig(gram(cfg, dup, GramKind::ntk_limit, rq));
  return r;
}

TrainingStudyResult training_study(const ModelConfig& cfg, const TrainingStudyOptions& opts) {
  const Dataset ds = synth_sphere(opts.N, cfg.input_dim, opts.data_seed, opts.labels);
  TrainingStudyResult r;
  GramRequest rq;
  rq.L = opts.lambda0_L;
  rq.kernel = opts.kernel;
  rq.threads = opts.train.threads;
  r.lambda0 = min_eig(gram(cfg, ds.X, GramKind::ntk_limit, rq));
  r.lambda0_source = "ntk-limit";
  r.history = train(cfg, ds, opts.train);
  r.eta = r.history.eta;
  if (!(r.lambda0 > 0.0)) {
    // Fall back to the empirical Gram at the initial parameters.
    DiscreteBatch b = discrete_forward_batch(cfg, r.history.initial, ds.X, opts.train.pipeline.L);
    discrete_backward_batch(cfg, r.history.initial, b);
    GramMatrix g;
    g.values = discrete_ntk_gram(cfg, b);
    r.lambda0 = min_eig(g);
    r.lambda0_source = "empirical-init";
  }
  const auto& rec = r.history.records;
  r.loss_nonincreasing = true;
  for (std::size_t i = 1; i < rec.size(); ++i)
    if (rec[i].loss > rec[i - 1].loss) r.loss_nonincreasing = false;
  r.loss_ratio = rec.front().loss > 0.0 ? rec.back().loss / rec.front().loss : 0.0;
  r.min_lambda = std::numeric_limits<double>::infinity();
  for (const auto& x : rec)
    if (!std::isnan(x.lambda_min)) r.min_lambda = std::min(r.min_lambda, x.lambda_min);
  r.lambda_positive = std::isfinite(r.min_lambda) && r.min_lambda > 0.0;
  if (r.lambda0 > 0.0 && r.eta * r.lambda0 < 16.0) r.audit = convergence_audit(r.history, r.lambda0, r.eta);
  const double bound = opts.distance_bound > 0.0 ? opts.distance_bound : 10.0 * std::sqrt(static_cast<double>(opts.N));
  r.distance = distance_audit(r.history, bound);
  return r;
}

RankStudyResult spectral_rank_study(const ModelConfig& cfg, int N, int L, std::uint64_t data_seed) {
  const Dataset ds = synth_sphere(N, cfg.input_dim, data_seed, LabelRule::random_pm1);
  const Params p = init_params(cfg);
  DiscreteBatch b = discrete_forward_batch(cfg, p, ds.X, L);
  discrete_backward_batch(cfg, p, b);
  RankStudyResult r;
  r.width = cfg.width;
  r.N = N;
  GramMatrix g;
  g.values = discrete_feature_gram(cfg, b);
  r.min_eig_features = min_eig(g);
  g.values = discrete_ntk_gram(cfg, b);
  r.min_eig_ntk = min_eig(g);
  return r;
}

HorizonStudyResult horizon_study(const ModelConfig& cfg, const HorizonStudyOptions& opts) {
  require(opts.seeds.size() >= 2, ErrorCode::config, "horizon study needs >= 2 seeds");
  require(opts.long_horizon > 0.0 && opts.steps_per_unit >= 1, ErrorCode::config, "invalid horizon study options");
  const Vector x = sphere_point(cfg.input_dim, opts.input_seed);
  struct Mode {
    const char* name;
    double T;
    double sigma_w;
  };
  const Mode modes[3] = {{"baseline", 1.0, cfg.sigma_w},
                         {"scaled", opts.long_horizon, cfg.sigma_w / opts.long_horizon},
                         {"unscaled", opts.long_horizon, cfg.sigma_w}};
  const std::size_t S = opts.seeds.size();
  HorizonStudyResult res;
  res.rows.resize(3 * S);
  parallel_for(
      S,
      [&](std::size_t s) {
        for (int m = 0; m < 3; ++m) {
          ModelConfig c = cfg;
          c.horizon = modes[m].T;
          c.sigma_w = modes[m].sigma_w;
          c.seed = opts.seeds[s];
          const Params p = init_params(c);
          const int steps = static_cast<int>(std::ceil(opts.steps_per_unit * modes[m].T));
          const double f = model_output(c, p, x, Pipeline::adjoint(SolverSpec::rk4(steps)));
          res.rows[m * S + s] = {c.seed, modes[m].name, c.horizon, c.sigma_w, f};
        }
      },
      opts.threads);
  double stds[3];
  for (int m = 0; m < 3; ++m) {
    std::vector<double> v;
    for (std::size_t s = 0; s < S; ++s) v.push_back(res.rows[m * S + s].output);
    stds[m] = sample_std(v);
  }
  res.std_baseline = stds[0];
  res.std_scaled = stds[1];
  res.std_unscaled = stds[2];
  res.ratio_scaled = stds[1] / stds[0];
  res.ratio_unscaled = stds[2] / stds[0];
  return res;
}

GaussianityResult gaussianity_study(const ModelConfig& cfg, const Vector& x, const std::vector<std::uint64_t>& seeds,
                                    int L, int threads) {
  GaussianityResult r;
  r.outputs.resize(seeds.size());
  parallel_for(
      seeds.size(),
      [&](std::size_t s) {
        ModelConfig c = cfg;
        c.seed = seeds[s];
        const Params p = init_params(c);
        r.outputs[s] = model_output(c, p, x, Pipeline::discrete(L));
      },
      threads);
  r.ks = ks_normal_test(r.outputs);
  r.limit_variance = nngp_tables(cfg, x, x, L).output_nngp;
  r.variance_ratio = r.ks.std * r.ks.std / r.limit_variance;
  return r;
}

CovarianceStudyResult covariance_study(const ModelConfig& cfg, int N, std::uint64_t data_seed,
                                       const std::vector<std::uint64_t>& seeds, int L, int threads) {
  const Dataset ds = synth_sphere(N, cfg.input_dim, data_seed, LabelRule::random_pm1);
  CovarianceStudyResult r;
  r.input_cov = Eigen::MatrixXd(ds.X) * Eigen::MatrixXd(ds.X).transpose();
  GramRequest rq;
  rq.L = L;
  rq.seeds = seeds;
  rq.pipeline = Pipeline::discrete(L);
  rq.threads = threads;
  r.output_cov = gram(cfg, ds.X, GramKind::empirical_nngp, rq).values;
  r.limit_cov = gram(cfg, ds.X, GramKind::nngp_limit, rq).values;
  std::vector<double> a, b;
  for (int i = 0; i < N; ++i)
    for (int j = i + 1; j < N; ++j) {
      a.push_back(r.input_cov(i, j));
      b.push_back(r.output_cov(i, j));
    }
  const double ma = mean(a), mb = mean(b);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    sab += (a[k] - ma) * (b[k] - mb);
    saa += (a[k] - ma) * (a[k] - ma);
    sbb += (b[k] - mb) * (b[k] - mb);
  }
  r.structure_corr = sab / std::sqrt(saa * sbb);
  r.limit_rel_error = (r.output_cov - r.limit_cov).norm() / r.limit_cov.norm();
  r.magnitude_ratio = r.output_cov.cwiseAbs().maxCoeff() / r.input_cov.cwiseAbs().maxCoeff();
  r.sstar = s_star_checks(cfg, ds.X, L);
  return r;
}

PolynomialStudyResult polynomial_study(const ModelConfig& cfg, int N, int L, std::uint64_t data_seed,
                                       const KernelOptions& kernel) {
  const Dataset ds = synth_sphere(N, cfg.input_dim, data_seed, LabelRule::random_pm1);
  GramRequest rq;
  rq.L = L;
  rq.kernel = kernel;
  PolynomialStudyResult r;
  r.min_eig_ntk = min_eig(gram(cfg, ds.X, GramKind::ntk_limit, rq));
  r.min_eig_nngp = min_eig(gram(cfg, ds.X, GramKind::nngp_limit, rq));
  const Vector x0 = ds.X.row(0).transpose();
  r.input_std = std::sqrt(nngp_tables(cfg, x0, x0, L, kernel).var_a[L]);
  r.witness = nonpoly_witness(cfg.activation, r.input_std, 64, 1e-12);
  return r;
}

std::vector<SolverGradRow> solver_gradient_study(const ModelConfig& cfg, const Vector& x,
                                                 const std::vector<SolverSpec>& solvers, double reference_tol) {
  const Params p = init_params(cfg);
  const SolverSpec ref = tight_adaptive(reference_tol);
  const Grads g_ref = grad_adjoint(cfg, p, x, ref);
  const double f_ref = model_output(cfg, p, x, Pipeline::adjoint(ref));
  std::vector<SolverGradRow> rows;
  for (const SolverSpec& s : solvers) {
    SolverGradRow r;
    r.solver = std::string(solver_method_name(s.method));
    if (s.method == SolverMethod::adaptive) {
      r.solver += "(rtol=" + std::to_string(s.rel_tol) + ")";
    } else {
      r.solver += "(" + std::to_string(s.steps) + ")";
    }
    r.output_diff = std::fabs(model_output(cfg, p, x, Pipeline::adjoint(s)) - f_ref);
    r.grad_rel_diff = compare_grads(grad_adjoint(cfg, p, x, s), g_ref).rel_diff;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace odentk

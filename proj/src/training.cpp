#include "odentk/training.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <json.hpp>
#include <ostream>

#include "odentk/error.hpp"
#include "odentk/kernels.hpp"
#include "odentk/parallel.hpp"

namespace odentk {

namespace {

struct Evaluation {
  Vector outputs;
  Grads weighted;  // sum_i r_i grad f(x_i)
  Eigen::MatrixXd gram;
};

Evaluation evaluate(const ModelConfig& cfg, const Params& p, const Dataset& ds, const Pipeline& pipe, bool need_grad,
                    bool need_gram, DiagnosticGram kind, int threads) {
  Evaluation ev;
  const Eigen::Index N = ds.size();
  if (pipe.kind == Pipeline::Kind::discrete) {
    DiscreteBatch b = discrete_forward_batch(cfg, p, ds.X, pipe.L);
    ev.outputs = b.f;
    require(ev.outputs.allFinite(), ErrorCode::divergence, "non-finite model output");
    if (need_grad || (need_gram && kind == DiagnosticGram::ntk)) discrete_backward_batch(cfg, p, b);
    if (need_grad) ev.weighted = weighted_grads(cfg, b, ev.outputs - ds.y);
    if (need_gram) ev.gram = kind == DiagnosticGram::ntk ? discrete_ntk_gram(cfg, b) : discrete_feature_gram(cfg, b);
    return ev;
  }
  std::vector<Grads> grads(N);
  ev.outputs.resize(N);
  parallel_for(
      N,
      [&](std::size_t i) {
        const Vector x = ds.X.row(i).transpose();
        const Trajectory fwd = solve_forward(cfg, p, x, pipe.solver);
        ev.outputs[i] = readout(cfg, p, fwd.terminal());
        if (need_grad || need_gram) grads[i] = grad_adjoint(cfg, p, x, pipe.solver);
      },
      threads);
  require(ev.outputs.allFinite(), ErrorCode::divergence, "non-finite model output");
  if (need_grad) {
    ev.weighted = Grads::zeros(cfg);
    for (Eigen::Index i = 0; i < N; ++i) {
      Grads g = grads[i];
      g *= ev.outputs[i] - ds.y[i];
      ev.weighted += g;
    }
  }
  if (need_gram) {
    ev.gram.resize(N, N);
    for (Eigen::Index i = 0; i < N; ++i)
      for (Eigen::Index j = i; j < N; ++j)
        ev.gram(i, j) = ev.gram(j, i) =
            kind == DiagnosticGram::ntk ? dot(grads[i], grads[j]) : grads[i].dv.dot(grads[j].dv);
  }
  return ev;
}

double smallest_eigenvalue(const Eigen::MatrixXd& g) {
  GramMatrix gm;
  gm.values = g;
  return min_eig(gm);
}

void check_training_data(const ModelConfig& cfg, const Dataset& ds) {
  require(ds.size() >= 1, ErrorCode::input, "dataset is empty");
  require(ds.X.cols() == cfg.input_dim, ErrorCode::shape, "dataset dimension does not match input_dim");
  require(ds.y.size() == ds.size(), ErrorCode::shape, "dataset labels do not match rows");
}

}  // namespace

double lr_bound(const Dataset& ds) {
  require(ds.size() >= 1 && ds.X.cols() >= 1, ErrorCode::input, "lr_bound needs a nonempty dataset");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(ds.X);
  const double smax = svd.singularValues()[0];
  require(smax > 0.0, ErrorCode::input, "dataset matrix is zero");
  return 1.0 / (smax * smax);
}

StepResult gd_step(const ModelConfig& cfg, const Params& p, const Dataset& ds, double eta, const Pipeline& pipe,
                   int threads) {
  require(std::isfinite(eta) && eta >= 0.0, ErrorCode::config, "eta must be nonnegative");
  check_training_data(cfg, ds);
  const Evaluation ev = evaluate(cfg, p, ds, pipe, true, false, DiagnosticGram::ntk, threads);
  StepResult r;
  const Vector res = ev.outputs - ds.y;
  r.metrics.outputs = ev.outputs;
  r.metrics.residual_norm = res.norm();
  r.metrics.loss = 0.5 * res.squaredNorm();
  r.metrics.grad_norm = ev.weighted.norm();
  r.metrics.update_norm = eta * r.metrics.grad_norm;
  r.params = eta == 0.0 ? p : apply_update(p, ev.weighted, eta);
  return r;
}

TrainHistory train(const ModelConfig& cfg, const Dataset& ds, const TrainOptions& opts) {
  cfg.validate();
  check_training_data(cfg, ds);
  require(opts.steps >= 0, ErrorCode::config, "steps must be >= 0");
  require(opts.eval_every >= 1, ErrorCode::config, "eval_every must be >= 1");
  const double bound = lr_bound(ds);
  const double eta = opts.eta > 0.0 ? opts.eta : 0.5 * bound;
  if (opts.lr_guard) require(eta <= bound * (1.0 + 1e-12), ErrorCode::config, "eta exceeds the lr_bound guard");

  TrainHistory h;
  h.eta = eta;
  h.initial = init_params(cfg);
  Params p = h.initial;
  const auto start = std::chrono::steady_clock::now();
  for (long k = 0; k <= opts.steps; ++k) {
    const bool last = k == opts.steps;
    const bool diag = opts.diagnostics && (k % opts.eval_every == 0 || last);
    Evaluation ev;
    try {
      ev = evaluate(cfg, p, ds, opts.pipeline, !last, diag, opts.gram, opts.threads);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::domain || e.code() == ErrorCode::divergence || e.code() == ErrorCode::numeric)
        throw DivergenceError(std::string("training diverged: ") + e.what(), k);
      throw;
    }
    const Vector res = ev.outputs - ds.y;
    TrainRecord rec;
    rec.step = k;
    rec.residual = res.norm();
    rec.loss = 0.5 * res.squaredNorm();
    if (!std::isfinite(rec.loss)) throw DivergenceError("loss is not finite", k);
    rec.lambda_min = diag ? smallest_eigenvalue(ev.gram) : std::numeric_limits<double>::quiet_NaN();
    rec.param_distance = opts.diagnostics ? param_distance(p, h.initial) : 0.0;
    if (!last) {
      rec.update_norm = eta * ev.weighted.norm();
      p = apply_update(p, ev.weighted, eta);
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    h.records.push_back(rec);
  }
  h.final_params = std::move(p);
  return h;
}

ConvergenceReport convergence_audit(const TrainHistory& h, double lambda0, double eta) {
  require(lambda0 > 0.0 && eta > 0.0, ErrorCode::config, "convergence_audit needs lambda0 > 0 and eta > 0");
  require(eta * lambda0 < 16.0, ErrorCode::config, "convergence_audit needs eta * lambda0 < 16");
  ConvergenceReport r;
  r.rate16 = 1.0 - eta * lambda0 / 16.0;
  r.rate8 = 1.0 - eta * lambda0 / 8.0;
  r.passes = true;
  r.passes_rate8 = true;
  if (h.records.empty()) return r;
  const double l0 = h.records.front().loss;
  double b16 = l0, b8 = l0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  long m = 0;
  for (std::size_t i = 0; i < h.records.size(); ++i) {
    const TrainRecord& rec = h.records[i];
    if (i > 0) {
      b16 *= r.rate16;
      b8 *= std::max(r.rate8, 0.0);
    }
    if (r.passes && rec.loss > b16 * (1.0 + 1e-12)) {
      r.passes = false;
      r.first_violation = rec.step;
    }
    if (r.passes_rate8 && rec.loss > b8 * (1.0 + 1e-12)) {
      r.passes_rate8 = false;
      r.first_violation_rate8 = rec.step;
    }
    if (rec.loss > 0.0) {
      const double x = static_cast<double>(rec.step), y = std::log(rec.loss);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++m;
    }
  }
  if (m >= 2) {
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    r.fitted_rate = std::exp(slope);
  }
  return r;
}

DistanceReport distance_audit(const TrainHistory& h, double bound) {
  DistanceReport r;
  r.nondecreasing = true;
  r.triangle_ok = true;
  double travelled = 0.0;
  for (std::size_t i = 0; i < h.records.size(); ++i) {
    const TrainRecord& rec = h.records[i];
    r.max_distance = std::max(r.max_distance, rec.param_distance);
    if (i > 0 && rec.param_distance < h.records[i - 1].param_distance) {
      ++r.decreases;
      r.nondecreasing = false;
    }
    if (rec.param_distance > travelled * (1.0 + 1e-12) + 1e-300) r.triangle_ok = false;
    travelled += rec.update_norm;
  }
  r.within_bound = r.max_distance <= bound;
  return r;
}

void write_history_csv(const TrainHistory& h, std::ostream& out, bool include_wall_time) {
  out << "step,loss,residual,lambda_min,param_distance,wall_ms\n";
  out.precision(17);
  for (const TrainRecord& r : h.records) {
    out << r.step << ',' << r.loss << ',' << r.residual << ',';
    if (std::isnan(r.lambda_min)) {
      out << "nan";
    } else {
      out << r.lambda_min;
    }
    out << ',' << r.param_distance << ',' << (include_wall_time ? r.wall_ms : 0.0) << '\n';
  }
}

std::string history_summary_json(const TrainHistory& h) {
  nlohmann::json j;
  j["eta"] = h.eta;
  j["records"] = h.records.size();
  if (!h.records.empty()) {
    j["initial_loss"] = h.records.front().loss;
    j["final_loss"] = h.records.back().loss;
    double lmin = std::numeric_limits<double>::infinity();
    double dmax = 0.0;
    for (const auto& r : h.records) {
      if (!std::isnan(r.lambda_min)) lmin = std::min(lmin, r.lambda_min);
      dmax = std::max(dmax, r.param_distance);
    }
    if (std::isfinite(lmin)) j["min_lambda_min"] = lmin;
    j["max_param_distance"] = dmax;
  }
  return j.dump(2);
}

}  // namespace odentk

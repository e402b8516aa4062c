#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "odentk/data_io.hpp"
#include "odentk/gradients.hpp"
#include "odentk/model.hpp"

namespace odentk {

// 1 / s_max(X)^2.
double lr_bound(const Dataset& ds);

struct StepMetrics {
  double loss = 0.0;           // at the parameters before the step
  double residual_norm = 0.0;  // |u - y|
  double grad_norm = 0.0;      // |sum_i r_i grad f(x_i)|
  double update_norm = 0.0;    // eta * grad_norm
  Vector outputs;
};

struct StepResult {
  Params params;
  StepMetrics metrics;
};

// p' = p - eta sum_i (f(x_i) - y_i) grad f(x_i).
StepResult gd_step(const ModelConfig& cfg, const Params& p, const Dataset& ds, double eta, const Pipeline& pipe,
                   int threads = 0);

// Which empirical Gram the spectral diagnostic tracks.
//   ntk:      <grad f(x_i), grad f(x_j)>
//   features: sigma_v^2/n phi(h_T(x_i)) . phi(h_T(x_j)), the readout (NNGP-style) block
enum class DiagnosticGram { ntk, features };

struct TrainOptions {
  long steps = 100;
  double eta = 0.0;  // 0 picks lr_bound / 2
  Pipeline pipeline = Pipeline::discrete(16);
  int eval_every = 5;  // lambda_min cadence; the last record is always evaluated
  bool diagnostics = true;
  DiagnosticGram gram = DiagnosticGram::ntk;
  bool lr_guard = true;  // config error when eta > lr_bound
  int threads = 0;
};

struct TrainRecord {
  long step = 0;
  double loss = 0.0;
  double residual = 0.0;
  double lambda_min = 0.0;  // NaN when not evaluated at this step
  double param_distance = 0.0;
  double wall_ms = 0.0;
  double update_norm = 0.0;  // |theta^{k+1} - theta^k|, 0 on the last record
};

struct TrainHistory {
  std::vector<TrainRecord> records;  // steps + 1 entries, record k at theta^k
  double eta = 0.0;
  Params initial;
  Params final_params;
};

// NaN/Inf in the loss raises DivergenceError with the step index.
TrainHistory train(const ModelConfig& cfg, const Dataset& ds, const TrainOptions& opts);

struct ConvergenceReport {
  double rate16 = 0.0;  // 1 - eta lambda0 / 16
  double rate8 = 0.0;   // 1 - eta lambda0 / 8
  bool passes = false;  // loss_k <= rate16^k loss_0 for all k
  long first_violation = -1;
  bool passes_rate8 = false;
  long first_violation_rate8 = -1;
  double fitted_rate = 0.0;  // exp of the least-squares slope of log loss
};

// Relative slack 1e-12 on each comparison.
ConvergenceReport convergence_audit(const TrainHistory& h, double lambda0, double eta);

struct DistanceReport {
  double max_distance = 0.0;
  bool within_bound = false;
  bool nondecreasing = false;
  long decreases = 0;          // number of k with distance_{k+1} < distance_k
  bool triangle_ok = false;    // distance_k <= sum_{i<k} update_norm_i
};

DistanceReport distance_audit(const TrainHistory& h, double bound);

// Columns: step, loss, residual, lambda_min, param_distance, wall_ms.
void write_history_csv(const TrainHistory& h, std::ostream& out, bool include_wall_time = true);
std::string history_summary_json(const TrainHistory& h);

}  // namespace odentk

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "odentk/gradients.hpp"
#include "odentk/kernels.hpp"
#include "odentk/stats.hpp"
#include "odentk/training.hpp"

namespace odentk {

// Measurement programs behind the named experiments. Each one is a pure
// function of its inputs and seeds; per-seed work runs on `threads` workers
// and is merged in seed order.

std::vector<std::uint64_t> seed_range(std::uint64_t first, int count);
// First row of synth_sphere(1, d, seed).
Vector sphere_point(int d, std::uint64_t seed);

// ---- depth sweeps: discrete(L) against the continuous reference ----

struct DepthSweepOptions {
  std::vector<int> depths{64, 128, 256, 512, 1024};
  std::vector<std::uint64_t> seeds = seed_range(0, 5);
  std::uint64_t input_seed = 0;
  // Reference gradient: adaptive adjoint at rel reference_tol, or grad_discrete(reference_L).
  bool discrete_reference = false;
  double reference_tol = 1e-10;
  int reference_L = 4096;
  // Plateau ratio grad_diff(plateau_to) / grad_diff(plateau_from).
  int plateau_from = 128;
  int plateau_to = 1024;
  int threads = 0;
};

struct DepthSweepRow {
  std::uint64_t seed = 0;
  int L = 0;
  double output_diff = 0.0;
  double grad_diff = 0.0;
  double dU = 0.0, dW = 0.0, dv = 0.0;
};

struct DepthSweepSeed {
  std::uint64_t seed = 0;
  double output_slope = 0.0;
  double grad_slope = 0.0;
  double plateau_ratio = 0.0;
};

struct DepthSweepResult {
  std::vector<DepthSweepRow> rows;
  std::vector<DepthSweepSeed> per_seed;
  double median_output_slope = 0.0;
  double median_grad_slope = 0.0;
  double median_plateau_ratio = 0.0;
  double min_grad_slope = 0.0, max_grad_slope = 0.0;
  double min_output_slope = 0.0, max_output_slope = 0.0;
};

DepthSweepResult depth_sweep(const ModelConfig& cfg, const DepthSweepOptions& opts);

// ---- solver orders: terminal-state error against a tight adaptive solve ----

struct SolverOrderOptions {
  std::vector<int> euler_depths{64, 128, 256, 512, 1024};
  std::vector<int> rk4_depths{4, 8, 16, 32};
  double reference_tol = 1e-10;
};

struct SolverOrderRow {
  std::string method;
  int L = 0;
  double error = 0.0;
};

struct SolverOrderResult {
  std::vector<SolverOrderRow> rows;
  double euler_slope = 0.0;
  double rk4_slope = 0.0;
};

SolverOrderResult solver_order_study(const ModelConfig& cfg, const Vector& x, const SolverOrderOptions& opts = {});

// ---- width convergence of the empirical NTK towards the depth-L limit ----

struct WidthStudyOptions {
  std::vector<int> widths{128, 512, 2048};
  std::vector<std::uint64_t> seeds = seed_range(1000, 20);
  int L = 256;
  int points = 4;
  std::uint64_t data_seed = 11;
  KernelOptions kernel;
  int threads = 0;
};

struct WidthStudyRow {
  int width = 0;
  std::uint64_t seed = 0;
  double error = 0.0;  // mean |K_emp - K_inf| over the upper triangle of the Gram
};

struct WidthStudyResult {
  std::vector<WidthStudyRow> rows;
  std::vector<double> medians;  // one per width
  double slope = 0.0;           // least squares of log median vs log width
  bool strictly_decreasing = false;
  Eigen::MatrixXd limit_gram;
};

WidthStudyResult ntk_width_study(const ModelConfig& cfg, const WidthStudyOptions& opts);

// ---- SPD of the limit NTK on distinct and duplicated points ----

struct SpdStudyResult {
  int N = 0;
  double min_eig_distinct = 0.0;
  double min_eig_duplicate = 0.0;
  Eigen::VectorXd spectrum;
};

SpdStudyResult spd_study(const ModelConfig& cfg, int N, int L, std::uint64_t data_seed,
                         const KernelOptions& kernel = {}, int threads = 0);

// ---- training run with spectral and distance audits ----

struct TrainingStudyOptions {
  int N = 16;
  std::uint64_t data_seed = 21;
  LabelRule labels = LabelRule::random_pm1;
  TrainOptions train;
  int lambda0_L = 256;  // lambda0 = min_eig of the ntk-limit Gram at this depth
  KernelOptions kernel;
  // distance_audit bound; <= 0 uses the default 10 * sqrt(N).
  double distance_bound = 0.0;
};

struct TrainingStudyResult {
  TrainHistory history;
  double eta = 0.0;
  double lambda0 = 0.0;
  std::string lambda0_source;  // "ntk-limit" or "empirical-init"
  bool loss_nonincreasing = false;
  double loss_ratio = 0.0;     // final / initial
  double min_lambda = 0.0;     // over the recorded steps
  bool lambda_positive = false;
  ConvergenceReport audit;
  DistanceReport distance;
};

TrainingStudyResult training_study(const ModelConfig& cfg, const TrainingStudyOptions& opts);

// ---- rank deficiency of the readout-feature Gram when width < N ----

struct RankStudyResult {
  int width = 0;
  int N = 0;
  double min_eig_features = 0.0;
  double min_eig_ntk = 0.0;
};

RankStudyResult spectral_rank_study(const ModelConfig& cfg, int N, int L, std::uint64_t data_seed);

// ---- horizon scaling ----

struct HorizonStudyOptions {
  std::vector<std::uint64_t> seeds = seed_range(100, 20);
  double long_horizon = 10.0;
  int steps_per_unit = 64;  // rk4 steps per unit of time
  std::uint64_t input_seed = 3;
  int threads = 0;
};

struct HorizonStudyRow {
  std::uint64_t seed = 0;
  std::string mode;  // baseline | scaled | unscaled
  double horizon = 0.0;
  double sigma_w = 0.0;
  double output = 0.0;
};

struct HorizonStudyResult {
  std::vector<HorizonStudyRow> rows;
  double std_baseline = 0.0, std_scaled = 0.0, std_unscaled = 0.0;
  double ratio_scaled = 0.0, ratio_unscaled = 0.0;
};

// Baseline uses cfg.horizon = 1, scaled sigma_w = cfg.sigma_w / T, unscaled keeps cfg.sigma_w.
HorizonStudyResult horizon_study(const ModelConfig& cfg, const HorizonStudyOptions& opts);

// ---- Gaussianity of f at initialization ----

struct GaussianityResult {
  std::vector<double> outputs;
  KsResult ks;
  double limit_variance = 0.0;  // output NNGP at the same depth
  double variance_ratio = 0.0;  // sample variance / limit
};

GaussianityResult gaussianity_study(const ModelConfig& cfg, const Vector& x, const std::vector<std::uint64_t>& seeds,
                                    int L, int threads = 0);

// ---- covariance structure of f over a fixed input set ----

struct CovarianceStudyResult {
  Eigen::MatrixXd input_cov;   // X X^T
  Eigen::MatrixXd output_cov;  // sample covariance over seeds
  Eigen::MatrixXd limit_cov;   // nngp-limit Gram
  double structure_corr = 0.0;    // Pearson correlation of input and output off-diagonals
  double limit_rel_error = 0.0;   // |output - limit|_F / |limit|_F
  double magnitude_ratio = 0.0;   // max |output_cov| / max |input_cov|
  SStarReport sstar;
};

CovarianceStudyResult covariance_study(const ModelConfig& cfg, int N, std::uint64_t data_seed,
                                       const std::vector<std::uint64_t>& seeds, int L, int threads = 0);

// ---- polynomial activation versus the nonpolynomial witness ----

struct PolynomialStudyResult {
  double min_eig_ntk = 0.0;
  double min_eig_nngp = 0.0;
  NonpolyReport witness;
  double input_std = 0.0;
};

PolynomialStudyResult polynomial_study(const ModelConfig& cfg, int N, int L, std::uint64_t data_seed,
                                       const KernelOptions& kernel = {});

// ---- solver sensitivity of adjoint gradients ----

struct SolverGradRow {
  std::string solver;
  double output_diff = 0.0;
  double grad_rel_diff = 0.0;
};

std::vector<SolverGradRow> solver_gradient_study(const ModelConfig& cfg, const Vector& x,
                                                 const std::vector<SolverSpec>& solvers, double reference_tol = 1e-10);

}  // namespace odentk

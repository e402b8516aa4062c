// Acceptance run: thirteen criteria at desk scale, one pass/fail line each.
// Exit status is 0 only when every criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "odentk/data_io.hpp"
#include "odentk/kernels.hpp"
#include "odentk/parallel.hpp"
#include "odentk/studies.hpp"
#include "oracles.hpp"

using namespace odentk;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

bool in(double x, double lo, double hi) { return x >= lo && x <= hi; }

int g_failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool on_time = s < budget_s;
  const bool pass = o.pass && on_time;
  if (!pass) ++g_failures;
  std::printf("[%s] %2d %-30s %s (%.1f s, budget %.0f s)%s\n", pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), s,
              budget_s, on_time ? "" : " over budget");
  std::fflush(stdout);
}

ModelConfig softplus(int width, int d = 8) {
  ModelConfig c;
  c.width = width;
  c.input_dim = d;
  return c;
}

// Training setup shared by criteria 9 and 10: d = 64 with sigma_u = sqrt(d)
// keeps eta * lambda0 = O(0.1) so 300 steps can reach the 1e-3 target.
TrainingStudyOptions training_options(long steps) {
  TrainingStudyOptions o;
  o.N = 16;
  o.data_seed = 21;
  o.train.steps = steps;
  o.train.pipeline = Pipeline::discrete(16);
  o.train.eval_every = 5;
  o.lambda0_L = 256;
  return o;
}

ModelConfig training_model(int width) {
  ModelConfig c = softplus(width, 64);
  c.sigma_u = 8.0;
  return c;
}

// Mutations of a valid IDX pair: header bytes, lengths, magic and payload.
std::vector<std::uint8_t> mutate(std::vector<std::uint8_t> b, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> kind(0, 5), byte(0, 255);
  if (b.empty()) return b;
  std::uniform_int_distribution<std::size_t> pos(0, b.size() - 1);
  std::uniform_int_distribution<std::size_t> header(0, std::min<std::size_t>(15, b.size() - 1));
  switch (kind(rng)) {
    case 0:
      b[header(rng)] = static_cast<std::uint8_t>(byte(rng));
      break;
    case 1:
      b.resize(pos(rng));
      break;
    case 2:
      b.insert(b.end(), static_cast<std::size_t>(byte(rng)), static_cast<std::uint8_t>(byte(rng)));
      break;
    case 3:
      for (int i = 0; i < 8; ++i) b[pos(rng)] ^= static_cast<std::uint8_t>(1 << (byte(rng) % 8));
      break;
    case 4:
      // Huge dimension in one of the count/rows/cols fields.
      if (b.size() >= 8) {
        const std::size_t at = 4 * (1 + byte(rng) % 3);
        if (at + 4 <= b.size()) b[at] = b[at + 1] = 0xff;
      }
      break;
    default:
      b[2] = static_cast<std::uint8_t>(byte(rng));
      b[3] = static_cast<std::uint8_t>(byte(rng) % 6);
      break;
  }
  return b;
}

}  // namespace

int main() {
  set_default_threads(static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));

  criterion(1, "gradient exactness", 10, [] {
    const ModelConfig c = softplus(32);
    const Params p = init_params(c);
    const Vector x = sphere_point(c.input_dim, 1);
    const GradReport r = compare_grads(grad_discrete(c, p, x, 32), grad_fd(c, p, x, 1e-5, FdTarget::discrete_map(32)));
    double worst = 0.0;
    for (const auto& [name, b] : r.per_block) worst = std::max(worst, b.rel);
    return Outcome{worst <= 1e-6, fmt("max block rel error %.3g (<= 1e-6)", worst)};
  });

  criterion(2, "pipeline alignment rate", 120, [] {
    DepthSweepOptions o;
    const DepthSweepResult r = depth_sweep(softplus(128), o);
    return Outcome{r.min_grad_slope >= -1.2 && r.max_grad_slope <= -0.8,
                   fmt("grad slopes over 5 seeds in [%.4f, ", r.min_grad_slope) +
                       fmt("%.4f] (window [-1.2, -0.8])", r.max_grad_slope)};
  });

  criterion(3, "relu gradient plateau", 120, [] {
    ModelConfig c = softplus(128);
    c.activation = activation(ActivationId::relu);
    DepthSweepOptions o;
    o.plateau_from = 128;
    o.plateau_to = 1024;
    const DepthSweepResult r = depth_sweep(c, o);
    const bool slope_ok = in(r.median_output_slope, -1.2, -0.8);
    const bool plateau = r.median_plateau_ratio > 0.5;
    return Outcome{slope_ok && plateau, fmt("median output slope %.4f; ", r.median_output_slope) +
                                            fmt("median grad_diff(1024)/grad_diff(128) = %.4f (> 0.5)",
                                                r.median_plateau_ratio)};
  });

  criterion(4, "euler and rk4 orders", 60, [] {
    const ModelConfig c = softplus(64);
    const SolverOrderResult r = solver_order_study(c, sphere_point(c.input_dim, 2));
    return Outcome{in(r.euler_slope, -1.2, -0.8) && in(r.rk4_slope, -4.5, -3.5),
                   fmt("euler slope %.4f, ", r.euler_slope) + fmt("rk4 slope %.4f", r.rk4_slope)};
  });

  criterion(5, "kernel recursion oracles", 60, [] {
    ModelConfig id = softplus(1, 3);
    id.activation = activation(ActivationId::identity);
    const Vector x = Vector::Constant(3, 1.0 / std::sqrt(3.0));
    const KernelTables t = nngp_tables(id, x, x, 512);
    const double c00 = id.sigma_u * id.sigma_u / id.input_dim;
    const double want = id.sigma_v * id.sigma_v * c00 * oracle::bessel_i0(2.0 * id.sigma_w * id.horizon);
    const double bessel_rel = std::abs(t.output_nngp / want - 1.0);
    double d_err = 0.0;
    const ModelConfig sp = softplus(1, 3);
    const Vector xb = Vector(Eigen::Vector3d(0.2, -0.5, 1.0).normalized());
    for (int L = 1; L <= 8; ++L) {
      const KernelTables k = kernel_tables(sp, x, xb, L);
      const Eigen::MatrixXd D = oracle::naive_d_table(k.Edot, k.d_terminal, k.kappa, L);
      d_err = std::max(d_err, (k.D - D).cwiseAbs().maxCoeff());
    }
    return Outcome{bessel_rel <= 1e-3 && d_err <= 1e-12,
                   fmt("Bessel I0 rel error %.3g (<= 1e-3); ", bessel_rel) +
                       fmt("DP vs naive D max error %.3g (<= 1e-12)", d_err)};
  });

  criterion(6, "depth Cauchy rates", 180, [] {
    const ModelConfig c = softplus(1);
    const Vector x = sphere_point(8, 4), xb = sphere_point(8, 5);
    const std::vector<int> depths{64, 128, 256, 512};
    double lo = 1e9, hi = -1e9;
    for (KernelQuantity q : {KernelQuantity::nngp, KernelQuantity::ntk}) {
      const LimitReport r = kernel_limit_extrapolate(c, x, xb, depths, q);
      for (double g : r.gap_ratios) lo = std::min(lo, g), hi = std::max(hi, g);
    }
    return Outcome{lo >= 0.4 && hi <= 0.6, fmt("gap ratios in [%.4f, ", lo) + fmt("%.4f] (window [0.4, 0.6])", hi)};
  });

  criterion(7, "width convergence of the ntk", 300, [] {
    const WidthStudyResult r = ntk_width_study(softplus(1), WidthStudyOptions{});
    return Outcome{r.strictly_decreasing && in(r.slope, -1.1, -0.4),
                   fmt("medians %.3g", r.medians[0]) + fmt(" %.3g", r.medians[1]) + fmt(" %.3g; ", r.medians[2]) +
                       fmt("slope %.4f (window [-1.1, -0.4])", r.slope)};
  });

  criterion(8, "spd of the limit ntk", 120, [] {
    const SpdStudyResult r = spd_study(softplus(1), 32, 256, 5);
    return Outcome{r.min_eig_distinct > 0.0 && r.min_eig_duplicate <= 1e-8,
                   fmt("min_eig distinct %.4g (> 0), ", r.min_eig_distinct) +
                       fmt("duplicate %.3g (<= 1e-8)", r.min_eig_duplicate)};
  });

  criterion(9, "training convergence", 300, [] {
    const TrainingStudyResult r = training_study(training_model(2048), training_options(300));
    return Outcome{r.loss_nonincreasing && r.loss_ratio <= 1e-3 && r.audit.passes,
                   std::string(r.loss_nonincreasing ? "loss non-increasing; " : "loss increased; ") +
                       fmt("final/initial %.3g (<= 1e-3); ", r.loss_ratio) +
                       "rate-1/16 audit " + (r.audit.passes ? "passes" : "fails") +
                       fmt(" with lambda0 %.4g", r.lambda0) +
                       fmt(", eta %.4g", r.eta)};
  });

  criterion(10, "spectral diagnostics", 180, [] {
    const TrainingStudyResult s = training_study(training_model(1024), training_options(100));
    const RankStudyResult rk = spectral_rank_study(training_model(64), 256, 16, 22);
    return Outcome{s.lambda_positive && rk.min_eig_features <= 0.0,
                   fmt("n=1024 min lambda over run %.4g (> 0); ", s.min_lambda) +
                       fmt("n=64, N=256 lambda_min at init %.3g (<= 0)", rk.min_eig_features)};
  });

  criterion(11, "horizon scaling", 60, [] {
    const HorizonStudyResult r = horizon_study(softplus(64), HorizonStudyOptions{});
    return Outcome{in(r.ratio_scaled, 0.5, 2.0) && r.ratio_unscaled > 5.0,
                   fmt("scaled std ratio %.4f (within 2x); ", r.ratio_scaled) +
                       fmt("unscaled ratio %.4g (> 5)", r.ratio_unscaled)};
  });

  criterion(12, "gaussianity at init", 120, [] {
    const ModelConfig c = softplus(512);
    const GaussianityResult r = gaussianity_study(c, sphere_point(c.input_dim, 4), seed_range(0, 2000), 64);
    return Outcome{r.ks.statistic < 0.03, fmt("KS %.4f (< 0.03), ", r.ks.statistic) + fmt("p %.3f", r.ks.p_value)};
  });

  criterion(13, "idx parser robustness", 60, [] {
    std::vector<std::uint8_t> pixels(6 * 4 * 4);
    for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = static_cast<std::uint8_t>(i * 37);
    const auto img = oracle::idx_images(6, 4, 4, pixels);
    const auto lbl = oracle::idx_labels({0, 1, 2, 3, 4, 5});
    std::mt19937_64 rng(2024);
    int typed = 0, accepted = 0, untyped = 0;
    for (int i = 0; i < 10000; ++i) {
      auto a = img, b = lbl;
      if (i % 3 != 1) a = mutate(a, rng);
      if (i % 3 != 0) b = mutate(b, rng);
      try {
        const RawImageSet r = parse_idx(a, b);
        if (r.pixels.size() != std::size_t{r.count} * r.rows * r.cols || r.labels.size() != r.count) ++untyped;
        ++accepted;
      } catch (const Error&) {
        ++typed;
      } catch (...) {
        ++untyped;
      }
    }
    return Outcome{untyped == 0, std::to_string(typed) + " typed errors, " + std::to_string(accepted) +
                                     " accepted, " + std::to_string(untyped) + " untyped or inconsistent"};
  });

  std::printf("%d of 13 criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}

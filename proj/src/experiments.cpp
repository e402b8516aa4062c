#include "odentk/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "odentk/error.hpp"
#include "odentk/parallel.hpp"
#include "odentk/serialize.hpp"
#include "odentk/studies.hpp"

namespace odentk {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

// Rows of preformatted cells; numbers go through num() so output is byte-stable.
class CsvTable {
 public:
  CsvTable(std::string file, std::vector<std::string> header) : file_(std::move(file)), header_(std::move(header)) {}

  template <class... Cells>
  void row(const Cells&... cells) {
    std::vector<std::string> r;
    (r.push_back(cell(cells)), ...);
    require(r.size() == header_.size(), ErrorCode::consistency, "csv row width does not match header in " + file_);
    rows_.push_back(std::move(r));
  }

  const std::string& file() const { return file_; }

  std::string render() const {
    std::string s;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) s += ',';
        s += cells[i];
      }
      s += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return s;
  }

 private:
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }
  static std::string cell(std::string_view v) { return std::string(v); }
  static std::string cell(double v) { return num(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(long v) { return std::to_string(v); }
  static std::string cell(std::uint64_t v) { return std::to_string(v); }
  static std::string cell(bool v) { return v ? "true" : "false"; }

  std::string file_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// Reads override keys with defaults, records the resolved values, and rejects
// keys nobody asked for.
class Overrides {
 public:
  explicit Overrides(const std::string& text) {
    try {
      j_ = json::parse(text);
    } catch (const json::parse_error& e) {
      fail(ErrorCode::config, std::string("overrides are not valid JSON: ") + e.what());
    }
    require(j_.is_object(), ErrorCode::config, "overrides must be a JSON object");
  }

  template <class T>
  T get(const std::string& key, T def) {
    used_.insert(key);
    T v = def;
    if (j_.contains(key)) {
      try {
        v = j_[key].get<T>();
      } catch (const json::exception& e) {
        fail(ErrorCode::config, "override '" + key + "' has the wrong type: " + e.what());
      }
    }
    resolved_[key] = v;
    return v;
  }

  // Model fields shared by every experiment.
  ModelConfig model(ModelConfig def, const std::string& prefix = "") {
    def.width = get(prefix + "width", def.width);
    def.input_dim = get(prefix + "input_dim", def.input_dim);
    def.horizon = get(prefix + "horizon", def.horizon);
    def.sigma_u = get(prefix + "sigma_u", def.sigma_u);
    def.sigma_w = get(prefix + "sigma_w", def.sigma_w);
    def.sigma_v = get(prefix + "sigma_v", def.sigma_v);
    def.activation = activation_by_name(get(prefix + "activation", std::string(def.activation.name)));
    def.validate();
    return def;
  }

  bool is_zero(const std::string& key) {
    if (!j_.contains(key)) return false;
    used_.insert(key);
    resolved_[key] = j_[key];
    return j_[key].is_number() && j_[key].get<double>() == 0.0;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      require(used_.count(key) > 0, ErrorCode::config, "unknown override '" + key + "' for this experiment");
  }

  const json& resolved() const { return resolved_; }

 private:
  json j_;
  json resolved_ = json::object();
  std::set<std::string> used_;
};

struct Run {
  const ExperimentSpec& spec;
  Overrides ov;
  bool dry = false;
  fs::path dir;
  std::deque<CsvTable> tables;  // deque keeps references from table() valid
  std::vector<Assertion> assertions;
  json summary = json::object();
  std::vector<std::uint64_t> resolved_seeds;

  explicit Run(const ExperimentSpec& s) : spec(s), ov(s.overrides), dir(s.output_dir) {
    // steps = 0 is a dry run for every experiment: header-only CSVs and a manifest.
    dry = ov.is_zero("steps");
  }

  std::vector<std::uint64_t> seeds(int default_count) {
    const int count = ov.get("seeds_count", default_count);
    require(count >= 1, ErrorCode::config, "seeds_count must be >= 1");
    resolved_seeds = spec.seeds.empty() ? seed_range(spec.base_seed, count) : spec.seeds;
    return resolved_seeds;
  }

  CsvTable& table(std::string file, std::vector<std::string> header) {
    tables.emplace_back(std::move(file), std::move(header));
    return tables.back();
  }

  void check(std::string name, bool passed, std::string detail) {
    assertions.push_back({std::move(name), passed, std::move(detail)});
  }

  int threads() const { return spec.threads; }
};

bool in_window(double v, double lo, double hi) { return v >= lo && v <= hi; }

std::string window_detail(const char* what, double v, double lo, double hi) {
  return std::string(what) + " = " + fmt(v) + ", window [" + fmt(lo) + ", " + fmt(hi) + "]";
}

void add_history(CsvTable& t, const std::string& label, const TrainHistory& h) {
  for (const TrainRecord& r : h.records) t.row(label, r.step, r.loss, r.residual, r.lambda_min, r.param_distance);
}

ModelConfig base_model() { return ModelConfig{}; }

// Per-table lists that appear in several experiments.
std::vector<std::string> history_header() {
  return {"label", "step", "loss", "residual", "lambda_min", "param_distance"};
}

void exp_depth_convergence(Run& run) {
  ModelConfig d = base_model();
  d.width = 128;
  const ModelConfig cfg = run.ov.model(d);
  DepthSweepOptions o;
  o.depths = run.ov.get("depths", o.depths);
  o.discrete_reference = run.ov.get("reference", std::string("adaptive")) == "discrete";
  o.reference_tol = run.ov.get("reference_tol", o.reference_tol);
  o.reference_L = run.ov.get("reference_L", o.reference_L);
  o.input_seed = run.ov.get("input_seed", o.input_seed);
  const double lo = run.ov.get("slope_min", -1.2), hi = run.ov.get("slope_max", -0.8);
  o.seeds = run.seeds(5);
  o.plateau_from = o.depths.front();
  o.plateau_to = o.depths.back();
  o.threads = run.threads();
  auto& rows = run.table("depth_convergence.csv", {"seed", "L", "output_diff", "grad_diff", "dU_diff", "dW_diff", "dv_diff"});
  auto& slopes = run.table("depth_slopes.csv", {"seed", "output_slope", "grad_slope"});
  run.ov.finish();
  if (run.dry) return;
  const DepthSweepResult r = depth_sweep(cfg, o);
  for (const auto& x : r.rows) rows.row(x.seed, x.L, x.output_diff, x.grad_diff, x.dU, x.dW, x.dv);
  for (const auto& s : r.per_seed) slopes.row(s.seed, s.output_slope, s.grad_slope);
  run.summary["median_output_slope"] = r.median_output_slope;
  run.summary["median_grad_slope"] = r.median_grad_slope;
  run.check("gradient difference slope in window for every seed",
            r.min_grad_slope >= lo && r.max_grad_slope <= hi,
            "slopes in [" + fmt(r.min_grad_slope) + ", " + fmt(r.max_grad_slope) + "], window [" + fmt(lo) + ", " +
                fmt(hi) + "]");
  run.check("output difference slope in window for every seed",
            r.min_output_slope >= lo && r.max_output_slope <= hi,
            "slopes in [" + fmt(r.min_output_slope) + ", " + fmt(r.max_output_slope) + "]");
}

void exp_activation_compare(Run& run) {
  ModelConfig d = base_model();
  d.width = 128;
  const ModelConfig cfg = run.ov.model(d);
  DepthSweepOptions o;
  o.depths = run.ov.get("depths", o.depths);
  o.plateau_from = run.ov.get("plateau_from", 128);
  o.plateau_to = run.ov.get("plateau_to", 1024);
  const double plateau_min = run.ov.get("plateau_min_ratio", 0.5);
  o.seeds = run.seeds(5);
  o.threads = run.threads();
  ModelConfig td = base_model();
  td.width = 256;
  td.input_dim = 16;
  td.sigma_u = 4.0;
  ModelConfig tcfg = run.ov.model(td, "train_");
  TrainingStudyOptions to;
  to.N = run.ov.get("train_N", 16);
  to.train.steps = run.ov.get("steps", 50L);
  to.train.pipeline = Pipeline::discrete(run.ov.get("train_L", 16));
  to.train.threads = run.threads();
  auto& depth = run.table("activation_depth.csv", {"activation", "seed", "L", "output_diff", "grad_diff"});
  auto& slopes = run.table("activation_slopes.csv", {"activation", "seed", "output_slope", "grad_slope", "plateau_ratio"});
  auto& hist = run.table("activation_train.csv", history_header());
  run.ov.finish();
  if (run.dry) return;
  for (const char* name : {"softplus-shifted", "relu"}) {
    ModelConfig c = cfg;
    c.activation = activation_by_name(name);
    const DepthSweepResult r = depth_sweep(c, o);
    for (const auto& x : r.rows) depth.row(name, x.seed, x.L, x.output_diff, x.grad_diff);
    for (const auto& s : r.per_seed) slopes.row(name, s.seed, s.output_slope, s.grad_slope, s.plateau_ratio);
    run.summary[std::string(name) + "_median_grad_slope"] = r.median_grad_slope;
    run.summary[std::string(name) + "_median_output_slope"] = r.median_output_slope;
    run.summary[std::string(name) + "_median_plateau_ratio"] = r.median_plateau_ratio;
    if (c.activation.kink_at_zero) {
      run.check("relu output difference slope in window", in_window(r.median_output_slope, -1.2, -0.8),
                window_detail("median slope", r.median_output_slope, -1.2, -0.8));
      run.check("relu gradient difference plateaus",
                r.median_plateau_ratio > plateau_min,
                "median grad_diff(" + std::to_string(o.plateau_to) + ")/grad_diff(" + std::to_string(o.plateau_from) +
                    ") = " + fmt(r.median_plateau_ratio) + ", required > " + fmt(plateau_min));
    } else {
      run.check("softplus gradient difference slope in window",
                r.min_grad_slope >= -1.2 && r.max_grad_slope <= -0.8,
                "slopes in [" + fmt(r.min_grad_slope) + ", " + fmt(r.max_grad_slope) + "]");
    }
    ModelConfig tc = tcfg;
    tc.activation = c.activation;
    const TrainingStudyResult t = training_study(tc, to);
    add_history(hist, name, t.history);
    run.summary[std::string(name) + "_train_loss_ratio"] = t.loss_ratio;
    run.summary[std::string(name) + "_train_max_distance"] = t.distance.max_distance;
    run.check(std::string(name) + " training loss decreases", t.loss_ratio < 1.0,
              "final/initial = " + fmt(t.loss_ratio));
  }
}

void exp_ntk_width(Run& run) {
  const ModelConfig cfg = run.ov.model(base_model());
  WidthStudyOptions o;
  o.widths = run.ov.get("widths", o.widths);
  o.L = run.ov.get("L", o.L);
  o.points = run.ov.get("points", o.points);
  o.data_seed = run.ov.get("data_seed", o.data_seed);
  const double lo = run.ov.get("slope_min", -1.1), hi = run.ov.get("slope_max", -0.4);
  o.seeds = run.seeds(20);
  o.threads = run.threads();
  auto& rows = run.table("ntk_width.csv", {"width", "seed", "mean_abs_error"});
  auto& med = run.table("ntk_width_summary.csv", {"width", "median_error"});
  auto& lim = run.table("ntk_limit_gram.csv", {"i", "j", "value"});
  run.ov.finish();
  if (run.dry) return;
  const WidthStudyResult r = ntk_width_study(cfg, o);
  for (const auto& x : r.rows) rows.row(x.width, x.seed, x.error);
  for (std::size_t i = 0; i < o.widths.size(); ++i) med.row(o.widths[i], r.medians[i]);
  for (int i = 0; i < r.limit_gram.rows(); ++i)
    for (int j = 0; j < r.limit_gram.cols(); ++j) lim.row(i, j, r.limit_gram(i, j));
  run.summary["slope"] = r.slope;
  run.summary["medians"] = r.medians;
  run.check("median error strictly decreasing in width", r.strictly_decreasing, "medians " + json(r.medians).dump());
  run.check("width slope in window", in_window(r.slope, lo, hi), window_detail("slope", r.slope, lo, hi));
}

void exp_spd_training(Run& run) {
  ModelConfig d = base_model();
  d.width = 2048;
  d.input_dim = 64;
  d.sigma_u = 8.0;
  const ModelConfig cfg = run.ov.model(d);
  TrainingStudyOptions o;
  o.N = run.ov.get("N", 16);
  o.data_seed = run.ov.get("data_seed", o.data_seed);
  o.train.steps = run.ov.get("steps", 300L);
  o.train.pipeline = Pipeline::discrete(run.ov.get("L", 16));
  o.train.eval_every = run.ov.get("eval_every", 5);
  o.lambda0_L = run.ov.get("lambda0_L", 256);
  o.train.threads = run.threads();
  const double target = run.ov.get("loss_ratio_max", 1e-3);
  const int spectral_width = run.ov.get("spectral_width", 1024);
  const long spectral_steps = run.ov.get("spectral_steps", 100L);
  const int small_width = run.ov.get("small_width", 64);
  const int small_N = run.ov.get("small_N", 256);
  ModelConfig sd = base_model();
  const ModelConfig spd_cfg = run.ov.model(sd, "spd_");
  const int spd_N = run.ov.get("spd_N", 32);
  const int spd_L = run.ov.get("spd_L", 256);
  const std::uint64_t spd_seed = run.ov.get("spd_data_seed", std::uint64_t{5});
  auto& hist = run.table("train_history.csv", {"step", "loss", "residual", "lambda_min", "param_distance", "wall_ms"});
  auto& shist = run.table("spectral_history.csv", history_header());
  auto& spec = run.table("spd_spectrum.csv", {"index", "eigenvalue"});
  auto& summary = run.table("spd_summary.csv", {"quantity", "value"});
  run.ov.finish();
  if (run.dry) return;

  const TrainingStudyResult r = training_study(cfg, o);
  for (const TrainRecord& x : r.history.records)
    hist.row(x.step, x.loss, x.residual, x.lambda_min, x.param_distance, 0.0);
  run.check("loss non-increasing", r.loss_nonincreasing, "over " + std::to_string(o.train.steps) + " steps");
  run.check("final loss below target", r.loss_ratio <= target,
            "final/initial = " + fmt(r.loss_ratio) + ", required <= " + fmt(target));
  run.check("rate-1/16 bound audit", r.audit.passes,
            "lambda0 = " + fmt(r.lambda0) + " (" + r.lambda0_source + "), eta = " + fmt(r.eta) +
                ", first violation " + std::to_string(r.audit.first_violation));
  run.check("distance triangle replay", r.distance.triangle_ok, "max distance " + fmt(r.distance.max_distance));

  ModelConfig sc = cfg;
  sc.width = spectral_width;
  TrainingStudyOptions so = o;
  so.train.steps = spectral_steps;
  const TrainingStudyResult s = training_study(sc, so);
  add_history(shist, "width=" + std::to_string(spectral_width), s.history);
  run.check("lambda_min positive at every recorded step (n >= N)", s.lambda_positive,
            "min over run " + fmt(s.min_lambda));

  ModelConfig rc = cfg;
  rc.width = small_width;
  const RankStudyResult rk = spectral_rank_study(rc, small_N, o.train.pipeline.L, o.data_seed + 1);
  run.check("feature Gram lambda_min <= 0 at init (n < N)", rk.min_eig_features <= 0.0,
            "lambda_min = " + num(rk.min_eig_features) + " for width " + std::to_string(small_width) + ", N " +
                std::to_string(small_N));

  const SpdStudyResult spd = spd_study(spd_cfg, spd_N, spd_L, spd_seed, {}, run.threads());
  for (int i = 0; i < spd.spectrum.size(); ++i) spec.row(i, spd.spectrum[i]);
  run.check("ntk-limit Gram SPD on distinct points", spd.min_eig_distinct > 0.0,
            "min_eig = " + num(spd.min_eig_distinct));
  run.check("duplicated point makes the Gram singular", spd.min_eig_duplicate <= 1e-8,
            "min_eig = " + num(spd.min_eig_duplicate));

  const std::pair<const char*, double> values[] = {{"eta", r.eta},
                                                   {"lambda0", r.lambda0},
                                                   {"loss_ratio", r.loss_ratio},
                                                   {"fitted_rate", r.audit.fitted_rate},
                                                   {"rate16", r.audit.rate16},
                                                   {"rate8", r.audit.rate8},
                                                   {"rate8_passes", r.audit.passes_rate8 ? 1.0 : 0.0},
                                                   {"min_lambda_train", r.min_lambda},
                                                   {"max_param_distance", r.distance.max_distance},
                                                   {"min_lambda_spectral", s.min_lambda},
                                                   {"min_eig_features_small", rk.min_eig_features},
                                                   {"min_eig_ntk_small", rk.min_eig_ntk},
                                                   {"spd_min_eig", spd.min_eig_distinct},
                                                   {"spd_min_eig_duplicate", spd.min_eig_duplicate}};
  for (const auto& [k, v] : values) {
    summary.row(k, v);
    run.summary[k] = v;
  }
}

void exp_horizon(Run& run) {
  const ModelConfig cfg = run.ov.model(base_model());
  HorizonStudyOptions o;
  o.long_horizon = run.ov.get("long_horizon", o.long_horizon);
  o.steps_per_unit = run.ov.get("steps_per_unit", o.steps_per_unit);
  o.input_seed = run.ov.get("input_seed", o.input_seed);
  o.seeds = run.seeds(20);
  o.threads = run.threads();
  auto& rows = run.table("horizon_outputs.csv", {"seed", "mode", "horizon", "sigma_w", "output"});
  auto& sum = run.table("horizon_summary.csv", {"mode", "std", "ratio_to_baseline"});
  run.ov.finish();
  if (run.dry) return;
  const HorizonStudyResult r = horizon_study(cfg, o);
  for (const auto& x : r.rows) rows.row(x.seed, x.mode, x.horizon, x.sigma_w, x.output);
  sum.row("baseline", r.std_baseline, 1.0);
  sum.row("scaled", r.std_scaled, r.ratio_scaled);
  sum.row("unscaled", r.std_unscaled, r.ratio_unscaled);
  run.summary["ratio_scaled"] = r.ratio_scaled;
  run.summary["ratio_unscaled"] = r.ratio_unscaled;
  run.check("scaled output std within 2x of baseline", in_window(r.ratio_scaled, 0.5, 2.0),
            window_detail("ratio", r.ratio_scaled, 0.5, 2.0));
  run.check("unscaled output std grows more than 5x", r.ratio_unscaled > 5.0, "ratio = " + fmt(r.ratio_unscaled));
}

void exp_polynomial(Run& run) {
  ModelConfig d = base_model();
  d.activation = activation(ActivationId::quadratic);
  const ModelConfig cfg = run.ov.model(d);
  const int N = run.ov.get("N", 16);
  const int L = run.ov.get("L", 256);
  const std::uint64_t data_seed = run.ov.get("data_seed", std::uint64_t{9});
  ModelConfig td = base_model();
  td.width = 256;
  ModelConfig tcfg = run.ov.model(td, "train_");
  TrainingStudyOptions to;
  to.N = N;
  to.data_seed = data_seed;
  to.train.steps = run.ov.get("steps", 50L);
  to.train.pipeline = Pipeline::discrete(run.ov.get("train_L", 16));
  to.train.threads = run.threads();
  auto& sum = run.table("polynomial_summary.csv",
                        {"activation", "min_eig_ntk", "min_eig_nngp", "input_std", "even_hits", "odd_hits", "witness"});
  auto& coef = run.table("polynomial_hermite.csv", {"activation", "n", "coefficient"});
  auto& hist = run.table("polynomial_train.csv", history_header());
  run.ov.finish();
  if (run.dry) return;
  for (const Activation& a : {cfg.activation, activation(ActivationId::softplus_shifted)}) {
    ModelConfig c = cfg;
    c.activation = a;
    const PolynomialStudyResult r = polynomial_study(c, N, L, data_seed);
    sum.row(a.name, r.min_eig_ntk, r.min_eig_nngp, r.input_std, r.witness.even_hits, r.witness.odd_hits,
            r.witness.passes);
    const std::vector<double> h = hermite_coeffs(a, r.input_std, 64);
    for (int n = 0; n < 64; ++n) coef.row(a.name, n, h[n]);
    ModelConfig tc = tcfg;
    tc.activation = a;
    const TrainingStudyResult t = training_study(tc, to);
    add_history(hist, std::string(a.name), t.history);
    run.summary[std::string(a.name) + "_min_eig_ntk"] = r.min_eig_ntk;
    run.summary[std::string(a.name) + "_train_loss_ratio"] = t.loss_ratio;
    if (a.is_polynomial) {
      run.check(std::string(a.name) + " ntk-limit Gram SPD", r.min_eig_ntk > 0.0, "min_eig = " + num(r.min_eig_ntk));
      run.check(std::string(a.name) + " fails the nonpolynomial witness", !r.witness.passes,
                "even hits " + std::to_string(r.witness.even_hits) + ", odd hits " +
                    std::to_string(r.witness.odd_hits));
      run.check(std::string(a.name) + " training loss decreases", t.loss_ratio < 1.0,
                "final/initial = " + fmt(t.loss_ratio));
    }
  }
}

void exp_gaussianity(Run& run) {
  ModelConfig d = base_model();
  d.width = 512;
  const ModelConfig cfg = run.ov.model(d);
  const int L = run.ov.get("L", 64);
  const std::uint64_t input_seed = run.ov.get("input_seed", std::uint64_t{4});
  const double ks_max = run.ov.get("ks_max", 0.03);
  const auto seeds = run.seeds(2000);
  auto& out = run.table("gaussianity_outputs.csv", {"seed", "output"});
  auto& sum = run.table("gaussianity_ks.csv",
                        {"statistic", "p_value", "mean", "std", "limit_variance", "variance_ratio"});
  run.ov.finish();
  if (run.dry) return;
  const GaussianityResult r = gaussianity_study(cfg, sphere_point(cfg.input_dim, input_seed), seeds, L, run.threads());
  for (std::size_t i = 0; i < seeds.size(); ++i) out.row(seeds[i], r.outputs[i]);
  sum.row(r.ks.statistic, r.ks.p_value, r.ks.mean, r.ks.std, r.limit_variance, r.variance_ratio);
  run.summary["ks_statistic"] = r.ks.statistic;
  run.summary["p_value"] = r.ks.p_value;
  run.summary["variance_ratio"] = r.variance_ratio;
  run.check("KS statistic below threshold", r.ks.statistic < ks_max,
            "D = " + fmt(r.ks.statistic) + ", p = " + fmt(r.ks.p_value) + ", required < " + fmt(ks_max));
  run.check("sample variance matches the output NNGP", in_window(r.variance_ratio, 0.85, 1.15),
            window_detail("variance ratio", r.variance_ratio, 0.85, 1.15));
}

void write_matrix(CsvTable& t, const Eigen::MatrixXd& m) {
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) t.row(i, j, m(i, j));
}

void exp_covariance(Run& run) {
  ModelConfig d = base_model();
  d.width = 256;
  const ModelConfig cfg = run.ov.model(d);
  const int N = run.ov.get("N", 10);
  const int L = run.ov.get("L", 64);
  const std::uint64_t data_seed = run.ov.get("data_seed", std::uint64_t{13});
  const auto seeds = run.seeds(2000);
  auto& in = run.table("input_cov.csv", {"i", "j", "value"});
  auto& out = run.table("output_cov.csv", {"i", "j", "value"});
  auto& lim = run.table("limit_cov.csv", {"i", "j", "value"});
  auto& diag = run.table("sstar_diagonal.csv", {"i", "S_LL"});
  auto& sum = run.table("covariance_summary.csv", {"quantity", "value"});
  run.ov.finish();
  if (run.dry) return;
  const CovarianceStudyResult r = covariance_study(cfg, N, data_seed, seeds, L, run.threads());
  write_matrix(in, r.input_cov);
  write_matrix(out, r.output_cov);
  write_matrix(lim, r.limit_cov);
  for (std::size_t i = 0; i < r.sstar.diagonal.size(); ++i) diag.row(static_cast<int>(i), r.sstar.diagonal[i]);
  const std::pair<const char*, double> values[] = {{"structure_corr", r.structure_corr},
                                                   {"limit_rel_error", r.limit_rel_error},
                                                   {"magnitude_ratio", r.magnitude_ratio},
                                                   {"sstar_diagonal_spread", r.sstar.diagonal_spread},
                                                   {"sstar_min_gap", r.sstar.min_gap}};
  for (const auto& [k, v] : values) {
    sum.row(k, v);
    run.summary[k] = v;
  }
  run.check("output covariance tracks input correlations", r.structure_corr > 0.9,
            "Pearson r = " + fmt(r.structure_corr));
  run.check("output covariance is contracted", r.magnitude_ratio < 1.0, "max ratio = " + fmt(r.magnitude_ratio));
  run.check("empirical covariance matches the nngp-limit Gram", r.limit_rel_error < 0.15,
            "relative Frobenius error = " + fmt(r.limit_rel_error));
  run.check("S* diagonal constant on the sphere", r.sstar.diagonal_equal, "spread = " + num(r.sstar.diagonal_spread));
  run.check("S* off-diagonal gaps positive", r.sstar.gaps_positive, "min gap = " + num(r.sstar.min_gap));
}

void exp_solver_sensitivity(Run& run) {
  const ModelConfig cfg = run.ov.model(base_model());
  SolverOrderOptions so;
  so.euler_depths = run.ov.get("euler_depths", so.euler_depths);
  so.rk4_depths = run.ov.get("rk4_depths", so.rk4_depths);
  const std::uint64_t input_seed = run.ov.get("input_seed", std::uint64_t{3});
  const double grad_tol = run.ov.get("grad_rel_max", 1e-2);
  const double loss_tol = run.ov.get("loss_spread_max", 1e-2);
  TrainingStudyOptions to;
  to.N = run.ov.get("train_N", 8);
  to.train.steps = run.ov.get("steps", 20L);
  to.train.threads = run.threads();
  ModelConfig td = base_model();
  td.width = 128;
  const ModelConfig tcfg = run.ov.model(td, "train_");
  auto& ord = run.table("solver_order.csv", {"method", "L", "terminal_error"});
  auto& grad = run.table("solver_gradients.csv", {"solver", "output_diff", "grad_rel_diff"});
  auto& hist = run.table("solver_train.csv", history_header());
  run.ov.finish();
  if (run.dry) return;
  const Vector x = sphere_point(cfg.input_dim, input_seed);
  ModelConfig oc = cfg;
  oc.seed = run.spec.base_seed;
  const SolverOrderResult r = solver_order_study(oc, x, so);
  for (const auto& row : r.rows) ord.row(row.method, row.L, row.error);
  run.summary["euler_slope"] = r.euler_slope;
  run.summary["rk4_slope"] = r.rk4_slope;
  run.check("euler order", in_window(r.euler_slope, -1.2, -0.8), window_detail("slope", r.euler_slope, -1.2, -0.8));
  run.check("rk4 order", in_window(r.rk4_slope, -4.5, -3.5), window_detail("slope", r.rk4_slope, -4.5, -3.5));

  const std::vector<SolverSpec> solvers = {SolverSpec::euler(256), SolverSpec::rk4(16), SolverSpec::rk4(64),
                                           SolverSpec::adaptive(1e-6, 1e-9), SolverSpec::adaptive(1e-8, 1e-10)};
  const auto rows = solver_gradient_study(oc, x, solvers);
  double worst = 0.0;
  for (const auto& g : rows) {
    grad.row(g.solver, g.output_diff, g.grad_rel_diff);
    worst = std::max(worst, g.grad_rel_diff);
  }
  run.check("adjoint gradients agree across solvers", worst < grad_tol,
            "worst relative difference " + fmt(worst) + ", required < " + fmt(grad_tol));

  std::vector<double> finals;
  for (const SolverSpec& s : {SolverSpec::euler(64), SolverSpec::rk4(16), SolverSpec::adaptive(1e-6, 1e-9)}) {
    TrainingStudyOptions o = to;
    o.train.pipeline = Pipeline::adjoint(s);
    o.train.diagnostics = false;
    const TrainingStudyResult t = training_study(tcfg, o);
    add_history(hist, solver_method_name(s.method), t.history);
    finals.push_back(t.history.records.back().loss);
  }
  const double lo = *std::min_element(finals.begin(), finals.end());
  const double hi = *std::max_element(finals.begin(), finals.end());
  const double spread = (hi - lo) / hi;
  run.summary["final_loss_spread"] = spread;
  run.check("training losses agree across solvers", spread < loss_tol,
            "relative spread " + fmt(spread) + ", required < " + fmt(loss_tol));
}

using ExperimentFn = void (*)(Run&);

struct Entry {
  std::string_view name;
  ExperimentFn fn;
};

const Entry kExperiments[] = {
    {"depth-convergence", exp_depth_convergence},     {"ntk-width-convergence", exp_ntk_width},
    {"spd-training", exp_spd_training},               {"horizon-scaling", exp_horizon},
    {"activation-compare", exp_activation_compare},   {"polynomial-activation", exp_polynomial},
    {"gaussianity", exp_gaussianity},                 {"covariance-structure", exp_covariance},
    {"solver-sensitivity", exp_solver_sensitivity},
};

}  // namespace

const std::vector<std::string_view>& experiment_names() {
  static const std::vector<std::string_view> names = [] {
    std::vector<std::string_view> v;
    for (const Entry& e : kExperiments) v.push_back(e.name);
    return v;
  }();
  return names;
}

bool is_experiment_name(std::string_view name) {
  for (const Entry& e : kExperiments)
    if (e.name == name) return true;
  return false;
}

bool RunManifest::passed() const {
  for (const Assertion& a : assertions)
    if (!a.passed) return false;
  return true;
}

std::string RunManifest::to_json() const {
  json j;
  j["experiment"] = experiment;
  j["spec"] = json::parse(spec_json);
  j["config_hash"] = config_hash;
  j["started"] = started;
  j["finished"] = finished;
  j["wall_seconds"] = wall_seconds;
  j["dry_run"] = dry_run;
  j["passed"] = passed();
  j["assertions"] = json::array();
  for (const Assertion& a : assertions)
    j["assertions"].push_back({{"name", a.name}, {"passed", a.passed}, {"detail", a.detail}});
  j["files"] = json::array();
  for (const ArtifactRecord& f : files)
    j["files"].push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  j["summary"] = json::parse(summary_json);
  return j.dump(2);
}

RunManifest run_experiment(const ExperimentSpec& spec) {
  const Entry* entry = nullptr;
  for (const Entry& e : kExperiments)
    if (e.name == spec.name) entry = &e;
  if (!entry) {
    std::string list;
    for (const Entry& e : kExperiments) list += std::string(list.empty() ? "" : ", ") + std::string(e.name);
    fail(ErrorCode::usage, "unknown experiment '" + spec.name + "' (expected one of: " + list + ")");
  }
  require(spec.threads >= 1, ErrorCode::config, "threads must be >= 1");

  RunManifest m;
  m.experiment = spec.name;
  m.started = utc_now();
  const auto t0 = std::chrono::steady_clock::now();
  std::error_code ec;
  fs::create_directories(spec.output_dir, ec);
  require(!ec, ErrorCode::io, "cannot create output directory '" + spec.output_dir + "': " + ec.message());

  Run run(spec);
  entry->fn(run);

  json echo;
  echo["name"] = spec.name;
  echo["overrides"] = run.ov.resolved();
  echo["seeds"] = run.resolved_seeds;
  echo["base_seed"] = spec.base_seed;
  echo["threads"] = spec.threads;
  m.spec_json = echo.dump();
  m.config_hash = git_blob_hash(m.spec_json);
  m.dry_run = run.dry;
  m.assertions = run.assertions;
  m.summary_json = run.summary.dump();

  for (const CsvTable& t : run.tables) {
    const std::string text = t.render();
    const fs::path path = fs::path(spec.output_dir) / t.file();
    std::ofstream f(path, std::ios::binary);
    f << text;
    f.close();
    require(f.good(), ErrorCode::io, "cannot write '" + path.string() + "'");
    const std::vector<std::uint8_t> bytes(text.begin(), text.end());
    m.files.push_back({t.file(), sha256_hex(bytes), bytes.size()});
  }
  m.finished = utc_now();
  m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const fs::path mpath = fs::path(spec.output_dir) / "manifest.json";
  std::ofstream mf(mpath, std::ios::binary);
  mf << m.to_json() << '\n';
  mf.close();
  require(mf.good(), ErrorCode::io, "cannot write '" + mpath.string() + "'");
  require(verify_manifest(m, spec.output_dir), ErrorCode::io, "artifact checksums changed during the run");
  return m;
}

bool verify_manifest(const RunManifest& m, const std::string& dir) {
  for (const ArtifactRecord& f : m.files) {
    const fs::path p = fs::path(dir) / f.path;
    if (!fs::exists(p)) return false;
    if (sha256_file(p.string()) != f.sha256) return false;
  }
  return true;
}

}  // namespace odentk

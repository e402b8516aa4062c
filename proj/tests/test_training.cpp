#include <doctest.h>

#include <cmath>
#include <sstream>

#include "odentk/stats.hpp"
#include "odentk/studies.hpp"
#include "odentk/training.hpp"
#include "oracles.hpp"

using namespace odentk;

namespace {

ModelConfig train_cfg() {
  ModelConfig c;
  c.width = 48;
  c.input_dim = 6;
  c.sigma_u = 2.0;
  c.seed = 9;
  return c;
}

bool same(const Params& a, const Params& b) {
  return (a.U - b.U).cwiseAbs().maxCoeff() == 0.0 && (a.W - b.W).cwiseAbs().maxCoeff() == 0.0 &&
         (a.v - b.v).cwiseAbs().maxCoeff() == 0.0;
}

}  // namespace

TEST_CASE("lr_bound is the inverse squared top singular value") {
  const Dataset ds = synth_sphere(12, 5, 4, LabelRule::random_pm1);
  const Eigen::MatrixXd X = ds.X;
  CHECK(lr_bound(ds) == doctest::Approx(1.0 / oracle::power_iteration_smax2(X)).epsilon(1e-10));
}

TEST_CASE("a zero step leaves the parameters unchanged") {
  const ModelConfig c = train_cfg();
  const Dataset ds = synth_sphere(6, c.input_dim, 2, LabelRule::linear_teacher);
  const Params p = init_params(c);
  const StepResult r = gd_step(c, p, ds, 0.0, Pipeline::discrete(8));
  CHECK(same(r.params, p));
  CHECK(r.metrics.update_norm == 0.0);
  CHECK(r.metrics.loss > 0.0);
}

TEST_CASE("gradient step equals the residual-weighted gradient sum") {
  const ModelConfig c = train_cfg();
  const Dataset ds = synth_sphere(5, c.input_dim, 2, LabelRule::random_pm1);
  const Params p = init_params(c);
  const double eta = 0.1;
  Grads g = Grads::zeros(c);
  for (int i = 0; i < ds.size(); ++i) {
    const Vector x = ds.X.row(i).transpose();
    Grads gi = grad_discrete(c, p, x, 8);
    gi *= model_output(c, p, x, Pipeline::discrete(8)) - ds.y[i];
    g += gi;
  }
  const StepResult r = gd_step(c, p, ds, eta, Pipeline::discrete(8));
  CHECK((r.params.W - (p.W - eta * g.dW)).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((r.params.v - (p.v - eta * g.dv)).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("training descends and the audits replay the history") {
  const ModelConfig c = train_cfg();
  const Dataset ds = synth_sphere(6, c.input_dim, 2, LabelRule::linear_teacher);
  TrainOptions o;
  o.steps = 40;
  o.pipeline = Pipeline::discrete(8);
  o.eval_every = 10;
  const TrainHistory h = train(c, ds, o);
  REQUIRE(h.records.size() == 41);
  CHECK(h.records.back().loss < h.records.front().loss);
  CHECK(std::isfinite(h.records.back().lambda_min));
  CHECK(std::isnan(h.records[1].lambda_min));
  CHECK(h.eta == doctest::Approx(lr_bound(ds) / 2));
  const DistanceReport d = distance_audit(h, 1e6);
  CHECK(d.triangle_ok);
  CHECK(d.within_bound);
  std::ostringstream csv;
  write_history_csv(h, csv, false);
  CHECK(csv.str().rfind("step,loss,residual,lambda_min,param_distance,wall_ms\n", 0) == 0);
}

TEST_CASE("convergence audit flags a violated rate") {
  TrainHistory h;
  for (int k = 0; k <= 4; ++k) {
    TrainRecord r;
    r.step = k;
    r.loss = k == 3 ? 2.0 : std::pow(0.5, k);
    h.records.push_back(r);
  }
  const ConvergenceReport r = convergence_audit(h, 1.0, 1.0);
  CHECK(!r.passes);
  CHECK(r.first_violation == 3);
  CHECK(r.rate16 == doctest::Approx(1.0 - 1.0 / 16));
}

TEST_CASE("learning rate above the bound is rejected") {
  const ModelConfig c = train_cfg();
  const Dataset ds = synth_sphere(6, c.input_dim, 2, LabelRule::linear_teacher);
  TrainOptions o;
  o.steps = 2;
  o.eta = 2.0 * lr_bound(ds);
  try {
    train(c, ds, o);
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config);
  }
}

TEST_CASE("divergence carries the failing step") {
  ModelConfig c = train_cfg();
  c.activation = activation(ActivationId::quadratic);
  c.sigma_w = 6.0;
  const Dataset ds = synth_sphere(6, c.input_dim, 2, LabelRule::linear_teacher);
  TrainOptions o;
  o.steps = 50;
  o.eta = 1e3;
  o.lr_guard = false;
  o.diagnostics = false;
  try {
    train(c, ds, o);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.step() >= 0);
  }
}

TEST_CASE("KS statistic matches a direct scan and separates normal from uniform") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(1.0, 2.0);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  std::vector<double> a(3000), b(3000);
  for (auto& x : a) x = nd(rng);
  for (auto& x : b) x = ud(rng);
  const KsResult ra = ks_normal_test(a), rb = ks_normal_test(b);
  CHECK(ra.statistic == doctest::Approx(oracle::ks_distance(a, ra.mean, ra.std)).epsilon(1e-12));
  CHECK(ra.statistic < 0.03);
  CHECK(ra.p_value > 0.01);
  CHECK(rb.statistic > 0.04);
  CHECK(rb.p_value < 1e-4);
  CHECK(kolmogorov_tail(0.1) == 1.0);
  CHECK(kolmogorov_tail(1.36) == doctest::Approx(0.049).epsilon(0.02));
  CHECK_THROWS_AS(ks_normal_test(std::vector<double>(20, 1.0)), Error);
}

TEST_CASE("summary statistics") {
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(median({4, 1, 2, 3}) == 2.5);
  CHECK(sample_std({1, 2, 3, 4}) == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(loglog_slope({1, 2, 4}, {1, 0.25, 0.0625}) == doctest::Approx(-2.0));
}

TEST_CASE("studies are independent of the thread count") {
  ModelConfig c;
  c.width = 16;
  const Vector x = sphere_point(c.input_dim, 1);
  const GaussianityResult a = gaussianity_study(c, x, seed_range(0, 16), 8, 1);
  const GaussianityResult b = gaussianity_study(c, x, seed_range(0, 16), 8, 4);
  CHECK(a.outputs == b.outputs);
  WidthStudyOptions w;
  w.widths = {8, 16};
  w.seeds = seed_range(0, 3);
  w.L = 8;
  w.points = 3;
  w.threads = 1;
  const WidthStudyResult r1 = ntk_width_study(c, w);
  w.threads = 3;
  const WidthStudyResult r3 = ntk_width_study(c, w);
  CHECK(r1.medians == r3.medians);
}

#include "odentk/config.hpp"

#include <json.hpp>
#include <set>

#include "odentk/error.hpp"

namespace odentk {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& section, const std::set<std::string>& allowed) {
  require(j.is_object(), ErrorCode::config, "config section '" + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "_doc") continue;
    require(allowed.count(key) > 0, ErrorCode::config, "unknown config key '" + section + "." + key + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::config, "config key '" + section + "." + key + "' has the wrong type: " + e.what());
  }
}

const char* backend_name(KernelBackend b) { return b == KernelBackend::series ? "series" : "quadrature"; }

KernelBackend backend_from_name(const std::string& s) {
  if (s == "series") return KernelBackend::series;
  if (s == "quadrature") return KernelBackend::quadrature;
  fail(ErrorCode::config, "unknown kernel backend '" + s + "'");
}

const char* gram_name(DiagnosticGram g) { return g == DiagnosticGram::ntk ? "ntk" : "features"; }

DiagnosticGram gram_from_name(const std::string& s) {
  if (s == "ntk") return DiagnosticGram::ntk;
  if (s == "features") return DiagnosticGram::features;
  fail(ErrorCode::config, "unknown diagnostic gram '" + s + "'");
}

}  // namespace

RunConfig default_run_config() { return RunConfig{}; }

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::config, std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c = default_run_config();
  check_keys(root, "", {"model", "solver", "pipeline", "data", "kernel", "train", "gradcheck", "experiment", "threads"});

  if (root.contains("model")) {
    const json& m = root["model"];
    check_keys(m, "model", {"width", "input_dim", "horizon", "sigma_u", "sigma_w", "sigma_v", "activation", "seed"});
    read(m, "width", c.model.width, "model");
    read(m, "input_dim", c.model.input_dim, "model");
    read(m, "horizon", c.model.horizon, "model");
    read(m, "sigma_u", c.model.sigma_u, "model");
    read(m, "sigma_w", c.model.sigma_w, "model");
    read(m, "sigma_v", c.model.sigma_v, "model");
    read(m, "seed", c.model.seed, "model");
    std::string act;
    read(m, "activation", act, "model");
    if (!act.empty()) c.model.activation = activation_by_name(act);
  }
  if (root.contains("solver")) {
    const json& s = root["solver"];
    check_keys(s, "solver", {"method", "steps", "rel_tol", "abs_tol", "max_steps"});
    std::string method;
    read(s, "method", method, "solver");
    if (!method.empty()) c.pipeline.solver.method = solver_method_from_name(method);
    read(s, "steps", c.pipeline.solver.steps, "solver");
    read(s, "rel_tol", c.pipeline.solver.rel_tol, "solver");
    read(s, "abs_tol", c.pipeline.solver.abs_tol, "solver");
    read(s, "max_steps", c.pipeline.solver.max_steps, "solver");
  }
  if (root.contains("pipeline")) {
    const json& p = root["pipeline"];
    check_keys(p, "pipeline", {"kind", "L"});
    std::string kind;
    read(p, "kind", kind, "pipeline");
    if (kind == "adjoint") {
      c.pipeline.kind = Pipeline::Kind::adjoint;
    } else if (kind == "discrete") {
      c.pipeline.kind = Pipeline::Kind::discrete;
    } else if (!kind.empty()) {
      fail(ErrorCode::config, "pipeline.kind must be 'adjoint' or 'discrete'");
    }
    read(p, "L", c.pipeline.L, "pipeline");
  }
  if (root.contains("data")) {
    const json& d = root["data"];
    check_keys(d, "data", {"N", "labels", "seed", "idx_images", "idx_labels", "idx_limit"});
    read(d, "N", c.data.N, "data");
    read(d, "seed", c.data.seed, "data");
    std::string rule;
    read(d, "labels", rule, "data");
    if (!rule.empty()) c.data.labels = label_rule_from_name(rule);
    read(d, "idx_images", c.data.idx_images, "data");
    read(d, "idx_labels", c.data.idx_labels, "data");
    read(d, "idx_limit", c.data.idx_limit, "data");
  }
  if (root.contains("kernel")) {
    const json& k = root["kernel"];
    check_keys(k, "kernel", {"L", "backend", "hermite_terms", "quadrature_order"});
    read(k, "L", c.kernel_L, "kernel");
    std::string backend;
    read(k, "backend", backend, "kernel");
    if (!backend.empty()) c.kernel.backend = backend_from_name(backend);
    read(k, "hermite_terms", c.kernel.hermite_terms, "kernel");
    read(k, "quadrature_order", c.kernel.quadrature_order, "kernel");
  }
  if (root.contains("train")) {
    const json& t = root["train"];
    check_keys(t, "train", {"steps", "eta", "eval_every", "diagnostics", "gram", "lr_guard"});
    read(t, "steps", c.train.steps, "train");
    read(t, "eta", c.train.eta, "train");
    read(t, "eval_every", c.train.eval_every, "train");
    read(t, "diagnostics", c.train.diagnostics, "train");
    read(t, "lr_guard", c.train.lr_guard, "train");
    std::string g;
    read(t, "gram", g, "train");
    if (!g.empty()) c.train.gram = gram_from_name(g);
  }
  if (root.contains("gradcheck")) {
    const json& g = root["gradcheck"];
    check_keys(g, "gradcheck", {"epsilon", "tolerance"});
    read(g, "epsilon", c.gradcheck.epsilon, "gradcheck");
    read(g, "tolerance", c.gradcheck.tolerance, "gradcheck");
  }
  if (root.contains("experiment")) {
    const json& e = root["experiment"];
    check_keys(e, "experiment", {"seeds", "overrides"});
    read(e, "seeds", c.seeds, "experiment");
    if (e.contains("overrides")) {
      require(e["overrides"].is_object(), ErrorCode::config, "experiment.overrides must be an object");
      c.overrides = e["overrides"].dump();
    }
  }
  read(root, "threads", c.threads, "");
  require(c.threads >= 1, ErrorCode::config, "threads must be >= 1");

  c.model.validate();
  c.pipeline.solver.validate();
  require(c.pipeline.L >= 1, ErrorCode::config, "pipeline.L must be >= 1");
  require(c.kernel_L >= 1, ErrorCode::config, "kernel.L must be >= 1");
  require(c.data.N >= 1, ErrorCode::config, "data.N must be >= 1");
  require(c.train.steps >= 0, ErrorCode::config, "train.steps must be >= 0");
  c.train.pipeline = c.pipeline;
  c.train.threads = c.threads;
  return c;
}

std::string run_config_to_json(const RunConfig& c, bool annotated) {
  json root;
  root["model"] = {{"width", c.model.width},
                   {"input_dim", c.model.input_dim},
                   {"horizon", c.model.horizon},
                   {"sigma_u", c.model.sigma_u},
                   {"sigma_w", c.model.sigma_w},
                   {"sigma_v", c.model.sigma_v},
                   {"activation", std::string(c.model.activation.name)},
                   {"seed", c.model.seed}};
  root["solver"] = {{"method", solver_method_name(c.pipeline.solver.method)},
                    {"steps", c.pipeline.solver.steps},
                    {"rel_tol", c.pipeline.solver.rel_tol},
                    {"abs_tol", c.pipeline.solver.abs_tol},
                    {"max_steps", c.pipeline.solver.max_steps}};
  root["pipeline"] = {{"kind", c.pipeline.kind == Pipeline::Kind::adjoint ? "adjoint" : "discrete"},
                      {"L", c.pipeline.L}};
  root["data"] = {{"N", c.data.N},
                  {"labels", label_rule_name(c.data.labels)},
                  {"seed", c.data.seed},
                  {"idx_images", c.data.idx_images},
                  {"idx_labels", c.data.idx_labels},
                  {"idx_limit", c.data.idx_limit}};
  root["kernel"] = {{"L", c.kernel_L},
                    {"backend", backend_name(c.kernel.backend)},
                    {"hermite_terms", c.kernel.hermite_terms},
                    {"quadrature_order", c.kernel.quadrature_order}};
  root["train"] = {{"steps", c.train.steps},
                   {"eta", c.train.eta},
                   {"eval_every", c.train.eval_every},
                   {"diagnostics", c.train.diagnostics},
                   {"gram", gram_name(c.train.gram)},
                   {"lr_guard", c.train.lr_guard}};
  root["gradcheck"] = {{"epsilon", c.gradcheck.epsilon}, {"tolerance", c.gradcheck.tolerance}};
  root["experiment"] = {{"seeds", c.seeds}, {"overrides", json::parse(c.overrides)}};
  root["threads"] = c.threads;
  if (annotated) {
    root["model"]["_doc"] =
        "f(x) = sigma_v v.phi(h_T)/sqrt(width), h_0 = sigma_u U x/sqrt(input_dim), dh/dt = sigma_w W phi(h)/sqrt(width) "
        "on [0, horizon]. activation: softplus-shifted | softplus-raw | relu | gelu | tanh | quadratic | identity.";
    root["solver"]["_doc"] =
        "Used by the adjoint pipeline. method: euler | rk4 (fixed, steps) | adaptive (Dormand-Prince 5(4), rel_tol/abs_tol).";
    root["pipeline"]["_doc"] = "adjoint: continuous gradients via the solver; discrete: exact gradients of the L-step Euler ResNet.";
    root["data"]["_doc"] =
        "N unit-sphere points in R^input_dim. labels: random-pm1 | linear-teacher | fourier-teacher. idx_images and "
        "idx_labels load IDX files instead (first idx_limit images, parity labels).";
    root["kernel"]["_doc"] = "Infinite-width tables at depth L. backend: series (Hermite expansion) | quadrature.";
    root["train"]["_doc"] =
        "Full-batch gradient descent. eta = 0 picks lr_bound/2. gram: ntk | features for the lambda_min diagnostic, "
        "recorded every eval_every steps.";
    root["gradcheck"]["_doc"] = "Central differences with step epsilon; every block must be within tolerance (relative).";
    root["experiment"]["_doc"] = "seeds: list of integers (empty = experiment default). overrides: experiment-specific keys.";
  }
  return root.dump(2);
}

Dataset build_dataset(RunConfig& cfg) {
  if (!cfg.data.idx_images.empty() || !cfg.data.idx_labels.empty()) {
    require(!cfg.data.idx_images.empty() && !cfg.data.idx_labels.empty(), ErrorCode::config,
            "data.idx_images and data.idx_labels must be set together");
    const RawImageSet raw = load_idx(cfg.data.idx_images, cfg.data.idx_labels);
    const std::uint32_t limit = cfg.data.idx_limit > 0 ? cfg.data.idx_limit : cfg.data.N;
    SphereConversion conv = to_sphere_dataset(raw, std::min(limit, raw.count));
    cfg.model.input_dim = static_cast<int>(conv.dataset.X.cols());
    return std::move(conv.dataset);
  }
  return synth_sphere(cfg.data.N, cfg.model.input_dim, cfg.data.seed, cfg.data.labels);
}

}  // namespace odentk

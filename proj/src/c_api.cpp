#include "odentk.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>
#include <string>

#include "odentk/config.hpp"
#include "odentk/error.hpp"
#include "odentk/experiments.hpp"
#include "odentk/parallel.hpp"
#include "odentk/serialize.hpp"
#include "odentk/studies.hpp"

using nlohmann::json;
using namespace odentk;

struct odentk_model {
  RunConfig cfg;
  Params params;
};

struct odentk_dataset {
  Dataset ds;
};

namespace {

thread_local std::string g_last_error;

// Raised by need(); maps onto ODENTK_E_NULL_ARGUMENT rather than an ErrorCode.
struct NullArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw Error(ErrorCode::resource, "out of memory");
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// Runs body and maps exceptions onto status codes; never lets one escape.
template <class Body>
odentk_status guarded(Body&& body) noexcept {
  try {
    g_last_error.clear();
    return body();
  } catch (const NullArgument& e) {
    g_last_error = e.what();
    return ODENTK_E_NULL_ARGUMENT;
  } catch (const Error& e) {
    g_last_error = e.what();
    return static_cast<odentk_status>(static_cast<int>(e.code()));
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return ODENTK_E_RESOURCE;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return ODENTK_E_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return ODENTK_E_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) throw NullArgument(std::string("null argument: ") + what);
}

RunConfig config_from(const char* config_json) {
  if (!config_json || !*config_json) return default_run_config();
  return parse_run_config(config_json);
}

bool want_csv(const char* format) {
  const std::string f = format ? format : "json";
  require(f == "csv" || f == "json", ErrorCode::usage, "format must be 'csv' or 'json'");
  return f == "csv";
}

std::string num(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  f.close();
  require(f.good(), ErrorCode::io, "cannot write '" + path.string() + "'");
}

void make_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCode::io, "cannot create directory '" + dir + "': " + ec.message());
}

GramKind gram_kind_from(const std::string& s) {
  for (GramKind k : {GramKind::nngp_limit, GramKind::ntk_limit, GramKind::empirical_nngp, GramKind::empirical_ntk})
    if (s == gram_kind_name(k)) return k;
  fail(ErrorCode::usage, "unknown kernel kind '" + s + "'");
}

}  // namespace

extern "C" {

const char* odentk_version(void) { return "1.0.0"; }

const char* odentk_status_name(odentk_status status) {
  switch (status) {
    case ODENTK_OK:
      return "ok";
    case ODENTK_E_ASSERTION:
      return "assertion";
    case ODENTK_E_NULL_ARGUMENT:
      return "null-argument";
    case ODENTK_E_INTERNAL:
      return "internal";
    default:
      if (status >= 1 && status <= 14) return error_code_name(static_cast<ErrorCode>(status));
      return "unknown";
  }
}

const char* odentk_last_error(void) { return g_last_error.c_str(); }

void odentk_free(char* s) { std::free(s); }

odentk_status odentk_set_threads(int threads) {
  return guarded([&] {
    require(threads >= 1, ErrorCode::config, "threads must be >= 1");
    set_default_threads(threads);
    return ODENTK_OK;
  });
}

odentk_status odentk_default_config(int annotated, char** out_json) {
  return guarded([&] {
    need(out_json, "out_json");
    *out_json = dup_string(run_config_to_json(default_run_config(), annotated != 0));
    return ODENTK_OK;
  });
}

odentk_status odentk_normalize_config(const char* config_json, char** out_json) {
  return guarded([&] {
    need(out_json, "out_json");
    *out_json = dup_string(run_config_to_json(config_from(config_json)));
    return ODENTK_OK;
  });
}

odentk_status odentk_model_create(const char* config_json, odentk_model** out) {
  return guarded([&] {
    need(out, "out");
    *out = nullptr;
    auto m = std::make_unique<odentk_model>();
    m->cfg = config_from(config_json);
    m->params = init_params(m->cfg.model);
    *out = m.release();
    return ODENTK_OK;
  });
}

odentk_status odentk_model_load_params(odentk_model* model, const char* path) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    std::uint64_t seed = 0;
    Params p = load_params(path, &seed);
    check_params(model->cfg.model, p);
    model->params = std::move(p);
    model->cfg.model.seed = seed;
    return ODENTK_OK;
  });
}

odentk_status odentk_model_save_params(const odentk_model* model, const char* path) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    save_params(path, model->params, model->cfg.model.seed);
    return ODENTK_OK;
  });
}

odentk_status odentk_model_shape(const odentk_model* model, int* width, int* input_dim) {
  return guarded([&] {
    need(model, "model");
    if (width) *width = model->cfg.model.width;
    if (input_dim) *input_dim = model->cfg.model.input_dim;
    return ODENTK_OK;
  });
}

odentk_status odentk_model_output(const odentk_model* model, const double* x, size_t d, double* out) {
  return guarded([&] {
    need(model, "model");
    need(x, "x");
    need(out, "out");
    require(d == static_cast<size_t>(model->cfg.model.input_dim), ErrorCode::shape, "x has the wrong length");
    const Vector xv = Eigen::Map<const Vector>(x, static_cast<Eigen::Index>(d));
    *out = model_output(model->cfg.model, model->params, xv, model->cfg.pipeline);
    return ODENTK_OK;
  });
}

void odentk_model_destroy(odentk_model* model) { delete model; }

odentk_status odentk_dataset_from_config(const char* config_json, odentk_dataset** out) {
  return guarded([&] {
    need(out, "out");
    *out = nullptr;
    RunConfig cfg = config_from(config_json);
    auto d = std::make_unique<odentk_dataset>();
    d->ds = build_dataset(cfg);
    *out = d.release();
    return ODENTK_OK;
  });
}

odentk_status odentk_dataset_size(const odentk_dataset* ds, size_t* n, size_t* d) {
  return guarded([&] {
    need(ds, "ds");
    if (n) *n = static_cast<size_t>(ds->ds.X.rows());
    if (d) *d = static_cast<size_t>(ds->ds.X.cols());
    return ODENTK_OK;
  });
}

odentk_status odentk_dataset_write_csv(const odentk_dataset* ds, const char* path) {
  return guarded([&] {
    need(ds, "ds");
    need(path, "path");
    std::ostringstream os;
    write_dataset_csv(ds->ds, os);
    write_text(path, os.str());
    return ODENTK_OK;
  });
}

void odentk_dataset_destroy(odentk_dataset* ds) { delete ds; }

odentk_status odentk_gradcheck(const char* config_json, const char* format, char** out_text) {
  return guarded([&] {
    need(out_text, "out_text");
    const bool csv = want_csv(format);
    RunConfig cfg = config_from(config_json);
    set_default_threads(cfg.threads);
    const Dataset ds = build_dataset(cfg);
    const Vector x = ds.X.row(0).transpose();
    const Params p = init_params(cfg.model);
    const bool discrete = cfg.pipeline.kind == Pipeline::Kind::discrete;
    const Grads g = model_grad(cfg.model, p, x, cfg.pipeline);
    const Grads fd = grad_fd(cfg.model, p, x, cfg.gradcheck.epsilon,
                             discrete ? FdTarget::discrete_map(cfg.pipeline.L) : FdTarget::continuous(), cfg.threads);
    const GradReport r = compare_grads(g, fd);
    bool ok = true;
    for (const auto& [name, b] : r.per_block) ok = ok && b.rel <= cfg.gradcheck.tolerance;
    if (csv) {
      std::string s = "block,abs_diff,rel_diff,pass\n";
      for (const auto& [name, b] : r.per_block)
        s += name + "," + num(b.abs) + "," + num(b.rel) + "," + (b.rel <= cfg.gradcheck.tolerance ? "true" : "false") +
             "\n";
      *out_text = dup_string(s);
    } else {
      json j = json::parse(r.to_json());
      j["pipeline"] = cfg.pipeline.describe();
      j["epsilon"] = cfg.gradcheck.epsilon;
      j["tolerance"] = cfg.gradcheck.tolerance;
      j["passed"] = ok;
      *out_text = dup_string(j.dump(2) + "\n");
    }
    return ok ? ODENTK_OK : ODENTK_E_ASSERTION;
  });
}

odentk_status odentk_kernel(const char* config_json, const char* kind, const char* out_dir, const char* format,
                            char** out_text) {
  return guarded([&] {
    need(out_text, "out_text");
    const bool csv = want_csv(format);
    RunConfig cfg = config_from(config_json);
    set_default_threads(cfg.threads);
    const Dataset ds = build_dataset(cfg);
    const GramKind k = gram_kind_from(kind && *kind ? kind : "ntk-limit");
    GramRequest rq;
    rq.L = cfg.kernel_L;
    rq.kernel = cfg.kernel;
    rq.pipeline = cfg.pipeline;
    rq.threads = cfg.threads;
    const Params p = init_params(cfg.model);
    rq.params = &p;
    if (k == GramKind::empirical_nngp) {
      rq.seeds = cfg.seeds.empty() ? seed_range(cfg.model.seed, 64) : cfg.seeds;
    }
    const GramMatrix g = gram(cfg.model, ds.X, k, rq);
    std::ostringstream gcsv;
    write_gram_csv(g, gcsv);
    json j;
    j["kind"] = gram_kind_name(k);
    j["meta"] = json::parse(g.meta);
    j["N"] = g.values.rows();
    j["min_eig"] = min_eig(g);
    std::vector<std::vector<double>> rows(g.values.rows());
    for (int i = 0; i < g.values.rows(); ++i)
      for (int c = 0; c < g.values.cols(); ++c) rows[i].push_back(g.values(i, c));
    j["values"] = rows;
    if (out_dir && *out_dir) {
      make_dir(out_dir);
      write_text(std::filesystem::path(out_dir) / "gram.csv", gcsv.str());
      write_text(std::filesystem::path(out_dir) / "gram.json", j.dump(2) + "\n");
    }
    *out_text = dup_string(csv ? gcsv.str() : j.dump(2) + "\n");
    return ODENTK_OK;
  });
}

odentk_status odentk_train(const char* config_json, const char* out_dir, const char* format, char** out_text) {
  return guarded([&] {
    need(out_text, "out_text");
    const bool csv = want_csv(format);
    RunConfig cfg = config_from(config_json);
    set_default_threads(cfg.threads);
    const Dataset ds = build_dataset(cfg);
    TrainOptions opts = cfg.train;
    opts.pipeline = cfg.pipeline;
    opts.threads = cfg.threads;
    const TrainHistory h = train(cfg.model, ds, opts);
    std::ostringstream hist;
    write_history_csv(h, hist, true);
    json summary = json::parse(history_summary_json(h));
    summary["pipeline"] = cfg.pipeline.describe();
    summary["lr_bound"] = lr_bound(ds);
    summary["config"] = json::parse(run_config_to_json(cfg));
    if (out_dir && *out_dir) {
      make_dir(out_dir);
      const std::filesystem::path dir(out_dir);
      write_text(dir / "history.csv", hist.str());
      write_text(dir / "summary.json", summary.dump(2) + "\n");
      save_params((dir / "params.bin").string(), h.final_params, cfg.model.seed);
      json pm;
      pm["format"] = "ODENTKP1";
      pm["width"] = cfg.model.width;
      pm["input_dim"] = cfg.model.input_dim;
      pm["seed"] = cfg.model.seed;
      pm["sha256"] = sha256_file((dir / "params.bin").string());
      pm["config"] = json::parse(run_config_to_json(cfg));
      write_text(dir / "params.json", pm.dump(2) + "\n");
    }
    *out_text = dup_string(csv ? hist.str() : summary.dump(2) + "\n");
    return ODENTK_OK;
  });
}

odentk_status odentk_experiment(const char* name, const char* config_json, long long base_seed, const char* out_dir,
                                const char* format, char** out_text) {
  return guarded([&] {
    need(name, "name");
    need(out_text, "out_text");
    const bool csv = want_csv(format);
    if (!is_experiment_name(name)) {
      run_experiment(ExperimentSpec{name});  // raises the usage error with the list of names
    }
    const RunConfig cfg = config_from(config_json);
    set_default_threads(cfg.threads);
    ExperimentSpec spec;
    spec.name = name;
    spec.overrides = cfg.overrides;
    spec.seeds = cfg.seeds;
    if (base_seed >= 0) {
      spec.base_seed = static_cast<std::uint64_t>(base_seed);
      spec.seeds.clear();
    }
    spec.output_dir = out_dir && *out_dir ? out_dir : (std::string("runs/") + name);
    spec.threads = cfg.threads;
    const RunManifest m = run_experiment(spec);
    if (csv) {
      std::string s = "assertion,passed,detail\n";
      for (const Assertion& a : m.assertions) {
        std::string detail = a.detail;
        for (char& c : detail)
          if (c == ',' || c == '\n') c = ';';
        s += a.name + "," + (a.passed ? "true" : "false") + "," + detail + "\n";
      }
      *out_text = dup_string(s);
    } else {
      *out_text = dup_string(m.to_json() + "\n");
    }
    if (!m.passed()) {
      g_last_error = "experiment assertions failed";
      return ODENTK_E_ASSERTION;
    }
    return ODENTK_OK;
  });
}

odentk_status odentk_experiment_names(char** out_text) {
  return guarded([&] {
    need(out_text, "out_text");
    std::string s;
    for (std::string_view n : experiment_names()) s += std::string(n) + "\n";
    *out_text = dup_string(s);
    return ODENTK_OK;
  });
}

odentk_status odentk_parse_idx(const char* images_path, const char* labels_path, const char* format, char** out_text) {
  return guarded([&] {
    need(images_path, "images_path");
    need(labels_path, "labels_path");
    need(out_text, "out_text");
    const bool csv = want_csv(format);
    const RawImageSet raw = load_idx(images_path, labels_path);
    std::array<std::uint64_t, 256> hist{};
    for (std::uint8_t l : raw.labels) ++hist[l];
    if (csv) {
      std::string s = "count,rows,cols\n" + std::to_string(raw.count) + "," + std::to_string(raw.rows) + "," +
                      std::to_string(raw.cols) + "\n";
      *out_text = dup_string(s);
    } else {
      json j;
      j["count"] = raw.count;
      j["rows"] = raw.rows;
      j["cols"] = raw.cols;
      json labels = json::object();
      for (int l = 0; l < 256; ++l)
        if (hist[l]) labels[std::to_string(l)] = hist[l];
      j["label_counts"] = labels;
      *out_text = dup_string(j.dump(2) + "\n");
    }
    return ODENTK_OK;
  });
}

}  // extern "C"

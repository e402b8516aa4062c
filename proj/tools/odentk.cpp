// Command-line front end. Talks to the library only through odentk.h.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>

#include "odentk.h"

namespace {

// Process exit codes.
constexpr int kExitPass = 0;
constexpr int kExitAssertion = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitRuntime = 4;

const char* kSynopsis =
    "usage: odentk <command> [options]\n"
    "commands:\n"
    "  init-config            print the annotated default configuration\n"
    "  gradcheck              pipeline gradient against central differences\n"
    "  kernel [--kind K]      Gram matrix (nngp-limit | ntk-limit | empirical-nngp | empirical-ntk)\n"
    "  train                  full-batch gradient descent with diagnostics\n"
    "  experiment <name>      run a named experiment (see 'experiment --list')\n"
    "  parse-idx <img> <lbl>  validate and summarize an IDX image/label pair\n"
    "global options: --config <path> --seed <int> --out <dir> --threads <int> --format csv|json\n";

int exit_code(odentk_status s) {
  switch (s) {
    case ODENTK_OK:
      return kExitPass;
    case ODENTK_E_ASSERTION:
      return kExitAssertion;
    case ODENTK_E_USAGE:
    case ODENTK_E_CONFIG:
      return kExitUsage;
    case ODENTK_E_NUMERIC:
    case ODENTK_E_DIVERGENCE:
    case ODENTK_E_SOLVER:
    case ODENTK_E_DOMAIN:
      return kExitNumeric;
    default:
      return kExitRuntime;
  }
}

// Prints the text result (if any) and maps the status onto an exit code.
// text is taken by reference so it is read after the producing call returns.
int finish(odentk_status s, char*& text) {
  if (text) {
    std::fputs(text, stdout);
    odentk_free(text);
  }
  if (s != ODENTK_OK) {
    std::fprintf(stderr, "odentk: %s: %s\n", odentk_status_name(s), odentk_last_error());
    if (s == ODENTK_E_USAGE) std::fputs(kSynopsis, stderr);
  }
  return exit_code(s);
}

struct Globals {
  std::string config_path;
  std::optional<long long> seed;
  std::string out;
  std::optional<int> threads;
  std::string format = "json";
};

// Loads the config file (or defaults), then applies --seed and --threads.
std::optional<std::string> resolve_config(const Globals& g, bool seed_into_model) {
  std::string text = "{}";
  if (!g.config_path.empty()) {
    std::ifstream f(g.config_path, std::ios::binary);
    if (!f) {
      std::fprintf(stderr, "odentk: cannot read config '%s'\n", g.config_path.c_str());
      return std::nullopt;
    }
    std::stringstream ss;
    ss << f.rdbuf();
    text = ss.str();
  }
  char* canonical = nullptr;
  const odentk_status s = odentk_normalize_config(text.c_str(), &canonical);
  if (s != ODENTK_OK) {
    std::fprintf(stderr, "odentk: %s: %s\n", odentk_status_name(s), odentk_last_error());
    return std::nullopt;
  }
  nlohmann::json j = nlohmann::json::parse(canonical);
  odentk_free(canonical);
  if (seed_into_model && g.seed) j["model"]["seed"] = *g.seed;
  if (g.threads) j["threads"] = *g.threads;
  return j.dump();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural ODE kernels, gradients and training diagnostics", "odentk"};
  app.require_subcommand(1);
  app.fallthrough(true);
  Globals g;
  app.add_option("--config", g.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "model seed (experiments: base seed)")->check(CLI::NonNegativeNumber);
  app.add_option("--out", g.out, "output directory");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--format", g.format, "stdout format")->check(CLI::IsMember({"csv", "json"}));

  auto* init = app.add_subcommand("init-config", "print the annotated default configuration");
  auto* gradcheck = app.add_subcommand("gradcheck", "pipeline gradient against central differences");
  auto* kernel = app.add_subcommand("kernel", "Gram matrix over the configured dataset");
  std::string kind = "ntk-limit";
  kernel->add_option("--kind", kind, "gram kind")
      ->check(CLI::IsMember({"nngp-limit", "ntk-limit", "empirical-nngp", "empirical-ntk"}));
  auto* train = app.add_subcommand("train", "full-batch gradient descent");
  auto* experiment = app.add_subcommand("experiment", "run a named experiment");
  std::string exp_name;
  bool list = false;
  experiment->add_option("name", exp_name, "experiment name");
  experiment->add_flag("--list", list, "print experiment names");
  auto* parse_idx = app.add_subcommand("parse-idx", "validate an IDX image/label pair");
  std::string images, labels;
  parse_idx->add_option("images", images, "image file")->required();
  parse_idx->add_option("labels", labels, "label file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::fprintf(stderr, "odentk: %s\n%s", e.what(), kSynopsis);
    return kExitUsage;
  }

  char* text = nullptr;
  if (*init) {
    const odentk_status s = odentk_default_config(1, &text);
    if (s == ODENTK_OK && !g.out.empty()) {
      std::error_code ec;
      std::filesystem::create_directories(g.out, ec);
      const std::string path = (std::filesystem::path(g.out) / "config.json").string();
      std::ofstream f(path, std::ios::binary);
      f << text;
      if (ec || !f) {
        odentk_free(text);
        std::fprintf(stderr, "odentk: cannot write '%s'\n", path.c_str());
        return kExitRuntime;
      }
    }
    return finish(s, text);
  }
  if (*parse_idx) return finish(odentk_parse_idx(images.c_str(), labels.c_str(), g.format.c_str(), &text), text);
  if (*experiment && list) return finish(odentk_experiment_names(&text), text);
  if (*experiment && exp_name.empty()) {
    std::fprintf(stderr, "odentk: experiment needs a name\n%s", kSynopsis);
    return kExitUsage;
  }

  const auto config = resolve_config(g, !*experiment);
  if (!config) return kExitUsage;
  if (*gradcheck) return finish(odentk_gradcheck(config->c_str(), g.format.c_str(), &text), text);
  if (*kernel) return finish(odentk_kernel(config->c_str(), kind.c_str(), g.out.c_str(), g.format.c_str(), &text), text);
  if (*train) return finish(odentk_train(config->c_str(), g.out.c_str(), g.format.c_str(), &text), text);
  if (*experiment) {
    const long long seed = g.seed ? *g.seed : -1;
    return finish(
        odentk_experiment(exp_name.c_str(), config->c_str(), seed, g.out.c_str(), g.format.c_str(), &text), text);
  }
  std::fputs(kSynopsis, stderr);
  return kExitUsage;
}

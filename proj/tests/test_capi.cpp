#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <string>

#include "odentk.h"

namespace fs = std::filesystem;

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  odentk_free(s);
  return out;
}

fs::path scratch(const char* name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("null arguments and bad input map to status codes") {
  CHECK(odentk_default_config(0, nullptr) == ODENTK_E_NULL_ARGUMENT);
  CHECK(std::string(odentk_last_error()).find("out_json") != std::string::npos);
  char* out = nullptr;
  CHECK(odentk_normalize_config(R"({"model":{"nope":1}})", &out) == ODENTK_E_CONFIG);
  CHECK(out == nullptr);
  CHECK(odentk_experiment("no-such-experiment", "", -1, "", "json", &out) == ODENTK_E_USAGE);
  CHECK(odentk_gradcheck("", "xml", &out) == ODENTK_E_USAGE);
  CHECK(odentk_parse_idx("/nonexistent/a", "/nonexistent/b", "json", &out) == ODENTK_E_IO);
  CHECK(std::string(odentk_status_name(ODENTK_E_ASSERTION)) == "assertion");
  CHECK(odentk_default_config(0, &out) == ODENTK_OK);
  take(out);
  CHECK(std::string(odentk_last_error()).empty());
}

TEST_CASE("model handle lifecycle") {
  const char* cfg = R"({"model":{"width":6,"input_dim":3,"seed":4},"pipeline":{"kind":"discrete","L":8}})";
  odentk_model* m = nullptr;
  REQUIRE(odentk_model_create(cfg, &m) == ODENTK_OK);
  int n = 0, d = 0;
  CHECK(odentk_model_shape(m, &n, &d) == ODENTK_OK);
  CHECK(n == 6);
  CHECK(d == 3);
  const double x[3] = {0.6, 0.8, 0.0};
  double f1 = 0, f2 = 0;
  CHECK(odentk_model_output(m, x, 3, &f1) == ODENTK_OK);
  CHECK(odentk_model_output(m, x, 2, &f1) == ODENTK_E_SHAPE);
  const fs::path p = scratch("odentk_capi_params.bin");
  CHECK(odentk_model_save_params(m, p.c_str()) == ODENTK_OK);
  odentk_model* m2 = nullptr;
  REQUIRE(odentk_model_create(R"({"model":{"width":6,"input_dim":3,"seed":99}})", &m2) == ODENTK_OK);
  CHECK(odentk_model_load_params(m2, p.c_str()) == ODENTK_OK);
  CHECK(odentk_model_output(m2, x, 3, &f2) == ODENTK_OK);
  CHECK(odentk_model_output(m, x, 3, &f1) == ODENTK_OK);
  odentk_model* m3 = nullptr;
  REQUIRE(odentk_model_create(R"({"model":{"width":5,"input_dim":3}})", &m3) == ODENTK_OK);
  CHECK(odentk_model_load_params(m3, p.c_str()) != ODENTK_OK);
  odentk_model_destroy(m3);
  odentk_model_destroy(m2);
  odentk_model_destroy(m);
  odentk_model_destroy(nullptr);
  fs::remove(p);
}

TEST_CASE("gradcheck, kernel and train entry points") {
  const char* cfg = R"({"model":{"width":10,"input_dim":4},"data":{"N":5},"pipeline":{"kind":"discrete","L":8},
                         "kernel":{"L":16},"train":{"steps":5,"eval_every":1}})";
  char* out = nullptr;
  REQUIRE(odentk_gradcheck(cfg, "json", &out) == ODENTK_OK);
  CHECK(nlohmann::json::parse(take(out))["passed"] == true);

  const fs::path dir = scratch("odentk_capi_kernel");
  REQUIRE(odentk_kernel(cfg, "ntk-limit", dir.c_str(), "csv", &out) == ODENTK_OK);
  take(out);
  CHECK(fs::exists(dir / "gram.csv"));
  CHECK(fs::exists(dir / "gram.json"));
  CHECK(odentk_kernel(cfg, "bogus", "", "csv", &out) == ODENTK_E_USAGE);

  const fs::path tdir = scratch("odentk_capi_train");
  REQUIRE(odentk_train(cfg, tdir.c_str(), "json", &out) == ODENTK_OK);
  take(out);
  for (const char* f : {"history.csv", "summary.json", "params.bin", "params.json"}) CHECK(fs::exists(tdir / f));
  fs::remove_all(dir);
  fs::remove_all(tdir);
}

TEST_CASE("experiment dry run writes header-only tables and a manifest") {
  const fs::path dir = scratch("odentk_capi_dry");
  char* out = nullptr;
  REQUIRE(odentk_experiment("depth-convergence", R"({"experiment":{"overrides":{"steps":0}}})", 3, dir.c_str(),
                            "json", &out) == ODENTK_OK);
  const auto m = nlohmann::json::parse(take(out));
  CHECK(m["dry_run"] == true);
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(fs::file_size(dir / "depth_slopes.csv") == std::string("seed,output_slope,grad_slope\n").size());
  CHECK(odentk_experiment("depth-convergence", R"({"experiment":{"overrides":{"typo":1}}})", 3, dir.c_str(),
                          "json", &out) == ODENTK_E_CONFIG);
  fs::remove_all(dir);
}

TEST_CASE("experiments are reproducible for a fixed seed") {
  const fs::path a = scratch("odentk_capi_rep_a"), b = scratch("odentk_capi_rep_b");
  const char* cfg = R"({"experiment":{"overrides":{"seeds_count":4}}})";
  char* out = nullptr;
  REQUIRE(odentk_experiment("horizon-scaling", cfg, 5, a.c_str(), "json", &out) == ODENTK_OK);
  take(out);
  REQUIRE(odentk_experiment("horizon-scaling", R"({"threads":2,"experiment":{"overrides":{"seeds_count":4}}})", 5,
                            b.c_str(), "json", &out) == ODENTK_OK);
  take(out);
  for (const auto& e : fs::directory_iterator(a)) {
    if (e.path().filename() == "manifest.json") continue;
    std::ifstream fa(e.path()), fb(b / e.path().filename());
    const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
    CHECK(sa == sb);
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "odentk/data_io.hpp"
#include "odentk/gradients.hpp"
#include "odentk/kernels.hpp"
#include "odentk/model.hpp"
#include "odentk/solvers.hpp"
#include "odentk/training.hpp"

namespace odentk {

struct DataSpec {
  int N = 16;
  LabelRule labels = LabelRule::random_pm1;
  std::uint64_t seed = 0;
  // Optional IDX inputs; when both are set they replace the synthetic sphere data.
  std::string idx_images;
  std::string idx_labels;
  int idx_limit = 0;  // 0 means N
};

struct GradcheckSpec {
  double epsilon = 1e-5;
  double tolerance = 1e-5;  // blockwise relative error gate
};

// Everything the CLI and the experiment runner read from a config file.
// Unknown keys are config errors; missing keys keep their defaults.
struct RunConfig {
  ModelConfig model;
  Pipeline pipeline = Pipeline::discrete(64);
  DataSpec data;
  int kernel_L = 256;
  KernelOptions kernel;
  TrainOptions train;
  GradcheckSpec gradcheck;
  std::vector<std::uint64_t> seeds;  // experiment seeds; empty picks the experiment default
  std::string overrides = "{}";      // JSON object of experiment-specific keys
  int threads = 1;
};

RunConfig default_run_config();
RunConfig parse_run_config(const std::string& json_text);
// Canonical JSON; `annotated` adds a "_doc" string to every section.
std::string run_config_to_json(const RunConfig& cfg, bool annotated = false);

// Builds the dataset described by cfg.data for cfg.model.input_dim. IDX data
// sets input_dim from the image size.
Dataset build_dataset(RunConfig& cfg);

}  // namespace odentk

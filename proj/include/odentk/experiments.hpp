#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace odentk {

// Names accepted by run_experiment, in documentation order.
const std::vector<std::string_view>& experiment_names();
bool is_experiment_name(std::string_view name);

struct ExperimentSpec {
  std::string name;
  // JSON object of override keys (model fields, grids, counts); unknown keys are config errors.
  std::string overrides = "{}";
  // Explicit seeds; empty uses seed_range(base_seed, default count).
  std::vector<std::uint64_t> seeds;
  std::uint64_t base_seed = 0;
  std::string output_dir = ".";
  int threads = 1;
};

struct Assertion {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ArtifactRecord {
  std::string path;  // relative to output_dir
  std::string sha256;
  std::uint64_t bytes = 0;
};

struct RunManifest {
  std::string experiment;
  std::string spec_json;    // echo of the resolved spec
  std::string config_hash;  // git blob id of spec_json
  std::string started;      // ISO 8601 UTC
  std::string finished;
  bool dry_run = false;
  std::vector<ArtifactRecord> files;
  std::vector<Assertion> assertions;
  std::string summary_json = "{}";  // headline numbers
  double wall_seconds = 0.0;

  bool passed() const;
  std::string to_json() const;
};

// Writes the CSVs and manifest.json into spec.output_dir (created if missing).
// Usage error on an unknown name; assertion failures are reported in the
// manifest, not thrown.
RunManifest run_experiment(const ExperimentSpec& spec);

// Every listed file exists under dir and matches its checksum.
bool verify_manifest(const RunManifest& m, const std::string& dir);

}  // namespace odentk

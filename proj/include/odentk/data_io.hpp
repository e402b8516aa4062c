#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "odentk/model.hpp"

namespace odentk {

struct Dataset {
  Matrix X;  // N x d, one example per row
  Vector y;  // N
  std::string name;
  bool unit_norm = false;  // rows normalized onto the sphere
  std::string meta;        // JSON object with provenance

  Eigen::Index size() const noexcept { return X.rows(); }
};

// Assumption checks: unit rows (1e-10), pairwise distance > 1e-8, |y_i| <= y_bound.
struct DatasetCheck {
  double max_norm_error = 0.0;
  double min_pair_distance = 0.0;
  double max_abs_label = 0.0;
  bool unit_rows = false;
  bool distinct = false;
  bool labels_bounded = false;
  bool ok() const { return unit_rows && distinct && labels_bounded; }
};
DatasetCheck check_dataset(const Dataset& ds, double y_bound = 1.0);

enum class LabelRule { random_pm1, linear_teacher, fourier_teacher };
LabelRule label_rule_from_name(std::string_view name);
const char* label_rule_name(LabelRule r) noexcept;

// Rows Gaussian then normalized; labels: random +-1, w.x with |w| = 1, or
// sin(pi w.x) for a unit teacher w.
Dataset synth_sphere(int N, int d, std::uint64_t seed, LabelRule rule);

struct RawImageSet {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols
  std::vector<std::uint8_t> labels;  // count
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

// In-memory parsers; these never read past the buffer and report typed errors
// (format: bad magic, length: truncated payload, consistency: count mismatch).
RawImageSet parse_idx(const std::vector<std::uint8_t>& images, const std::vector<std::uint8_t>& labels);
RawImageSet load_idx(const std::string& images_path, const std::string& labels_path);
std::vector<std::uint8_t> encode_idx_images(const RawImageSet& raw);
std::vector<std::uint8_t> encode_idx_labels(const RawImageSet& raw);
// Binary file helpers (io error on failure).
std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);

// Default label map: even digits -> -1, odd -> +1.
double parity_label(std::uint8_t label);

struct SphereConversion {
  Dataset dataset;
  std::vector<std::uint32_t> dropped;  // indices of all-zero images
};

// Flattens the first `limit` images, scales each to unit norm (no centering)
// and maps labels. All-zero images are dropped; input error if none remain.
SphereConversion to_sphere_dataset(const RawImageSet& raw, std::uint32_t limit,
                                   const std::function<double(std::uint8_t)>& label_map = parity_label);

// CSV: a "# {json}" header line with d, N and the normalization flag, then
// columns y, x_0..x_{d-1}.
void write_dataset_csv(const Dataset& ds, std::ostream& out);
Dataset read_dataset_csv(std::istream& in);

}  // namespace odentk

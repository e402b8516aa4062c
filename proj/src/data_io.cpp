#include "odentk/data_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <iterator>
#include <limits>
#include <json.hpp>
#include <numbers>
#include <ostream>
#include <sstream>

#include "odentk/error.hpp"
#include "odentk/rng.hpp"

namespace odentk {

namespace {

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08X", v);
  return buf;
}

// Bounds-checked big-endian reader over a byte buffer.
class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, const char* what) : bytes_(bytes), what_(what) {}

  std::uint32_t u32() {
    need(4);
    const std::uint32_t v = (std::uint32_t{bytes_[pos_]} << 24) | (std::uint32_t{bytes_[pos_ + 1]} << 16) |
                            (std::uint32_t{bytes_[pos_ + 2]} << 8) | std::uint32_t{bytes_[pos_ + 3]};
    pos_ += 4;
    return v;
  }

  void need(std::uint64_t n) const {
    if (bytes_.size() - pos_ < n)
      fail(ErrorCode::length, std::string(what_) + ": truncated (need " + std::to_string(n) + " more bytes at offset " +
                                  std::to_string(pos_) + ", have " + std::to_string(bytes_.size() - pos_) + ")");
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  const char* what_;
  std::size_t pos_ = 0;
};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

DatasetCheck check_dataset(const Dataset& ds, double y_bound) {
  require(ds.X.rows() == ds.y.size(), ErrorCode::shape, "X and y disagree on the number of examples");
  DatasetCheck c;
  for (Eigen::Index i = 0; i < ds.X.rows(); ++i) c.max_norm_error = std::max(c.max_norm_error, std::abs(ds.X.row(i).norm() - 1.0));
  c.min_pair_distance = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < ds.X.rows(); ++i)
    for (Eigen::Index j = i + 1; j < ds.X.rows(); ++j)
      c.min_pair_distance = std::min(c.min_pair_distance, (ds.X.row(i) - ds.X.row(j)).norm());
  c.max_abs_label = ds.y.size() ? ds.y.cwiseAbs().maxCoeff() : 0.0;
  c.unit_rows = c.max_norm_error <= 1e-10;
  c.distinct = c.min_pair_distance > 1e-8;
  c.labels_bounded = c.max_abs_label <= y_bound;
  return c;
}

LabelRule label_rule_from_name(std::string_view name) {
  if (name == "random-pm1") return LabelRule::random_pm1;
  if (name == "linear-teacher") return LabelRule::linear_teacher;
  if (name == "fourier-teacher") return LabelRule::fourier_teacher;
  fail(ErrorCode::config, "unknown label rule '" + std::string(name) + "'");
}

const char* label_rule_name(LabelRule r) noexcept {
  switch (r) {
    case LabelRule::random_pm1:
      return "random-pm1";
    case LabelRule::linear_teacher:
      return "linear-teacher";
    case LabelRule::fourier_teacher:
      return "fourier-teacher";
  }
  return "?";
}

Dataset synth_sphere(int N, int d, std::uint64_t seed, LabelRule rule) {
  require(N >= 1, ErrorCode::config, "N must be >= 1");
  require(d >= 2, ErrorCode::config, "d must be >= 2");
  require(N <= 1'000'000, ErrorCode::resource, "N exceeds the 1e6 guard");
  Dataset ds;
  ds.X.resize(N, d);
  ds.y.resize(N);
  RandomStream xs(seed, streams::dataset_inputs);
  for (int i = 0; i < N; ++i) {
    double norm = 0.0;
    while (norm == 0.0) {
      for (int j = 0; j < d; ++j) ds.X(i, j) = xs.normal();
      norm = ds.X.row(i).norm();
    }
    ds.X.row(i) /= norm;
  }
  Vector w(d);
  RandomStream ws(seed, streams::dataset_teacher);
  for (int j = 0; j < d; ++j) w[j] = ws.normal();
  w /= w.norm();
  RandomStream ls(seed, streams::dataset_labels);
  for (int i = 0; i < N; ++i) {
    const double proj = std::clamp(ds.X.row(i).dot(w), -1.0, 1.0);
    switch (rule) {
      case LabelRule::random_pm1:
        ds.y[i] = ls.uniform() < 0.5 ? -1.0 : 1.0;
        break;
      case LabelRule::linear_teacher:
        ds.y[i] = proj;
        break;
      case LabelRule::fourier_teacher:
        ds.y[i] = std::sin(std::numbers::pi * proj);
        break;
    }
  }
  ds.unit_norm = true;
  ds.name = "synth-sphere";
  ds.meta = nlohmann::json{{"source", "synth_sphere"}, {"N", N}, {"d", d}, {"seed", seed}, {"label_rule", label_rule_name(rule)}}.dump();
  const DatasetCheck c = check_dataset(ds);
  require(c.distinct, ErrorCode::consistency, "synthetic rows are not pairwise distinct");
  return ds;
}

RawImageSet parse_idx(const std::vector<std::uint8_t>& images, const std::vector<std::uint8_t>& labels) {
  RawImageSet raw;
  Reader ri(images, "image file");
  const std::uint32_t im_magic = ri.u32();
  require(im_magic == kIdxImageMagic, ErrorCode::format,
          "image file: expected magic 0x00000803, observed " + hex32(im_magic));
  raw.count = ri.u32();
  raw.rows = ri.u32();
  raw.cols = ri.u32();
  // count * rows * cols can exceed 64 bits; compare by division first.
  const std::uint64_t per_image = std::uint64_t{raw.rows} * raw.cols;
  if (per_image > 0 && raw.count > ri.remaining() / per_image)
    fail(ErrorCode::length, "image file: header declares " + std::to_string(raw.count) + " images of " +
                                std::to_string(raw.rows) + "x" + std::to_string(raw.cols) + " but only " +
                                std::to_string(ri.remaining()) + " payload bytes follow");
  const std::uint64_t pixels = raw.count * per_image;
  ri.need(pixels);
  require(ri.remaining() == pixels, ErrorCode::format,
          "image file: " + std::to_string(ri.remaining() - pixels) + " trailing bytes after the payload");

  Reader rl(labels, "label file");
  const std::uint32_t lb_magic = rl.u32();
  require(lb_magic == kIdxLabelMagic, ErrorCode::format,
          "label file: expected magic 0x00000801, observed " + hex32(lb_magic));
  const std::uint32_t lcount = rl.u32();
  rl.need(lcount);
  require(rl.remaining() == lcount, ErrorCode::format,
          "label file: " + std::to_string(rl.remaining() - lcount) + " trailing bytes after the payload");
  require(lcount == raw.count, ErrorCode::consistency,
          "image count " + std::to_string(raw.count) + " does not match label count " + std::to_string(lcount));

  raw.pixels.assign(images.begin() + static_cast<std::ptrdiff_t>(ri.pos()), images.end());
  raw.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(rl.pos()), labels.end());
  return raw;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io, "cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  require(!in.bad(), ErrorCode::io, "read error on '" + path + "'");
  return bytes;
}

void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::io, "cannot create '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::io, "write error on '" + path + "'");
}

RawImageSet load_idx(const std::string& images_path, const std::string& labels_path) {
  return parse_idx(read_file_bytes(images_path), read_file_bytes(labels_path));
}

std::vector<std::uint8_t> encode_idx_images(const RawImageSet& raw) {
  require(raw.pixels.size() == std::uint64_t{raw.count} * raw.rows * raw.cols, ErrorCode::consistency,
          "pixel buffer does not match count * rows * cols");
  std::vector<std::uint8_t> out;
  out.reserve(16 + raw.pixels.size());
  put_u32(out, kIdxImageMagic);
  put_u32(out, raw.count);
  put_u32(out, raw.rows);
  put_u32(out, raw.cols);
  out.insert(out.end(), raw.pixels.begin(), raw.pixels.end());
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(const RawImageSet& raw) {
  require(raw.labels.size() == raw.count, ErrorCode::consistency, "label buffer does not match count");
  std::vector<std::uint8_t> out;
  out.reserve(8 + raw.labels.size());
  put_u32(out, kIdxLabelMagic);
  put_u32(out, raw.count);
  out.insert(out.end(), raw.labels.begin(), raw.labels.end());
  return out;
}

double parity_label(std::uint8_t label) { return label % 2 == 0 ? -1.0 : 1.0; }

SphereConversion to_sphere_dataset(const RawImageSet& raw, std::uint32_t limit,
                                   const std::function<double(std::uint8_t)>& label_map) {
  require(limit <= raw.count, ErrorCode::input, "limit exceeds the number of images");
  const std::size_t d = std::size_t{raw.rows} * raw.cols;
  require(raw.pixels.size() >= std::size_t{limit} * d && raw.labels.size() >= limit, ErrorCode::consistency,
          "image set buffers are shorter than its header");
  SphereConversion conv;
  std::vector<std::uint32_t> kept;
  for (std::uint32_t i = 0; i < limit; ++i) {
    bool nonzero = false;
    for (std::size_t j = 0; j < d && !nonzero; ++j) nonzero = raw.pixels[i * d + j] != 0;
    (nonzero ? kept : conv.dropped).push_back(i);
  }
  require(!kept.empty(), ErrorCode::input, "dataset is empty: every selected image is all-zero");
  Dataset& ds = conv.dataset;
  ds.X.resize(static_cast<Eigen::Index>(kept.size()), static_cast<Eigen::Index>(d));
  ds.y.resize(static_cast<Eigen::Index>(kept.size()));
  for (std::size_t r = 0; r < kept.size(); ++r) {
    const std::uint32_t i = kept[r];
    for (std::size_t j = 0; j < d; ++j) ds.X(r, j) = raw.pixels[i * d + j] / 255.0;
    ds.X.row(r) /= ds.X.row(r).norm();
    const double y = label_map(raw.labels[i]);
    require(std::isfinite(y) && std::abs(y) <= 1.0, ErrorCode::input, "label map must return values in [-1, 1]");
    ds.y[r] = y;
  }
  ds.unit_norm = true;
  ds.name = "idx";
  ds.meta = nlohmann::json{{"source", "idx"}, {"rows", raw.rows}, {"cols", raw.cols}, {"limit", limit},
                           {"dropped", conv.dropped.size()}}
                .dump();
  return conv;
}

void write_dataset_csv(const Dataset& ds, std::ostream& out) {
  require(ds.X.rows() == ds.y.size(), ErrorCode::shape, "X and y disagree on the number of examples");
  nlohmann::json header{{"d", ds.X.cols()}, {"N", ds.X.rows()}, {"normalized", ds.unit_norm}, {"name", ds.name}};
  out << "# " << header.dump() << '\n';
  out << 'y';
  for (Eigen::Index j = 0; j < ds.X.cols(); ++j) out << ",x_" << j;
  out << '\n';
  out.precision(17);
  for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
    out << ds.y[i];
    for (Eigen::Index j = 0; j < ds.X.cols(); ++j) out << ',' << ds.X(i, j);
    out << '\n';
  }
}

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line.rfind("# ", 0) == 0, ErrorCode::format,
          "dataset CSV must start with a '# {json}' header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line.substr(2));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::format, std::string("dataset CSV header is not JSON: ") + e.what());
  }
  require(header.contains("d") && header.contains("N"), ErrorCode::format, "dataset CSV header lacks d or N");
  const long d = header["d"].get<long>(), N = header["N"].get<long>();
  require(d >= 1 && N >= 0, ErrorCode::format, "dataset CSV header has invalid sizes");
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::length, "dataset CSV lacks its column header");
  Dataset ds;
  ds.X.resize(N, d);
  ds.y.resize(N);
  for (long i = 0; i < N; ++i) {
    require(static_cast<bool>(std::getline(in, line)), ErrorCode::length, "dataset CSV has fewer rows than N");
    std::stringstream ss(line);
    std::string cell;
    for (long j = -1; j < d; ++j) {
      require(static_cast<bool>(std::getline(ss, cell, ',')), ErrorCode::format, "dataset CSV row is too short");
      double v = 0.0;
      try {
        v = std::stod(cell);
      } catch (const std::exception&) {
        fail(ErrorCode::format, "dataset CSV cell '" + cell + "' is not a number");
      }
      (j < 0 ? ds.y[i] : ds.X(i, j)) = v;
    }
  }
  ds.unit_norm = header.value("normalized", false);
  ds.name = header.value("name", std::string("csv"));
  ds.meta = header.dump();
  return ds;
}

}  // namespace odentk

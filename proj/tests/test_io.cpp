#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "odentk/config.hpp"
#include "odentk/data_io.hpp"
#include "odentk/rng.hpp"
#include "odentk/serialize.hpp"
#include "oracles.hpp"

using namespace odentk;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::domain;
}

}  // namespace

TEST_CASE("Philox4x32-10 known-answer vectors") {
  using B = Philox4x32::Block;
  CHECK(Philox4x32(0)(B{0, 0, 0, 0}) == B{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32(0xffffffffffffffffULL)(B{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}) ==
        B{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32(0x299f31d0a4093822ULL)(B{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}) ==
        B{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("random streams are reproducible and independent") {
  RandomStream a(42, 1), b(42, 1), c(42, 2);
  double s = 0, s2 = 0;
  bool differs = false;
  for (int i = 0; i < 20000; ++i) {
    const double x = a.normal();
    CHECK(x == b.normal());
    differs = differs || x != c.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(differs);
  CHECK(std::abs(s / 20000) < 0.03);
  CHECK(s2 / 20000 == doctest::Approx(1.0).epsilon(0.03));
  CHECK(derive_seed(1, 2) != derive_seed(2, 1));
}

TEST_CASE("IDX parser reads an independently encoded pair") {
  std::vector<std::uint8_t> pixels(3 * 2 * 2);
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = static_cast<std::uint8_t>(17 * i);
  const auto img = oracle::idx_images(3, 2, 2, pixels);
  const auto lbl = oracle::idx_labels({7, 0, 4});
  const RawImageSet r = parse_idx(img, lbl);
  CHECK(r.count == 3);
  CHECK(r.rows == 2);
  CHECK(r.cols == 2);
  CHECK(r.pixels == pixels);
  CHECK(r.labels == std::vector<std::uint8_t>{7, 0, 4});
  CHECK(encode_idx_images(r) == img);
  CHECK(encode_idx_labels(r) == lbl);
}

TEST_CASE("IDX errors are typed") {
  const auto img = oracle::idx_images(2, 2, 2, std::vector<std::uint8_t>(8, 1));
  const auto lbl = oracle::idx_labels({1, 2});
  auto bad_magic = img;
  bad_magic[3] = 0x02;
  CHECK(code_of([&] { parse_idx(bad_magic, lbl); }) == ErrorCode::format);
  auto truncated = img;
  truncated.pop_back();
  CHECK(code_of([&] { parse_idx(truncated, lbl); }) == ErrorCode::length);
  CHECK(code_of([&] { parse_idx(img, oracle::idx_labels({1, 2, 3})); }) == ErrorCode::consistency);
  CHECK(code_of([&] { parse_idx({}, lbl); }) == ErrorCode::length);
}

TEST_CASE("sphere conversion drops blank images and maps parity") {
  std::vector<std::uint8_t> pixels = {0, 0, 0, 0, 3, 4, 0, 0, 1, 1, 1, 1};
  const RawImageSet r = parse_idx(oracle::idx_images(3, 2, 2, pixels), oracle::idx_labels({1, 2, 5}));
  const SphereConversion s = to_sphere_dataset(r, 3);
  CHECK(s.dropped == std::vector<std::uint32_t>{0});
  REQUIRE(s.dataset.size() == 2);
  CHECK(s.dataset.X(0, 0) == doctest::Approx(0.6));
  CHECK(s.dataset.X(0, 1) == doctest::Approx(0.8));
  CHECK(s.dataset.y[0] == -1.0);
  CHECK(s.dataset.y[1] == 1.0);
  CHECK(check_dataset(s.dataset).unit_rows);
}

TEST_CASE("synthetic data lies on the sphere and CSV round trips") {
  for (LabelRule rule : {LabelRule::random_pm1, LabelRule::linear_teacher, LabelRule::fourier_teacher}) {
    const Dataset ds = synth_sphere(10, 5, 3, rule);
    CHECK(check_dataset(ds).ok());
    std::stringstream ss;
    write_dataset_csv(ds, ss);
    const Dataset back = read_dataset_csv(ss);
    CHECK((back.X - ds.X).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.y - ds.y).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("parameter blobs round trip and reject damage") {
  ModelConfig c;
  c.width = 5;
  c.input_dim = 3;
  c.seed = 77;
  const Params p = init_params(c);
  const auto blob = encode_params(p, c.seed);
  CHECK(blob.size() == 40 + 8 * (15 + 25 + 5));
  std::uint64_t seed = 0;
  const Params q = decode_params(blob, &seed);
  CHECK(seed == 77);
  CHECK((q.W - p.W).cwiseAbs().maxCoeff() == 0.0);
  auto bad = blob;
  bad[0] = 'X';
  CHECK(code_of([&] { decode_params(bad); }) == ErrorCode::format);
  auto shortb = blob;
  shortb.resize(blob.size() - 1);
  CHECK(code_of([&] { decode_params(shortb); }) == ErrorCode::length);
  auto longb = blob;
  longb.push_back(0);
  CHECK(code_of([&] { decode_params(longb); }) == ErrorCode::length);

  const auto path = (std::filesystem::temp_directory_path() / "odentk_params_test.bin").string();
  save_params(path, p, 77);
  CHECK((load_params(path).v - p.v).cwiseAbs().maxCoeff() == 0.0);
  std::filesystem::remove(path);
}

TEST_CASE("digests") {
  CHECK(sha256_hex({'a', 'b', 'c'}) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(git_blob_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(git_blob_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("run configuration is strict and round trips") {
  const RunConfig d = default_run_config();
  const RunConfig back = parse_run_config(run_config_to_json(d, true));
  CHECK(run_config_to_json(back) == run_config_to_json(d));
  CHECK(code_of([] { parse_run_config(R"({"model":{"widht":3}})"); }) == ErrorCode::config);
  CHECK(code_of([] { parse_run_config(R"({"bogus":1})"); }) == ErrorCode::config);
  CHECK(code_of([] { parse_run_config(R"({"model":{"width":0}})"); }) == ErrorCode::config);
  CHECK(code_of([] { parse_run_config(R"({"model":{"activation":"swish"}})"); }) == ErrorCode::config);
  CHECK(code_of([] { parse_run_config("{not json"); }) == ErrorCode::config);
  const RunConfig r = parse_run_config(R"({"model":{"width":7,"activation":"relu"},"pipeline":{"kind":"discrete","L":9}})");
  CHECK(r.model.width == 7);
  CHECK(r.model.activation.id == ActivationId::relu);
  CHECK(r.pipeline.L == 9);
}

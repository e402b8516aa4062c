#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "odentk/model.hpp"

namespace odentk {

// Parameter blob, little-endian:
//   "ODENTKP1" | u32 version = 1 | u32 reserved = 0 | u64 n | u64 d | u64 seed
//   | U (n*d) | W (n*n) | v (n), all f64 row-major.
inline constexpr char kParamsMagic[8] = {'O', 'D', 'E', 'N', 'T', 'K', 'P', '1'};
inline constexpr std::uint32_t kParamsVersion = 1;

std::vector<std::uint8_t> encode_params(const Params& p, std::uint64_t seed);
// Format error on bad magic/version, length error on truncation or trailing bytes.
Params decode_params(const std::vector<std::uint8_t>& bytes, std::uint64_t* seed = nullptr);

void save_params(const std::string& path, const Params& p, std::uint64_t seed);
Params load_params(const std::string& path, std::uint64_t* seed = nullptr);

// Lowercase hex digests.
std::string sha256_hex(const std::vector<std::uint8_t>& bytes);
std::string sha256_file(const std::string& path);
// Git blob id: sha1("blob <size>\0" + content).
std::string git_blob_hash(const std::string& content);

}  // namespace odentk

#include "odentk/serialize.hpp"

#include <openssl/evp.h>

#include <cstring>

#include "odentk/data_io.hpp"
#include "odentk/error.hpp"

namespace odentk {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, sizeof bits);
  put_u64(out, bits);
}

class LeReader {
 public:
  explicit LeReader(const std::vector<std::uint8_t>& b) : b_(b) {}

  std::uint64_t remaining() const { return b_.size() - pos_; }

  void need(std::uint64_t bytes) const {
    if (bytes > remaining()) fail(ErrorCode::length, "params blob is truncated");
  }

  std::uint64_t uint(int width) {
    need(width);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= std::uint64_t{b_[pos_ + i]} << (8 * i);
    pos_ += width;
    return v;
  }

  double f64() {
    const std::uint64_t bits = uint(8);
    double x;
    std::memcpy(&x, &bits, sizeof x);
    return x;
  }

  const std::uint8_t* raw(std::size_t n) {
    need(n);
    const std::uint8_t* p = b_.data() + pos_;
    pos_ += n;
    return p;
  }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

std::string hex_digest(const EVP_MD* md, const void* data, std::size_t size) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  require(ctx != nullptr, ErrorCode::resource, "cannot allocate a digest context");
  const bool ok = EVP_DigestInit_ex(ctx, md, nullptr) == 1 && EVP_DigestUpdate(ctx, data, size) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  require(ok, ErrorCode::numeric, "digest computation failed");
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned int i = 0; i < len; ++i) {
    s.push_back(hex[digest[i] >> 4]);
    s.push_back(hex[digest[i] & 15]);
  }
  return s;
}

}  // namespace

std::vector<std::uint8_t> encode_params(const Params& p, std::uint64_t seed) {
  const std::uint64_t n = p.W.rows(), d = p.U.cols();
  require(p.U.rows() == static_cast<Eigen::Index>(n) && p.W.cols() == static_cast<Eigen::Index>(n) &&
              p.v.size() == static_cast<Eigen::Index>(n),
          ErrorCode::shape, "inconsistent parameter shapes");
  std::vector<std::uint8_t> out(kParamsMagic, kParamsMagic + 8);
  out.reserve(40 + 8 * (n * d + n * n + n));
  put_u32(out, kParamsVersion);
  put_u32(out, 0);
  put_u64(out, n);
  put_u64(out, d);
  put_u64(out, seed);
  for (Eigen::Index i = 0; i < p.U.size(); ++i) put_f64(out, p.U.data()[i]);
  for (Eigen::Index i = 0; i < p.W.size(); ++i) put_f64(out, p.W.data()[i]);
  for (Eigen::Index i = 0; i < p.v.size(); ++i) put_f64(out, p.v[i]);
  return out;
}

Params decode_params(const std::vector<std::uint8_t>& bytes, std::uint64_t* seed) {
  LeReader r(bytes);
  if (bytes.size() < 8 || std::memcmp(r.raw(8), kParamsMagic, 8) != 0)
    fail(bytes.size() < 8 ? ErrorCode::length : ErrorCode::format, "params blob: bad magic");
  const std::uint64_t version = r.uint(4);
  require(version == kParamsVersion, ErrorCode::format, "params blob: unsupported version " + std::to_string(version));
  r.uint(4);
  const std::uint64_t n = r.uint(8), d = r.uint(8), s = r.uint(8);
  require(n >= 1 && d >= 1 && n <= (1u << 15) && d <= (1u << 24), ErrorCode::format, "params blob: implausible shape");
  const std::uint64_t count = n * d + n * n + n;
  if (count > r.remaining() / 8) fail(ErrorCode::length, "params blob is truncated");
  Params p;
  p.U.resize(n, d);
  p.W.resize(n, n);
  p.v.resize(n);
  for (Eigen::Index i = 0; i < p.U.size(); ++i) p.U.data()[i] = r.f64();
  for (Eigen::Index i = 0; i < p.W.size(); ++i) p.W.data()[i] = r.f64();
  for (Eigen::Index i = 0; i < p.v.size(); ++i) p.v[i] = r.f64();
  require(r.remaining() == 0, ErrorCode::length, "params blob has trailing bytes");
  if (seed) *seed = s;
  return p;
}

void save_params(const std::string& path, const Params& p, std::uint64_t seed) {
  write_file_bytes(path, encode_params(p, seed));
}

Params load_params(const std::string& path, std::uint64_t* seed) { return decode_params(read_file_bytes(path), seed); }

std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
  return hex_digest(EVP_sha256(), bytes.data(), bytes.size());
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_file_bytes(path)); }

std::string git_blob_hash(const std::string& content) {
  std::string blob = "blob " + std::to_string(content.size());
  blob.push_back('\0');
  blob += content;
  return hex_digest(EVP_sha1(), blob.data(), blob.size());
}

}  // namespace odentk

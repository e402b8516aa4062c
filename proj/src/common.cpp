#include <atomic>

#include "odentk/error.hpp"
#include "odentk/parallel.hpp"

namespace odentk {

namespace {
std::atomic<int> g_threads{1};
}

int default_threads() noexcept { return g_threads.load(); }

void set_default_threads(int threads) noexcept { g_threads.store(threads < 1 ? 1 : threads); }

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::domain:
      return "domain";
    case ErrorCode::config:
      return "config";
    case ErrorCode::shape:
      return "shape";
    case ErrorCode::resource:
      return "resource";
    case ErrorCode::solver:
      return "solver";
    case ErrorCode::input:
      return "input";
    case ErrorCode::format:
      return "format";
    case ErrorCode::length:
      return "length";
    case ErrorCode::consistency:
      return "consistency";
    case ErrorCode::numeric:
      return "numeric";
    case ErrorCode::divergence:
      return "divergence";
    case ErrorCode::sequencing:
      return "sequencing";
    case ErrorCode::usage:
      return "usage";
    case ErrorCode::io:
      return "io";
  }
  return "unknown";
}

}  // namespace odentk

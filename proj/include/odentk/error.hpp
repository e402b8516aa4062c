#pragma once

#include <stdexcept>
#include <string>

namespace odentk {

// Numeric values are shared with the C API (odentk_status in odentk.h).
enum class ErrorCode : int {
  domain = 1,       // non-finite or out-of-domain scalar input
  config = 2,       // invalid configuration value
  shape = 3,        // dimension mismatch
  resource = 4,     // allocation / size guard
  solver = 5,       // adaptive solver exhausted its step budget
  input = 6,        // precondition on user data violated
  format = 7,       // file format (magic number, schema)
  length = 8,       // truncated payload
  consistency = 9,  // cross-file or cross-field mismatch
  numeric = 10,     // eigensolver or linear algebra failure
  divergence = 11,  // NaN/Inf during training
  sequencing = 12,  // operation called before its prerequisite
  usage = 13,       // CLI / experiment name errors
  io = 14,          // filesystem errors
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Thrown by adaptive solves; carries the last accepted time.
class SolverFailure : public Error {
 public:
  SolverFailure(const std::string& what, double last_time)
      : Error(ErrorCode::solver, what), last_time_(last_time) {}
  double last_time() const noexcept { return last_time_; }

 private:
  double last_time_;
};

// Thrown by training when the loss becomes non-finite.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, long step) : Error(ErrorCode::divergence, what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace odentk

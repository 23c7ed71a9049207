#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mswf {

enum class ErrorCode {
  Input,        // malformed argument, dimension mismatch, unsupported option
  Resolution,   // packet or field under-resolved on the grid
  Nyquist,      // frequency outside the grid band
  Domain,       // point or support too close to the periodic boundary
  Guard,        // CFL, boundary-mass and other pre-flight guards
  Numeric,      // non-finite values, step-size underflow
  Consistency,  // experiment agreement below the configured bound
};

std::string_view to_string(ErrorCode code);

/// Process exit code used by the CLI: 2 guard-type, 3 numeric, 4 consistency.
int exit_code(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace mswf

#include "mswf/errors.hpp"

namespace mswf {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Input: return "input";
    case ErrorCode::Resolution: return "resolution";
    case ErrorCode::Nyquist: return "nyquist";
    case ErrorCode::Domain: return "domain";
    case ErrorCode::Guard: return "guard";
    case ErrorCode::Numeric: return "numeric";
    case ErrorCode::Consistency: return "consistency";
  }
  return "unknown";
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::Numeric: return 3;
    case ErrorCode::Consistency: return 4;
    default: return 2;
  }
}

}  // namespace mswf

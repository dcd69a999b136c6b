#include "sgt/errors.hpp"

namespace sgt {

const char* kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return "usage";
    case ErrorKind::validation: return "validation";
    case ErrorKind::invalid_encoding: return "invalid-encoding";
    case ErrorKind::unsupported_pattern: return "unsupported-pattern";
    case ErrorKind::insufficient_window: return "insufficient-window";
    case ErrorKind::precision: return "precision-failure";
    case ErrorKind::resource: return "resource";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return 2;
    case ErrorKind::resource:
    case ErrorKind::precision: return 4;
    default: return 3;
  }
}

}  // namespace sgt

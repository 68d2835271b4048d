#include "blm/error.hpp"

namespace blm {

const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::usage: return "usage";
    case ErrorCategory::config: return "config";
    case ErrorCategory::data: return "data";
    case ErrorCategory::io: return "io";
    case ErrorCategory::format: return "format";
    case ErrorCategory::integrity: return "integrity";
    case ErrorCategory::lookup: return "lookup";
    case ErrorCategory::validation: return "validation";
    case ErrorCategory::shape: return "shape";
    case ErrorCategory::numeric: return "numeric";
  }
  return "unknown";
}

int exit_code_for(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::usage:
    case ErrorCategory::config: return 2;
    case ErrorCategory::numeric: return 4;
    default: return 3;
  }
}

}  // namespace blm

#include "rdstack/error.hpp"

namespace rdstack {

std::string_view category_name(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::invalid_argument: return "invalid_argument";
    case ErrorCategory::shape_mismatch: return "shape_mismatch";
    case ErrorCategory::data: return "data";
    case ErrorCategory::io: return "io";
    case ErrorCategory::numerical: return "numerical";
    case ErrorCategory::prerequisite: return "prerequisite";
    case ErrorCategory::config: return "config";
  }
  return "unknown";
}

int exit_code(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::invalid_argument: return 2;
    case ErrorCategory::config: return 3;
    case ErrorCategory::io: return 4;
    case ErrorCategory::data: return 5;
    case ErrorCategory::shape_mismatch: return 6;
    case ErrorCategory::numerical: return 7;
    case ErrorCategory::prerequisite: return 8;
  }
  return 1;
}

void fail(ErrorCategory category, const std::string& message) {
  throw Error(category, message);
}

}  // namespace rdstack

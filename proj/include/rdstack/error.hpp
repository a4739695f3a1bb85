#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rdstack {

/// Coarse failure classes. The CLI maps each one to a distinct exit code and
/// prints the category name so scripts can branch on it.
enum class ErrorCategory {
  invalid_argument,
  shape_mismatch,
  data,
  io,
  numerical,
  prerequisite,
  config,
};

std::string_view category_name(ErrorCategory category) noexcept;
int exit_code(ErrorCategory category) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] void fail(ErrorCategory category, const std::string& message);

}  // namespace rdstack

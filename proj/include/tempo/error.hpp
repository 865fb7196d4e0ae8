#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tempo {

// Machine-readable failure classes. The CLI maps these to exit codes.
enum class ErrorCategory {
  kParameterDomain,
  kState,
  kOrdering,
  kUsage,
  kNumerical,
  kOptimizerDivergence,
  kEstimation,
  kCoverage,
  kConfig,
  kIo,
  kInternal,
};

std::string_view category_name(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

}  // namespace tempo

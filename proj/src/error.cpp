#include "tempo/error.hpp"

namespace tempo {

std::string_view category_name(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kParameterDomain: return "parameter-domain";
    case ErrorCategory::kState: return "state";
    case ErrorCategory::kOrdering: return "ordering";
    case ErrorCategory::kUsage: return "usage";
    case ErrorCategory::kNumerical: return "numerical-degeneracy";
    case ErrorCategory::kOptimizerDivergence: return "optimizer-divergence";
    case ErrorCategory::kEstimation: return "estimation-failure";
    case ErrorCategory::kCoverage: return "coverage";
    case ErrorCategory::kConfig: return "config";
    case ErrorCategory::kIo: return "io";
    case ErrorCategory::kInternal: return "internal";
  }
  return "unknown";
}

}  // namespace tempo

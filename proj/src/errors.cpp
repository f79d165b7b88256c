#include "mppi_lab/errors.hpp"

namespace mppi_lab {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kContractViolation: return "contract-violation";
    case ErrorCode::kNumericOverflow: return "numeric-overflow";
    case ErrorCode::kUnsupportedModel: return "unsupported-model";
    case ErrorCode::kTransformationInvalid: return "transformation-invalid";
    case ErrorCode::kCovarianceInvalid: return "covariance-invalid";
    case ErrorCode::kNoValidSamples: return "no-valid-samples";
    case ErrorCode::kBoundaryHit: return "boundary-hit";
    case ErrorCode::kGridExtent: return "grid-extent";
    case ErrorCode::kIntegrationBudget: return "integration-budget";
    case ErrorCode::kInsufficientData: return "insufficient-data";
    case ErrorCode::kUnknownScenario: return "unknown-scenario";
    case ErrorCode::kConfig: return "config";
  }
  return "unknown";
}

}  // namespace mppi_lab

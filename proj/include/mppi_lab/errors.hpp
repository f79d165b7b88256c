#ifndef MPPI_LAB_ERRORS_HPP_
#define MPPI_LAB_ERRORS_HPP_

#include <optional>
#include <stdexcept>
#include <string>

namespace mppi_lab {

enum class ErrorCode {
  kContractViolation,
  kNumericOverflow,
  kUnsupportedModel,
  kTransformationInvalid,
  kCovarianceInvalid,
  kNoValidSamples,
  kBoundaryHit,
  kGridExtent,
  kIntegrationBudget,
  kInsufficientData,
  kUnknownScenario,
  kConfig,
};

const char* to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what,
        std::optional<int> step = std::nullopt)
      : std::runtime_error(what), code_(code), step_(step) {}

  ErrorCode code() const { return code_; }

  // horizon step at which a rollout went non-finite, when applicable
  std::optional<int> step() const { return step_; }

 private:
  ErrorCode code_;
  std::optional<int> step_;
};

inline void require(bool condition, const std::string& what) {
  if (!condition) throw Error(ErrorCode::kContractViolation, what);
}

}  // namespace mppi_lab

#endif  // MPPI_LAB_ERRORS_HPP_

#pragma once

#include <stdexcept>
#include <string>

namespace cautious {

// Every failure the library reports carries one of these codes so callers
// (most notably the command line tool) can map them to exit statuses.
enum class ErrorCode {
  kDimensionMismatch,
  kNotSymmetric,
  kNonFinite,
  kNotNegativeDefinite,
  kNotPositiveDefinite,
  kSchurNotPsd,
  kNotCompact,
  kHypothesisViolated,
  kNonConvergence,
  kZeroDirection,
  kZeroBasisVector,
  kMissingMetadata,
  kMissingJacobian,
  kMissingDecomposition,
  kMissingLb,
  kEmptySet,
  kEmptyGrid,
  kEmptyVertexSet,
  kCoincidentPoints,
  kOutsideDomain,
  kStabilityNotCertified,
  kLambdaOutOfRange,
  kExcitationFloorViolated,
  kSamplingFailure,
  kInvalidPattern,
  kNotInRange,
  kNegativeLambda,
  kNonPositiveEpsilon,
  kOracleFailure,
  kUnboundedNoiseSet,
  kInvalidArgument,
  kConfig,
};

const char* ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void Require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) Fail(code, what);
}

}  // namespace cautious

#include "hpbvp/errors.hpp"

namespace hpbvp {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "invalid-input";
    case ErrorCode::kEvaluation: return "evaluation";
    case ErrorCode::kNotFound: return "not-found";
    case ErrorCode::kSingularViscosity: return "singular-viscosity";
    case ErrorCode::kHypothesisViolation: return "hypothesis-violation";
    case ErrorCode::kDegenerateFrequency: return "degenerate-frequency";
    case ErrorCode::kNearAxis: return "near-axis";
    case ErrorCode::kContourCollision: return "contour-collision";
    case ErrorCode::kSplitFailure: return "split-failure";
    case ErrorCode::kExtensionFailure: return "extension-failure";
    case ErrorCode::kInternalConsistency: return "internal-consistency";
    case ErrorCode::kInvalidDelta: return "invalid-delta";
    case ErrorCode::kSeparation: return "separation";
    case ErrorCode::kDegenerateRoot: return "degenerate-root";
    case ErrorCode::kStructure: return "structure";
    case ErrorCode::kConstructionFailure: return "construction-failure";
    case ErrorCode::kCertificationFailure: return "certification-failure";
    case ErrorCode::kInsufficientData: return "insufficient-data";
    case ErrorCode::kConjugationFailure: return "conjugation-failure";
    case ErrorCode::kInvertibility: return "invertibility";
    case ErrorCode::kInvalidTrajectory: return "invalid-trajectory";
    case ErrorCode::kNumerical: return "numerical";
  }
  return "unknown";
}

}  // namespace hpbvp

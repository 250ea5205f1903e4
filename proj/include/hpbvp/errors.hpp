#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace hpbvp {

enum class ErrorCode {
  kInvalidInput,
  kEvaluation,
  kNotFound,
  kSingularViscosity,
  kHypothesisViolation,
  kDegenerateFrequency,
  kNearAxis,
  kContourCollision,
  kSplitFailure,
  kExtensionFailure,
  kInternalConsistency,
  kInvalidDelta,
  kSeparation,
  kDegenerateRoot,
  kStructure,
  kConstructionFailure,
  kCertificationFailure,
  kInsufficientData,
  kConjugationFailure,
  kInvertibility,
  kInvalidTrajectory,
  kNumerical,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Eigenvalue too close to the imaginary axis for a reliable split.
class NearAxisError : public Error {
 public:
  NearAxisError(std::complex<double> mu, double tol, const std::string& what)
      : Error(ErrorCode::kNearAxis, what), mu_(mu), tol_(tol) {}
  std::complex<double> mu() const noexcept { return mu_; }
  double tolerance() const noexcept { return tol_; }

 private:
  std::complex<double> mu_;
  double tol_;
};

class ExtensionFailure : public Error {
 public:
  ExtensionFailure(std::vector<double> trace, const std::string& what)
      : Error(ErrorCode::kExtensionFailure, what), trace_(std::move(trace)) {}
  const std::vector<double>& gap_trace() const noexcept { return trace_; }

 private:
  std::vector<double> trace_;
};

}  // namespace hpbvp

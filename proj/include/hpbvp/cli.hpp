#pragma once

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hpbvp/symmetrizer.hpp"
#include "hpbvp/system_model.hpp"

namespace hpbvp::cli {

inline constexpr const char* kConfigSchema = "hpbvp-config/1";
inline constexpr const char* kManifestSchema = "hpbvp-manifest/1";
inline constexpr const char* kCertificateSchema = "hpbvp-certificate/1";

/// Malformed config or certificate; the message starts with the field path
/// (or line:column for syntax errors). Maps to exit status 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Task { kValidate, kContinuity, kCertify, kEvansScan, kFactorization, kConjugate, kEnergyAudit };

const char* to_string(Task t);

struct Axis {
  double min = 0.0;
  double max = 0.0;
  int count = 1;
  bool log = false;
  std::vector<double> explicit_values;

  std::vector<double> values() const;
};

struct Tolerances {
  double hermiticity_rel = 1e-12;
  double pass_tol = -1e-10;   // margins below this fail
  double jitter = 1e-10;      // allowed increase between consecutive gaps
  double gap_max = 1e-4;      // final continuity gap; <= 0 disables
  double residual_factor = 5.0;
  double factorization_rho_max = 1e-2;
  double residual_max = 1e-8;  // conjugator ODE residual
  double slack_min = -1e-8;
  double identity_max = 1e-6;
  double threshold = 0.0;      // evans-scan lower bound on |D|
};

/// Names accepted by --tolerance key=value.
std::vector<std::string> tolerance_keys();
/// Throws ConfigError for unknown keys.
void set_tolerance(Tolerances& t, const std::string& key, double value);

struct ConjugateSpec {
  std::optional<CMat> G_inf;  // empty: the system symbol at the first grid point
  CMat perturbation;
  double theta = 1.0;
  double C_decay = -1.0;      // <= 0: |perturbation|
  double x_max = -1.0;        // <= 0: 25 / theta
  double grid_step = -1.0;
};

struct RunConfig {
  Task task = Task::kValidate;
  std::string system_label;
  SystemDefinition system;
  BoundaryData boundary;
  std::vector<RVec> p_grid;
  std::vector<Frequency> directions;
  std::vector<double> rho;
  std::vector<double> gamma_check;
  int xi_directions = 24;
  double kappa = 2.0;
  int witness_samples = 100;
  int trials = 50;
  ConjugateSpec conjugate;
  Tolerances tol;
  std::string prefix = "run";
  nlohmann::json raw;
};

/// Validates and resolves a parsed config document.
RunConfig parse_config(const nlohmann::json& doc);
/// Reads and parses a file; syntax errors report line and column.
RunConfig load_config(const std::string& path);

struct RunOptions {
  std::string output_dir = ".";
  int workers = 0;  // 0: hardware concurrency
  std::uint64_t seed = 1;
  std::map<std::string, double> tolerance_overrides;
};

struct RunResult {
  int status = 0;  // 0 pass, 1 task failure
  std::string table_path;
  std::string manifest_path;
  std::string certificate_path;
  nlohmann::json summary;
};

RunResult run(const RunConfig& config, const RunOptions& opts);

nlohmann::json certificate_to_json(const SymmetrizerCertificate& cert, double pass_tol);
/// Throws ConfigError on missing fields or a wrong schema tag.
SymmetrizerCertificate certificate_from_json(const nlohmann::json& doc);

struct ReplayResult {
  bool pass = false;
  std::vector<std::string> failures;  // "<inequality> at grid point i: margin"
  std::vector<MarginRecord> margins;
};

/// Re-verifies hermiticity, cone and dissipation margins from the stored
/// S and G values; pass iff every margin is >= -1e-10, scaled as in
/// scaled_tol.
ReplayResult replay_certificate(const nlohmann::json& doc);
ReplayResult replay_certificate_file(const std::string& path);

/// Comma-separated table writer with 17 significant digits.
std::string format_number(double v);
std::string csv_escape(const std::string& s);

}  // namespace hpbvp::cli

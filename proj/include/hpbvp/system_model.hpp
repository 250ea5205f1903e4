#pragma once

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hpbvp/frequency.hpp"
#include "hpbvp/linalg.hpp"

namespace hpbvp {

struct ParamBox {
  RVec lo;
  RVec hi;
};

/// Union of axis-aligned boxes. A zero-dimensional domain (M = 0) holds the
/// empty parameter vector.
struct ParamDomain {
  std::vector<ParamBox> boxes;

  bool contains(const RVec& p) const;
  int dim() const;
};

struct Monomial {
  double c = 0.0;
  std::vector<int> pow;  // one exponent per parameter coordinate
};
using Polynomial = std::vector<Monomial>;

/// Matrix with polynomial-in-p entries, stored row-major.
struct PolyMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<Polynomial> entries;

  static PolyMatrix constant(const RMat& m);
  RMat eval(const RVec& p) const;
};

class SystemDefinition {
 public:
  using AFun = std::function<RMat(const RVec& p, int j)>;
  using BFun = std::function<RMat(const RVec& p, int j, int k)>;

  SystemDefinition() = default;
  SystemDefinition(std::string name, int n, int d, int m, AFun a, BFun b, ParamDomain domain);

  static SystemDefinition from_polynomials(std::string name, int n, int d, int m,
                                           std::vector<PolyMatrix> a,
                                           std::vector<PolyMatrix> b, ParamDomain domain);

  const std::string& name() const { return name_; }
  int n() const { return n_; }
  int d() const { return d_; }
  int m() const { return m_; }
  const ParamDomain& domain() const { return domain_; }

  /// A_j(p), j = 1..d. Throws Error(kEvaluation) on wrong shape or
  /// non-finite entries.
  RMat A(const RVec& p, int j) const;
  /// B_jk(p), j, k = 1..d.
  RMat B(const RVec& p, int j, int k) const;

 private:
  std::string name_;
  int n_ = 0;
  int d_ = 0;
  int m_ = 0;
  AFun a_;
  BFun b_;
  ParamDomain domain_;
};

class BoundaryData {
 public:
  using GammaFun = std::function<CMat(const RVec& p, const Frequency& zeta)>;

  BoundaryData() = default;
  explicit BoundaryData(GammaFun gamma) : gamma_(std::move(gamma)) {}
  static BoundaryData constant(const CMat& gamma);

  /// N x 2N matrix; throws Error(kInvalidInput) when the rank is not N.
  CMat gamma_matrix(const RVec& p, const Frequency& zeta) const;

 private:
  GammaFun gamma_;
};

struct HypothesisTolerances {
  double imag_tol = 1e-10;     // relative to 1 + spectral radius
  double cond_max = 1e8;       // eigenvector matrix condition bound
  double cluster_rel = 1e-6;   // eigenvalue clustering, relative to spectral radius
  double det_tol = 1e-12;
};

struct HypothesisReport {
  // (H1)
  bool h1_pass = true;
  RVec h1_p;
  RVec h1_xi;
  std::vector<int> h1_multiplicities;
  double h1_max_imag = 0.0;
  double h1_max_cond = 0.0;
  std::string h1_reason;
  // (H2)
  bool h2_pass = true;
  double h2_constant = 0.0;
  RVec h2_p;
  RVec h2_xi;
  // (H3)
  bool h3_pass = true;
  double h3_min_det = 0.0;
  RVec h3_p;

  std::string scope = "checked at supplied samples only";

  bool all_pass() const { return h1_pass && h2_pass && h3_pass; }
};

struct Sample {
  RVec p;
  RVec xi;
};

HypothesisReport validate_hypotheses(const SystemDefinition& system,
                                     const std::vector<Sample>& samples,
                                     const HypothesisTolerances& tol = {});

/// Deterministic sample set: parameter points from each box (corners and
/// centre) crossed with xi directions on a sphere grid.
std::vector<Sample> default_samples(const SystemDefinition& system, int directions = 24);

struct CatalogEntry {
  SystemDefinition system;
  BoundaryData boundary;
  RVec default_p;
  std::vector<std::string> hypotheses_hold;
  std::string description;
};

std::vector<std::string> builtin_names();
/// Throws Error(kNotFound) for unknown names.
CatalogEntry builtin_example(const std::string& name);
std::map<std::string, CatalogEntry> builtin_examples();

}  // namespace hpbvp

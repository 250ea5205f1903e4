#pragma once

#include <string>
#include <vector>

#include "hpbvp/linalg.hpp"
#include "hpbvp/symbol.hpp"
#include "hpbvp/system_model.hpp"

namespace hpbvp {

struct Subspace {
  CMat basis;  // orthonormal columns
  Eigen::Index ambient_dim = 0;

  Eigen::Index dim() const { return basis.cols(); }

  /// Orthonormalised span of the given columns.
  static Subspace span(const CMat& columns, double rel_tol = 1e-12);
  static Subspace zero(Eigen::Index n);
  static Subspace whole(Eigen::Index n);
};

/// Orthonormalised sum; throws Error(kInternalConsistency) when the
/// summands are not independent.
Subspace direct_sum(const Subspace& a, const Subspace& b);

struct SpectralSplit {
  Subspace stable;
  Subspace unstable;
  CVec stable_eigs;
  CVec unstable_eigs;
  double axis_margin = 0.0;
};

/// 1e-10 (1 + |G|).
double default_axis_tol(const CMat& g);
/// 100 eps (1 + |G|); used by sweeps that approach zero frequency with
/// gamma_check = 0, where Re mu shrinks like rho^2.
double sweep_axis_tol(const CMat& g);

/// Throws NearAxisError when some eigenvalue has |Re mu| <= axis_tol.
/// A negative axis_tol selects default_axis_tol(g).
SpectralSplit spectral_split(const CMat& g, double axis_tol = -1.0);

struct Region {
  enum class Kind { kLeftHalfPlane, kRightHalfPlane, kDisk };
  Kind kind = Kind::kLeftHalfPlane;
  cd center = 0.0;
  double radius = 0.0;

  static Region left_half_plane() { return {Kind::kLeftHalfPlane, 0.0, 0.0}; }
  static Region right_half_plane() { return {Kind::kRightHalfPlane, 0.0, 0.0}; }
  static Region disk(cd c, double r) { return {Kind::kDisk, c, r}; }
};

/// Contour-integral spectral projector. For half planes the contour is a
/// D-shaped path with adaptively refined Gauss-Legendre panels and
/// quadrature_points nodes per panel; for disks it is the circle with the
/// trapezoidal rule and quadrature_points nodes (0 picks a count from the
/// spectrum). Throws Error(kContourCollision) when an eigenvalue is closer
/// than collision_rel (1 + |G|) to the contour.
CMat riesz_projector(const CMat& g, const Region& region, int quadrature_points = 0,
                     double collision_rel = 1e-9);

/// Sine of the largest principal angle; 1 when dimensions differ.
double subspace_gap(const Subspace& e1, const Subspace& e2);

struct BlockStructure {
  CMat V;  // [V1 V2], each block with orthonormal columns
  CMat H;  // near-zero block
  CMat P;  // off-axis block
  double cond_V = 1.0;
  double r_in = 0.0;        // radius of the disk isolating the near-zero group
  double separation = 0.0;  // min |Re mu(P)|
  CVec near_eigs;
  CVec far_eigs;
};

/// Closed-form block structure at zeta = 0: V1 = [I; 0], V2 = [I; A]
/// (I + A^H A)^{-1/2} with A = B_dd^{-1} A_d.
BlockStructure reference_block_structure(const SystemDefinition& system, const RVec& p);

/// Throws Error(kSplitFailure) when the near-zero group is not isolated.
BlockStructure low_freq_block_diag(const SystemDefinition& system, const RVec& p, const Frequency& zeta);

/// H(p, rho zcheck) / rho for rho != 0 (negative rho allowed), H0 at rho = 0.
CMat h_check(const SystemDefinition& system, const RVec& p, const Frequency& zcheck, double rho);

struct LimitOptions {
  double gamma0 = 0.1;
  double tol = 1e-9;
  int max_steps = 40;
  bool structural_fallback = true;
  double fallback_agreement = 1e-3;
};

struct LimitResult {
  Subspace subspace;
  std::vector<double> gap_trace;
  bool structural = false;
};

LimitResult hyperbolic_stable_limit_detail(const SystemDefinition& system, const RVec& p,
                                           const Frequency& zcheck, const LimitOptions& opts = {});
/// Stable subspace of H0 for gamma_check > 0; at gamma_check = 0 the limit
/// along gamma_m = gamma0 2^{-m}. When that sequence stalls (glancing
/// directions converge only like sqrt(gamma)), the limit is read off the
/// Jordan chains: ker (H0 - i xi)^beta on each imaginary-axis cluster.
/// Throws ExtensionFailure with the gap trace when neither route succeeds.
Subspace hyperbolic_stable_limit(const SystemDefinition& system, const RVec& p, const Frequency& zcheck,
                                 const LimitOptions& opts = {});

/// V(p, 0)(E^hyp_- (+) E^par_-); dimension N.
Subspace limit_bundle(const SystemDefinition& system, const RVec& p, const Frequency& zcheck);

/// Stable subspace of G(p, rho zcheck) with sweep_axis_tol.
Subspace stable_subspace(const SystemDefinition& system, const RVec& p, const Frequency& zeta);

/// V (E^Hcheck_- (+) E^P_-) assembled from the block structure at rho zcheck.
Subspace stable_via_blocks(const SystemDefinition& system, const RVec& p, const Frequency& zcheck, double rho);

struct ContinuityRow {
  double rho = 0.0;
  double gap = 1.0;
  Eigen::Index stable_dim = 0;
  bool ok = false;
  std::string error;
};

std::vector<ContinuityRow> continuity_sweep(const SystemDefinition& system, const RVec& p,
                                            const Frequency& zcheck, const std::vector<double>& rho_list,
                                            int workers = 1);

/// Least-squares slope of log(gap) against log(rho) over rows with gap > 0.
double loglog_slope(const std::vector<ContinuityRow>& rows);

}  // namespace hpbvp

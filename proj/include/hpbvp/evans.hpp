#pragma once

#include <string>
#include <vector>

#include "hpbvp/subspaces.hpp"
#include "hpbvp/system_model.hpp"

namespace hpbvp {

struct EvansResult {
  cd value = 0.0;
  double modulus = 0.0;
  int dim_defect = 0;  // dim E + dim F - ambient
};

/// det[basis(E) | basis(F)] with orthonormal bases; zero with the defect
/// recorded when the dimensions do not add up.
EvansResult det_pair(const Subspace& e, const Subspace& f);

Subspace boundary_kernel(const BoundaryData& boundary, const RVec& p, const Frequency& zeta);

/// D(p, zeta). A negative axis_tol uses default_axis_tol.
EvansResult evans_at(const SystemDefinition& system, const BoundaryData& boundary, const RVec& p,
                     const Frequency& zeta, double axis_tol = -1.0);

/// det(limit bundle, ker Gamma(p, 0)).
EvansResult lopatinski_limit(const SystemDefinition& system, const BoundaryData& boundary, const RVec& p,
                             const Frequency& zcheck);

struct FactorizationRow {
  double rho = 0.0;
  double modulus = 0.0;
  double residual = 0.0;  // | |D| - beta_estimate delta_lim |
  bool ok = false;
  std::string error;
};

struct FactorizationDiagnostic {
  std::vector<FactorizationRow> rho_table;
  double delta_lim = 0.0;
  double beta_estimate = 0.0;
  double residual = 0.0;  // max row residual over the smaller half of the valid rows
  bool indeterminate = false;
};

/// Rows use sweep_axis_tol. beta_estimate is the rho -> 0 intercept of a
/// linear fit of |D| / |Delta| over the three smallest valid rho. Throws
/// Error(kInsufficientData) with fewer than three valid rows.
FactorizationDiagnostic factorization_sweep(const SystemDefinition& system, const BoundaryData& boundary,
                                            const RVec& p, const Frequency& zcheck,
                                            const std::vector<double>& rho_list, int workers = 1);

struct ScanRow {
  size_t p_index = 0;
  size_t z_index = 0;
  size_t rho_index = 0;
  double modulus = 0.0;
  bool ok = false;
  std::string error;
};

struct StabilityScan {
  std::vector<ScanRow> rows;  // lexicographic (p, zcheck, rho) order
  double min_modulus = 0.0;
  size_t argmin = 0;          // index into rows
  double threshold = 0.0;
  bool pass = false;
  int failures = 0;
};

/// min |D| over p_grid x zcheck_grid x rho_grid; rho = 0 entries use
/// lopatinski_limit. Failed rows are recorded and excluded from the min;
/// ties resolve to the first row in grid order.
StabilityScan uniform_stability_scan(const SystemDefinition& system, const BoundaryData& boundary,
                                     const std::vector<RVec>& p_grid, const std::vector<Frequency>& zcheck_grid,
                                     const std::vector<double>& rho_grid, double threshold, int workers = 1);

}  // namespace hpbvp

#include "hpbvp/evans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hpbvp/errors.hpp"
#include "hpbvp/parallel.hpp"
#include "hpbvp/symbol.hpp"

namespace hpbvp {

EvansResult det_pair(const Subspace& e, const Subspace& f) {
  if (e.ambient_dim != f.ambient_dim) throw Error(ErrorCode::kInvalidInput, "subspaces live in different spaces");
  EvansResult r;
  r.dim_defect = static_cast<int>(e.dim() + f.dim() - e.ambient_dim);
  if (r.dim_defect != 0) return r;
  CMat m(e.ambient_dim, e.ambient_dim);
  m << e.basis, f.basis;
  r.value = m.determinant();
  r.modulus = std::abs(r.value);
  return r;
}

Subspace boundary_kernel(const BoundaryData& boundary, const RVec& p, const Frequency& zeta) {
  const CMat g = boundary.gamma_matrix(p, zeta);
  return {null_space(g, 1e-12), g.cols()};
}

EvansResult evans_at(const SystemDefinition& system, const BoundaryData& boundary, const RVec& p,
                     const Frequency& zeta, double axis_tol) {
  if (zeta.gamma < 0.0) throw Error(ErrorCode::kInvalidInput, "gamma must be nonnegative");
  if (zeta.norm() == 0.0) throw Error(ErrorCode::kDegenerateFrequency, "D is evaluated at zeta != 0");
  const CMat g = assemble_full_symbol(system, p, zeta).G;
  const Subspace em = spectral_split(g, axis_tol).stable;
  return det_pair(em, boundary_kernel(boundary, p, zeta));
}

EvansResult lopatinski_limit(const SystemDefinition& system, const BoundaryData& boundary, const RVec& p,
                             const Frequency& zcheck) {
  Frequency zero = zcheck.scaled(0.0);
  return det_pair(limit_bundle(system, p, zcheck), boundary_kernel(boundary, p, zero));
}

FactorizationDiagnostic factorization_sweep(const SystemDefinition& system, const BoundaryData& boundary,
                                            const RVec& p, const Frequency& zcheck,
                                            const std::vector<double>& rho_list, int workers) {
  for (size_t i = 0; i < rho_list.size(); ++i) {
    if (!(rho_list[i] > 0.0) || (i > 0 && rho_list[i] >= rho_list[i - 1])) {
      throw Error(ErrorCode::kInvalidInput, "rho_list must be positive and decreasing");
    }
  }
  FactorizationDiagnostic out;
  out.delta_lim = lopatinski_limit(system, boundary, p, zcheck).modulus;
  out.rho_table = parallel_map(rho_list.size(), workers, [&](std::size_t i) {
    FactorizationRow row;
    row.rho = rho_list[i];
    try {
      const Frequency zeta = zcheck.scaled(row.rho);
      const CMat g = assemble_full_symbol(system, p, zeta).G;
      row.modulus = evans_at(system, boundary, p, zeta, sweep_axis_tol(g)).modulus;
      row.ok = true;
    } catch (const Error& e) {
      row.error = e.what();
    }
    return row;
  });
  std::vector<const FactorizationRow*> valid;
  for (const auto& r : out.rho_table) {
    if (r.ok) valid.push_back(&r);
  }
  if (valid.size() < 3) throw Error(ErrorCode::kInsufficientData, "beta fit needs three valid rows");
  if (out.delta_lim <= 1e-12) {
    out.indeterminate = true;
    out.beta_estimate = std::numeric_limits<double>::quiet_NaN();
  } else {
    // Least squares ratio = beta + k rho over the three smallest rho.
    Eigen::Matrix<double, 3, 2> a;
    Eigen::Vector3d b;
    for (int i = 0; i < 3; ++i) {
      const FactorizationRow* r = valid[valid.size() - 1 - static_cast<size_t>(i)];
      a(i, 0) = 1.0;
      a(i, 1) = r->rho;
      b(i) = r->modulus / out.delta_lim;
    }
    out.beta_estimate = a.colPivHouseholderQr().solve(b)(0);
  }
  const double target = out.indeterminate ? 0.0 : out.beta_estimate * out.delta_lim;
  for (auto& r : out.rho_table) {
    if (r.ok) r.residual = std::abs(r.modulus - target);
  }
  for (size_t i = valid.size() / 2; i < valid.size(); ++i) out.residual = std::max(out.residual, valid[i]->residual);
  return out;
}

StabilityScan uniform_stability_scan(const SystemDefinition& system, const BoundaryData& boundary,
                                     const std::vector<RVec>& p_grid, const std::vector<Frequency>& zcheck_grid,
                                     const std::vector<double>& rho_grid, double threshold, int workers) {
  const size_t np = p_grid.size(), nz = zcheck_grid.size(), nr = rho_grid.size();
  StabilityScan scan;
  scan.threshold = threshold;
  scan.rows = parallel_map(np * nz * nr, workers, [&](std::size_t idx) {
    ScanRow row;
    row.p_index = idx / (nz * nr);
    row.z_index = (idx / nr) % nz;
    row.rho_index = idx % nr;
    try {
      const RVec& p = p_grid[row.p_index];
      const Frequency& z = zcheck_grid[row.z_index];
      const double rho = rho_grid[row.rho_index];
      if (rho < 0.0) throw Error(ErrorCode::kInvalidInput, "rho must be nonnegative");
      if (rho == 0.0) {
        row.modulus = lopatinski_limit(system, boundary, p, z).modulus;
      } else {
        const Frequency zeta = z.scaled(rho);
        const CMat g = assemble_full_symbol(system, p, zeta).G;
        row.modulus = evans_at(system, boundary, p, zeta, sweep_axis_tol(g)).modulus;
      }
      row.ok = true;
    } catch (const Error& e) {
      row.error = e.what();
    }
    return row;
  });
  scan.min_modulus = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < scan.rows.size(); ++i) {
    const ScanRow& r = scan.rows[i];
    if (!r.ok) {
      ++scan.failures;
      continue;
    }
    if (r.modulus < scan.min_modulus) {
      scan.min_modulus = r.modulus;
      scan.argmin = i;
    }
  }
  scan.pass = std::isfinite(scan.min_modulus) && scan.min_modulus >= threshold;
  if (!std::isfinite(scan.min_modulus)) scan.min_modulus = 0.0;
  return scan;
}

}  // namespace hpbvp

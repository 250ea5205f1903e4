#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hpbvp/frequency.hpp"
#include "hpbvp/linalg.hpp"

namespace hpbvp {

struct VariableSymbol {
  std::function<CMat(double x, const Frequency& zeta)> G_of_x;
  std::function<CMat(const Frequency& zeta)> G_inf;
  double theta = 1.0;
  double C_decay = 1.0;
};

/// max over the grid of |G(x) - G_inf| e^{theta x} / C_decay; <= 1 when the
/// decay bound holds.
double decay_audit(const VariableSymbol& vs, const Frequency& zeta, const std::vector<double>& xs);

struct Conjugator {
  std::vector<double> xs;  // ascending, xs.front() = 0
  std::vector<CMat> W;
  CMat G_inf;
  double theta1 = 0.0;
  double cond_bound = 1.0;
  double residual = 0.0;  // max |dW/dx - (G W - W G_inf)| with dW/dx by fourth-order differences
};

struct ConjugatorOptions {
  double abs_tol = 1e-14;
  double rel_tol = 1e-13;
  double cond_max = 1e12;
};

/// Solves dW/dx = G(x) W - W G_inf on [0, x_max] with W -> Id. The modes of
/// Z -> G_inf Z - Z G_inf are split at a cut in (-theta, 0): slow modes are
/// pinned to Id at x_max, fast-decaying ones (free in W -> Id, and
/// exponentially amplified by backward integration) are pinned at x = 0.
/// The resulting linear boundary value problem is solved by multiple
/// shooting with adaptive Dormand-Prince segments. theta1 is the slope of
/// log|W - Id| over the second half of the grid, excluding the last
/// 5 / theta where the end condition dominates. grid_step <= 0 selects
/// -log(0.99) / theta.
Conjugator build_conjugator(const VariableSymbol& vs, const Frequency& zeta, double x_max, double grid_step = -1.0,
                            const ConjugatorOptions& opts = {});

/// Gamma W(0)^{-1}.
CMat transform_boundary(const CMat& gamma, const Conjugator& conj);

/// Solution of du/dx = G(x) u from u(0) = u0 sampled at xs (ascending).
std::vector<CVec> propagate(const VariableSymbol& vs, const Frequency& zeta, const CVec& u0,
                            const std::vector<double>& xs, double abs_tol = 1e-13, double rel_tol = 1e-12);

struct EnergyConstants {
  double C0 = 1.0;
  double lambda = 1.0;
  double delta = 0.0;
  double C1 = 0.0;
};

struct EnergyAudit {
  double hermiticity = 0.0;   // max |S - S^H| over the grid
  double margin_bound = 0.0;     // C0 - max |S|
  double margin_positivity = 0.0;     // min eig(2 Re(S G) + dS/dx) - 2 lambda
  double margin_boundary = 0.0;     // min eig(S(0) - delta Id + C1 Gamma^H Gamma)
  double delta_max = 0.0;     // largest delta allowed by the boundary condition for this C1
  bool hypotheses_hold = false;
  std::string failed;         // names of the failed hypotheses
  double lhs = 0.0;           // lambda |u|^2 + delta |u(0)|^2
  double rhs = 0.0;           // C0^2 / lambda |f|^2 + C1 |Gamma u(0)|^2
  double slack = 0.0;         // rhs - lhs
  double identity_residual = 0.0;  // integration-by-parts identity, relative to the largest term
};

/// Energy estimate audit on a shared uniform x-grid. f is the forcing du/dx - G u.
/// Throws Error(kInvalidTrajectory) when u has not decayed to 1e-8 max|u|
/// at the grid end, Error(kInvalidInput) when the sizes disagree.
EnergyAudit energy_audit(const std::vector<double>& xs, const std::vector<CMat>& S, const std::vector<CMat>& G,
                         const CMat& gamma, const std::vector<CVec>& u, const std::vector<CVec>& f,
                         const EnergyConstants& k);

struct ManufacturedAudit {
  EnergyConstants constants;
  std::vector<EnergyAudit> audits;
  double min_slack = 0.0;
  double max_identity_residual = 0.0;
  bool hypotheses_hold = false;
};

/// Frozen-coefficient audit: trajectories u = sum_k v_k e^{mu_k x} with
/// random v_k and Re mu_k in [-3, -1], f = du/dx - G u. Constants are
/// C0 = |S|, lambda = min eig Re(S G), C1 = 10 C0 and the largest delta
/// the boundary condition allows. The trapezoid error of the identity
/// check is about step^2 |mu|^2 / 12, hence the fine default step.
ManufacturedAudit manufactured_energy_audit(const CMat& S, const CMat& G, const CMat& gamma, int trials,
                                            std::uint64_t seed, double x_max = 20.0, double step = 2.5e-4);

}  // namespace hpbvp

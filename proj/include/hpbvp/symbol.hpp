#pragma once

#include "hpbvp/frequency.hpp"
#include "hpbvp/linalg.hpp"
#include "hpbvp/system_model.hpp"

namespace hpbvp {

/// G = [[0, Id], [M, A]].
struct FullSymbol {
  CMat G;
  CMat A;
  CMat M;
};

/// Guard applied to the direct inverses of B_dd and A_d.
inline constexpr double kInverseCondMax = 1e12;

/// Throws Error(kSingularViscosity) when B_dd(p) is singular.
FullSymbol assemble_full_symbol(const SystemDefinition& system, const RVec& p, const Frequency& zeta);

/// -A_d^{-1}((i tau + gamma) Id + sum_j i eta_j A_j). The formula is linear,
/// so zcheck need not be normalised. Throws Error(kHypothesisViolation)
/// when A_d(p) is singular.
CMat assemble_h0(const SystemDefinition& system, const RVec& p, const Frequency& zcheck);

/// B_dd^{-1} A_d, the symbol's off-axis block at zeta = 0.
CMat viscous_limit(const SystemDefinition& system, const RVec& p);

}  // namespace hpbvp

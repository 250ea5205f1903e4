#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hpbvp/linalg.hpp"
#include "hpbvp/subspaces.hpp"
#include "hpbvp/system_model.hpp"

namespace hpbvp {

/// A matrix family evaluated at (p, zcheck, rho).
using BlockEval = std::function<CMat(const RVec& p, const Frequency& zcheck, double rho)>;

enum class BlockKind { kOffAxisPositive, kOffAxisNegative, kSimpleRoot, kMultipleRoot };
const char* to_string(BlockKind kind);

/// One diagonal block of Hcheck after the split around the imaginary-axis
/// eigenvalues of H0 at the base point.
struct HBlock {
  BlockKind kind = BlockKind::kSimpleRoot;
  cd center = 0.0;
  int dim = 0;
  int n_minus = 0;  // stable count for rho + gamma_check > 0
  BlockEval eval;
  RVec base_p;
  Frequency base;
};

struct HBlockPoint {
  CMat V;                     // columns: orthonormal bases of the blocks
  std::vector<CMat> blocks;   // compressions V_k^H Hcheck V_k
};

struct HBlockSplit {
  std::vector<HBlock> blocks;
  double delta_ball = 0.0;
  RVec base_p;
  Frequency base;
  std::function<HBlockPoint(const RVec&, const Frequency&, double)> evaluate;
};

/// delta <= 0 picks a ball radius from the base spectrum. Throws
/// Error(kInvalidDelta) when the balls would overlap or reach an off-axis
/// eigenvalue, Error(kSeparation) when a stable count changes across the
/// probe set.
HBlockSplit split_h_blocks(const SystemDefinition& system, const RVec& p, const Frequency& zcheck,
                           double delta = -1.0);

struct DerivativeOptions {
  double gamma_step = 1e-5;
  double rho_step = 1e-3;
  double richardson_tol = 1e-6;
  double q_dot_min = 1e-6;
};

/// Symmetrizer for a block with spectrum off the imaginary axis:
/// sign * Re(S X) = C Id where S = C * Lyapunov solution. C is fixed at the
/// base point so that S >= Id (sign +1) or S <= Id (sign -1) there.
struct OffAxisSymmetrizer {
  int sign = 1;
  double scale = 1.0;
  CMat eval(const CMat& x) const;
  static OffAxisSymmetrizer at_base(const CMat& x_base, int sign);
};

struct ParabolicSymmetrizer {
  CMat S;  // diag(kappa^2 S_+, -S_-) in the splitting basis
  CMat T;  // splitting basis [W_+ W_-]
  int dim_plus = 0;
  int dim_minus = 0;
  double C_plus = 1.0;
  double C_minus = 1.0;
  double margin_re = 0.0;     // min eig Re(S^P T^{-1} P T)
  double margin_plus = 0.0;   // min eig Re(S_+ P_+)
  double margin_minus = 0.0;  // min eig -Re(S_- P_-)
  double hermiticity = 0.0;
};

ParabolicSymmetrizer parabolic_block_symmetrizer(const CMat& p_block, double kappa);

struct SimpleRootSymmetrizer {
  double q_dot = 0.0;
  bool positive = false;  // q_dot > 0: E^k = {0}, S = kappa^2 Id
  CMat S;
  Subspace E_minus;
  CMat R_base;
  double margin_R = 0.0;  // min eig Re(S R); positive when q_dot Re R > 0
  std::string branch;
};

/// q(gamma_check) and R(base, 0) passed explicitly.
SimpleRootSymmetrizer simple_root_symmetrizer(double q_dot, const CMat& r_base, double kappa,
                                              double q_dot_min = 1e-6);
/// Estimates q_dot and R(base, 0) by central differences first.
SimpleRootSymmetrizer simple_root_symmetrizer(const HBlock& block, double kappa,
                                              const DerivativeOptions& opts = {});

/// Central difference in gamma_check of the mean eigenvalue of the block at
/// rho = 0, with a Richardson check against the half step.
double estimate_q_dot(const HBlock& block, const DerivativeOptions& opts = {});

struct RalstonForm {
  CMat X;  // conjugator I + X
  CMat Q;  // J + F, F supported on the first column of each nu x nu block
};

struct KreissNormalForm {
  int nu = 0;
  int alpha = 0;
  int beta = 0;
  double xi = 0.0;
  double q_dot = 0.0;
  CMat chain;   // V0 at the base point
  CMat Q_base;  // blockdiag i(xi Id + N)
  CMat Q_dot;   // d/dgamma_check of the Ralston form at the base point
  CMat R_base;  // rho-derivative after the first-column correction
  CMat Y;       // V^k = V0 (I + rho Y)
  CMat Rb;      // alpha x alpha lower-left entries of R_base
  HBlock block;

  RalstonForm ralston(const RVec& p, const Frequency& zcheck) const;
  CMat V0(const RVec& p, const Frequency& zcheck) const;
  CMat Vk(const RVec& p, const Frequency& zcheck, double rho) const;
  /// First beta vectors of each chain, in block coordinates.
  CMat E_minus_basis() const;
  CMat E_plus_basis() const;
};

/// Jordan chains, Ralston reduction and the derivative data. Throws
/// Error(kStructure) when the base block is not alpha copies of one Jordan
/// block, Error(kHypothesisViolation) when q_dot vanishes or q_dot Re Rb is
/// not positive definite.
KreissNormalForm kreiss_normal_form(const HBlock& block, const DerivativeOptions& opts = {});

/// Ralston form of an arbitrary matrix near blockdiag(J); exposed for tests.
RalstonForm ralston_reduce(const CMat& a, const CMat& j, int nu, int alpha);

struct EChoice {
  RMat E;
  double c = 1.0;
  std::vector<double> bounds;  // exact lower bound of each free diagonal entry, by row
  std::vector<int> bound_rows;
};

/// Constant c with E >= c diag(-Id_beta, kappa^2 Id) for the given data.
double e_form_constant(int nu, double q_dot, double e1, double kappa);
/// Successive choice of e_2 .. e_nu: each free diagonal entry is the
/// smallest power of two above its Schur-complement bound.
EChoice choose_E(int nu, int beta, double e1, double kappa, double c);

struct KreissMargins {
  double margin_E = 0.0;  // E - c diag(-Id_beta, kappa^2 Id)
  double margin_EQdot = 0.0;  // Re(E Qdot) - diag(2, -C Id)
  double margin_F = 0.0;    // Re(F N) - diag(-1, (C+1) Id)
  double margin_D = 0.0;  // D - Id
  double margin_ER = 0.0;  // Re(calE R) - diag(2 on first components, -C')
  double margin_ERF = 0.0;  // Re(calE R - i calF' Q) - Id
};

struct KreissBlockSymmetrizer {
  RMat E;  // scaled by lambda
  RMat F;
  RMat F_prime;
  double C = 0.0;
  double C_prime = 0.0;
  double c = 1.0;       // lower-bound constant of the unscaled E
  double lambda = 1.0;  // positive factor applied to E for the rho-part bound
  double kappa = 1.0;
  std::vector<double> e_bounds;
  KreissNormalForm nf;
  KreissMargins margins;

  RMat E_tilde(const RVec& p, const Frequency& zcheck) const;
  /// blockdiag(E + E~ - i gamma F - i rho F') / (lambda c), Ralston coordinates.
  CMat S(const RVec& p, const Frequency& zcheck, double rho) const;
};

/// Tridiagonal real skew F with Re(F N) >= diag(-1, (K + 1) Id), K = bound.
RMat skew_for_bound(int nu, double bound);

KreissBlockSymmetrizer kreiss_block_symmetrizer(const KreissNormalForm& nf, double kappa);

struct GridPoint {
  RVec p;
  Frequency zcheck;
  double rho = 0.0;
};

struct MarginRecord {
  double hermiticity = 0.0;
  double margin_hermitian = 0.0;   // tolerance minus hermiticity defect
  double margin_cone = 0.0;   // min eig S - (kappa^2 Pi_+^H Pi_+ - Pi_-^H Pi_-)
  double margin_dissipation = 0.0;  // min eig Re(S G) - c rho (gamma + rho) Id
  double witness = 0.0;     // max sampled |Pi_+ U| (kappa - 1) / |Pi_- U| over U in E_-(rho zcheck)
  bool pass = false;
};

struct BlockSummary {
  std::string kind;
  int dim = 0;
  int n_minus = 0;
  int nu = 1;
  int beta = 0;
  double q_dot = 0.0;
  std::string branch;
};

struct CertificateOptions {
  double hermiticity_rel = 1e-12;
  double pass_tol = -1e-10;
  int witness_samples = 100;
  std::uint64_t seed = 1;
  int workers = 1;
  bool throw_on_failure = true;
  double delta_ball = -1.0;
};

/// The symmetrizer family built at one base point.
class SymmetrizerFamily {
 public:
  SymmetrizerFamily(const SystemDefinition& system, const RVec& p, const Frequency& zcheck, double kappa,
                    double delta_ball = -1.0);

  CMat S(const RVec& p, const Frequency& zcheck, double rho) const;
  const Subspace& E_minus() const { return e_minus_; }
  const Subspace& E_plus() const { return e_plus_; }
  double delta_scale() const { return delta_scale_; }
  const std::vector<BlockSummary>& blocks() const { return summaries_; }
  int dim_parabolic_minus() const { return dim_par_minus_; }
  double kappa() const { return kappa_; }

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
  Subspace e_minus_;
  Subspace e_plus_;
  double delta_scale_ = 1.0;
  double kappa_ = 1.0;
  std::vector<BlockSummary> summaries_;
  int dim_par_minus_ = 0;
};

struct SymmetrizerCertificate {
  std::string system_name;
  RVec base_p;
  Frequency base;
  double kappa = 1.0;
  double kappa_eff = 1.0;
  // min over sampled U in E_-(rho zcheck) of |Pi_- U| / |Pi_+ U|; since
  // the cone and dissipation inequalities force (S U, U) <= 0 there, no symmetrizer for these
  // reference spaces reaches a larger kappa on this grid.
  double kappa_upper = 0.0;
  double c = 0.0;
  double delta_scale = 1.0;
  double hermiticity_tol = 0.0;
  Subspace E_minus_ref;
  Subspace E_plus_ref;
  std::vector<GridPoint> grid;
  std::vector<CMat> S_values;
  std::vector<CMat> G_values;
  std::vector<MarginRecord> margins;
  std::vector<BlockSummary> blocks;
  int dim_parabolic_minus = 0;
  bool pass = false;
  std::string failure;
};

/// tol (1 + |S| |G|); an empty G counts as |G| = 1. Margins are compared
/// against this so that the pass rule is invariant under scaling of S.
double scaled_tol(double tol, const CMat& s, const CMat& g);

/// Oblique projectors onto E_-, E_+ along each other.
void oblique_projectors(const Subspace& e_minus, const Subspace& e_plus, CMat& pi_minus, CMat& pi_plus);

/// Hermiticity, cone and dissipation margins at each grid point from stored values.
std::vector<MarginRecord> verify_symmetrizer(const std::vector<CMat>& S_values, const std::vector<CMat>& G_values,
                                             const Subspace& e_minus, const Subspace& e_plus, double kappa,
                                             double c, const std::vector<GridPoint>& grid,
                                             double hermiticity_rel = 1e-12, double pass_tol = -1e-10);

/// Largest c with Re(S G) - c rho (gamma + rho) >= 0 at every grid point.
double feasible_c(const std::vector<CMat>& S_values, const std::vector<CMat>& G_values,
                  const std::vector<GridPoint>& grid);

/// Largest kappa' <= kappa for which every cone margin is >= pass_tol.
double effective_kappa(const std::vector<CMat>& S_values, const Subspace& e_minus, const Subspace& e_plus,
                       double kappa, double pass_tol = -1e-10);

/// Builds, evaluates and verifies. When throw_on_failure is set a negative
/// margin raises Error(kCertificationFailure) naming the grid point.
SymmetrizerCertificate assemble_symmetrizer(const SystemDefinition& system, const RVec& p,
                                            const Frequency& zcheck, double kappa,
                                            const std::vector<GridPoint>& grid,
                                            const CertificateOptions& opts = {});

/// Grid {rho} x {gamma_check} around the base direction; zcheck on the
/// unit sphere with the base tangential direction.
std::vector<GridPoint> product_grid(const RVec& p, const Frequency& base, const std::vector<double>& rhos,
                                    const std::vector<double>& gammas);

}  // namespace hpbvp

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <string>

namespace hpbvp {

using cd = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

inline constexpr cd kI{0.0, 1.0};

double spectral_norm(const CMat& a);
double condition_number(const CMat& a);

/// Orthonormal basis of range(x). Columns with singular value below
/// rel_tol * sigma_max are dropped.
CMat orthonormal_basis(const CMat& x, double rel_tol = 1e-12);

/// Orthonormal basis of ker(a) (a is m x n, result n x (n - rank)).
CMat null_space(const CMat& a, double rel_tol = 1e-12);

int numerical_rank(const CMat& a, double abs_tol);

inline CMat hermitian_part(const CMat& a) { return 0.5 * (a + a.adjoint()); }

double min_eig_hermitian(const CMat& h);
double max_eig_hermitian(const CMat& h);

/// x^H s x for Hermitian s, returned exactly Hermitian.
CMat hermitian_congruence(const CMat& x, const CMat& s);

/// Inverse with a 2-norm condition guard; throws Error(kInvertibility).
CMat checked_inverse(const CMat& a, double cond_max, const std::string& what);

/// Right-multiplies q by the unitary polar factor of q^H ref, so the result
/// is the basis of range(q) closest to ref.
CMat align_basis(const CMat& q, const CMat& ref);

struct OrderedSchur {
  CMat t;        // upper triangular
  CMat u;        // unitary, g = u t u^H
  int leading;   // number of selected eigenvalues moved to the top
};

/// Complex Schur form with the selected eigenvalues reordered to the
/// leading diagonal positions; u.leftCols(leading) spans their invariant
/// subspace.
OrderedSchur ordered_schur(const CMat& g, const std::function<bool(cd)>& select);

/// Solves a^H x + x a = q (continuous Lyapunov) by Bartels-Stewart on the
/// complex Schur form of a. Throws Error(kNumerical) if the spectrum of a
/// meets that of -a^H.
CMat solve_lyapunov(const CMat& a, const CMat& q);

/// Solves a x - x b = c (Sylvester) through the Kronecker system; intended
/// for the small blocks used in this library.
CMat solve_sylvester_small(const CMat& a, const CMat& b, const CMat& c);

CVec eigenvalues(const CMat& a);

}  // namespace hpbvp

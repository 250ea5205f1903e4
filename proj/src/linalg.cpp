#include "hpbvp/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

#include "hpbvp/errors.hpp"

namespace hpbvp {

double spectral_norm(const CMat& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<CMat> svd(a);
  return svd.singularValues()(0);
}

double condition_number(const CMat& a) {
  if (a.size() == 0) return 1.0;
  Eigen::JacobiSVD<CMat> svd(a);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / smin;
}

CMat orthonormal_basis(const CMat& x, double rel_tol) {
  if (x.cols() == 0) return CMat(x.rows(), 0);
  Eigen::JacobiSVD<CMat> svd(x, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  int rank = 0;
  const double cut = rel_tol * (s.size() > 0 ? s(0) : 0.0);
  for (int i = 0; i < s.size(); ++i) {
    if (s(i) > cut && s(i) > 0.0) ++rank;
  }
  return svd.matrixU().leftCols(rank);
}

CMat null_space(const CMat& a, double rel_tol) {
  const Eigen::Index n = a.cols();
  if (a.rows() == 0) return CMat::Identity(n, n);
  Eigen::JacobiSVD<CMat> svd(a, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  int rank = 0;
  const double cut = rel_tol * (s.size() > 0 ? s(0) : 0.0);
  for (int i = 0; i < s.size(); ++i) {
    if (s(i) > cut && s(i) > 0.0) ++rank;
  }
  return svd.matrixV().rightCols(n - rank);
}

int numerical_rank(const CMat& a, double abs_tol) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<CMat> svd(a);
  const auto& s = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < s.size(); ++i) {
    if (s(i) > abs_tol) ++rank;
  }
  return rank;
}

double min_eig_hermitian(const CMat& h) {
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(h), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double max_eig_hermitian(const CMat& h) {
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(h), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

CMat hermitian_congruence(const CMat& x, const CMat& s) {
  CMat out = x.adjoint() * (s * x);
  // Mirror the upper triangle; the product is Hermitian up to rounding.
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    out(j, j) = cd(out(j, j).real(), 0.0);
    for (Eigen::Index i = 0; i < j; ++i) out(j, i) = std::conj(out(i, j));
  }
  return out;
}

CMat checked_inverse(const CMat& a, double cond_max, const std::string& what) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorCode::kInvalidInput, what + ": matrix is not square");
  }
  const double cond = condition_number(a);
  if (!(cond <= cond_max)) {
    throw Error(ErrorCode::kInvertibility,
                what + ": condition number " + std::to_string(cond) + " exceeds guard");
  }
  return a.fullPivLu().inverse();
}

CMat align_basis(const CMat& q, const CMat& ref) {
  if (q.cols() == 0) return q;
  const CMat m = q.adjoint() * ref;
  Eigen::JacobiSVD<CMat> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return q * (svd.matrixU() * svd.matrixV().adjoint());
}

namespace {

// Givens data with [c s; -conj(s) c] [f; g] = [r; 0], c real.
void make_rotation(cd f, cd g, double& c, cd& s) {
  if (g == cd(0.0)) {
    c = 1.0;
    s = 0.0;
    return;
  }
  if (f == cd(0.0)) {
    c = 0.0;
    s = std::conj(g) / std::abs(g);
    return;
  }
  const double af = std::abs(f);
  const double d = std::hypot(af, std::abs(g));
  c = af / d;
  s = (f / af) * std::conj(g) / d;
}

// Swaps the adjacent diagonal entries k and k+1 of the triangular factor.
void swap_adjacent(CMat& t, CMat& u, Eigen::Index k) {
  const Eigen::Index n = t.rows();
  const cd t11 = t(k, k);
  const cd t22 = t(k + 1, k + 1);
  double c;
  cd s;
  make_rotation(t(k, k + 1), t22 - t11, c, s);
  // Rows k, k+1 from column k+2.
  for (Eigen::Index j = k + 2; j < n; ++j) {
    const cd x = t(k, j);
    const cd y = t(k + 1, j);
    t(k, j) = c * x + s * y;
    t(k + 1, j) = c * y - std::conj(s) * x;
  }
  // Columns k, k+1 above row k.
  const cd sc = std::conj(s);
  for (Eigen::Index i = 0; i < k; ++i) {
    const cd x = t(i, k);
    const cd y = t(i, k + 1);
    t(i, k) = c * x + sc * y;
    t(i, k + 1) = c * y - std::conj(sc) * x;
  }
  t(k, k) = t22;
  t(k + 1, k + 1) = t11;
  for (Eigen::Index i = 0; i < n; ++i) {
    const cd x = u(i, k);
    const cd y = u(i, k + 1);
    u(i, k) = c * x + sc * y;
    u(i, k + 1) = c * y - std::conj(sc) * x;
  }
}

}  // namespace

OrderedSchur ordered_schur(const CMat& g, const std::function<bool(cd)>& select) {
  if (g.rows() != g.cols()) throw Error(ErrorCode::kInvalidInput, "ordered_schur: non-square");
  const Eigen::Index n = g.rows();
  OrderedSchur out;
  if (n == 0) {
    out.t = g;
    out.u = g;
    out.leading = 0;
    return out;
  }
  Eigen::ComplexSchur<CMat> schur(g, true);
  if (schur.info() != Eigen::Success) {
    throw Error(ErrorCode::kNumerical, "ordered_schur: Schur iteration failed");
  }
  out.t = schur.matrixT();
  out.u = schur.matrixU();
  // Entries below the diagonal are exact zeros in ComplexSchur output.
  out.t.triangularView<Eigen::StrictlyLower>().setZero();
  int placed = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!select(out.t(k, k))) continue;
    for (Eigen::Index j = k; j > placed; --j) swap_adjacent(out.t, out.u, j - 1);
    ++placed;
  }
  out.leading = placed;
  return out;
}

CMat solve_lyapunov(const CMat& a, const CMat& q) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || q.rows() != n || q.cols() != n) {
    throw Error(ErrorCode::kInvalidInput, "solve_lyapunov: dimension mismatch");
  }
  if (n == 0) return CMat(0, 0);
  Eigen::ComplexSchur<CMat> schur(a, true);
  if (schur.info() != Eigen::Success) {
    throw Error(ErrorCode::kNumerical, "solve_lyapunov: Schur iteration failed");
  }
  const CMat& t = schur.matrixT();
  const CMat& u = schur.matrixU();
  const CMat f = u.adjoint() * q * u;
  const CMat th = t.adjoint();
  CMat y = CMat::Zero(n, n);
  const double scale = 1.0 + t.cwiseAbs().maxCoeff();
  for (Eigen::Index j = 0; j < n; ++j) {
    CVec rhs = f.col(j);
    for (Eigen::Index k = 0; k < j; ++k) rhs -= y.col(k) * t(k, j);
    CMat lhs = th;
    lhs.diagonal().array() += t(j, j);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(lhs(i, i)) <= 1e-14 * scale) {
        throw Error(ErrorCode::kNumerical,
                    "solve_lyapunov: spectrum of a meets spectrum of -a^H");
      }
    }
    y.col(j) = lhs.triangularView<Eigen::Lower>().solve(rhs);
  }
  return u * y * u.adjoint();
}

CMat solve_sylvester_small(const CMat& a, const CMat& b, const CMat& c) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = b.rows();
  // vec(a x - x b) = (I_n (x) a - b^T (x) I_m) vec(x)
  CMat k = CMat::Zero(m * n, m * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    k.block(j * m, j * m, m, m) += a;
    for (Eigen::Index l = 0; l < n; ++l) {
      k.block(j * m, l * m, m, m).diagonal().array() -= b(l, j);
    }
  }
  const CVec rhs = Eigen::Map<const CVec>(c.data(), m * n);
  const CVec x = k.fullPivLu().solve(rhs);
  return Eigen::Map<const CMat>(x.data(), m, n);
}

CVec eigenvalues(const CMat& a) {
  if (a.rows() == 0) return CVec(0);
  Eigen::ComplexEigenSolver<CMat> es(a, false);
  return es.eigenvalues();
}

}  // namespace hpbvp

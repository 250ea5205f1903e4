#include "hpbvp/symbol.hpp"

#include <cmath>
#include <sstream>

#include "hpbvp/errors.hpp"

namespace hpbvp {

double Frequency::norm() const {
  return std::sqrt(tau * tau + eta.squaredNorm() + gamma * gamma);
}

Frequency Frequency::scaled(double s) const {
  Frequency out;
  out.tau = s * tau;
  out.eta = s * eta;
  out.gamma = s * gamma;
  return out;
}

PolarFrequency to_polar(const Frequency& zeta) {
  const double rho = zeta.norm();
  if (!(rho > 0.0) || !std::isfinite(rho)) {
    throw Error(ErrorCode::kDegenerateFrequency, "polar form needs a nonzero finite frequency");
  }
  return {zeta.scaled(1.0 / rho), rho};
}

Frequency from_polar(const PolarFrequency& pf) { return pf.zcheck.scaled(pf.rho); }

Frequency sphere_point(double tau, const Eigen::VectorXd& eta, double gamma_check) {
  if (gamma_check < 0.0 || gamma_check > 1.0) {
    throw Error(ErrorCode::kInvalidInput, "gamma_check must lie in [0, 1]");
  }
  const double t = std::sqrt(tau * tau + eta.squaredNorm());
  Frequency z;
  z.gamma = gamma_check;
  if (t == 0.0) {
    if (gamma_check != 1.0) throw Error(ErrorCode::kDegenerateFrequency, "zero tangential direction");
    z.eta = RVec::Zero(eta.size());
    return z;
  }
  const double s = std::sqrt(1.0 - gamma_check * gamma_check) / t;
  z.tau = s * tau;
  z.eta = s * eta;
  return z;
}

namespace {

std::string describe(const RVec& p) {
  std::ostringstream os;
  os << "p = (";
  for (Eigen::Index i = 0; i < p.size(); ++i) os << (i ? ", " : "") << p(i);
  os << ")";
  return os.str();
}

void check_eta(const SystemDefinition& system, const Frequency& z) {
  if (z.eta.size() != system.d() - 1) {
    throw Error(ErrorCode::kInvalidInput, "eta must have length d - 1");
  }
}

}  // namespace

FullSymbol assemble_full_symbol(const SystemDefinition& system, const RVec& p, const Frequency& zeta) {
  check_eta(system, zeta);
  const int n = system.n();
  const int d = system.d();
  const CMat bdd = system.B(p, d, d).cast<cd>();
  CMat binv;
  try {
    binv = checked_inverse(bdd, kInverseCondMax, "B_dd");
  } catch (const Error&) {
    throw Error(ErrorCode::kSingularViscosity, "B_dd is singular at " + describe(p));
  }
  CMat a = system.A(p, d).cast<cd>();
  CMat m = cd(zeta.gamma, zeta.tau) * CMat::Identity(n, n);
  for (int j = 1; j < d; ++j) {
    const double ej = zeta.eta(j - 1);
    a -= (kI * ej) * (system.B(p, j, d) + system.B(p, d, j)).cast<cd>();
    m += (kI * ej) * system.A(p, j).cast<cd>();
    for (int k = 1; k < d; ++k) m += (ej * zeta.eta(k - 1)) * system.B(p, j, k).cast<cd>();
  }
  FullSymbol out;
  out.A = binv * a;
  out.M = binv * m;
  out.G = CMat::Zero(2 * n, 2 * n);
  out.G.topRightCorner(n, n).setIdentity();
  out.G.bottomLeftCorner(n, n) = out.M;
  out.G.bottomRightCorner(n, n) = out.A;
  return out;
}

CMat assemble_h0(const SystemDefinition& system, const RVec& p, const Frequency& zcheck) {
  check_eta(system, zcheck);
  const int n = system.n();
  const int d = system.d();
  CMat adinv;
  try {
    adinv = checked_inverse(system.A(p, d).cast<cd>(), kInverseCondMax, "A_d");
  } catch (const Error&) {
    throw Error(ErrorCode::kHypothesisViolation, "A_d is singular at " + describe(p));
  }
  CMat s = cd(zcheck.gamma, zcheck.tau) * CMat::Identity(n, n);
  for (int j = 1; j < d; ++j) s += (kI * zcheck.eta(j - 1)) * system.A(p, j).cast<cd>();
  return -adinv * s;
}

CMat viscous_limit(const SystemDefinition& system, const RVec& p) {
  Frequency zero;
  zero.eta = RVec::Zero(system.d() - 1);
  return assemble_full_symbol(system, p, zero).A;
}

}  // namespace hpbvp

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

#include "hpbvp/errors.hpp"
#include "hpbvp/symbol.hpp"
#include "hpbvp/symmetrizer.hpp"

namespace hpbvp {

const char* to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::kOffAxisPositive: return "off_axis_positive";
    case BlockKind::kOffAxisNegative: return "off_axis_negative";
    case BlockKind::kSimpleRoot: return "simple_root";
    case BlockKind::kMultipleRoot: return "multiple_root";
  }
  return "unknown";
}

namespace {

Frequency with_gamma(const Frequency& z, double gamma) {
  Frequency out = z;
  out.gamma = gamma;
  return out;
}

int count_trace(const CMat& proj) { return static_cast<int>(std::lround(proj.trace().real())); }

struct SplitData {
  SystemDefinition system;
  std::vector<cd> centers;
  std::vector<CMat> cluster_refs;
  CMat plus_ref;
  CMat minus_ref;
  double delta = 0.0;
};

// Splits hcheck into blocks with bases aligned to the stored references.
HBlockPoint evaluate_split(const SplitData& d, const CMat& hc) {
  const Eigen::Index n = hc.rows();
  HBlockPoint out;
  std::vector<CMat> bases;
  CMat p_off = CMat::Identity(n, n);
  for (size_t c = 0; c < d.centers.size(); ++c) {
    const CMat proj = riesz_projector(hc, Region::disk(d.centers[c], d.delta));
    const Eigen::Index nk = d.cluster_refs[c].cols();
    if (count_trace(proj) != nk) {
      throw Error(ErrorCode::kSeparation, "eigenvalues left the ball around an imaginary-axis root");
    }
    const CMat w = orthonormal_basis(proj, 1e-8);
    if (w.cols() != nk) throw Error(ErrorCode::kSeparation, "cluster projector has the wrong rank");
    bases.push_back(align_basis(w, d.cluster_refs[c]));
    p_off -= proj;
  }
  const Eigen::Index n_off = d.plus_ref.cols() + d.minus_ref.cols();
  if (n_off > 0) {
    const CMat w_off = d.centers.empty() ? CMat(CMat::Identity(n, n)) : orthonormal_basis(p_off, 1e-8);
    if (w_off.cols() != n_off) throw Error(ErrorCode::kSeparation, "off-axis group changed dimension");
    const CMat comp = w_off.adjoint() * hc * w_off;
    const SpectralSplit sp = spectral_split(comp, 1e-12 * (1.0 + spectral_norm(comp)));
    if (sp.unstable.dim() != d.plus_ref.cols() || sp.stable.dim() != d.minus_ref.cols()) {
      throw Error(ErrorCode::kSeparation, "off-axis eigenvalue crossed the imaginary axis");
    }
    if (d.plus_ref.cols() > 0) bases.push_back(align_basis(w_off * sp.unstable.basis, d.plus_ref));
    if (d.minus_ref.cols() > 0) bases.push_back(align_basis(w_off * sp.stable.basis, d.minus_ref));
  }
  out.V.resize(n, n);
  Eigen::Index col = 0;
  for (const CMat& b : bases) {
    out.V.middleCols(col, b.cols()) = b;
    out.blocks.push_back(b.adjoint() * hc * b);
    col += b.cols();
  }
  return out;
}

}  // namespace

HBlockSplit split_h_blocks(const SystemDefinition& system, const RVec& p, const Frequency& zcheck, double delta) {
  const CMat h0 = assemble_h0(system, p, zcheck);
  const Eigen::Index n = h0.rows();
  const double scale = 1.0 + spectral_norm(h0);
  const double axis = 1e-6 * scale;
  const double cluster = 1e-4 * scale;
  const CVec ev = eigenvalues(h0);

  auto d = std::make_shared<SplitData>(SplitData{system, {}, {}, {}, {}, 0.0});
  std::vector<int> sizes;
  double min_off = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(ev(i).real()) > axis) {
      min_off = std::min(min_off, std::abs(ev(i).real()));
      continue;
    }
    bool placed = false;
    for (size_t c = 0; c < d->centers.size(); ++c) {
      if (std::abs(ev(i) - d->centers[c]) <= cluster) {
        d->centers[c] = (d->centers[c] * static_cast<double>(sizes[c]) + ev(i)) / static_cast<double>(sizes[c] + 1);
        ++sizes[c];
        placed = true;
        break;
      }
    }
    if (!placed) {
      d->centers.push_back(ev(i));
      sizes.push_back(1);
    }
  }
  for (cd& c : d->centers) c = cd(0.0, c.imag());
  std::vector<size_t> order(d->centers.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return d->centers[a].imag() < d->centers[b].imag(); });
  {
    std::vector<cd> c2;
    std::vector<int> s2;
    for (size_t i : order) {
      c2.push_back(d->centers[i]);
      s2.push_back(sizes[i]);
    }
    d->centers = c2;
    sizes = s2;
  }
  double min_sep = std::numeric_limits<double>::infinity();
  for (size_t a = 0; a + 1 < d->centers.size(); ++a) {
    min_sep = std::min(min_sep, std::abs(d->centers[a + 1] - d->centers[a]));
  }
  if (delta <= 0.0) {
    delta = std::min({0.25 * min_sep, 0.4 * min_off, 0.5 * scale});
  } else {
    if (delta >= 0.5 * min_sep) throw Error(ErrorCode::kInvalidDelta, "overlapping delta-balls");
    if (2.0 * delta > min_off) throw Error(ErrorCode::kInvalidDelta, "delta-ball reaches an off-axis eigenvalue");
  }
  d->delta = delta;

  // Reference bases at the base point.
  CMat p_off = CMat::Identity(n, n);
  for (size_t c = 0; c < d->centers.size(); ++c) {
    const CMat proj = riesz_projector(h0, Region::disk(d->centers[c], delta));
    if (count_trace(proj) != sizes[c]) throw Error(ErrorCode::kInvalidDelta, "delta-ball does not isolate a root");
    d->cluster_refs.push_back(orthonormal_basis(proj, 1e-8));
    p_off -= proj;
  }
  const Eigen::Index n_cl = std::accumulate(sizes.begin(), sizes.end(), Eigen::Index{0});
  if (n_cl < n) {
    const CMat w_off = d->centers.empty() ? CMat(CMat::Identity(n, n)) : orthonormal_basis(p_off, 1e-8);
    const CMat comp = w_off.adjoint() * h0 * w_off;
    const SpectralSplit sp = spectral_split(comp, 0.5 * min_off);
    d->plus_ref = w_off * sp.unstable.basis;
    d->minus_ref = w_off * sp.stable.basis;
  } else {
    d->plus_ref = CMat(n, 0);
    d->minus_ref = CMat(n, 0);
  }

  HBlockSplit out;
  out.delta_ball = delta;
  out.base_p = p;
  out.base = zcheck;
  out.evaluate = [d](const RVec& pp, const Frequency& z, double rho) {
    return evaluate_split(*d, h_check(d->system, pp, z, rho));
  };

  // Stable counts of the clusters under small gamma_check and rho.
  const double probe = 1e-4;
  const Frequency zg = sphere_point(zcheck.tau, zcheck.eta, std::max(zcheck.gamma, probe));
  std::vector<HBlockPoint> probes = {out.evaluate(p, zg, 0.0), out.evaluate(p, zcheck, probe),
                                     out.evaluate(p, zg, probe)};
  const HBlockPoint base_pt = out.evaluate(p, zcheck, 0.0);
  const size_t nblocks = base_pt.blocks.size();
  for (size_t k = 0; k < nblocks; ++k) {
    HBlock b;
    b.dim = static_cast<int>(base_pt.blocks[k].rows());
    b.base_p = p;
    b.base = zcheck;
    b.eval = [ev_fn = out.evaluate, k](const RVec& pp, const Frequency& z, double rho) {
      return ev_fn(pp, z, rho).blocks[k];
    };
    if (k < d->centers.size()) {
      b.center = d->centers[k];
      const CMat& b0 = base_pt.blocks[k];
      const cd mean = b0.trace() / static_cast<double>(b.dim);
      const double defect = (b0 - mean * CMat::Identity(b.dim, b.dim)).norm();
      b.kind = defect <= 1e-8 * scale ? BlockKind::kSimpleRoot : BlockKind::kMultipleRoot;
      int n_minus = -1;
      for (const HBlockPoint& hp : probes) {
        const CVec e = eigenvalues(hp.blocks[k]);
        const int cnt = static_cast<int>((e.real().array() < 0.0).count());
        if (n_minus >= 0 && cnt != n_minus) {
          throw Error(ErrorCode::kSeparation, "stable count of an imaginary-axis block is not constant");
        }
        n_minus = cnt;
      }
      b.n_minus = n_minus;
    } else if (k == d->centers.size() && d->plus_ref.cols() > 0) {
      b.kind = BlockKind::kOffAxisPositive;
      b.n_minus = 0;
    } else {
      b.kind = BlockKind::kOffAxisNegative;
      b.n_minus = b.dim;
    }
    out.blocks.push_back(std::move(b));
  }
  return out;
}

CMat OffAxisSymmetrizer::eval(const CMat& x) const {
  const Eigen::Index n = x.rows();
  return scale * solve_lyapunov(x, static_cast<double>(sign) * CMat::Identity(n, n));
}

OffAxisSymmetrizer OffAxisSymmetrizer::at_base(const CMat& x_base, int sign) {
  OffAxisSymmetrizer s;
  s.sign = sign;
  s.scale = 1.0;
  if (x_base.rows() == 0) return s;
  const CMat l = s.eval(x_base);
  s.scale = sign > 0 ? 1.0 / min_eig_hermitian(l) : 1.0 / max_eig_hermitian(l);
  return s;
}

ParabolicSymmetrizer parabolic_block_symmetrizer(const CMat& p_block, double kappa) {
  const Eigen::Index n = p_block.rows();
  const SpectralSplit sp = spectral_split(p_block);
  ParabolicSymmetrizer out;
  out.dim_plus = static_cast<int>(sp.unstable.dim());
  out.dim_minus = static_cast<int>(sp.stable.dim());
  out.T.resize(n, n);
  out.T << sp.unstable.basis, sp.stable.basis;
  const CMat pp = sp.unstable.basis.adjoint() * p_block * sp.unstable.basis;
  const CMat pm = sp.stable.basis.adjoint() * p_block * sp.stable.basis;
  const auto splus = OffAxisSymmetrizer::at_base(pp, +1);
  const auto sminus = OffAxisSymmetrizer::at_base(pm, -1);
  out.C_plus = splus.scale;
  out.C_minus = sminus.scale;
  const CMat s_plus = out.dim_plus > 0 ? splus.eval(pp) : CMat(0, 0);
  const CMat s_minus = out.dim_minus > 0 ? sminus.eval(pm) : CMat(0, 0);
  out.S = CMat::Zero(n, n);
  out.S.topLeftCorner(out.dim_plus, out.dim_plus) = kappa * kappa * s_plus;
  out.S.bottomRightCorner(out.dim_minus, out.dim_minus) = -s_minus;
  out.hermiticity = (out.S - out.S.adjoint()).norm();
  const CMat pt = out.T.inverse() * p_block * out.T;
  out.margin_re = min_eig_hermitian(hermitian_part(out.S * pt));
  out.margin_plus = out.dim_plus > 0 ? min_eig_hermitian(hermitian_part(s_plus * pp)) : 0.0;
  out.margin_minus = out.dim_minus > 0 ? min_eig_hermitian(hermitian_part(-(s_minus * pm))) : 0.0;
  return out;
}

SimpleRootSymmetrizer simple_root_symmetrizer(double q_dot, const CMat& r_base, double kappa, double q_dot_min) {
  if (!(std::abs(q_dot) >= q_dot_min)) throw Error(ErrorCode::kDegenerateRoot, "q_dot vanishes at a simple root");
  const Eigen::Index n = r_base.rows();
  SimpleRootSymmetrizer out;
  out.q_dot = q_dot;
  out.positive = q_dot > 0.0;
  out.R_base = r_base;
  if (out.positive) {
    out.S = kappa * kappa * CMat::Identity(n, n);
    out.E_minus = Subspace::zero(n);
    out.branch = "q_dot>0";
  } else {
    out.S = -CMat::Identity(n, n);
    out.E_minus = Subspace::whole(n);
    out.branch = "q_dot<0";
  }
  out.margin_R = min_eig_hermitian(hermitian_part(out.S * r_base));
  return out;
}

namespace {

double mean_eig_at(const HBlock& block, double gamma) {
  const CMat b = block.eval(block.base_p, with_gamma(block.base, block.base.gamma + gamma), 0.0);
  return (b.trace() / static_cast<double>(b.rows())).real();
}

double q_dot_step(const HBlock& block, double h) {
  return (mean_eig_at(block, h) - mean_eig_at(block, -h)) / (2.0 * h);
}

// d/drho of f at rho = 0 by central differences with one Richardson step.
CMat rho_derivative(const std::function<CMat(double)>& f, double h) {
  const CMat d1 = (f(h) - f(-h)) / (2.0 * h);
  const CMat d2 = (f(0.5 * h) - f(-0.5 * h)) / h;
  return (4.0 * d2 - d1) / 3.0;
}

}  // namespace

double estimate_q_dot(const HBlock& block, const DerivativeOptions& opts) {
  const double d1 = q_dot_step(block, opts.gamma_step);
  const double d2 = q_dot_step(block, 0.5 * opts.gamma_step);
  if (std::abs(d1 - d2) > opts.richardson_tol * (1.0 + std::abs(d2))) {
    throw Error(ErrorCode::kNumerical, "q_dot finite differences disagree under step halving");
  }
  return d2;
}

SimpleRootSymmetrizer simple_root_symmetrizer(const HBlock& block, double kappa, const DerivativeOptions& opts) {
  const double qd = estimate_q_dot(block, opts);
  const CMat r = rho_derivative([&](double rho) { return block.eval(block.base_p, block.base, rho); }, opts.rho_step);
  return simple_root_symmetrizer(qd, r, kappa, opts.q_dot_min);
}

namespace {

// Positions (row, col) of the first-column entries of every nu x nu block.
std::vector<std::pair<int, int>> first_column_positions(int nu, int alpha) {
  std::vector<std::pair<int, int>> pos;
  for (int p = 0; p < alpha; ++p) {
    for (int q = 0; q < alpha; ++q) {
      for (int a = 0; a < nu; ++a) pos.emplace_back(p * nu + a, q * nu);
    }
  }
  return pos;
}

// Linearised Ralston map (dX, dF) -> a dX - dX (j + f) - (I + x) dF as a
// Kronecker matrix, column-major vec for dX followed by the F entries.
CMat ralston_jacobian(const CMat& a, const CMat& jf, const CMat& x, const std::vector<std::pair<int, int>>& pos) {
  const int n = static_cast<int>(a.rows());
  const int nx = n * n;
  CMat jac = CMat::Zero(nx, nx + static_cast<int>(pos.size()));
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < n; ++r) {
      CMat e = CMat::Zero(n, n);
      e(r, c) = 1.0;
      const CMat img = a * e - e * jf;
      jac.col(c * n + r) = Eigen::Map<const CVec>(img.data(), nx);
    }
  }
  const CMat ix = CMat::Identity(n, n) + x;
  for (size_t k = 0; k < pos.size(); ++k) {
    CMat e = CMat::Zero(n, n);
    e(pos[k].first, pos[k].second) = 1.0;
    const CMat img = -(ix * e);
    jac.col(nx + static_cast<int>(k)) = Eigen::Map<const CVec>(img.data(), nx);
  }
  return jac;
}

// Min-norm (y, fr) with j y - y j - fr = -d.
void first_column_solve(const CMat& j, const CMat& d, int nu, int alpha, CMat& y, CMat& fr) {
  const int n = static_cast<int>(j.rows());
  const auto pos = first_column_positions(nu, alpha);
  const CMat jac = ralston_jacobian(j, j, CMat::Zero(n, n), pos);
  const CMat rhs_m = -d;
  const CVec rhs = Eigen::Map<const CVec>(rhs_m.data(), n * n);
  const CVec z = jac.completeOrthogonalDecomposition().solve(rhs);
  y = Eigen::Map<const CMat>(z.data(), n, n);
  fr = CMat::Zero(n, n);
  for (size_t k = 0; k < pos.size(); ++k) fr(pos[k].first, pos[k].second) = z(n * n + static_cast<int>(k));
}

}  // namespace

RalstonForm ralston_reduce(const CMat& a, const CMat& j, int nu, int alpha) {
  const int n = static_cast<int>(a.rows());
  const auto pos = first_column_positions(nu, alpha);
  CMat x = CMat::Zero(n, n);
  CMat f = CMat::Zero(n, n);
  const double tol = 1e-14 * (1.0 + a.norm());
  const CMat id = CMat::Identity(n, n);
  for (int it = 0; it < 60; ++it) {
    const CMat res = a * (id + x) - (id + x) * (j + f);
    if (res.norm() <= tol) return {x, j + f};
    const CMat jac = ralston_jacobian(a, j + f, x, pos);
    const CMat rhs_m = -res;
    const CVec rhs = Eigen::Map<const CVec>(rhs_m.data(), n * n);
    const CVec z = jac.completeOrthogonalDecomposition().solve(rhs);
    x += Eigen::Map<const CMat>(z.data(), n, n);
    for (size_t k = 0; k < pos.size(); ++k) f(pos[k].first, pos[k].second) += z(n * n + static_cast<int>(k));
  }
  const CMat res = a * (id + x) - (id + x) * (j + f);
  if (res.norm() > 1e3 * tol) throw Error(ErrorCode::kNumerical, "Ralston reduction did not converge");
  return {x, j + f};
}

RalstonForm KreissNormalForm::ralston(const RVec& p, const Frequency& zcheck) const {
  const CMat a = chain.inverse() * block.eval(p, zcheck, 0.0) * chain;
  return ralston_reduce(a, Q_base, nu, alpha);
}

CMat KreissNormalForm::V0(const RVec& p, const Frequency& zcheck) const {
  const RalstonForm r = ralston(p, zcheck);
  return chain * (CMat::Identity(chain.rows(), chain.cols()) + r.X);
}

CMat KreissNormalForm::Vk(const RVec& p, const Frequency& zcheck, double rho) const {
  return V0(p, zcheck) * (CMat::Identity(Y.rows(), Y.cols()) + rho * Y);
}

CMat KreissNormalForm::E_minus_basis() const {
  CMat out(chain.rows(), alpha * beta);
  for (int q = 0; q < alpha; ++q) {
    for (int a = 0; a < beta; ++a) out.col(q * beta + a) = chain.col(q * nu + a);
  }
  return out;
}

CMat KreissNormalForm::E_plus_basis() const {
  const int rest = nu - beta;
  CMat out(chain.rows(), alpha * rest);
  for (int q = 0; q < alpha; ++q) {
    for (int a = 0; a < rest; ++a) out.col(q * rest + a) = chain.col(q * nu + beta + a);
  }
  return out;
}

KreissNormalForm kreiss_normal_form(const HBlock& block, const DerivativeOptions& opts) {
  KreissNormalForm nf;
  nf.block = block;
  const CMat b0 = block.eval(block.base_p, block.base, 0.0);
  const int n = static_cast<int>(b0.rows());
  const cd center = b0.trace() / static_cast<double>(n);
  nf.xi = center.imag();
  const CMat x = b0 - cd(0.0, nf.xi) * CMat::Identity(n, n);
  const double scale = std::max(1.0, spectral_norm(x));

  std::vector<int> ranks(static_cast<size_t>(n) + 1, 0);
  ranks[0] = n;
  CMat xp = CMat::Identity(n, n);
  for (int m = 1; m <= n; ++m) {
    xp = xp * x;
    ranks[static_cast<size_t>(m)] = numerical_rank(xp, 1e-7 * std::pow(scale, m));
  }
  nf.alpha = n - ranks[1];
  if (nf.alpha <= 0 || n % nf.alpha != 0) throw Error(ErrorCode::kStructure, "block is not a repeated Jordan block");
  nf.nu = n / nf.alpha;
  if (nf.nu < 2) throw Error(ErrorCode::kStructure, "block is semisimple; use the simple-root symmetrizer");
  for (int m = 1; m <= nf.nu; ++m) {
    if (ranks[static_cast<size_t>(m)] != n - m * nf.alpha) {
      throw Error(ErrorCode::kStructure, "Jordan blocks of unequal size");
    }
  }

  // Chains t_1 .. t_nu with (B0 - i xi) t_l = i t_{l-1}.
  CMat xtop = CMat::Identity(n, n);
  for (int m = 1; m < nf.nu; ++m) xtop = xtop * x;
  const CMat ker = null_space(xtop, 1e-7);
  const CMat tops = ker.cols() == 0 ? CMat(CMat::Identity(n, n)) : null_space(ker.adjoint(), 1e-10);
  if (tops.cols() != nf.alpha) throw Error(ErrorCode::kStructure, "could not isolate the chain tops");
  nf.chain.resize(n, n);
  for (int q = 0; q < nf.alpha; ++q) {
    CVec t = tops.col(q);
    for (int l = nf.nu - 1; l >= 0; --l) {
      nf.chain.col(q * nf.nu + l) = t;
      t = -kI * (x * t);
    }
  }
  nf.Q_base = CMat::Zero(n, n);
  for (int q = 0; q < nf.alpha; ++q) {
    for (int a = 0; a < nf.nu; ++a) {
      nf.Q_base(q * nf.nu + a, q * nf.nu + a) = cd(0.0, nf.xi);
      if (a + 1 < nf.nu) nf.Q_base(q * nf.nu + a, q * nf.nu + a + 1) = kI;
    }
  }
  const CMat check = nf.chain.inverse() * b0 * nf.chain - nf.Q_base;
  if (check.norm() > 1e-6 * scale) throw Error(ErrorCode::kStructure, "Jordan chain reconstruction failed");

  auto q_at = [&](double g) {
    return nf.ralston(block.base_p, with_gamma(block.base, block.base.gamma + g)).Q;
  };
  const double h = opts.gamma_step;
  nf.Q_dot = (q_at(h) - q_at(-h)) / (2.0 * h);
  const CMat qd_half = (q_at(0.5 * h) - q_at(-0.5 * h)) / h;
  const int ll = nf.nu - 1;
  nf.q_dot = nf.Q_dot(ll, 0).real();
  if (std::abs(qd_half(ll, 0).real() - nf.q_dot) > opts.richardson_tol * (1.0 + std::abs(nf.q_dot))) {
    throw Error(ErrorCode::kNumerical, "q_dot finite differences disagree under step halving");
  }
  if (!(std::abs(nf.q_dot) >= opts.q_dot_min)) {
    throw Error(ErrorCode::kDegenerateRoot, "q_dot vanishes at a multiple root");
  }

  const CMat cinv = nf.chain.inverse();
  const CMat d = rho_derivative(
      [&](double rho) { return CMat(cinv * block.eval(block.base_p, block.base, rho) * nf.chain); }, opts.rho_step);
  CMat fr;
  first_column_solve(nf.Q_base, d, nf.nu, nf.alpha, nf.Y, fr);
  nf.R_base = fr;
  nf.Rb.resize(nf.alpha, nf.alpha);
  for (int p = 0; p < nf.alpha; ++p) {
    for (int q = 0; q < nf.alpha; ++q) nf.Rb(p, q) = nf.R_base(p * nf.nu + ll, q * nf.nu);
  }
  if (min_eig_hermitian(hermitian_part(nf.q_dot * nf.Rb)) <= 0.0) {
    throw Error(ErrorCode::kHypothesisViolation, "q_dot Re(Rb) is not positive definite");
  }
  if (nf.nu % 2 == 0) {
    nf.beta = nf.nu / 2;
  } else {
    nf.beta = nf.q_dot < 0.0 ? (nf.nu + 1) / 2 : (nf.nu - 1) / 2;
  }
  return nf;
}

double e_form_constant(int nu, double q_dot, double e1, double kappa) {
  if (nu % 2 == 0) return 1.0;
  return q_dot > 0.0 ? e1 / (2.0 * kappa * kappa) : 2.0 * std::abs(e1);
}

EChoice choose_E(int nu, int beta, double e1, double kappa, double c) {
  // e[j] for j = 1..nu; E(a, b) = e[a + b - nu] with 1-based a, b.
  std::vector<double> e(static_cast<size_t>(nu) + 1, 0.0);
  e[1] = e1;
  auto build = [&]() {
    RMat m = RMat::Zero(nu, nu);
    for (int a = 1; a <= nu; ++a) {
      for (int b = 1; b <= nu; ++b) {
        const int j = a + b - nu;
        if (j >= 1) m(a - 1, b - 1) = e[static_cast<size_t>(j)];
      }
    }
    return m;
  };
  auto target = [&](int a) { return a <= beta ? -c : c * kappa * kappa; };
  EChoice out;
  out.c = c;
  for (int a = 1; a <= nu; ++a) {
    const int j = 2 * a - nu;
    if (j < 2) continue;  // fixed: zero or e_1
    // Leading (a-1) block of E - c diag(-I, kappa^2 I) and the new column.
    RMat t = build();
    for (int r = 0; r < nu; ++r) t(r, r) -= target(r + 1);
    const RMat lead = t.topLeftCorner(a - 1, a - 1);
    const RVec y = t.col(a - 1).head(a - 1);
    const double bound = target(a) + y.dot(lead.ldlt().solve(y));
    double choice = 1.0;
    while (choice <= bound) choice *= 2.0;
    e[static_cast<size_t>(j)] = choice;
    out.bounds.push_back(bound);
    out.bound_rows.push_back(a);
  }
  out.E = build();
  return out;
}

RMat skew_for_bound(int nu, double bound) {
  const double k = bound + 1.0;
  RMat f = RMat::Zero(nu, nu);
  double g = k + 1.0;
  for (int a = 0; a + 1 < nu; ++a) {
    f(a, a + 1) = -g;
    f(a + 1, a) = g;
    g = k + 1.0 + 0.25 * g * g;
  }
  return f;
}

namespace {

RMat jordan_nilpotent(int nu) {
  RMat n = RMat::Zero(nu, nu);
  for (int a = 0; a + 1 < nu; ++a) n(a, a + 1) = 1.0;
  return n;
}

CMat block_diag_copies(const CMat& b, int copies) {
  const Eigen::Index m = b.rows();
  CMat out = CMat::Zero(m * copies, m * copies);
  for (int q = 0; q < copies; ++q) out.block(q * m, q * m, m, m) = b;
  return out;
}

// Smallest C with [[r11 - 2 Id, r21^H], [r21, R22 + C Id]] >= 0 where the
// "first" indices are given; a small slack keeps the margin nonnegative
// after rounding.
double schur_bound(const CMat& r, const std::vector<int>& first) {
  const int n = static_cast<int>(r.rows());
  std::vector<int> rest;
  for (int i = 0; i < n; ++i) {
    if (std::find(first.begin(), first.end(), i) == first.end()) rest.push_back(i);
  }
  const int f = static_cast<int>(first.size());
  const int m = static_cast<int>(rest.size());
  if (m == 0) return 0.0;
  CMat a(f, f), b(m, f), r22(m, m);
  for (int i = 0; i < f; ++i)
    for (int j = 0; j < f; ++j) a(i, j) = r(first[i], first[j]);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < f; ++j) b(i, j) = r(rest[i], first[j]);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) r22(i, j) = r(rest[i], rest[j]);
  const CMat a2 = a - 2.0 * CMat::Identity(f, f);
  if (min_eig_hermitian(a2) <= 0.0) throw Error(ErrorCode::kConstructionFailure, "first-component block below 2");
  const CMat schur = -r22 + b * a2.inverse() * b.adjoint();
  const double lam = std::max(0.0, max_eig_hermitian(hermitian_part(schur)));
  return lam + 1e-9 * (1.0 + lam);
}

}  // namespace

KreissBlockSymmetrizer kreiss_block_symmetrizer(const KreissNormalForm& nf, double kappa) {
  KreissBlockSymmetrizer ks;
  ks.nf = nf;
  ks.kappa = kappa;
  const int nu = nf.nu;
  const int n = nu * nf.alpha;
  const double e1 = (nf.q_dot > 0.0 ? 1.0 : -1.0) * std::max(3.0 / std::abs(nf.q_dot), 1.0);
  const double c0 = e_form_constant(nu, nf.q_dot, e1, kappa);
  const EChoice ec = choose_E(nu, nf.beta, e1, kappa, c0);
  ks.e_bounds = ec.bounds;

  // Scale E so that e_1 Re(Rb) >= 3.
  const double lam_rb = min_eig_hermitian(hermitian_part(e1 * nf.Rb));
  if (lam_rb <= 0.0) throw Error(ErrorCode::kConstructionFailure, "e_1 Re(Rb) is not positive definite");
  ks.lambda = std::max(1.0, 3.0 / lam_rb);
  ks.E = ks.lambda * ec.E;
  ks.c = ks.lambda * c0;

  const CMat qdot_blk = nf.Q_dot.topLeftCorner(nu, nu);
  const CMat re_eq = hermitian_part(ks.E.cast<cd>() * qdot_blk);
  ks.C = schur_bound(re_eq, {0});
  ks.F = skew_for_bound(nu, ks.C);

  const CMat cal_e = block_diag_copies(ks.E.cast<cd>(), nf.alpha);
  const CMat re_er = hermitian_part(cal_e * nf.R_base);
  std::vector<int> firsts;
  for (int q = 0; q < nf.alpha; ++q) firsts.push_back(q * nu);
  ks.C_prime = schur_bound(re_er, firsts);
  ks.F_prime = skew_for_bound(nu, ks.C_prime);

  // Margins at the base point.
  KreissMargins& m = ks.margins;
  RMat dpm = RMat::Identity(nu, nu) * (ks.c * kappa * kappa);
  for (int a = 0; a < nf.beta; ++a) dpm(a, a) = -ks.c;
  m.margin_E = min_eig_hermitian((ks.E - dpm).cast<cd>());
  CMat t531 = re_eq;
  t531(0, 0) -= 2.0;
  for (int a = 1; a < nu; ++a) t531(a, a) += ks.C;
  m.margin_EQdot = min_eig_hermitian(t531);
  const RMat nn = jordan_nilpotent(nu);
  const RMat re_fn = 0.5 * (ks.F * nn + (ks.F * nn).transpose());
  RMat tf = re_fn;
  tf(0, 0) += 1.0;
  for (int a = 1; a < nu; ++a) tf(a, a) -= ks.C + 1.0;
  m.margin_F = min_eig_hermitian(tf.cast<cd>());
  m.margin_D = min_eig_hermitian(re_eq + re_fn.cast<cd>() - CMat::Identity(nu, nu));
  CMat t533 = re_er;
  for (int i = 0; i < n; ++i) {
    if (i % nu == 0) {
      t533(i, i) -= 2.0;
    } else {
      t533(i, i) += ks.C_prime;
    }
  }
  m.margin_ER = min_eig_hermitian(t533);
  const CMat cal_fp = block_diag_copies(ks.F_prime.cast<cd>(), nf.alpha);
  const CMat d534 = hermitian_part(cal_e * nf.R_base - kI * cal_fp * nf.Q_base);
  m.margin_ERF = min_eig_hermitian(d534 - CMat::Identity(n, n));
  return ks;
}

RMat KreissBlockSymmetrizer::E_tilde(const RVec& p, const Frequency& zcheck) const {
  const int nu = nf.nu;
  const Frequency z0 = with_gamma(zcheck, 0.0);
  const CMat q = nf.ralston(p, z0).Q.topLeftCorner(nu, nu);
  const RMat k = (q / kI).real();
  // Unknowns: upper triangle of the symmetric correction.
  std::vector<std::pair<int, int>> unk;
  for (int i = 0; i < nu; ++i)
    for (int j = i; j < nu; ++j) unk.emplace_back(i, j);
  std::vector<std::pair<int, int>> eqs;
  for (int i = 0; i < nu; ++i)
    for (int j = i + 1; j < nu; ++j) eqs.emplace_back(i, j);
  if (eqs.empty()) return RMat::Zero(nu, nu);
  const RMat rhs_m = k.transpose() * E - E * k;
  RMat a = RMat::Zero(static_cast<Eigen::Index>(eqs.size()), static_cast<Eigen::Index>(unk.size()));
  RVec rhs(static_cast<Eigen::Index>(eqs.size()));
  for (size_t u = 0; u < unk.size(); ++u) {
    RMat et = RMat::Zero(nu, nu);
    et(unk[u].first, unk[u].second) = 1.0;
    et(unk[u].second, unk[u].first) = 1.0;
    const RMat img = et * k - k.transpose() * et;
    for (size_t e = 0; e < eqs.size(); ++e) a(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(u)) = img(eqs[e].first, eqs[e].second);
  }
  for (size_t e = 0; e < eqs.size(); ++e) rhs(static_cast<Eigen::Index>(e)) = rhs_m(eqs[e].first, eqs[e].second);
  const RVec z = a.completeOrthogonalDecomposition().solve(rhs);
  RMat out = RMat::Zero(nu, nu);
  for (size_t u = 0; u < unk.size(); ++u) {
    out(unk[u].first, unk[u].second) = z(static_cast<Eigen::Index>(u));
    out(unk[u].second, unk[u].first) = z(static_cast<Eigen::Index>(u));
  }
  return out;
}

CMat KreissBlockSymmetrizer::S(const RVec& p, const Frequency& zcheck, double rho) const {
  const RMat et = E_tilde(p, zcheck);
  const CMat sk = ((E + et).cast<cd>() - kI * zcheck.gamma * F.cast<cd>() - kI * rho * F_prime.cast<cd>()) / c;
  return block_diag_copies(sk, nf.alpha);
}

}  // namespace hpbvp

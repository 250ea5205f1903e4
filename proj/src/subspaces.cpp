#include "hpbvp/subspaces.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "hpbvp/errors.hpp"
#include "hpbvp/parallel.hpp"

namespace hpbvp {

constexpr double kEps = std::numeric_limits<double>::epsilon();

Subspace Subspace::span(const CMat& columns, double rel_tol) {
  return {orthonormal_basis(columns, rel_tol), columns.rows()};
}

Subspace Subspace::zero(Eigen::Index n) { return {CMat(n, 0), n}; }

Subspace Subspace::whole(Eigen::Index n) { return {CMat::Identity(n, n), n}; }

Subspace direct_sum(const Subspace& a, const Subspace& b) {
  if (a.ambient_dim != b.ambient_dim) throw Error(ErrorCode::kInvalidInput, "direct_sum: ambient mismatch");
  CMat cols(a.ambient_dim, a.dim() + b.dim());
  cols << a.basis, b.basis;
  Subspace out = Subspace::span(cols, 1e-10);
  if (out.dim() != a.dim() + b.dim()) {
    throw Error(ErrorCode::kInternalConsistency, "direct_sum: summands are not independent");
  }
  return out;
}

double default_axis_tol(const CMat& g) { return 1e-10 * (1.0 + spectral_norm(g)); }

double sweep_axis_tol(const CMat& g) { return 100.0 * kEps * (1.0 + spectral_norm(g)); }

SpectralSplit spectral_split(const CMat& g, double axis_tol) {
  if (g.rows() != g.cols()) throw Error(ErrorCode::kInvalidInput, "spectral_split: non-square");
  const Eigen::Index n = g.rows();
  if (axis_tol < 0.0) axis_tol = default_axis_tol(g);
  const auto left = ordered_schur(g, [](cd z) { return z.real() < 0.0; });
  const CVec diag = left.t.diagonal();
  double margin = std::numeric_limits<double>::infinity();
  cd worst = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(diag(i).real()) < margin) {
      margin = std::abs(diag(i).real());
      worst = diag(i);
    }
  }
  if (n > 0 && margin <= axis_tol) {
    throw NearAxisError(worst, axis_tol, "spectral_split: eigenvalue within tolerance of the imaginary axis");
  }
  SpectralSplit out;
  const int k = left.leading;
  out.stable = {left.u.leftCols(k), n};
  out.stable_eigs = diag.head(k);
  const auto right = ordered_schur(g, [](cd z) { return z.real() > 0.0; });
  out.unstable = {right.u.leftCols(right.leading), n};
  out.unstable_eigs = right.t.diagonal().head(right.leading);
  out.axis_margin = n > 0 ? margin : 0.0;
  return out;
}

namespace {

struct GaussRule {
  RVec x;  // nodes on [-1, 1]
  RVec w;
};

GaussRule gauss_legendre(int n) {
  // Golub-Welsch.
  RMat jac = RMat::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    jac(k, k - 1) = b;
    jac(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<RMat> es(jac);
  GaussRule r;
  r.x = es.eigenvalues();
  r.w = 2.0 * es.eigenvectors().row(0).transpose().array().square();
  return r;
}

double distance_to_spectrum(cd z, const CVec& ev) {
  double d = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < ev.size(); ++i) d = std::min(d, std::abs(z - ev(i)));
  return d;
}

// Adds (1 / 2 pi i) int over a parametrised path piece of (zI - G)^{-1} dz.
// The path is z(t), t in [t0, t1], with derivative dz(t); panels are halved
// until each is no longer than the distance from its midpoint to the
// spectrum.
template <class Path, class Deriv>
void integrate_path(const CMat& g, const CVec& ev, const GaussRule& rule, Path z, Deriv dz, double t0,
                    double t1, CMat& acc, int depth = 0) {
  const double tm = 0.5 * (t0 + t1);
  const double len = std::abs(dz(tm)) * (t1 - t0);
  if (len > distance_to_spectrum(z(tm), ev) && depth < 60) {
    integrate_path(g, ev, rule, z, dz, t0, tm, acc, depth + 1);
    integrate_path(g, ev, rule, z, dz, tm, t1, acc, depth + 1);
    return;
  }
  const Eigen::Index n = g.rows();
  const CMat id = CMat::Identity(n, n);
  const double half = 0.5 * (t1 - t0);
  for (Eigen::Index q = 0; q < rule.x.size(); ++q) {
    const double t = tm + half * rule.x(q);
    const cd zq = z(t);
    const CMat res = (zq * id - g).partialPivLu().inverse();
    acc += (rule.w(q) * half) * dz(t) * res;
  }
}

}  // namespace

CMat riesz_projector(const CMat& g, const Region& region, int quadrature_points, double collision_rel) {
  if (g.rows() != g.cols()) throw Error(ErrorCode::kInvalidInput, "riesz_projector: non-square");
  const Eigen::Index n = g.rows();
  const CMat id = CMat::Identity(n, n);
  if (n == 0) return id;
  const CVec ev = eigenvalues(g);
  const double scale = 1.0 + spectral_norm(g);
  const double collide = collision_rel * scale;
  const cd two_pi_i(0.0, 2.0 * std::numbers::pi);

  if (region.kind == Region::Kind::kDisk) {
    const double r = region.radius;
    if (!(r > 0.0)) throw Error(ErrorCode::kInvalidInput, "riesz_projector: disk radius must be positive");
    double ratio = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double dist = std::abs(ev(i) - region.center);
      if (std::abs(dist - r) <= std::max(collide, 1e-9 * r)) {
        throw Error(ErrorCode::kContourCollision, "riesz_projector: eigenvalue on the disk boundary");
      }
      ratio = std::max(ratio, dist < r ? dist / r : r / dist);
    }
    int k = quadrature_points;
    if (k <= 0) {
      k = ratio <= 0.0 ? 64 : static_cast<int>(std::ceil(std::log(1e-18) / std::log(ratio)));
      k = std::clamp(k, 64, 1 << 14);
    }
    CMat acc = CMat::Zero(n, n);
    for (int j = 0; j < k; ++j) {
      const double th = 2.0 * std::numbers::pi * (j + 0.5) / k;
      const cd w = r * std::exp(cd(0.0, th));
      acc += w * ((region.center + w) * id - g).partialPivLu().inverse();
    }
    return acc / static_cast<double>(k);
  }

  double radius = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(ev(i).real()) <= collide) {
      throw Error(ErrorCode::kContourCollision, "riesz_projector: eigenvalue on the imaginary axis");
    }
    radius = std::max(radius, std::abs(ev(i)));
  }
  const double big = 2.0 * radius + 1.0;
  const GaussRule rule = gauss_legendre(quadrature_points > 0 ? quadrature_points : 16);
  CMat acc = CMat::Zero(n, n);
  // Up the imaginary axis, then around the left semicircle.
  integrate_path(
      g, ev, rule, [](double t) { return cd(0.0, t); }, [](double) { return cd(0.0, 1.0); }, -big, big, acc);
  integrate_path(
      g, ev, rule, [big](double t) { return big * std::exp(cd(0.0, t)); },
      [big](double t) { return cd(0.0, big) * std::exp(cd(0.0, t)); }, 0.5 * std::numbers::pi,
      1.5 * std::numbers::pi, acc);
  CMat left = acc / two_pi_i;
  if (region.kind == Region::Kind::kLeftHalfPlane) return left;
  return id - left;
}

double subspace_gap(const Subspace& e1, const Subspace& e2) {
  if (e1.ambient_dim != e2.ambient_dim) throw Error(ErrorCode::kInvalidInput, "subspace_gap: ambient mismatch");
  if (e1.dim() != e2.dim()) return 1.0;
  if (e1.dim() == 0) return 0.0;
  // sin of the largest principal angle, from the residual of projecting e1
  // onto e2; equal to sqrt(1 - sigma_min(e1^H e2)^2) but accurate for small
  // angles.
  const CMat resid = e1.basis - e2.basis * (e2.basis.adjoint() * e1.basis);
  return std::clamp(spectral_norm(resid), 0.0, 1.0);
}

BlockStructure reference_block_structure(const SystemDefinition& system, const RVec& p) {
  const int n = system.n();
  const CMat a = viscous_limit(system, p);
  BlockStructure bs;
  CMat v1 = CMat::Zero(2 * n, n);
  v1.topRows(n).setIdentity();
  CMat raw(2 * n, n);
  raw << CMat::Identity(n, n), a;
  Eigen::SelfAdjointEigenSolver<CMat> es(CMat::Identity(n, n) + a.adjoint() * a);
  const CMat inv_sqrt = es.operatorInverseSqrt();
  const CMat v2 = raw * inv_sqrt;
  bs.V.resize(2 * n, 2 * n);
  bs.V << v1, v2;
  bs.H = CMat::Zero(n, n);
  bs.P = es.operatorSqrt() * a * inv_sqrt;
  bs.cond_V = condition_number(bs.V);
  const CVec ea = eigenvalues(a);
  bs.separation = ea.real().cwiseAbs().minCoeff();
  bs.r_in = 0.5 * bs.separation;
  bs.near_eigs = CVec::Zero(n);
  bs.far_eigs = ea;
  return bs;
}

BlockStructure low_freq_block_diag(const SystemDefinition& system, const RVec& p, const Frequency& zeta) {
  const int n = system.n();
  const BlockStructure ref = reference_block_structure(system, p);
  const double r = ref.r_in;
  if (!(r > 0.0)) throw Error(ErrorCode::kHypothesisViolation, "B_dd^{-1} A_d has an imaginary eigenvalue");
  const CMat g = assemble_full_symbol(system, p, zeta).G;
  const CVec ev = eigenvalues(g);
  CVec near(n), far(n);
  int nn = 0, nf = 0;
  bool separated = true;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    const double m = std::abs(ev(i));
    if (m <= 0.9 * r) {
      if (nn < n) near(nn) = ev(i);
      ++nn;
    } else if (m >= 1.1 * r) {
      if (nf < n) far(nf) = ev(i);
      ++nf;
    } else {
      separated = false;
    }
  }
  if (!separated || nn != n || nf != n) {
    std::string list;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      list += (i ? ", " : "") + std::to_string(ev(i).real()) + (ev(i).imag() < 0 ? "" : "+") +
              std::to_string(ev(i).imag()) + "i";
    }
    throw Error(ErrorCode::kSplitFailure,
                "low-frequency split failed (radius " + std::to_string(r) + "): eigenvalues " + list);
  }
  const CMat pin = riesz_projector(g, Region::disk(0.0, r));
  const CMat id = CMat::Identity(2 * n, 2 * n);
  Eigen::JacobiSVD<CMat> svd_in(pin, Eigen::ComputeThinU);
  Eigen::JacobiSVD<CMat> svd_out(id - pin, Eigen::ComputeThinU);
  const CMat v1 = align_basis(svd_in.matrixU().leftCols(n), ref.V.leftCols(n));
  const CMat v2 = align_basis(svd_out.matrixU().leftCols(n), ref.V.rightCols(n));
  BlockStructure bs;
  bs.V.resize(2 * n, 2 * n);
  bs.V << v1, v2;
  bs.H = v1.adjoint() * g * v1;
  bs.P = v2.adjoint() * g * v2;
  bs.cond_V = condition_number(bs.V);
  bs.r_in = r;
  bs.near_eigs = near;
  bs.far_eigs = far;
  bs.separation = far.real().cwiseAbs().minCoeff();
  return bs;
}

CMat h_check(const SystemDefinition& system, const RVec& p, const Frequency& zcheck, double rho) {
  if (rho == 0.0) return assemble_h0(system, p, zcheck);
  const BlockStructure bs = low_freq_block_diag(system, p, zcheck.scaled(rho));
  return bs.H / rho;
}

namespace {

Subspace stable_of(const CMat& h, double axis_tol) { return spectral_split(h, axis_tol).stable; }

// Jordan-chain reading of the gamma_check -> 0 limit at gamma_check = 0.
Subspace structural_limit(const SystemDefinition& system, const RVec& p, const Frequency& zcheck) {
  const CMat h0 = assemble_h0(system, p, zcheck);
  const Eigen::Index n = h0.rows();
  const double scale = 1.0 + spectral_norm(h0);
  const CVec ev = eigenvalues(h0);
  const double axis = 1e-6 * scale;
  const double cluster = 1e-4 * scale;

  // Off-axis stable part.
  const auto off = ordered_schur(h0, [axis](cd z) { return z.real() < -axis; });
  CMat cols = off.u.leftCols(off.leading);

  // Imaginary-axis clusters.
  std::vector<cd> centers;
  std::vector<int> sizes;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(ev(i).real()) > axis) continue;
    bool placed = false;
    for (size_t c = 0; c < centers.size(); ++c) {
      if (std::abs(ev(i) - centers[c]) <= cluster) {
        centers[c] = (centers[c] * static_cast<double>(sizes[c]) + ev(i)) / static_cast<double>(sizes[c] + 1);
        ++sizes[c];
        placed = true;
        break;
      }
    }
    if (!placed) {
      centers.push_back(ev(i));
      sizes.push_back(1);
    }
  }
  double min_sep = 1.0;
  for (size_t a = 0; a < centers.size(); ++a) {
    for (size_t b = a + 1; b < centers.size(); ++b) min_sep = std::min(min_sep, std::abs(centers[a] - centers[b]));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(ev(i).real()) > axis) {
      for (const cd& c : centers) min_sep = std::min(min_sep, std::abs(ev(i) - c));
    }
  }
  const double ball = 0.25 * min_sep;
  // Probe the stable count of each cluster at a small positive gamma_check.
  Frequency probe = zcheck;
  probe.gamma = 1e-3 * ball * ball / scale;
  const CVec ev_probe = eigenvalues(assemble_h0(system, p, probe));

  for (size_t c = 0; c < centers.size(); ++c) {
    const cd center = centers[c];
    const auto sch = ordered_schur(h0, [&](cd z) { return std::abs(z - center) <= cluster && std::abs(z.real()) <= axis; });
    const int nk = sch.leading;
    int n_minus = 0;
    int n_near = 0;
    for (Eigen::Index i = 0; i < ev_probe.size(); ++i) {
      if (std::abs(ev_probe(i) - center) < ball) {
        ++n_near;
        if (ev_probe(i).real() < 0.0) ++n_minus;
      }
    }
    if (n_near != nk) throw Error(ErrorCode::kSeparation, "cluster count changed under the gamma probe");
    if (n_minus == 0) continue;
    const CMat w = sch.u.leftCols(nk);
    const CMat x = sch.t.topLeftCorner(nk, nk) - center * CMat::Identity(nk, nk);
    const double rank_tol = 1e-6 * scale;
    const int alpha = nk - numerical_rank(x, rank_tol);
    if (alpha <= 0 || n_minus % alpha != 0) {
      throw Error(ErrorCode::kStructure, "imaginary-axis cluster is not a repeated Jordan block");
    }
    const int beta = n_minus / alpha;
    CMat xp = CMat::Identity(nk, nk);
    for (int m = 0; m < beta; ++m) xp = xp * x;
    const CMat ker = null_space(xp, 1e-6);
    if (ker.cols() != n_minus) throw Error(ErrorCode::kStructure, "Jordan chain kernel has the wrong dimension");
    CMat grown(n, cols.cols() + n_minus);
    grown << cols, w * ker;
    cols = grown;
  }
  return Subspace::span(cols, 1e-10);
}

}  // namespace

LimitResult hyperbolic_stable_limit_detail(const SystemDefinition& system, const RVec& p,
                                           const Frequency& zcheck, const LimitOptions& opts) {
  if (zcheck.gamma < 0.0) throw Error(ErrorCode::kInvalidInput, "gamma_check must be nonnegative");
  if (zcheck.norm() == 0.0) throw Error(ErrorCode::kDegenerateFrequency, "zcheck must be nonzero");
  LimitResult out;
  if (zcheck.gamma > 0.0) {
    out.subspace = stable_of(assemble_h0(system, p, zcheck), -1.0);
    return out;
  }
  Subspace prev;
  bool have_prev = false;
  for (int m = 0; m <= opts.max_steps; ++m) {
    const double gm = opts.gamma0 * std::ldexp(1.0, -m);
    const Frequency zm = sphere_point(zcheck.tau, zcheck.eta, gm);
    const CMat h = assemble_h0(system, p, zm);
    Subspace cur;
    try {
      cur = stable_of(h, 50.0 * kEps * (1.0 + spectral_norm(h)));
    } catch (const NearAxisError&) {
      break;
    }
    if (have_prev) {
      const double gap = subspace_gap(prev, cur);
      out.gap_trace.push_back(gap);
      if (gap < opts.tol) {
        out.subspace = cur;
        return out;
      }
    }
    prev = cur;
    have_prev = true;
  }
  if (!opts.structural_fallback) {
    throw ExtensionFailure(out.gap_trace, "gamma_check -> 0 sequence did not converge");
  }
  Subspace s;
  try {
    s = structural_limit(system, p, zcheck);
  } catch (const Error& e) {
    throw ExtensionFailure(out.gap_trace, std::string("sequence stalled and Jordan reading failed: ") + e.what());
  }
  if (have_prev && subspace_gap(prev, s) > opts.fallback_agreement) {
    throw ExtensionFailure(out.gap_trace, "Jordan reading disagrees with the gamma_check sequence");
  }
  out.subspace = s;
  out.structural = true;
  return out;
}

Subspace hyperbolic_stable_limit(const SystemDefinition& system, const RVec& p, const Frequency& zcheck,
                                 const LimitOptions& opts) {
  return hyperbolic_stable_limit_detail(system, p, zcheck, opts).subspace;
}

Subspace limit_bundle(const SystemDefinition& system, const RVec& p, const Frequency& zcheck) {
  const int n = system.n();
  const BlockStructure ref = reference_block_structure(system, p);
  const Subspace hyp = hyperbolic_stable_limit(system, p, zcheck);
  const Subspace par = spectral_split(ref.P).stable;
  if (hyp.dim() + par.dim() != n) {
    throw Error(ErrorCode::kInternalConsistency,
                "limit bundle has dimension " + std::to_string(hyp.dim() + par.dim()) + ", expected N");
  }
  CMat cols(2 * n, n);
  cols << ref.V.leftCols(n) * hyp.basis, ref.V.rightCols(n) * par.basis;
  return Subspace::span(cols, 1e-10);
}

Subspace stable_subspace(const SystemDefinition& system, const RVec& p, const Frequency& zeta) {
  const CMat g = assemble_full_symbol(system, p, zeta).G;
  return spectral_split(g, sweep_axis_tol(g)).stable;
}

Subspace stable_via_blocks(const SystemDefinition& system, const RVec& p, const Frequency& zcheck, double rho) {
  const int n = system.n();
  const BlockStructure bs = low_freq_block_diag(system, p, zcheck.scaled(rho));
  const CMat hc = bs.H / rho;
  const Subspace eh = spectral_split(hc, sweep_axis_tol(hc)).stable;
  const Subspace ep = spectral_split(bs.P).stable;
  CMat cols(2 * n, eh.dim() + ep.dim());
  cols << bs.V.leftCols(n) * eh.basis, bs.V.rightCols(n) * ep.basis;
  return Subspace::span(cols, 1e-10);
}

std::vector<ContinuityRow> continuity_sweep(const SystemDefinition& system, const RVec& p,
                                            const Frequency& zcheck, const std::vector<double>& rho_list,
                                            int workers) {
  for (size_t i = 0; i < rho_list.size(); ++i) {
    if (!(rho_list[i] > 0.0)) throw Error(ErrorCode::kInvalidInput, "continuity sweep needs rho > 0");
  }
  if (zcheck.gamma < 0.0) throw Error(ErrorCode::kInvalidInput, "gamma_check must be nonnegative");
  const Subspace lim = limit_bundle(system, p, zcheck);
  return parallel_map(rho_list.size(), workers, [&](std::size_t i) {
    ContinuityRow row;
    row.rho = rho_list[i];
    try {
      const Subspace e = stable_subspace(system, p, zcheck.scaled(row.rho));
      row.stable_dim = e.dim();
      row.gap = subspace_gap(e, lim);
      row.ok = true;
    } catch (const Error& e) {
      row.error = e.what();
    }
    return row;
  });
}

double loglog_slope(const std::vector<ContinuityRow>& rows) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (const auto& r : rows) {
    if (!r.ok || !(r.gap > 0.0)) continue;
    const double x = std::log(r.rho);
    const double y = std::log(r.gap);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace hpbvp

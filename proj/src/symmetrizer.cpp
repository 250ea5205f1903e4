#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "hpbvp/errors.hpp"
#include "hpbvp/parallel.hpp"
#include "hpbvp/symbol.hpp"
#include "hpbvp/symmetrizer.hpp"

namespace hpbvp {

namespace {

struct Level {
  double delta = 1.0;
  double kappa_inner = 1.0;
};

// Conjugation by T: S = delta T^{-H} S_inner T^{-1}, with kappa grown by
// cond(T) for the inner construction.
Level make_level(const CMat& t_base, double kappa) {
  if (t_base.rows() == 0) return {1.0, kappa};
  const CMat tinv = checked_inverse(t_base, 1e12, "symmetrizer level basis");
  const double ni = spectral_norm(tinv);
  return {1.0 / (ni * ni), kappa * spectral_norm(t_base) * ni};
}

CMat conjugate_back(const CMat& t, const CMat& inner, double delta) {
  if (t.rows() == 0) return inner;
  return delta * hermitian_congruence(checked_inverse(t, 1e12, "symmetrizer level basis"), inner);
}

CMat block_diag(const std::vector<CMat>& blocks) {
  Eigen::Index n = 0;
  for (const CMat& b : blocks) n += b.rows();
  CMat out = CMat::Zero(n, n);
  Eigen::Index o = 0;
  for (const CMat& b : blocks) {
    out.block(o, o, b.rows(), b.cols()) = b;
    o += b.rows();
  }
  return out;
}

CMat hstack(const CMat& a, const CMat& b) {
  CMat out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

}  // namespace

struct SymmetrizerFamily::Impl {
  SystemDefinition system;
  RVec p;
  Frequency base;
  Level lv0;
  HBlockSplit split;
  Level lvH;
  std::vector<BlockKind> kinds;
  std::vector<OffAxisSymmetrizer> off;           // per block (unused for roots)
  std::vector<CMat> simple_S;                    // per block
  std::vector<std::shared_ptr<KreissBlockSymmetrizer>> kreiss;
  std::vector<Level> kreiss_level;
  // Parabolic part.
  CMat w_plus_ref;
  CMat w_minus_ref;
  Level lvP;
  OffAxisSymmetrizer sym_plus;
  OffAxisSymmetrizer sym_minus;

  CMat S(const RVec& pp, const Frequency& z, double rho) const {
    const BlockStructure bs =
        rho == 0.0 ? reference_block_structure(system, pp) : low_freq_block_diag(system, pp, z.scaled(rho));
    const HBlockPoint hp = split.evaluate(pp, z, rho);
    std::vector<CMat> inner;
    for (size_t k = 0; k < hp.blocks.size(); ++k) {
      const CMat& hk = hp.blocks[k];
      const double kap = lvH.kappa_inner;
      switch (kinds[k]) {
        case BlockKind::kOffAxisPositive: inner.push_back(kap * kap * off[k].eval(hk)); break;
        case BlockKind::kOffAxisNegative: inner.push_back(-off[k].eval(hk)); break;
        case BlockKind::kSimpleRoot: inner.push_back(simple_S[k]); break;
        case BlockKind::kMultipleRoot: {
          const auto& ks = *kreiss[k];
          const CMat vk = ks.nf.Vk(pp, z, rho);
          inner.push_back(conjugate_back(vk, ks.S(pp, z, rho), kreiss_level[k].delta));
          break;
        }
      }
    }
    const CMat s_h = conjugate_back(hp.V, block_diag(inner), lvH.delta);

    // Parabolic block split into P_+ and P_-.
    const CMat& pm = bs.P;
    const SpectralSplit sp = spectral_split(pm);
    if (sp.unstable.dim() != w_plus_ref.cols() || sp.stable.dim() != w_minus_ref.cols()) {
      throw Error(ErrorCode::kSeparation, "parabolic block changed its inertia");
    }
    const CMat wp = w_plus_ref.cols() > 0 ? align_basis(sp.unstable.basis, w_plus_ref) : CMat(pm.rows(), 0);
    const CMat wm = w_minus_ref.cols() > 0 ? align_basis(sp.stable.basis, w_minus_ref) : CMat(pm.rows(), 0);
    std::vector<CMat> pin;
    const double kp = lvP.kappa_inner;
    if (wp.cols() > 0) pin.push_back(kp * kp * sym_plus.eval(wp.adjoint() * pm * wp));
    if (wm.cols() > 0) pin.push_back(-sym_minus.eval(wm.adjoint() * pm * wm));
    const CMat s_p = conjugate_back(hstack(wp, wm), block_diag(pin), lvP.delta);

    return conjugate_back(bs.V, block_diag({s_h, s_p}), lv0.delta);
  }
};

SymmetrizerFamily::SymmetrizerFamily(const SystemDefinition& system, const RVec& p, const Frequency& zcheck,
                                     double kappa, double delta_ball)
    : kappa_(kappa) {
  if (!(kappa > 1.0)) throw Error(ErrorCode::kInvalidInput, "kappa must exceed 1");
  auto impl = std::make_shared<Impl>(Impl{system, p, zcheck, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}});
  const BlockStructure ref = reference_block_structure(system, p);
  impl->lv0 = make_level(ref.V, kappa);
  delta_scale_ = impl->lv0.delta;

  impl->split = split_h_blocks(system, p, zcheck, delta_ball);
  const HBlockPoint hp = impl->split.evaluate(p, zcheck, 0.0);
  impl->lvH = make_level(hp.V, impl->lv0.kappa_inner);
  const size_t nb = impl->split.blocks.size();
  impl->kinds.resize(nb);
  impl->off.resize(nb);
  impl->simple_S.resize(nb);
  impl->kreiss.resize(nb);
  impl->kreiss_level.resize(nb);
  std::vector<CMat> eh_minus;
  std::vector<CMat> eh_plus;
  for (size_t k = 0; k < nb; ++k) {
    const HBlock& b = impl->split.blocks[k];
    impl->kinds[k] = b.kind;
    BlockSummary bsum;
    bsum.kind = to_string(b.kind);
    bsum.dim = b.dim;
    bsum.n_minus = b.n_minus;
    const Eigen::Index nk = b.dim;
    switch (b.kind) {
      case BlockKind::kOffAxisPositive:
        impl->off[k] = OffAxisSymmetrizer::at_base(hp.blocks[k], +1);
        eh_minus.push_back(CMat(nk, 0));
        eh_plus.push_back(CMat::Identity(nk, nk));
        break;
      case BlockKind::kOffAxisNegative:
        impl->off[k] = OffAxisSymmetrizer::at_base(hp.blocks[k], -1);
        eh_minus.push_back(CMat::Identity(nk, nk));
        eh_plus.push_back(CMat(nk, 0));
        break;
      case BlockKind::kSimpleRoot: {
        const auto sr = simple_root_symmetrizer(b, impl->lvH.kappa_inner);
        if (sr.margin_R <= 0.0) {
          throw Error(ErrorCode::kHypothesisViolation, "q_dot Re(R) is not positive definite at a simple root");
        }
        impl->simple_S[k] = sr.S;
        bsum.q_dot = sr.q_dot;
        bsum.branch = sr.branch;
        bsum.beta = sr.positive ? 0 : 1;
        eh_minus.push_back(sr.E_minus.basis);
        eh_plus.push_back(sr.positive ? CMat(CMat::Identity(nk, nk)) : CMat(nk, 0));
        break;
      }
      case BlockKind::kMultipleRoot: {
        const KreissNormalForm nf = kreiss_normal_form(b);
        impl->kreiss_level[k] = make_level(nf.chain, impl->lvH.kappa_inner);
        impl->kreiss[k] =
            std::make_shared<KreissBlockSymmetrizer>(kreiss_block_symmetrizer(nf, impl->kreiss_level[k].kappa_inner));
        bsum.nu = nf.nu;
        bsum.beta = nf.beta;
        bsum.q_dot = nf.q_dot;
        bsum.branch = nf.q_dot > 0.0 ? "q_dot>0" : "q_dot<0";
        eh_minus.push_back(nf.E_minus_basis());
        eh_plus.push_back(nf.E_plus_basis());
        break;
      }
    }
    summaries_.push_back(bsum);
  }

  const SpectralSplit psp = spectral_split(ref.P);
  impl->w_plus_ref = psp.unstable.basis;
  impl->w_minus_ref = psp.stable.basis;
  dim_par_minus_ = static_cast<int>(psp.stable.dim());
  const CMat tp = hstack(impl->w_plus_ref, impl->w_minus_ref);
  impl->lvP = make_level(tp, impl->lv0.kappa_inner);
  impl->sym_plus = OffAxisSymmetrizer::at_base(impl->w_plus_ref.adjoint() * ref.P * impl->w_plus_ref, +1);
  impl->sym_minus = OffAxisSymmetrizer::at_base(impl->w_minus_ref.adjoint() * ref.P * impl->w_minus_ref, -1);

  // E_pm = V (E^H_pm (+) E^P_pm), E^H_pm = V_H (+)_k E^k_pm.
  const Eigen::Index nn = hp.V.rows();
  auto assemble = [&](const std::vector<CMat>& parts, const CMat& par) {
    Eigen::Index cols = 0;
    for (const CMat& c : parts) cols += c.cols();
    CMat eh = CMat::Zero(nn, cols);
    Eigen::Index r = 0, c0 = 0;
    for (const CMat& c : parts) {
      eh.block(r, c0, c.rows(), c.cols()) = c;
      r += c.rows();
      c0 += c.cols();
    }
    eh = hp.V * eh;
    CMat both = CMat::Zero(2 * nn, eh.cols() + par.cols());
    both.topLeftCorner(nn, eh.cols()) = eh;
    both.bottomRightCorner(nn, par.cols()) = par;
    return Subspace::span(ref.V * both, 1e-10);
  };
  e_minus_ = assemble(eh_minus, impl->w_minus_ref);
  e_plus_ = assemble(eh_plus, impl->w_plus_ref);
  if (e_minus_.dim() != nn || e_plus_.dim() != nn) {
    throw Error(ErrorCode::kInternalConsistency, "reference subspaces do not have dimension N");
  }
  impl_ = impl;
}

CMat SymmetrizerFamily::S(const RVec& p, const Frequency& zcheck, double rho) const { return impl_->S(p, zcheck, rho); }

void oblique_projectors(const Subspace& e_minus, const Subspace& e_plus, CMat& pi_minus, CMat& pi_plus) {
  const Eigen::Index n = e_minus.ambient_dim;
  const CMat basis = hstack(e_minus.basis, e_plus.basis);
  if (basis.cols() != n) throw Error(ErrorCode::kInvalidInput, "E_- and E_+ must be complementary");
  const CMat inv = checked_inverse(basis, 1e12, "E_- (+) E_+");
  const Eigen::Index m = e_minus.dim();
  pi_minus = basis.leftCols(m) * inv.topRows(m);
  pi_plus = basis.rightCols(n - m) * inv.bottomRows(n - m);
}

namespace {

double cone_margin(const CMat& s, const CMat& pi_minus, const CMat& pi_plus, double kappa) {
  const CMat target = kappa * kappa * (pi_plus.adjoint() * pi_plus) - pi_minus.adjoint() * pi_minus;
  return min_eig_hermitian(hermitian_part(s - target));
}

}  // namespace

double scaled_tol(double tol, const CMat& s, const CMat& g) {
  return tol * (1.0 + spectral_norm(s) * (g.size() ? spectral_norm(g) : 1.0));
}

double feasible_c(const std::vector<CMat>& S_values, const std::vector<CMat>& G_values,
                  const std::vector<GridPoint>& grid) {
  double c = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < grid.size(); ++i) {
    const double t = grid[i].rho * (grid[i].zcheck.gamma + grid[i].rho);
    if (t <= 0.0) continue;
    c = std::min(c, min_eig_hermitian(hermitian_part(S_values[i] * G_values[i])) / t);
  }
  return std::isfinite(c) ? c : 0.0;
}

double effective_kappa(const std::vector<CMat>& S_values, const Subspace& e_minus, const Subspace& e_plus,
                       double kappa, double pass_tol) {
  CMat pm, pp;
  oblique_projectors(e_minus, e_plus, pm, pp);
  auto ok = [&](double k) {
    for (const CMat& s : S_values) {
      if (cone_margin(s, pm, pp, k) < scaled_tol(pass_tol, s, CMat())) return false;
    }
    return true;
  };
  if (ok(kappa)) return kappa;
  if (!ok(0.0)) return 0.0;
  double lo = 0.0, hi = kappa;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? lo : hi) = mid;
  }
  return lo;
}

std::vector<MarginRecord> verify_symmetrizer(const std::vector<CMat>& S_values, const std::vector<CMat>& G_values,
                                             const Subspace& e_minus, const Subspace& e_plus, double kappa,
                                             double c, const std::vector<GridPoint>& grid, double hermiticity_rel,
                                             double pass_tol) {
  if (S_values.size() != grid.size() || G_values.size() != grid.size()) {
    throw Error(ErrorCode::kInvalidInput, "one S and one G per grid point required");
  }
  CMat pm, pp;
  oblique_projectors(e_minus, e_plus, pm, pp);
  std::vector<MarginRecord> out(grid.size());
  for (size_t i = 0; i < grid.size(); ++i) {
    const CMat& s = S_values[i];
    const CMat& g = G_values[i];
    MarginRecord& r = out[i];
    r.hermiticity = (s - s.adjoint()).norm();
    r.margin_hermitian = hermiticity_rel * (1.0 + spectral_norm(s)) - r.hermiticity;
    r.margin_cone = cone_margin(s, pm, pp, kappa);
    const double t = grid[i].rho * (grid[i].zcheck.gamma + grid[i].rho);
    const Eigen::Index n = s.rows();
    r.margin_dissipation = min_eig_hermitian(hermitian_part(s * g) - c * t * CMat::Identity(n, n));
    r.pass = r.margin_hermitian >= 0.0 && r.margin_cone >= scaled_tol(pass_tol, s, CMat()) &&
             r.margin_dissipation >= scaled_tol(pass_tol, s, g);
  }
  return out;
}

std::vector<GridPoint> product_grid(const RVec& p, const Frequency& base, const std::vector<double>& rhos,
                                    const std::vector<double>& gammas) {
  std::vector<GridPoint> out;
  for (double g : gammas) {
    const Frequency z = sphere_point(base.tau, base.eta, g);
    for (double r : rhos) out.push_back({p, z, r});
  }
  return out;
}

SymmetrizerCertificate assemble_symmetrizer(const SystemDefinition& system, const RVec& p, const Frequency& zcheck,
                                            double kappa, const std::vector<GridPoint>& grid,
                                            const CertificateOptions& opts) {
  const SymmetrizerFamily fam(system, p, zcheck, kappa, opts.delta_ball);
  SymmetrizerCertificate cert;
  cert.system_name = system.name();
  cert.base_p = p;
  cert.base = zcheck;
  cert.kappa = kappa;
  cert.delta_scale = fam.delta_scale();
  cert.E_minus_ref = fam.E_minus();
  cert.E_plus_ref = fam.E_plus();
  cert.grid = grid;
  cert.blocks = fam.blocks();
  cert.dim_parabolic_minus = fam.dim_parabolic_minus();
  cert.hermiticity_tol = opts.hermiticity_rel;

  struct Eval {
    CMat s, g;
  };
  const auto evals = parallel_map(grid.size(), opts.workers, [&](std::size_t i) {
    const GridPoint& pt = grid[i];
    return Eval{fam.S(pt.p, pt.zcheck, pt.rho), assemble_full_symbol(system, pt.p, pt.zcheck.scaled(pt.rho)).G};
  });
  for (const Eval& e : evals) {
    cert.S_values.push_back(e.s);
    cert.G_values.push_back(e.g);
  }
  cert.c = feasible_c(cert.S_values, cert.G_values, grid);
  cert.kappa_eff = effective_kappa(cert.S_values, cert.E_minus_ref, cert.E_plus_ref, kappa, opts.pass_tol);
  cert.margins = verify_symmetrizer(cert.S_values, cert.G_values, cert.E_minus_ref, cert.E_plus_ref, kappa, cert.c,
                                    grid, opts.hermiticity_rel, opts.pass_tol);

  // Witness: sampled U in E_-(p, rho zcheck) against the reference cone.
  CMat pm, pp;
  oblique_projectors(cert.E_minus_ref, cert.E_plus_ref, pm, pp);
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> nd;
  cert.kappa_upper = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < grid.size(); ++i) {
    const GridPoint& pt = grid[i];
    if (pt.rho <= 0.0) continue;
    const Subspace em = stable_subspace(system, pt.p, pt.zcheck.scaled(pt.rho));
    double worst = 0.0;
    for (int s = 0; s < opts.witness_samples; ++s) {
      CVec coef(em.dim());
      for (Eigen::Index j = 0; j < coef.size(); ++j) coef(j) = cd(nd(rng), nd(rng));
      const CVec u = em.basis * coef;
      const double num = (pp * u).norm() * (kappa - 1.0);
      const double den = (pm * u).norm();
      worst = std::max(worst, den > 0.0 ? num / den : std::numeric_limits<double>::infinity());
      const double plus = (pp * u).norm();
      if (plus > 0.0) cert.kappa_upper = std::min(cert.kappa_upper, den / plus);
    }
    cert.margins[i].witness = worst;
    if (worst > 1.0) cert.margins[i].pass = false;
  }

  cert.pass = cert.c > 0.0;
  for (size_t i = 0; i < grid.size(); ++i) {
    if (!cert.margins[i].pass || !cert.pass) {
      std::ostringstream os;
      os << "margin failure at grid point " << i << " (rho=" << grid[i].rho << ", gamma_check=" << grid[i].zcheck.gamma
         << "): hermiticity=" << cert.margins[i].hermiticity << " cone=" << cert.margins[i].margin_cone
         << " dissipation=" << cert.margins[i].margin_dissipation << " witness=" << cert.margins[i].witness << " c=" << cert.c;
      cert.failure = os.str();
      cert.pass = false;
      break;
    }
  }
  if (!cert.pass && opts.throw_on_failure) throw Error(ErrorCode::kCertificationFailure, cert.failure);
  return cert;
}

}  // namespace hpbvp

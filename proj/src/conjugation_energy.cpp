#include "hpbvp/conjugation_energy.hpp"

#include <algorithm>
#include <boost/numeric/odeint.hpp>
#include <unsupported/Eigen/KroneckerProduct>
#include <cmath>
#include <random>
#include <limits>

#include "hpbvp/errors.hpp"
#include "hpbvp/subspaces.hpp"

namespace hpbvp {

namespace odeint = boost::numeric::odeint;
using State = std::vector<double>;

namespace {

void pack(const CMat& m, State& s) {
  s.resize(static_cast<size_t>(2 * m.size()));
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    s[static_cast<size_t>(2 * i)] = m.data()[i].real();
    s[static_cast<size_t>(2 * i + 1)] = m.data()[i].imag();
  }
}

CMat unpack(const State& s, Eigen::Index rows, Eigen::Index cols) {
  CMat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = cd(s[static_cast<size_t>(2 * i)], s[static_cast<size_t>(2 * i + 1)]);
  }
  return m;
}

std::vector<double> uniform_grid(double x_max, double step) {
  const auto n = static_cast<size_t>(std::ceil(x_max / step - 1e-9));
  std::vector<double> xs(n + 1);
  for (size_t i = 0; i <= n; ++i) xs[i] = x_max * static_cast<double>(i) / static_cast<double>(n);
  return xs;
}

// Fourth-order first derivative on a uniform grid.
CMat derivative4(const std::vector<CMat>& v, size_t i, double h) {
  const size_t n = v.size();
  if (n < 5) {
    if (i == 0) return (v[1] - v[0]) / h;
    if (i + 1 == n) return (v[n - 1] - v[n - 2]) / h;
    return (v[i + 1] - v[i - 1]) / (2.0 * h);
  }
  if (i >= 2 && i + 2 < n) return (v[i - 2] - 8.0 * v[i - 1] + 8.0 * v[i + 1] - v[i + 2]) / (12.0 * h);
  if (i < 2) {
    return (-25.0 * v[i] + 48.0 * v[i + 1] - 36.0 * v[i + 2] + 16.0 * v[i + 3] - 3.0 * v[i + 4]) / (12.0 * h);
  }
  return (25.0 * v[i] - 48.0 * v[i - 1] + 36.0 * v[i - 2] - 16.0 * v[i - 3] + 3.0 * v[i - 4]) / (12.0 * h);
}

}  // namespace

double decay_audit(const VariableSymbol& vs, const Frequency& zeta, const std::vector<double>& xs) {
  const CMat ginf = vs.G_inf(zeta);
  // G(x) - G_inf is formed by cancellation; allow its rounding error.
  const double floor = 1e-14 * (1.0 + spectral_norm(ginf));
  double worst = 0.0;
  for (double x : xs) {
    const double d = std::max(0.0, spectral_norm(vs.G_of_x(x, zeta) - ginf) - floor);
    worst = std::max(worst, d * std::exp(vs.theta * x) / vs.C_decay);
  }
  return worst;
}

namespace {

// vec(Z) form of dZ/dx = G_inf Z - Z G_inf + P (Id + Z), P = G(x) - G_inf:
// dz/dx = A(x) z + vec(P(x)) with A(x) = Id (x) G(x) - G_inf^T (x) Id.
CMat sylvester_operator(const CMat& g, const CMat& ginf) {
  const Eigen::Index n = g.rows();
  const CMat id = CMat::Identity(n, n);
  return Eigen::kroneckerProduct(id, g).eval() - Eigen::kroneckerProduct(ginf.transpose(), id).eval();
}

CVec vec_of(const CMat& m) { return Eigen::Map<const CVec>(m.data(), m.size()); }

// Cut in (-theta, 0) separating modes pinned at x_max (Re >= cut) from
// modes pinned at 0; the midpoint of the widest eigenvalue-free gap.
double dichotomy_cut(const CVec& ev, double theta) {
  std::vector<double> pts = {-theta, 0.0};
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    const double r = ev(i).real();
    if (r > -theta && r < 0.0) pts.push_back(r);
  }
  std::sort(pts.begin(), pts.end());
  double best = -0.5 * theta, width = -1.0;
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    if (pts[i + 1] - pts[i] > width) {
      width = pts[i + 1] - pts[i];
      best = 0.5 * (pts[i] + pts[i + 1]);
    }
  }
  return best;
}

}  // namespace

Conjugator build_conjugator(const VariableSymbol& vs, const Frequency& zeta, double x_max, double grid_step,
                            const ConjugatorOptions& opts) {
  if (!(vs.theta > 0.0)) throw Error(ErrorCode::kInvalidInput, "theta must be positive");
  if (x_max * vs.theta < 20.0) throw Error(ErrorCode::kInvalidInput, "x_max theta must be at least 20");
  if (grid_step <= 0.0) grid_step = -std::log(0.99) / vs.theta;
  Conjugator c;
  c.xs = uniform_grid(x_max, grid_step);
  if (decay_audit(vs, zeta, c.xs) > 1.0 + 1e-12) {
    throw Error(ErrorCode::kInvalidInput, "G(x) - G_inf violates the decay bound");
  }
  c.G_inf = vs.G_inf(zeta);
  const Eigen::Index n = c.G_inf.rows();
  const Eigen::Index nn = n * n;
  const size_t m = c.xs.size();
  const double h = c.xs[1] - c.xs[0];

  // Split of the constant-coefficient Sylvester operator.
  const CMat l_inf = sylvester_operator(c.G_inf, c.G_inf);
  const CVec ev = eigenvalues(l_inf);
  const double cut = dichotomy_cut(ev, vs.theta);
  const CMat pi_f = riesz_projector(l_inf - cut * CMat::Identity(nn, nn), Region::left_half_plane());
  Eigen::Index k_f = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) k_f += ev(i).real() < cut ? 1 : 0;
  auto leading_rows = [](const CMat& proj, Eigen::Index k) {
    Eigen::JacobiSVD<CMat> svd(proj.adjoint(), Eigen::ComputeFullU);
    return CMat(svd.matrixU().leftCols(k).adjoint());
  };
  const CMat rows_f = leading_rows(pi_f, k_f);
  const CMat rows_b = leading_rows(CMat::Identity(nn, nn) - pi_f, nn - k_f);

  // Segments short enough that the fundamental matrix stays well conditioned.
  double growth = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) growth = std::max(growth, std::abs(ev(i).real()));
  growth += spectral_norm(vs.G_of_x(0.0, zeta) - c.G_inf);
  const auto steps_per = static_cast<size_t>(std::max(1.0, std::floor(4.0 / (std::max(growth, 1e-3) * h))));
  std::vector<size_t> starts;
  for (size_t i = 0; i + 1 < m; i += steps_per) starts.push_back(i);
  const size_t nseg = starts.size();

  // Per segment: [Y y] with Y(a) = Id, y(a) = 0, stored at every grid node.
  auto rhs = [&](const State& s, State& ds, double x) {
    const CMat st = unpack(s, nn, nn + 1);
    const CMat g = vs.G_of_x(x, zeta);
    CMat d = sylvester_operator(g, c.G_inf) * st;
    d.col(nn) += vec_of(g - c.G_inf);
    pack(d, ds);
  };
  std::vector<CMat> fund(m);
  std::vector<CMat> seg_end(nseg);
  for (size_t k = 0; k < nseg; ++k) {
    const size_t a = starts[k];
    const size_t b = std::min(m - 1, a + steps_per);
    CMat init = CMat::Zero(nn, nn + 1);
    init.leftCols(nn) = CMat::Identity(nn, nn);
    State s;
    pack(init, s);
    std::vector<double> times(c.xs.begin() + static_cast<std::ptrdiff_t>(a),
                              c.xs.begin() + static_cast<std::ptrdiff_t>(b) + 1);
    std::vector<CMat> vals;
    auto stepper = odeint::make_dense_output(opts.abs_tol, opts.rel_tol, odeint::runge_kutta_dopri5<State>());
    odeint::integrate_times(stepper, rhs, s, times.begin(), times.end(), h,
                            [&](const State& st, double) { vals.push_back(unpack(st, nn, nn + 1)); });
    for (size_t j = 0; j + 1 < vals.size(); ++j) fund[a + j] = vals[j];
    seg_end[k] = vals.back();
    if (k + 1 == nseg) fund[m - 1] = vals.back();
  }

  // Unknowns: z at each segment start. Continuity plus split end conditions.
  const Eigen::Index dim = static_cast<Eigen::Index>(nseg) * nn;
  CMat sys = CMat::Zero(dim, dim);
  CVec rhs_v = CVec::Zero(dim);
  Eigen::Index row = 0;
  sys.block(row, 0, rows_f.rows(), nn) = rows_f;
  row += rows_f.rows();
  for (size_t k = 0; k + 1 < nseg; ++k) {
    const Eigen::Index ck = static_cast<Eigen::Index>(k) * nn;
    sys.block(row, ck, nn, nn) = seg_end[k].leftCols(nn);
    sys.block(row, ck + nn, nn, nn) = -CMat::Identity(nn, nn);
    rhs_v.segment(row, nn) = -seg_end[k].col(nn);
    row += nn;
  }
  const Eigen::Index cl = static_cast<Eigen::Index>(nseg - 1) * nn;
  sys.block(row, cl, rows_b.rows(), nn) = rows_b * seg_end[nseg - 1].leftCols(nn);
  rhs_v.segment(row, rows_b.rows()) = -rows_b * seg_end[nseg - 1].col(nn);
  const CVec starts_z = sys.partialPivLu().solve(rhs_v);

  c.W.resize(m);
  for (size_t i = 0; i < m; ++i) {
    const size_t k = std::min(nseg - 1, i / steps_per);
    const CVec z = fund[i].leftCols(nn) * starts_z.segment(static_cast<Eigen::Index>(k) * nn, nn) + fund[i].col(nn);
    c.W[i] = CMat::Identity(n, n) + Eigen::Map<const CMat>(z.data(), n, n);
  }

  for (size_t i = 0; i < m; ++i) {
    const CMat& w = c.W[i];
    const double cw = condition_number(w);
    if (!std::isfinite(cw) || cw > opts.cond_max) {
      throw Error(ErrorCode::kInvertibility, "conjugator is singular at x = " + std::to_string(c.xs[i]));
    }
    c.cond_bound = std::max(c.cond_bound, cw);
    const CMat res = derivative4(c.W, i, h) - (vs.G_of_x(c.xs[i], zeta) * w - w * c.G_inf);
    c.residual = std::max(c.residual, spectral_norm(res));
  }

  // Decay rate from the second half of the grid.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  const double stop = x_max - 5.0 / vs.theta;
  for (size_t i = 0; i < m; ++i) {
    const double x = c.xs[i];
    if (x < 0.5 * x_max || x > stop) continue;
    const double e = spectral_norm(c.W[i] - CMat::Identity(n, n));
    if (e < 1e-14) continue;
    const double y = std::log(e);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++cnt;
  }
  if (cnt < 2) {
    // W - Id vanishes to working precision: constant coefficients.
    c.theta1 = std::numeric_limits<double>::infinity();
  } else {
    c.theta1 = -(cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    if (!(c.theta1 > 0.0)) throw Error(ErrorCode::kConjugationFailure, "W - Id grows instead of decaying");
  }
  return c;
}

CMat transform_boundary(const CMat& gamma, const Conjugator& conj) {
  if (conj.W.empty()) throw Error(ErrorCode::kInvalidInput, "empty conjugator");
  return gamma * checked_inverse(conj.W.front(), 1e12, "W(0)");
}

std::vector<CVec> propagate(const VariableSymbol& vs, const Frequency& zeta, const CVec& u0,
                            const std::vector<double>& xs, double abs_tol, double rel_tol) {
  const Eigen::Index n = u0.size();
  auto rhs = [&](const State& s, State& ds, double x) {
    const CMat u = unpack(s, n, 1);
    pack(vs.G_of_x(x, zeta) * u, ds);
  };
  State s;
  pack(CMat(u0), s);
  std::vector<CVec> out;
  out.reserve(xs.size());
  const double dt = xs.size() > 1 ? xs[1] - xs[0] : 1.0;
  auto stepper = odeint::make_dense_output(abs_tol, rel_tol, odeint::runge_kutta_dopri5<State>());
  odeint::integrate_times(stepper, rhs, s, xs.begin(), xs.end(), dt,
                          [&](const State& st, double) { out.push_back(unpack(st, n, 1).col(0)); });
  return out;
}

EnergyAudit energy_audit(const std::vector<double>& xs, const std::vector<CMat>& S, const std::vector<CMat>& G,
                         const CMat& gamma, const std::vector<CVec>& u, const std::vector<CVec>& f,
                         const EnergyConstants& k) {
  const size_t m = xs.size();
  if (m < 2 || S.size() != m || G.size() != m || u.size() != m || f.size() != m) {
    throw Error(ErrorCode::kInvalidInput, "S, G, u and f must share the x-grid");
  }
  if (!(k.lambda > 0.0)) throw Error(ErrorCode::kInvalidInput, "lambda must be positive");
  double umax = 0.0;
  for (const CVec& v : u) umax = std::max(umax, v.norm());
  if (u.back().norm() > 1e-8 * umax) throw Error(ErrorCode::kInvalidTrajectory, "u has not decayed at the grid end");

  const Eigen::Index n = S.front().rows();
  const double h = xs[1] - xs[0];
  EnergyAudit a;
  double smax = 0.0;
  a.margin_positivity = std::numeric_limits<double>::infinity();
  // Integrands for the quadratures.
  std::vector<double> uu(m), ff(m), quad(m), sfu(m);
  for (size_t i = 0; i < m; ++i) {
    a.hermiticity = std::max(a.hermiticity, (S[i] - S[i].adjoint()).norm());
    smax = std::max(smax, spectral_norm(S[i]));
    const CMat ds = derivative4(S, i, h);
    const CMat t = 2.0 * hermitian_part(S[i] * G[i]) + hermitian_part(ds);
    a.margin_positivity = std::min(a.margin_positivity, min_eig_hermitian(t) - 2.0 * k.lambda);
    uu[i] = u[i].squaredNorm();
    ff[i] = f[i].squaredNorm();
    quad[i] = u[i].dot(t * u[i]).real();
    sfu[i] = u[i].dot(S[i] * f[i]).real();
  }
  auto trap = [&](const std::vector<double>& y) {
    double s = 0.0;
    for (size_t i = 0; i + 1 < m; ++i) s += 0.5 * h * (y[i] + y[i + 1]);
    return s;
  };
  a.margin_bound = k.C0 - smax;
  const CMat gg = gamma.rows() > 0 ? CMat(gamma.adjoint() * gamma) : CMat::Zero(n, n);
  a.delta_max = min_eig_hermitian(hermitian_part(S.front() + k.C1 * gg));
  a.margin_boundary = a.delta_max - k.delta;

  const double tol = 1e-12 * (1.0 + smax);
  if (a.hermiticity > tol) a.failed += "hermiticity;";
  if (a.margin_bound < -tol) a.failed += "bound;";
  if (a.margin_positivity < -1e-8 * (1.0 + smax)) a.failed += "positivity;";
  if (a.margin_boundary < -tol) a.failed += "boundary;";
  a.hypotheses_hold = a.failed.empty();

  const double gu0 = gamma.rows() > 0 ? (gamma * u.front()).squaredNorm() : 0.0;
  a.lhs = k.lambda * trap(uu) + k.delta * u.front().squaredNorm();
  a.rhs = k.C0 * k.C0 / k.lambda * trap(ff) + k.C1 * gu0;
  a.slack = a.rhs - a.lhs;

  const double left = -u.front().dot(S.front() * u.front()).real();
  const double right = trap(quad) + 2.0 * trap(sfu);
  const double scale = std::max({1e-300, std::abs(left), std::abs(trap(quad)), std::abs(2.0 * trap(sfu))});
  a.identity_residual = std::abs(left - right) / scale;
  return a;
}

ManufacturedAudit manufactured_energy_audit(const CMat& S, const CMat& G, const CMat& gamma, int trials,
                                            std::uint64_t seed, double x_max, double step) {
  ManufacturedAudit out;
  EnergyConstants& k = out.constants;
  k.C0 = spectral_norm(S);
  k.lambda = min_eig_hermitian(hermitian_part(S * G));
  k.C1 = 10.0 * k.C0;
  k.delta = min_eig_hermitian(hermitian_part(S + k.C1 * gamma.adjoint() * gamma));

  const Eigen::Index n = G.rows();
  std::vector<double> xs = uniform_grid(x_max, step);
  const size_t m = xs.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> rate(1.0, 3.0);
  out.min_slack = std::numeric_limits<double>::infinity();
  out.hypotheses_hold = true;
  const std::vector<CMat> s_grid(m, S), g_grid(m, G);
  for (int t = 0; t < trials; ++t) {
    std::vector<CVec> v(3);
    std::vector<cd> mu(3);
    for (int q = 0; q < 3; ++q) {
      v[q] = CVec(n);
      for (Eigen::Index i = 0; i < n; ++i) v[q](i) = cd(nd(rng), nd(rng));
      mu[q] = cd(-rate(rng), nd(rng));
    }
    std::vector<CVec> u(m), f(m);
    for (size_t i = 0; i < m; ++i) {
      u[i] = CVec::Zero(n);
      CVec du = CVec::Zero(n);
      for (int q = 0; q < 3; ++q) {
        const cd e = std::exp(mu[q] * xs[i]);
        u[i] += v[q] * e;
        du += mu[q] * v[q] * e;
      }
      f[i] = du - G * u[i];
    }
    out.audits.push_back(energy_audit(xs, s_grid, g_grid, gamma, u, f, k));
    const auto& a = out.audits.back();
    out.min_slack = std::min(out.min_slack, a.slack);
    out.max_identity_residual = std::max(out.max_identity_residual, a.identity_residual);
    out.hypotheses_hold = out.hypotheses_hold && a.hypotheses_hold;
  }
  return out;
}

}  // namespace hpbvp

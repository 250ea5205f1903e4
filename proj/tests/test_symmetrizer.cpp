#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "hpbvp/errors.hpp"
#include "hpbvp/symmetrizer.hpp"

using namespace hpbvp;

namespace {

Frequency dir(double tau, double eta, int d, double gamma = 0.0) {
  return sphere_point(tau, RVec::Constant(d - 1, eta), gamma);
}

// nu = 2 model: Q = i(xi + N) + gamma [[a, 0], [q_dot, 0]], R = [[r11, 0], [r, r22]].
HBlock model_block(double q_dot, double r) {
  HBlock b;
  b.kind = BlockKind::kMultipleRoot;
  b.dim = 2;
  b.base_p = RVec(0);
  b.base = Frequency{0.0, RVec(0), 0.0};
  b.eval = [q_dot, r](const RVec&, const Frequency& z, double rho) {
    const double xi = 0.5;
    CMat m(2, 2);
    m << cd(0.0, xi), kI, 0.0, cd(0.0, xi);
    CMat g(2, 2);
    g << 0.3, 0.0, q_dot, 0.0;
    CMat rr(2, 2);
    rr << 0.2, 0.05, r, 0.1;
    return CMat(m + z.gamma * g + rho * rr);
  };
  return b;
}

template <class F>
ErrorCode code_of(F f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInvalidInput;
}

}  // namespace

TEST_CASE("parabolic block symmetrizer") {
  CMat p1(1, 1);
  p1 << 1.0;
  const auto s1 = parabolic_block_symmetrizer(p1, 1.0);
  CHECK(std::abs(s1.S(0, 0) - 1.0) < 1e-14);
  CHECK(s1.C_plus == doctest::Approx(2.0));
  CHECK(s1.margin_re > 0.0);

  CMat p2 = CMat::Zero(2, 2);
  p2(0, 0) = 1.0;
  p2(1, 1) = -1.0;
  const auto s2 = parabolic_block_symmetrizer(p2, 2.0);
  CHECK(std::abs(s2.S(0, 0) - 4.0) < 1e-13);
  CHECK(std::abs(s2.S(1, 1) + 1.0) < 1e-13);
  CHECK(s2.dim_plus == 1);
  CHECK(s2.dim_minus == 1);
  CHECK(s2.margin_plus > 0.0);
  CHECK(s2.margin_minus > 0.0);
  CHECK(s2.margin_re > 0.0);

  // Non-normal block: Re(S^P P) stays positive and S_+ >= Id.
  CMat p3(3, 3);
  p3 << 2.0, 5.0, 0.0, 0.0, 1.0, 3.0, 0.0, 0.0, -0.5;
  const auto s3 = parabolic_block_symmetrizer(p3, 3.0);
  CHECK(s3.margin_re > 0.0);
  CHECK(s3.hermiticity < 1e-12);
  CHECK(min_eig_hermitian(s3.S.topLeftCorner(2, 2)) >= 9.0 * (1.0 - 1e-12));
  CHECK(max_eig_hermitian(-s3.S.bottomRightCorner(1, 1)) <= 1.0 + 1e-12);
}

TEST_CASE("H-block split") {
  const auto w = builtin_example("wave2x2");
  const auto glancing = split_h_blocks(w.system, RVec(0), dir(1, 1, 2));
  REQUIRE(glancing.blocks.size() == 1);
  CHECK(glancing.blocks[0].kind == BlockKind::kMultipleRoot);
  CHECK(glancing.blocks[0].dim == 2);
  CHECK(glancing.blocks[0].n_minus == 1);

  const auto simple = split_h_blocks(w.system, RVec(0), dir(1, 0, 2));
  REQUIRE(simple.blocks.size() == 2);
  CHECK(simple.blocks[0].kind == BlockKind::kSimpleRoot);
  CHECK(simple.blocks[1].kind == BlockKind::kSimpleRoot);
  CHECK(std::abs(simple.blocks[0].center - cd(0, -1)) < 1e-12);
  CHECK(std::abs(simple.blocks[1].center - cd(0, 1)) < 1e-12);
  CHECK(code_of([&] { split_h_blocks(w.system, RVec(0), dir(1, 0, 2), 1.5); }) == ErrorCode::kInvalidDelta);

  const auto a = builtin_example("advdiff1d");
  const auto one = split_h_blocks(a.system, a.default_p, dir(1, 0, 1));
  REQUIRE(one.blocks.size() == 1);
  CHECK(one.blocks[0].kind == BlockKind::kSimpleRoot);
  CHECK(std::abs(one.blocks[0].center - cd(0, -1)) < 1e-12);
  CHECK(one.blocks[0].n_minus == 1);

  // Off-axis direction: one positive and one negative block.
  const auto off = split_h_blocks(w.system, RVec(0), dir(0, 1, 2));
  REQUIRE(off.blocks.size() == 2);
  CHECK(off.blocks[0].kind == BlockKind::kOffAxisPositive);
  CHECK(off.blocks[1].kind == BlockKind::kOffAxisNegative);

  // The blocks reassemble Hcheck.
  const Frequency z = dir(1, 0.3, 2, 0.05);
  const auto pt = simple.evaluate(RVec(0), z, 0.02);
  CMat bd = CMat::Zero(2, 2);
  bd(0, 0) = pt.blocks[0](0, 0);
  bd(1, 1) = pt.blocks[1](0, 0);
  CHECK((pt.V * bd * pt.V.inverse() - h_check(w.system, RVec(0), z, 0.02)).norm() < 1e-10);
}

TEST_CASE("simple root symmetrizer") {
  CMat r(1, 1);
  r << -1.0;
  const auto neg = simple_root_symmetrizer(-1.0, r, 10.0);
  CHECK(neg.E_minus.dim() == 1);
  CHECK(std::abs(neg.S(0, 0) + 1.0) < 1e-15);
  CHECK(neg.margin_R == doctest::Approx(1.0));

  r << 1.0;
  const auto pos = simple_root_symmetrizer(1.0, r, 10.0);
  CHECK(pos.E_minus.dim() == 0);
  CHECK(std::abs(pos.S(0, 0) - 100.0) < 1e-12);
  CHECK(pos.margin_R == doctest::Approx(100.0));

  // q_dot Re R < 0 is reported through a negative margin.
  const auto bad = simple_root_symmetrizer(-1.0, r, 10.0);
  CHECK(bad.margin_R == doctest::Approx(-1.0));

  CHECK(code_of([&] { simple_root_symmetrizer(0.0, r, 10.0); }) == ErrorCode::kDegenerateRoot);

  // advdiff1d: q(gamma) = -(i tau + gamma) / a.
  const auto a = builtin_example("advdiff1d");
  const auto split = split_h_blocks(a.system, a.default_p, dir(1, 0, 1));
  DerivativeOptions o;
  o.gamma_step = 1e-4;
  CHECK(std::abs(estimate_q_dot(split.blocks[0], o) + 1.0) < 1e-6);
  const auto sr = simple_root_symmetrizer(split.blocks[0], 10.0);
  CHECK(sr.branch == "q_dot<0");
  CHECK(sr.margin_R > 0.0);
}

TEST_CASE("Ralston reduction") {
  CMat j = CMat::Zero(3, 3);
  for (int a = 0; a < 3; ++a) j(a, a) = cd(0, 0.7);
  j(0, 1) = kI;
  j(1, 2) = kI;
  const auto same = ralston_reduce(j, j, 3, 1);
  CHECK(same.X.norm() < 1e-15);

  std::mt19937 rng(7);
  std::normal_distribution<double> nd;
  CMat pert(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) pert(i, k) = 1e-2 * cd(nd(rng), nd(rng));
  const CMat a = j + pert;
  const auto r = ralston_reduce(a, j, 3, 1);
  const CMat id = CMat::Identity(3, 3);
  CHECK((a * (id + r.X) - (id + r.X) * r.Q).norm() < 1e-12);
  const CMat f = r.Q - j;
  CHECK(f.rightCols(2).norm() < 1e-14);
}

TEST_CASE("Kreiss normal form of the nu = 2 model") {
  for (double qd : {1.0, -1.0}) {
    const auto nf = kreiss_normal_form(model_block(qd, 0.4 * qd));
    CHECK(nf.nu == 2);
    CHECK(nf.alpha == 1);
    CHECK(nf.beta == 1);
    CHECK(nf.xi == doctest::Approx(0.5));
    CHECK(nf.q_dot == doctest::Approx(qd).epsilon(1e-8));
    CHECK((nf.chain - CMat::Identity(2, 2)).norm() < 1e-14);
    CHECK(std::abs(nf.Rb(0, 0) - 0.4 * qd) < 1e-8);
    // Only the first column of the gamma-derivative survives.
    CHECK(nf.Q_dot.col(1).norm() < 1e-8);
    CHECK(nf.R_base.col(1).norm() < 1e-8);
  }
  CHECK(code_of([] { kreiss_normal_form(model_block(1.0, -0.4)); }) == ErrorCode::kHypothesisViolation);
  CHECK(code_of([] { kreiss_normal_form(model_block(0.0, 0.4)); }) == ErrorCode::kDegenerateRoot);
}

TEST_CASE("E choice reproduces the 2x2 determinant bound") {
  const EChoice ec = choose_E(2, 1, 3.0, 2.0, 1.0);
  REQUIRE(ec.bounds.size() == 1);
  CHECK(ec.bounds[0] == 13.0);
  CHECK(ec.E(1, 1) == 16.0);
  CHECK(ec.E(0, 1) == 3.0);
  CHECK(ec.E(0, 0) == 0.0);

  // Odd and larger sizes still give E - c diag(-Id, kappa^2 Id) > 0.
  for (int nu : {3, 4, 5}) {
    for (double qd : {2.0, -0.5}) {
      const int beta = nu % 2 == 0 ? nu / 2 : (qd < 0 ? (nu + 1) / 2 : (nu - 1) / 2);
      const double e1 = (qd > 0 ? 1.0 : -1.0) * std::max(3.0 / std::abs(qd), 1.0);
      const double kappa = 3.0;
      const double c = e_form_constant(nu, qd, e1, kappa);
      const EChoice e = choose_E(nu, beta, e1, kappa, c);
      RMat t = e.E;
      for (int a = 0; a < nu; ++a) t(a, a) -= a < beta ? -c : c * kappa * kappa;
      CHECK(min_eig_hermitian(t.cast<cd>()) > 0.0);
    }
  }
}

TEST_CASE("skew matrix for the F bound") {
  for (int nu : {2, 3, 5}) {
    const double bound = 7.5;
    const RMat f = skew_for_bound(nu, bound);
    CHECK((f + f.transpose()).norm() == 0.0);
    RMat n = RMat::Zero(nu, nu);
    for (int a = 0; a + 1 < nu; ++a) n(a, a + 1) = 1.0;
    RMat t = 0.5 * (f * n + (f * n).transpose());
    t(0, 0) += 1.0;
    for (int a = 1; a < nu; ++a) t(a, a) -= bound + 1.0;
    CHECK(min_eig_hermitian(t.cast<cd>()) > 0.0);
  }
  CHECK(skew_for_bound(2, 4.0)(0, 1) == -6.0);
}

TEST_CASE("Kreiss block symmetrizer on the nu = 2 model") {
  for (double qd : {1.0, -1.0}) {
    const auto nf = kreiss_normal_form(model_block(qd, 0.4 * qd));
    const auto ks = kreiss_block_symmetrizer(nf, 2.0);
    CHECK(ks.E(0, 1) * qd >= 3.0);
    CHECK(ks.margins.margin_E >= 0.0);
    CHECK(ks.margins.margin_EQdot >= 0.0);
    CHECK(ks.margins.margin_F >= 0.0);
    CHECK(ks.margins.margin_D >= 0.0);
    CHECK(ks.margins.margin_ER >= 0.0);
    CHECK(ks.margins.margin_ERF >= 0.0);
    CHECK((ks.F + ks.F.transpose()).norm() == 0.0);
    CHECK((ks.F_prime + ks.F_prime.transpose()).norm() == 0.0);
    CHECK(ks.E_tilde(RVec(0), nf.block.base).norm() < 1e-12);
    Frequency z{0.3, RVec(0), 0.05};
    const CMat s = ks.S(RVec(0), z, 0.07);
    CHECK((s - s.adjoint()).norm() <= 1e-14);

    // Re((E + E~ - i gamma F) Q) = gamma D with D >= Id near the base.
    const double g = 1e-3;
    Frequency zg{0.0, RVec(0), g};
    const CMat q = nf.ralston(RVec(0), zg).Q;
    const CMat lhs = hermitian_part(((ks.E + ks.E_tilde(RVec(0), zg)).cast<cd>() - kI * g * ks.F.cast<cd>()) * q);
    CHECK(min_eig_hermitian(lhs / g) > 0.9);
  }
}

TEST_CASE("assembled advdiff1d certificate") {
  const auto a = builtin_example("advdiff1d");
  const Frequency base = dir(1, 0, 1);
  const auto grid = product_grid(a.default_p, base, {0.0, 0.01, 0.1}, {0.0, 0.01, 0.1});
  const auto cert = assemble_symmetrizer(a.system, a.default_p, base, 2.0, grid);
  CHECK(cert.pass);
  CHECK(cert.c > 0.0);
  for (const auto& m : cert.margins) {
    CHECK(m.hermiticity <= 1e-12);
    CHECK(m.margin_cone >= -1e-10);
    CHECK(m.witness <= 1.0);
  }
  CHECK(cert.E_minus_ref.dim() == 1);
  CHECK(subspace_gap(cert.E_minus_ref, Subspace::span(CMat(CMat::Identity(2, 1))) ) < 1e-12);
  CHECK(subspace_gap(cert.E_minus_ref, limit_bundle(a.system, a.default_p, base)) < 1e-8);

  // kappa = 10 reaches past the witness bound at rho = 0.1.
  CertificateOptions o;
  o.throw_on_failure = false;
  const auto big = assemble_symmetrizer(a.system, a.default_p, base, 10.0, grid, o);
  CHECK_FALSE(big.pass);
  CHECK(big.kappa_upper < 10.0);
  CHECK(big.kappa_eff <= big.kappa_upper);
  CHECK(code_of([&] { assemble_symmetrizer(a.system, a.default_p, base, 10.0, grid); }) ==
        ErrorCode::kCertificationFailure);
}

TEST_CASE("verify_symmetrizer flags a non-Hermitian matrix") {
  const Subspace em = Subspace::span(CMat(CMat::Identity(2, 1)));
  CMat e2 = CMat::Zero(2, 1);
  e2(1, 0) = 1.0;
  const Subspace ep = Subspace::span(e2);
  CMat s = CMat::Zero(2, 2);
  s(0, 0) = -1.0;
  s(1, 1) = 4.0;
  const CMat g = CMat::Identity(2, 2);
  std::vector<GridPoint> grid = {{RVec(0), Frequency{0, RVec(0), 1.0}, 0.5}};
  auto rec = verify_symmetrizer({s}, {g}, em, ep, 2.0, 0.0, grid);
  CHECK(rec[0].margin_cone == doctest::Approx(0.0));
  CHECK(rec[0].margin_hermitian > 0.0);
  s(0, 1) = 1e-3;
  rec = verify_symmetrizer({s}, {g}, em, ep, 2.0, 0.0, grid);
  CHECK(rec[0].margin_hermitian < 0.0);
  CHECK_FALSE(rec[0].pass);
}

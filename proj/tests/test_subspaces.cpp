#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "hpbvp/errors.hpp"
#include "hpbvp/subspaces.hpp"

using namespace hpbvp;

namespace {

Frequency freq(double tau, std::vector<double> eta, double gamma) {
  Frequency z;
  z.tau = tau;
  z.eta = Eigen::Map<RVec>(eta.data(), static_cast<Eigen::Index>(eta.size()));
  z.gamma = gamma;
  return z;
}

RVec vec(std::initializer_list<double> v) {
  RVec out(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Subspace line(std::initializer_list<cd> v) {
  CVec x(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (cd c : v) x(i++) = c;
  return Subspace::span(x);
}

CMat random_separated(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u(0.2, 3.0);
  CVec lam(n);
  for (int i = 0; i < n; ++i) lam(i) = cd((i % 2 ? 1.0 : -1.0) * u(rng), 3.0 * nd(rng));
  CMat x(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) x(i, j) = cd(nd(rng), nd(rng));
  x += 3.0 * CMat::Identity(n, n);
  return x * lam.asDiagonal() * x.inverse();
}

}  // namespace

TEST_CASE("spectral split examples") {
  CMat g(2, 2);
  g << 0, 1, 1, 1;
  const auto s = spectral_split(g);
  CHECK(s.stable.dim() == 1);
  CHECK(s.unstable.dim() == 1);
  CHECK(s.stable_eigs(0).real() == doctest::Approx((1 - std::sqrt(5.0)) / 2));
  CHECK(s.unstable_eigs(0).real() == doctest::Approx((1 + std::sqrt(5.0)) / 2));
  CHECK(subspace_gap(s.stable, line({1.0, (1 - std::sqrt(5.0)) / 2})) < 1e-14);
  CHECK(s.axis_margin == doctest::Approx((std::sqrt(5.0) - 1) / 2));

  CMat d = CMat::Zero(2, 2);
  d(0, 0) = -1;
  d(1, 1) = 2;
  const auto sd = spectral_split(d);
  CHECK(subspace_gap(sd.stable, line({1.0, 0.0})) == 0.0);
  CHECK(subspace_gap(sd.unstable, line({0.0, 1.0})) == 0.0);

  CMat ax = CMat::Zero(2, 2);
  ax(0, 0) = cd(1e-13, 1.0);
  ax(1, 1) = 1.0;
  try {
    spectral_split(ax);
    FAIL("expected near-axis error");
  } catch (const NearAxisError& e) {
    CHECK(std::abs(e.mu() - cd(1e-13, 1.0)) < 1e-15);
  }
}

TEST_CASE("split counts on catalog systems") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1, 1);
  int cases = 0;
  for (const auto& [name, e] : builtin_examples()) {
    const int d = e.system.d();
    for (int k = 0; k < 70; ++k) {
      std::vector<double> eta(static_cast<size_t>(d - 1));
      for (auto& x : eta) x = u(rng);
      Frequency z = freq(u(rng), eta, std::abs(u(rng)));
      z = z.scaled(std::pow(10.0, 3.0 * u(rng)) / z.norm());
      const CMat g = assemble_full_symbol(e.system, e.default_p, z).G;
      const auto s = spectral_split(g, sweep_axis_tol(g));
      CHECK(s.stable.dim() == e.system.n());
      CHECK(s.unstable.dim() == e.system.n());
      CHECK(s.axis_margin > 0.0);
      ++cases;
    }
  }
  CHECK(cases >= 200);
}

TEST_CASE("Riesz projector") {
  CMat d = CMat::Zero(2, 2);
  d(0, 0) = -1;
  d(1, 1) = 2;
  const CMat pl = riesz_projector(d, Region::left_half_plane());
  CHECK((pl - CMat(Eigen::Vector2cd(1, 0).asDiagonal())).norm() < 1e-12);
  const CMat pr = riesz_projector(d, Region::right_half_plane());
  CHECK((pr - CMat(Eigen::Vector2cd(0, 1).asDiagonal())).norm() < 1e-12);
  const CMat pd = riesz_projector(d, Region::disk(2.0, 0.5));
  CHECK((pd - pr).norm() < 1e-12);

  std::mt19937_64 rng(23);
  for (int k = 0; k < 100; ++k) {
    const CMat g = random_separated(rng, 2 + k % 5);
    const CMat p = riesz_projector(g, Region::left_half_plane());
    CHECK((p * p - p).norm() < 1e-8);
    const Subspace range = {orthonormal_basis(p, 1e-6).leftCols(spectral_split(g).stable.dim()), g.rows()};
    CHECK(subspace_gap(range, spectral_split(g).stable) < 1e-8);
  }

  CMat on = CMat::Zero(1, 1);
  on(0, 0) = cd(0.0, 1.0);
  try {
    riesz_projector(on, Region::left_half_plane());
    FAIL("expected collision");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kContourCollision);
  }
  CHECK_THROWS_AS(riesz_projector(d, Region::disk(0.0, 1.0)), Error);
}

TEST_CASE("gap metric") {
  const Subspace e1 = line({1.0, 0.0});
  CHECK(subspace_gap(e1, e1) == 0.0);
  CHECK(subspace_gap(e1, line({0.0, 1.0})) == 1.0);
  CHECK(subspace_gap(e1, line({1.0, 1.0})) == doctest::Approx(std::sin(M_PI / 4)).epsilon(1e-14));
  CHECK(subspace_gap(e1, Subspace::whole(2)) == 1.0);
  CHECK_THROWS_AS(subspace_gap(e1, Subspace::whole(3)), Error);

  std::mt19937_64 rng(29);
  std::normal_distribution<double> nd;
  for (int k = 0; k < 50; ++k) {
    CMat a(5, 2), b(5, 2), u(2, 2);
    for (int i = 0; i < 10; ++i) {
      a(i) = cd(nd(rng), nd(rng));
      b(i) = cd(nd(rng), nd(rng));
    }
    for (int i = 0; i < 4; ++i) u(i) = cd(nd(rng), nd(rng));
    const CMat q = u.householderQr().householderQ();
    const Subspace sa = Subspace::span(a), sb = Subspace::span(b);
    const double g0 = subspace_gap(sa, sb);
    CHECK(g0 >= 0.0);
    CHECK(g0 <= 1.0);
    CHECK(std::abs(subspace_gap({sa.basis * q, 5}, sb) - g0) < 1e-12);
    CHECK(std::abs(subspace_gap(sa, {sb.basis * q, 5}) - g0) < 1e-12);
  }
}

TEST_CASE("low-frequency block structure") {
  const auto sys = builtin_example("advdiff1d").system;
  const RVec p = vec({1, 1});
  const auto bs0 = low_freq_block_diag(sys, p, freq(0, {}, 0));
  CHECK(std::abs(bs0.H(0, 0)) < 1e-14);
  CHECK(std::abs(bs0.P(0, 0) - 1.0) < 1e-14);
  CHECK(subspace_gap(Subspace::span(bs0.V.col(0)), line({1.0, 0.0})) < 1e-14);
  CHECK(subspace_gap(Subspace::span(bs0.V.col(1)), line({1.0, 1.0})) < 1e-14);

  const auto bs = low_freq_block_diag(sys, p, freq(0, {}, 0.01));
  const double mu = (1 - std::sqrt(1.04)) / 2;
  CHECK(std::abs(bs.H(0, 0) - mu) < 1e-12);
  CHECK(std::abs(bs.H(0, 0) + 0.01) < 2e-4);

  for (const auto& [name, e] : builtin_examples()) {
    const int d = e.system.d();
    const Frequency zero = freq(0, std::vector<double>(d - 1, 0.0), 0);
    const auto b = low_freq_block_diag(e.system, e.default_p, zero);
    CVec ep = eigenvalues(b.P), ea = eigenvalues(viscous_limit(e.system, e.default_p));
    std::sort(ep.data(), ep.data() + ep.size(), [](cd x, cd y) { return x.real() < y.real(); });
    std::sort(ea.data(), ea.data() + ea.size(), [](cd x, cd y) { return x.real() < y.real(); });
    CHECK((ep - ea).norm() < 1e-12);
    // Zero is semi-simple with multiplicity N.
    const CMat g0 = assemble_full_symbol(e.system, e.default_p, zero).G;
    CHECK(numerical_rank(g0, 1e-10) == e.system.n());
    CHECK(b.near_eigs.cwiseAbs().maxCoeff() < 1e-12);

    Frequency z = freq(0.6, std::vector<double>(d - 1, 0.3), 0.2);
    z = z.scaled(0.05 / z.norm());
    const auto bz = low_freq_block_diag(e.system, e.default_p, z);
    const CMat g = assemble_full_symbol(e.system, e.default_p, z).G;
    const int n = e.system.n();
    CMat blk = CMat::Zero(2 * n, 2 * n);
    blk.topLeftCorner(n, n) = bz.H;
    blk.bottomRightCorner(n, n) = bz.P;
    CHECK((bz.V.inverse() * g * bz.V - blk).norm() <= 1e-8 * g.norm());
    CHECK(bz.separation >= 0.5 * b.separation);
  }
}

TEST_CASE("hyperbolic stable limit") {
  const auto sys = builtin_example("advdiff1d").system;
  CHECK(hyperbolic_stable_limit(sys, vec({1, 1}), freq(1, {}, 0)).dim() == 1);
  CHECK(hyperbolic_stable_limit(sys, vec({-1, 1}), freq(1, {}, 0)).dim() == 0);
  const auto w = builtin_example("wave2x2").system;
  const Subspace s = hyperbolic_stable_limit(w, RVec(0), freq(0, {0}, 1));
  CHECK(subspace_gap(s, spectral_split(w.A(RVec(0), 2).cast<cd>()).unstable) < 1e-14);

  // Glancing: the limit is the Jordan eigenvector.
  const double t = 1 / std::sqrt(2.0);
  const auto lr = hyperbolic_stable_limit_detail(w, RVec(0), freq(t, {t}, 0));
  CHECK(lr.structural);
  CHECK(subspace_gap(lr.subspace, line({1.0, -1.0})) < 1e-7);
  // Non-glancing direction converges along the sequence.
  const auto ln = hyperbolic_stable_limit_detail(w, RVec(0), freq(1, {0.3}, 0));
  CHECK_FALSE(ln.structural);
  LimitOptions strict;
  strict.structural_fallback = false;
  try {
    hyperbolic_stable_limit(w, RVec(0), freq(t, {t}, 0), strict);
    FAIL("expected extension failure");
  } catch (const ExtensionFailure& e) {
    CHECK(!e.gap_trace().empty());
  }
}

TEST_CASE("limit bundle") {
  const auto sys = builtin_example("advdiff1d").system;
  CHECK(subspace_gap(limit_bundle(sys, vec({1, 1}), freq(1, {}, 0)), line({1.0, 0.0})) < 1e-14);
  CHECK(subspace_gap(limit_bundle(sys, vec({-1, 1}), freq(1, {}, 0)), line({1.0, -1.0})) < 1e-14);
  for (const auto& [name, e] : builtin_examples()) {
    const int d = e.system.d();
    for (int k = 0; k <= 8; ++k) {
      const double th = M_PI * k / 8;
      const double gc = (k % 3 == 0) ? 0.0 : 0.3;
      const Frequency z = sphere_point(std::cos(th), RVec::Constant(d - 1, std::sin(th)), gc);
      INFO(name << " k=" << k);
      CHECK(limit_bundle(e.system, e.default_p, z).dim() == e.system.n());
    }
  }
}

TEST_CASE("continuity sweeps") {
  const std::vector<double> rhos = {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  const auto sys = builtin_example("advdiff1d").system;
  const auto rows = continuity_sweep(sys, vec({1, 1}), freq(1, {}, 0), rhos, 2);
  REQUIRE(rows.size() == 6);
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].ok);
    CHECK(rows[i].gap >= 0.0);
    CHECK(rows[i].gap <= 1.0);
    CHECK(rows[i].rho == rhos[i]);
    if (i) CHECK(rows[i].gap < rows[i - 1].gap);
  }
  CHECK(loglog_slope(rows) >= 0.9);

  const auto w = builtin_example("wave2x2").system;
  const double t = 1 / std::sqrt(2.0);
  const auto wr = continuity_sweep(w, RVec(0), freq(t, {t}, 0), rhos, 2);
  for (size_t i = 1; i < wr.size(); ++i) CHECK(wr[i].gap < wr[i - 1].gap);
  CHECK(loglog_slope(wr) > 0.3);
}

TEST_CASE("decomposition consistency") {
  for (const auto& [name, e] : builtin_examples()) {
    const int d = e.system.d();
    const Frequency z = sphere_point(0.8, RVec::Constant(d - 1, 0.4), 0.0);
    const Subspace direct = stable_subspace(e.system, e.default_p, z.scaled(1e-4));
    const Subspace blocks = stable_via_blocks(e.system, e.default_p, z, 1e-4);
    INFO(name);
    CHECK(subspace_gap(direct, blocks) <= 1e-8);
  }
}

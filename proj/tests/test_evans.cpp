#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "hpbvp/errors.hpp"
#include "hpbvp/evans.hpp"
#include "hpbvp/symbol.hpp"

using namespace hpbvp;

namespace {

Subspace line(cd a, cd b) {
  CMat x(2, 1);
  x << a, b;
  return Subspace::span(x);
}

BoundaryData row(cd a, cd b) {
  CMat g(1, 2);
  g << a, b;
  return BoundaryData::constant(g);
}

Frequency f1(double tau, double gamma) { return Frequency{tau, RVec(0), gamma}; }

RVec params(double a, double nu) {
  RVec p(2);
  p << a, nu;
  return p;
}

CMat random_unitary(int n, std::mt19937& rng) {
  std::normal_distribution<double> nd;
  CMat x(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) x(i, j) = cd(nd(rng), nd(rng));
  return Eigen::HouseholderQR<CMat>(x).householderQ() * CMat::Identity(n, n);
}

}  // namespace

TEST_CASE("det_pair") {
  CHECK(det_pair(line(1, 0), line(0, 1)).modulus == doctest::Approx(1.0));
  const auto same = det_pair(line(1, 0), line(1, 0));
  CHECK(same.modulus < 1e-15);
  CHECK(det_pair(line(1, 0), line(1, 1)).modulus == doctest::Approx(1.0 / std::sqrt(2.0)));
  const auto defect = det_pair(line(1, 0), Subspace::whole(2));
  CHECK(defect.dim_defect == 1);
  CHECK(defect.value == cd(0.0));
  CHECK_THROWS_AS(det_pair(line(1, 0), Subspace::zero(3)), Error);

  std::mt19937 rng(3);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 20; ++trial) {
    CMat a(5, 2), b(5, 3);
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 2; ++j) a(i, j) = cd(nd(rng), nd(rng));
      for (int j = 0; j < 3; ++j) b(i, j) = cd(nd(rng), nd(rng));
    }
    const Subspace e = Subspace::span(a), f = Subspace::span(b);
    const double m = det_pair(e, f).modulus;
    CHECK(m <= 1.0 + 1e-12);
    const Subspace e2{e.basis * random_unitary(2, rng), 5};
    const Subspace f2{f.basis * random_unitary(3, rng), 5};
    CHECK(std::abs(det_pair(e2, f2).modulus - m) < 1e-12);
  }
}

TEST_CASE("Evans function closed forms for advdiff1d") {
  const auto ex = builtin_example("advdiff1d");
  const double mu = 0.5 * (1.0 - std::sqrt(5.0));
  const auto dir = evans_at(ex.system, row(1, 0), params(1, 1), f1(0, 1));
  CHECK(dir.modulus == doctest::Approx(1.0 / std::sqrt(1.0 + mu * mu)).epsilon(1e-12));
  CHECK(dir.modulus == doctest::Approx(0.8507).epsilon(1e-4));
  const auto neu = evans_at(ex.system, row(0, 1), params(1, 1), f1(0, 1));
  CHECK(neu.modulus == doctest::Approx(0.5257).epsilon(1e-4));
  const auto zero = evans_at(ex.system, row(-mu, 1), params(1, 1), f1(0, 1));
  CHECK(zero.modulus < 1e-12);
  CHECK_THROWS_AS(evans_at(ex.system, row(1, 0), params(1, 1), f1(0, 0)), Error);
}

TEST_CASE("Lopatinski limit") {
  const auto ex = builtin_example("advdiff1d");
  CHECK(lopatinski_limit(ex.system, row(1, 0), params(1, 1), f1(1, 0)).modulus == doctest::Approx(1.0));
  CHECK(lopatinski_limit(ex.system, row(1, 0), params(-1, 1), f1(1, 0)).modulus ==
        doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(lopatinski_limit(ex.system, row(1, 1), params(-1, 1), f1(1, 0)).modulus < 1e-12);
}

TEST_CASE("factorization sweep") {
  const auto ex = builtin_example("advdiff1d");
  std::vector<double> rhos;
  for (int k = 1; k <= 6; ++k) rhos.push_back(std::pow(10.0, -k));
  const auto fd = factorization_sweep(ex.system, row(1, 0), params(1, 1), f1(1, 0), rhos, 2);
  CHECK_FALSE(fd.indeterminate);
  CHECK(fd.delta_lim == doctest::Approx(1.0));
  CHECK(fd.beta_estimate == doctest::Approx(1.0).epsilon(1e-9));
  for (size_t i = 0; i < fd.rho_table.size(); ++i) {
    const auto& r = fd.rho_table[i];
    REQUIRE(r.ok);
    CHECK(r.residual >= 0.0);
    CHECK(r.residual <= 5.0 * r.rho);
    if (i > 0) CHECK(r.residual <= fd.rho_table[i - 1].residual);
  }
  CHECK(fd.residual < 1e-8);
  // the table approaches the limit value.
  CHECK(std::abs(fd.rho_table.back().modulus - fd.delta_lim) < 1e-9);

  // ker Gamma(p, 0) contains the limit bundle: both sides vanish.
  const auto deg = factorization_sweep(ex.system, row(0, 1), params(1, 1), f1(1, 0), rhos);
  CHECK(deg.indeterminate);
  CHECK(deg.delta_lim < 1e-12);
  CHECK(deg.rho_table.back().modulus < 1e-5);

  CHECK_THROWS_AS(factorization_sweep(ex.system, row(1, 0), params(1, 1), f1(1, 0), {1e-1, 1e-2}), Error);
  CHECK_THROWS_AS(factorization_sweep(ex.system, row(1, 0), params(1, 1), f1(1, 0), {1e-2, 1e-1, 1e-3}), Error);
}

TEST_CASE("uniform stability scan") {
  const auto ex = builtin_example("advdiff1d");
  std::vector<Frequency> zs;
  for (double g : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    zs.push_back(sphere_point(1.0, RVec(0), g));
    zs.push_back(sphere_point(-1.0, RVec(0), g));
  }
  const std::vector<double> rhos = {0.0, 0.25, 0.5, 0.75, 1.0};
  const auto scan = uniform_stability_scan(ex.system, row(1, 0), {params(1, 1)}, zs, rhos, 0.1, 3);
  CHECK(scan.pass);
  CHECK(scan.failures == 0);
  CHECK(scan.min_modulus > 0.1);
  CHECK(scan.rows.size() == zs.size() * rhos.size());

  // Boundary whose kernel is E_-(zeta*) at an interior grid point.
  const Frequency zstar = zs[4];  // gamma_check = 0.5, tau > 0
  const double rstar = 0.5;
  const CMat g = assemble_full_symbol(ex.system, params(1, 1), zstar.scaled(rstar)).G;
  const Subspace em = spectral_split(g).stable;
  const auto bad = row(-em.basis(1, 0), em.basis(0, 0));
  const auto s2 = uniform_stability_scan(ex.system, bad, {params(1, 1)}, zs, rhos, 0.1);
  CHECK_FALSE(s2.pass);
  CHECK(s2.min_modulus < 1e-12);
  CHECK(s2.rows[s2.argmin].z_index == 4);
  CHECK(s2.rows[s2.argmin].rho_index == 2);

  const auto single = uniform_stability_scan(ex.system, row(1, 0), {params(1, 1)}, {zs[2]}, {0.5}, 0.0);
  CHECK(single.min_modulus == doctest::Approx(evans_at(ex.system, row(1, 0), params(1, 1), zs[2].scaled(0.5)).modulus));
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "hpbvp/errors.hpp"
#include "hpbvp/linalg.hpp"

using namespace hpbvp;

namespace {

CMat random_matrix(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> nd;
  CMat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = cd(nd(rng), nd(rng));
  return m;
}

}  // namespace

TEST_CASE("ordered Schur keeps the similarity and moves selected eigenvalues first") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 6;
    const CMat g = random_matrix(rng, n);
    const auto s = ordered_schur(g, [](cd z) { return z.real() < 0.0; });
    CHECK((s.u * s.t * s.u.adjoint() - g).norm() < 1e-12 * (1.0 + g.norm()));
    CHECK((s.u.adjoint() * s.u - CMat::Identity(n, n)).norm() < 1e-12);
    for (int i = 0; i < n; ++i) {
      CHECK((s.t(i, i).real() < 0.0) == (i < s.leading));
      for (int j = 0; j < i; ++j) CHECK(s.t(i, j) == cd(0.0));
    }
    // Leading columns are invariant.
    const CMat q = s.u.leftCols(s.leading);
    CHECK((g * q - q * (q.adjoint() * g * q)).norm() < 1e-11 * (1.0 + g.norm()));
  }
}

TEST_CASE("Lyapunov solver") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + trial % 5;
    CMat a = random_matrix(rng, n);
    a -= (a.eigenvalues().real().maxCoeff() + 1.0) * CMat::Identity(n, n);
    const CMat q = -CMat::Identity(n, n);
    const CMat x = solve_lyapunov(a, q);
    CHECK((a.adjoint() * x + x * a - q).norm() < 1e-10 * (1.0 + x.norm()));
    CHECK(min_eig_hermitian(x) > 0.0);
  }
  SUBCASE("scalar") {
    const CMat x = solve_lyapunov(CMat::Constant(1, 1, -1.0), CMat::Constant(1, 1, -2.0));
    CHECK(std::abs(x(0, 0) - 1.0) < 1e-15);
  }
  SUBCASE("singular") {
    CHECK_THROWS_AS(solve_lyapunov(CMat::Constant(1, 1, cd(0.0, 1.0)), CMat::Identity(1, 1)), Error);
  }
}

TEST_CASE("Sylvester solver") {
  std::mt19937_64 rng(3);
  const CMat a = random_matrix(rng, 3);
  const CMat b = random_matrix(rng, 2) + 10.0 * CMat::Identity(2, 2);
  const CMat c = random_matrix(rng, 3).leftCols(2);
  const CMat x = solve_sylvester_small(a, b, c);
  CHECK((a * x - x * b - c).norm() < 1e-10);
}

TEST_CASE("bases, kernels, alignment") {
  CMat x(3, 2);
  x << 1, 2, 2, 4, 3, 6;
  CHECK(orthonormal_basis(x).cols() == 1);
  CHECK(null_space(x.transpose().cast<cd>()).cols() == 2);
  std::mt19937_64 rng(5);
  const CMat q = random_matrix(rng, 4).householderQr().householderQ() * CMat::Identity(4, 2);
  const CMat phase = CMat(Eigen::Vector2cd(std::exp(cd(0, 0.3)), std::exp(cd(0, -1.1))).asDiagonal());
  CHECK((align_basis(q * phase, q) - q).norm() < 1e-12);
}

TEST_CASE("congruence is exactly Hermitian and inverse guard fires") {
  std::mt19937_64 rng(9);
  const CMat s = hermitian_part(random_matrix(rng, 4));
  const CMat x = random_matrix(rng, 4);
  const CMat c = hermitian_congruence(x, s);
  CHECK((c - c.adjoint()).norm() == 0.0);
  CMat sing = CMat::Identity(2, 2);
  sing(1, 1) = 1e-14;
  CHECK_THROWS_AS(checked_inverse(sing, 1e12, "test"), Error);
}

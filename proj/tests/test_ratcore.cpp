// Polynomial / rational / rational-matrix arithmetic.
//
// Derived quantities are checked against independent oracles computed inside
// the test: direct Horner evaluation at sample points, explicit root
// plug-back, and grid identities (M * M^{-1} = I etc.).

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <complex>
#include <vector>

#include "lowrank/ratcore.hpp"

using namespace lowrank;
using cd = std::complex<double>;

namespace {

// independent Horner evaluation, written without the library helpers
cd horner(const std::vector<double>& asc, cd z) {
  cd acc(0.0, 0.0);
  for (auto it = asc.rbegin(); it != asc.rend(); ++it) acc = acc * z + *it;
  return acc;
}

Polyd poly(std::initializer_list<double> asc) {
  Polyd p;
  p.c = VecX<double>(static_cast<Eigen::Index>(asc.size()));
  Eigen::Index i = 0;
  for (double v : asc) p.c[i++] = v;
  return p;
}

std::vector<cd> sorted_by_real(std::vector<cd> v) {
  std::sort(v.begin(), v.end(), [](cd a, cd b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  return v;
}

}  // namespace

TEST_CASE("polynomial evaluation matches an independent Horner oracle") {
  const Polyd p = poly({-3.0, 0.5, 2.0, -1.25});
  const std::vector<double> asc = {-3.0, 0.5, 2.0, -1.25};
  for (cd z : {cd(0.3, 0.7), cd(-1.1, 0.0), cd(2.0, -0.5), cd(0.0, 0.0)}) {
    const cd a = peval(p, z);
    const cd b = horner(asc, z);
    CHECK(std::abs(a - b) <= 1e-14 * (1.0 + std::abs(b)));
  }
}

TEST_CASE("trim removes trailing coefficients below the tolerance") {
  Polyd p = poly({1.0, 2.0, 1e-14, 0.0});
  const Polyd t = trim(p, 1e-12);
  CHECK(t.degree() == 1);
  CHECK(t.c[0] == doctest::Approx(1.0));
  CHECK(t.c[1] == doctest::Approx(2.0));
  // degree of the zero polynomial is conventionally negative
  CHECK(trim(poly({0.0, 0.0}), 1e-12).degree() < 0);
}

TEST_CASE("polynomial product agrees with evaluation at points") {
  const Polyd a = poly({1.0, -2.0, 3.0});
  const Polyd b = poly({4.0, 0.0, -1.0, 2.0});
  const Polyd ab = a * b;
  for (cd z : {cd(0.9, 0.1), cd(-0.4, 1.3)}) {
    const cd lhs = peval(ab, z);
    const cd rhs = peval(a, z) * peval(b, z);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * (1.0 + std::abs(rhs)));
  }
}

TEST_CASE("roots recovers a known factorization and plugs back to zero") {
  // oracle: construct from known roots, then verify both recovery and residual
  const std::vector<cd> want = {cd(0.5, 0.0), cd(-2.0, 0.0), cd(0.25, 0.75), cd(0.25, -0.75)};
  const Polyd p = from_roots(want, 3.0);
  CHECK(p.degree() == 4);
  CHECK(p.c[4] == doctest::Approx(3.0));
  const auto got = sorted_by_real(roots(p));
  const auto exp = sorted_by_real(want);
  REQUIRE(got.size() == exp.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(std::abs(got[i] - exp[i]) < 1e-9);
    CHECK(std::abs(peval(p, got[i])) < 1e-9);
  }
  CHECK(roots_or_empty(Polyd::constant(7.0)).empty());
}

TEST_CASE("deflate divides out a root exactly up to rounding") {
  const Polyd p = from_roots({cd(2.0, 0.0), cd(-0.5, 0.0), cd(0.1, 0.0)}, 1.0);
  const Polyd q = deflate(p, 2.0);
  CHECK(q.degree() == 2);
  // oracle: q must equal (z + 0.5)(z - 0.1) up to rounding at sample points
  for (cd z : {cd(0.7, 0.2), cd(-1.0, 0.0)}) {
    const cd rhs = (z + 0.5) * (z - 0.1);
    CHECK(std::abs(peval(q, z) - rhs) < 1e-12 * (1.0 + std::abs(rhs)));
  }
}

TEST_CASE("reverse_in_frame implements z^K p(1/z)") {
  const Polyd p = poly({2.0, -1.0, 3.0});
  const Eigen::Index K = 4;
  const Polyd r = reverse_in_frame(p, K);
  for (cd z : {cd(0.8, 0.3), cd(-1.2, 0.4)}) {
    const cd lhs = peval(r, z);
    const cd rhs = std::pow(z, static_cast<double>(K)) * peval(p, 1.0 / z);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * (1.0 + std::abs(rhs)));
  }
}

TEST_CASE("rational evaluation, monic normalization, and simplify") {
  // r = (z^2 - 1)/(z - 1) simplifies to z + 1; oracle is value preservation
  const Rationald r(poly({-1.0, 0.0, 1.0}), poly({-1.0, 1.0}));
  const Rationald s = simplify(r);
  CHECK(s.num.degree() == 1);
  CHECK(s.den.degree() == 0);
  for (cd z : {cd(0.3, 0.4), cd(-2.0, 0.1), cd(5.0, 0.0)}) {
    const cd lhs = reval(s, z);
    CHECK(std::abs(lhs - (z + 1.0)) < 1e-10 * (1.0 + std::abs(z + 1.0)));
  }

  // monic: scales so the denominator's leading coefficient is one, same value
  const Rationald t(poly({1.0, 2.0}), poly({4.0, 2.0}));
  const Rationald mt = monic(t);
  CHECK(mt.den.c[mt.den.degree()] == doctest::Approx(1.0));
  for (cd z : {cd(0.2, 0.9), cd(1.5, -0.3)}) {
    const cd a = reval(t, z), b = reval(mt, z);
    CHECK(std::abs(a - b) < 1e-13 * (1.0 + std::abs(a)));
  }
}

TEST_CASE("simplify never alters values even when no cancellation exists") {
  const Rationald r(poly({1.0, 1.0}), poly({0.5, -1.0, 1.0}));
  const Rationald s = simplify(r);
  for (cd z : {cd(0.6, 0.6), cd(-0.9, 0.2)}) {
    const cd a = reval(r, z), b = reval(s, z);
    CHECK(std::abs(a - b) < 1e-12 * (1.0 + std::abs(a)));
  }
}

TEST_CASE("substitute_inverse_z maps f(z) to f(1/z)") {
  // f = (2z + 1)/(z - 3); closed-form oracle: f(1/z) = (2 + z)/(1 - 3z)
  const Rationald f(poly({1.0, 2.0}), poly({-3.0, 1.0}));
  const Rationald g = substitute_inverse_z(f);
  for (cd z : {cd(0.4, 0.4), cd(-0.8, 0.1), cd(2.0, 0.0)}) {
    const cd lhs = reval(g, z);
    const cd rhs = (2.0 + z) / (1.0 - 3.0 * z);
    CHECK(std::abs(lhs - rhs) < 1e-12 * (1.0 + std::abs(rhs)));
  }
}

TEST_CASE("unit-circle grid points all lie on the circle and are reproducible") {
  const UnitCircleGridd g1 = UnitCircleGridd::make(64, 16);
  const UnitCircleGridd g2 = UnitCircleGridd::make(64, 16);
  REQUIRE(g1.points.size() == 80);
  REQUIRE(g2.points.size() == g1.points.size());
  for (std::size_t i = 0; i < g1.points.size(); ++i) {
    CHECK(std::abs(std::abs(g1.points[i]) - 1.0) < 1e-14);
    CHECK(g1.points[i] == g2.points[i]);  // deterministic construction
  }
}

TEST_CASE("rational-matrix shape helpers and evaluation") {
  RationalMatrixd A(2, 2);
  A(0, 0) = Rationald(poly({1.0}), poly({1.0}));
  A(0, 1) = Rationald(poly({0.0, 1.0}), poly({1.0}));          // z
  A(1, 0) = Rationald(poly({1.0}), poly({-0.5, 1.0}));         // 1/(z - 1/2)
  A(1, 1) = Rationald(poly({2.0, 1.0}), poly({0.25, 0.0, 1.0}));

  const cd z(0.3, 0.8);
  const CMatX<double> E = A.eval(z);
  CHECK(std::abs(E(0, 1) - z) < 1e-14);
  CHECK(std::abs(E(1, 0) - 1.0 / (z - 0.5)) < 1e-13);

  const RationalMatrixd At = rm_transpose(A);
  CHECK(std::abs(At.eval(z)(1, 0) - E(0, 1)) < 1e-14);

  const RationalMatrixd S = rm_hcat(A, A);
  CHECK(S.rows() == 2);
  CHECK(S.cols() == 4);
  const RationalMatrixd V = rm_vcat(A, A);
  CHECK(V.rows() == 4);
  const RationalMatrixd Bk = rm_block(V, 2, 0, 2, 2);
  CHECK((Bk.eval(z) - E).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("rm_para is evaluation-equivalent to W(1/z)^T") {
  RationalMatrixd W(2, 1);
  W(0, 0) = Rationald(poly({1.0, 2.0}), poly({-0.25, 0.0, 1.0}));
  W(1, 0) = Rationald(poly({3.0, -1.0}), poly({-0.25, 0.0, 1.0}));
  const RationalMatrixd P = rm_para(W);
  CHECK(P.rows() == 1);
  CHECK(P.cols() == 2);
  for (cd z : {cd(0.9, 0.435889894354), cd(std::polar(1.0, 2.1))}) {
    const CMatX<double> lhs = P.eval(z);
    const CMatX<double> rhs = W.eval(1.0 / z).transpose();
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("rm_inverse satisfies M * M^{-1} = I on the grid") {
  RationalMatrixd M(2, 2);
  M(0, 0) = Rationald(poly({1.0, 1.0}), poly({-0.5, 1.0}));
  M(0, 1) = Rationald(poly({0.5}), poly({1.0}));
  M(1, 0) = Rationald(poly({0.0, 1.0}), poly({0.2, 1.0}));
  M(1, 1) = Rationald(poly({2.0}), poly({1.0}));
  const RationalMatrixd Mi = rm_inverse(M);
  const UnitCircleGridd grid = UnitCircleGridd::make(32, 8);
  // entrywise simplification inside the inverse preserves values to ~1e-8
  const auto rep = rm_equal_on_grid(M * Mi, RationalMatrixd::Identity(2), grid, 1e-7);
  CHECK(rep.equal);
  CHECK(rep.max_dev < 1e-7);

  // singular input must throw
  RationalMatrixd S(2, 2);
  S(0, 0) = Rationald(poly({1.0}), poly({1.0}));
  S(0, 1) = Rationald(poly({2.0}), poly({1.0}));
  S(1, 0) = Rationald(poly({1.0}), poly({1.0}));
  S(1, 1) = Rationald(poly({2.0}), poly({1.0}));
  CHECK_THROWS_AS((void)rm_inverse(S), SingularMatrix);
}

TEST_CASE("rm_equal_on_grid reports the worst deviation and rm_grid_sup the sup") {
  RationalMatrixd A = RationalMatrixd::Identity(2);
  RationalMatrixd B = RationalMatrixd::Identity(2);
  B(1, 1) = Rationald(poly({1.0 + 5e-7}), poly({1.0}));
  const UnitCircleGridd grid = UnitCircleGridd::make(16, 0);
  const auto rep = rm_equal_on_grid(A, B, grid, 1e-9);
  CHECK(!rep.equal);
  CHECK(rep.max_dev == doctest::Approx(5e-7).epsilon(1e-6));

  RationalMatrixd C(1, 1);
  C(0, 0) = Rationald(poly({0.0, 1.0}), poly({1.0}));  // |z| = 1 on the circle
  CHECK(rm_grid_sup(C, grid) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rm_simplify preserves values entrywise") {
  RationalMatrixd M(1, 2);
  // (z^2 - 0.25)/(z - 0.5) should reduce to z + 0.5
  M(0, 0) = Rationald(poly({-0.25, 0.0, 1.0}), poly({-0.5, 1.0}));
  M(0, 1) = Rationald(poly({1.0, 3.0}), poly({0.7, 1.0}));
  const RationalMatrixd S = rm_simplify(M);
  CHECK(S(0, 0).den.degree() == 0);
  const UnitCircleGridd grid = UnitCircleGridd::make(16, 4);
  CHECK(rm_equal_on_grid(S, M, grid, 1e-9).equal);
}

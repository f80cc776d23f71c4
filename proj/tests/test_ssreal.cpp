// State-space realizations: symbolic transfer functions, D-normalization,
// channel partitions, the Gamma projections, and minimal realizations.
//
// The symbolic transfer function is checked against an independent oracle
// (a direct complex linear solve of C (zI - A)^{-1} B + D at sample points).
// Values printed in the worked examples are pinned as constants.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <complex>
#include <string>
#include <vector>

#include "lowrank/harness.hpp"

using namespace lowrank;
using cd = std::complex<double>;

namespace {

Model fixture(const std::string& name) {
  return load_model(std::string(FIXTURE_DIR) + "/" + name);
}

// independent oracle: evaluate W(z) by solving (zI - A) x = B column-wise
CMatX<double> direct_eval(const StateSpace<double>& ss, cd z) {
  CMatX<double> zIA = -ss.A.cast<cd>();
  for (Eigen::Index i = 0; i < ss.n(); ++i) zIA(i, i) += z;
  return ss.C.cast<cd>() * zIA.partialPivLu().solve(ss.B.cast<cd>()) + ss.D.cast<cd>();
}

const std::vector<cd> sample_points = {cd(0.31, 0.87), cd(-0.62, 0.41), cd(1.7, -0.3),
                                       cd(0.05, -0.99)};

}  // namespace

TEST_CASE("faddeev recursion reproduces the characteristic polynomial") {
  MatX<double> A(3, 3);
  A << 1.0, 0.0, -1.5, 0.7, 0.2, -1.4, 0.5, 0.0, -1.0;
  const auto [chi, M] = faddeev(A);
  // oracle: chi(z) = det(zI - A) via direct complex determinants
  for (cd z : sample_points) {
    CMatX<double> zIA = -A.cast<cd>();
    for (int i = 0; i < 3; ++i) zIA(i, i) += z;
    const cd det = zIA.determinant();
    CHECK(std::abs(peval(chi, z) - det) < 1e-10 * (1.0 + std::abs(det)));
  }
}

TEST_CASE("transfer_function agrees with a direct complex solve") {
  for (const char* name : {"sva.json", "example1.json", "example22.json"}) {
    const Model m = fixture(name);
    const RationalMatrixd W = transfer_function(m.ss);
    REQUIRE(W.rows() == m.ss.p());
    REQUIRE(W.cols() == m.ss.m());
    for (cd z : sample_points) {
      const CMatX<double> lhs = W.eval(z);
      const CMatX<double> rhs = direct_eval(m.ss, z);
      CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9 * (1.0 + rhs.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("invert_square realizes the inverse system") {
  // a square, invertible 2x2 system with nonsingular D
  StateSpace<double> ss;
  ss.A = MatX<double>(2, 2);
  ss.A << 0.3, 0.1, -0.2, 0.4;
  ss.B = MatX<double>(2, 2);
  ss.B << 1.0, 0.0, 0.5, 1.0;
  ss.C = MatX<double>(2, 2);
  ss.C << 1.0, -1.0, 0.0, 2.0;
  ss.D = MatX<double>(2, 2);
  ss.D << 2.0, 0.5, 0.0, 1.0;
  const StateSpace<double> inv = invert_square(ss);
  for (cd z : sample_points) {
    const CMatX<double> prod = direct_eval(ss, z) * direct_eval(inv, z);
    CHECK((prod - CMatX<double>::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("normalize_D on Example 2.1 reproduces the printed transformed system") {
  const Model m = fixture("example21.json");
  const NormalizedFactor<double> nf = normalize_D(m.ss);
  CHECK(nf.rho == 2);
  REQUIRE(nf.sigma.size() == 2);
  CHECK(nf.sigma[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(nf.sigma[1] == doctest::Approx(1.0).epsilon(1e-12));

  MatX<double> Bn(3, 2), Cn(3, 3), Dn(3, 2);
  Bn << 1, 0, 2, -1, 0, 1;
  Cn << -2, -3, 4, -3, -1, -1, -2, -2, -3;
  Dn << 2, 0, 0, 1, 0, 0;
  CHECK((nf.sys.B - Bn).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((nf.sys.C - Cn).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((nf.sys.D - Dn).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((nf.sys.A - m.ss.A).cwiseAbs().maxCoeff() == 0.0);  // A untouched

  // U, V orthogonal
  CHECK((nf.U * nf.U.transpose() - MatX<double>::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((nf.V * nf.V.transpose() - MatX<double>::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);

  // oracle: the normalized factor is (U W V^T), so its spectral density is
  // U Phi U^T; check at sample points on the circle
  const RationalMatrixd W = transfer_function(m.ss);
  const RationalMatrixd Wn = transfer_function(nf.sys);
  for (cd z : {std::polar(1.0, 0.41), std::polar(1.0, 2.2)}) {
    const CMatX<double> lhs = Wn.eval(z) * Wn.eval(1.0 / z).transpose();
    const CMatX<double> rhs =
        nf.U.cast<cd>() * W.eval(z) * W.eval(1.0 / z).transpose() * nf.U.transpose().cast<cd>();
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9 * (1.0 + rhs.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("normalize_D on Example 3 keeps U = I and the printed signature") {
  const Model m = fixture("example3.json");
  const NormalizedFactor<double> nf = normalize_D(m.ss);
  CHECK(nf.rho == 2);
  REQUIRE(nf.sigma.size() == 2);
  CHECK(nf.sigma[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(nf.sigma[1] == doctest::Approx(-3.0).epsilon(1e-12));
  CHECK((nf.U - MatX<double>::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-9);

  MatX<double> Bn(3, 3);
  Bn << 2, 0, -3, 1, -2, 2, 0, 2, -3;
  CHECK((nf.sys.B - Bn).cwiseAbs().maxCoeff() < 1e-9);
  // with U = I the output map is untouched
  CHECK((nf.sys.C - m.ss.C).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("normalize_D handles the D = 0 and already-normalized cases") {
  const Model sva = fixture("sva.json");
  const NormalizedFactor<double> nf0 = normalize_D(sva.ss);
  CHECK(nf0.rho == 0);
  CHECK(nf0.sigma.size() == 0);
  CHECK((nf0.sys.C - sva.ss.C).cwiseAbs().maxCoeff() == 0.0);

  const Model m22 = fixture("example22.json");
  const NormalizedFactor<double> nf2 = normalize_D(m22.ss);
  CHECK(nf2.rho == 2);
  REQUIRE(nf2.sigma.size() == 2);
  CHECK(nf2.sigma[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(nf2.sigma[1] == doctest::Approx(-1.0).epsilon(1e-12));
  // D was already in normalized form, so the system is unchanged
  CHECK((nf2.sys.D - m22.ss.D).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((nf2.sys.C - m22.ss.C).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("partition enumeration: counts, complements, and admissibility") {
  const Model sva = fixture("sva.json");
  const auto nf = normalize_D(sva.ss);
  const auto parts = enumerate_partitions(nf.sys, nf.rho);
  REQUIRE(parts.size() == 2);
  CHECK(parts[0].u1_rows == std::vector<Eigen::Index>{0});
  CHECK(parts[0].y_rows == std::vector<Eigen::Index>{1});
  CHECK(parts[1].u1_rows == std::vector<Eigen::Index>{1});
  CHECK(parts[1].y_rows == std::vector<Eigen::Index>{0});
  CHECK(parts[0].admissible);
  CHECK(parts[1].admissible);
  // C1 B by hand: u = zeta_1 gives -4*2 + (-2)*(-3) = -2; u = zeta_2 gives -13
  CHECK(parts[0].C1B1(0, 0) == doctest::Approx(-4.0 * 2.0 + -2.0 * -3.0));
  CHECK(parts[1].C1B1(0, 0) == doctest::Approx(-2.0 * 2.0 + 3.0 * -3.0));

  const Model ex1 = fixture("example1.json");
  const auto nf1 = normalize_D(ex1.ss);
  const auto parts1 = partitions_with_nonsingular_C1B1(nf1.sys, nf1.rho);
  REQUIRE(parts1.size() == 4);
  // printed values: C1 B = 9 for u = zeta_1 and C1 B = 5 for u = zeta_2
  CHECK(parts1[0].C1B1(0, 0) == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(parts1[1].C1B1(0, 0) == doctest::Approx(5.0).epsilon(1e-12));

  const Model ex3 = fixture("example3.json");
  const auto nf3 = normalize_D(ex3.ss);
  const auto parts3 = partitions_with_nonsingular_C1B1(nf3.sys, nf3.rho);
  REQUIRE(parts3.size() == 2);
  // u0 rows are pinned; u1 draws one of the two remaining outputs
  CHECK(parts3[0].u1_rows == std::vector<Eigen::Index>{2});
  CHECK(parts3[0].y_rows == std::vector<Eigen::Index>{3});
  // printed: C1 = [3 0 0], so C1 B1 = 3 * (-3) = -9
  CHECK(parts3[0].C1B1(0, 0) == doctest::Approx(-9.0).epsilon(1e-12));

  // full-rank D: single partition with empty u1
  const Model ex21 = fixture("example21.json");
  const auto nf21 = normalize_D(ex21.ss);
  const auto parts21 = partitions_with_nonsingular_C1B1(nf21.sys, nf21.rho);
  REQUIRE(parts21.size() == 1);
  CHECK(parts21[0].u1_rows.empty());
  CHECK(parts21[0].y_rows == std::vector<Eigen::Index>{2});
}

TEST_CASE("gammas reproduces the printed Gamma_1 matrices of Example 1") {
  const Model ex1 = fixture("example1.json");
  const auto nf = normalize_D(ex1.ss);
  const auto parts = partitions_with_nonsingular_C1B1(nf.sys, nf.rho);
  REQUIRE(parts.size() == 4);

  const Gammas<double> g0 = gammas(nf.sys, nf, parts[0]);
  MatX<double> G1a(3, 3);
  G1a << 16.0 / 15, 1.0 / 15, -9.0 / 5, 23.0 / 30, 4.0 / 15, -17.0 / 10, 3.0 / 10, -1.0 / 5,
      -1.0 / 10;
  CHECK((g0.Gamma1 - G1a).cwiseAbs().maxCoeff() < 1e-12);
  // with D = 0 the Gamma_0 step is just A
  CHECK((g0.Gamma0 - nf.sys.A).cwiseAbs().maxCoeff() < 1e-12);

  const Gammas<double> g1 = gammas(nf.sys, nf, parts[1]);
  MatX<double> G1b(3, 3);
  G1b << 7.0 / 10, 0, -11.0 / 10, 2.0 / 5, 1.0 / 5, -1.0, 7.0 / 5, 0, -11.0 / 5;
  CHECK((g1.Gamma1 - G1b).cwiseAbs().maxCoeff() < 1e-12);

  // printed eigenvalues of Gamma_1: {9/10, 1/3, 0} and {-3/2, 1/5, 0}
  auto close_to = [](const std::vector<cd>& eigs, double v) {
    for (const auto& e : eigs)
      if (std::abs(e - cd(v, 0.0)) < 1e-9) return true;
    return false;
  };
  const auto e0 = eigenvalues(g0.Gamma1);
  CHECK(close_to(e0, 0.9));
  CHECK(close_to(e0, 1.0 / 3));
  CHECK(close_to(e0, 0.0));
  const auto e1 = eigenvalues(g1.Gamma1);
  CHECK(close_to(e1, -1.5));
  CHECK(close_to(e1, 0.2));
  CHECK(close_to(e1, 0.0));

  // structural oracle for the oblique projection: P1^2 = P1 and P1 B1 = 0
  const MatX<double> B1 = nf.sys.B.rightCols(nf.sys.m() - nf.rho);
  for (const auto& part : parts) {
    const Gammas<double> g = gammas(nf.sys, nf, part);
    CHECK((g.P1 * g.P1 - g.P1).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((g.P1 * B1).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("stability helpers: spectral radius and eigenvalues") {
  const Model sva = fixture("sva.json");
  // char poly of A is z^2 - 1/4: eigenvalues +-1/2
  CHECK(spectral_radius(sva.ss.A) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(is_strictly_stable(sva.ss.A));
  MatX<double> U(2, 2);
  U << 1.0, 1.0, 0.0, 1.0;  // eigenvalues on the unit circle: not strictly stable
  CHECK(!is_strictly_stable(U));
  const auto eigs = eigenvalues(sva.ss.A);
  REQUIRE(eigs.size() == 2);
  CHECK(std::abs(std::abs(eigs[0]) - 0.5) < 1e-12);
  CHECK(std::abs(std::abs(eigs[1]) - 0.5) < 1e-12);
}

TEST_CASE("observability and reachability matrices have the expected ranks") {
  const Model sva = fixture("sva.json");
  const MatX<double> O = observability_matrix(sva.ss.A, sva.ss.C);
  const MatX<double> R = reachability_matrix(sva.ss.A, sva.ss.B);
  CHECK(O.rows() == 4);  // p*n rows stacked
  CHECK(Eigen::FullPivLU<MatX<double>>(O).rank() == 2);
  CHECK(Eigen::FullPivLU<MatX<double>>(R).rank() == 2);

  // append an unreachable (but stable) extra state: reachability rank stays 2
  StateSpace<double> aug;
  aug.A = MatX<double>::Zero(3, 3);
  aug.A.topLeftCorner(2, 2) = sva.ss.A;
  aug.A(2, 2) = 0.5;
  aug.B = MatX<double>::Zero(3, 1);
  aug.B.topRows(2) = sva.ss.B;
  aug.C = MatX<double>::Zero(2, 3);
  aug.C.leftCols(2) = sva.ss.C;
  aug.C(0, 2) = 1.0;
  aug.D = MatX<double>::Zero(2, 1);
  CHECK(Eigen::FullPivLU<MatX<double>>(reachability_matrix(aug.A, aug.B)).rank() == 2);

  // minimal_realization strips the unreachable state and preserves the values
  const MinimalRealization<double> mr = minimal_realization(aug);
  CHECK(mr.rank == 2);
  CHECK(mr.sys.n() == 2);
  for (cd z : sample_points) {
    const CMatX<double> a = direct_eval(aug, z);
    const CMatX<double> b = direct_eval(mr.sys, z);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9 * (1.0 + a.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("minimal_realization keeps already-minimal systems intact") {
  const Model sva = fixture("sva.json");
  const MinimalRealization<double> mr = minimal_realization(sva.ss);
  CHECK(mr.rank == 2);
  for (cd z : sample_points) {
    const CMatX<double> a = direct_eval(sva.ss, z);
    const CMatX<double> b = direct_eval(mr.sys, z);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9 * (1.0 + a.cwiseAbs().maxCoeff()));
  }
}

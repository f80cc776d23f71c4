// Stabilizing-feedback synthesis by boundary interpolation.
//
// The worked scalar channel has exact rational answers (z1 = 128/137,
// Q = (137/128)(7-2z)/(7z-2), H = 90/137) which are pinned; everything else
// is checked against structural oracles: interpolation constraints evaluated
// directly, closed-loop grid identities, and value-preservation of the
// variable substitutions at sample points.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <vector>

#include "lowrank/harness.hpp"

using namespace lowrank;
using cd = std::complex<double>;

namespace {

Polyd poly(std::initializer_list<double> asc) {
  Polyd p;
  p.c = VecX<double>(static_cast<Eigen::Index>(asc.size()));
  Eigen::Index i = 0;
  for (double v : asc) p.c[i++] = v;
  return p;
}

Rationald rat(std::initializer_list<double> num, std::initializer_list<double> den) {
  return Rationald(poly(num), poly(den));
}

// coefficientwise relative comparison after monic normalization
bool monic_match(const Rationald& got, const Rationald& want, double rel) {
  const Rationald a = monic(simplify(got));
  const Rationald b = monic(simplify(want));
  if (a.num.degree() != b.num.degree() || a.den.degree() != b.den.degree()) return false;
  for (Eigen::Index i = 0; i <= a.num.degree(); ++i)
    if (std::abs(a.num.c[i] - b.num.c[i]) > rel * (1.0 + std::abs(b.num.c[i]))) return false;
  for (Eigen::Index i = 0; i <= a.den.degree(); ++i)
    if (std::abs(a.den.c[i] - b.den.c[i]) > rel * (1.0 + std::abs(b.den.c[i]))) return false;
  return true;
}

// scalar closed-loop grid certificate: Q (1 - F H) = 1 and stability of Q, H
void check_scalar_loop(const Rationald& F, const ChannelSynthesis<double>& ch) {
  for (int k = 0; k < 64; ++k) {
    const cd z = std::polar(1.0, 0.049 + 2.0 * 3.14159265358979 * k / 64.0);
    const cd lhs = reval(ch.Q, z) * (cd(1.0, 0.0) - reval(F, z) * reval(ch.H, z));
    CHECK(std::abs(lhs - cd(1.0, 0.0)) < 1e-8);
  }
  for (const auto& r : roots_or_empty(ch.Q.den)) CHECK(std::abs(r) < 1.0);
  if (!ch.H.num.is_zero())
    for (const auto& r : roots_or_empty(ch.H.den)) CHECK(std::abs(r) < 1.0);
}

// the worked scalar channel F = (26z - 27)/(2(2z - 7))
const Rationald worked_channel = rat({-27.0, 26.0}, {-14.0, 4.0});

}  // namespace

TEST_CASE("interpolation data for the worked channel: reflected pole and zero") {
  const InterpolationData<double> data = interpolation_data<double>({worked_channel}, 10.0);
  REQUIRE(data.nodes.size() == 2);
  CHECK(data.needs_feedback[0]);

  // pole 7/2 reflects to 2/7, zero 27/26 reflects to 26/27
  CHECK(data.nodes[0].kind == NodeKind::unstable_pole);
  CHECK(std::abs(data.nodes[0].xi - cd(2.0 / 7.0, 0.0)) < 1e-12);
  CHECK(data.nodes[1].kind == NodeKind::nmp_zero);
  CHECK(std::abs(data.nodes[1].xi - cd(26.0 / 27.0, 0.0)) < 1e-12);

  // recentring at the pole image; the zero image moves to z1 = 128/137
  const double xi0 = recentring_point(data);
  CHECK(xi0 == doctest::Approx(2.0 / 7.0).epsilon(1e-13));
  const cd z1 = mobius_recentre(data.nodes[1].xi, xi0);
  CHECK(std::abs(z1 - cd(128.0 / 137.0, 0.0)) < 1e-12);
}

TEST_CASE("synthesis on the worked channel reproduces the exact Q and H") {
  const DiagonalSynthesis<double> syn = synthesize_diagonal<double>({worked_channel}, 10.0);
  REQUIRE(syn.channels.size() == 1);
  const ChannelSynthesis<double>& ch = syn.channels[0];
  CHECK(ch.feedback_needed);

  // Q = (137/128)(7 - 2z)/(7z - 2) and H = 90/137, both exact rationals
  CHECK(monic_match(ch.Q, rat({7.0 * 137.0 / 128.0, -2.0 * 137.0 / 128.0}, {-2.0, 7.0}), 1e-9));
  CHECK(monic_match(ch.H, rat({90.0 / 137.0}, {1.0}), 1e-9));

  // interpolation constraints: Q vanishes at the unstable pole and is one at
  // the non-minimum-phase zero
  CHECK(std::abs(reval(ch.Q, cd(3.5, 0.0))) < 1e-10);
  CHECK(std::abs(reval(ch.Q, cd(27.0 / 26.0, 0.0)) - cd(1.0, 0.0)) < 1e-10);

  // the sup of |Q| on the circle is 137/128, within the gamma budget
  CHECK(ch.sup_Q == doctest::Approx(137.0 / 128.0).epsilon(1e-6));
  CHECK(ch.sup_Q <= syn.gamma);
  CHECK(syn.xi0 == doctest::Approx(2.0 / 7.0).epsilon(1e-12));

  check_scalar_loop(worked_channel, ch);
}

TEST_CASE("sigma deformation keeps the worked loop stable and interpolating") {
  for (double sigma : {0.3, -0.25}) {
    const DiagonalSynthesis<double> syn = synthesize_diagonal<double>({worked_channel}, 10.0, sigma);
    const ChannelSynthesis<double>& ch = syn.channels[0];
    CHECK(ch.feedback_needed);
    CHECK(std::abs(reval(ch.Q, cd(3.5, 0.0))) < 1e-8);
    CHECK(std::abs(reval(ch.Q, cd(27.0 / 26.0, 0.0)) - cd(1.0, 0.0)) < 1e-8);
    check_scalar_loop(worked_channel, ch);
  }
  // sigma is only defined for the scalar two-node configuration
  CHECK_THROWS_AS((void)synthesize_diagonal<double>({rat({1.0}, {-2.0, 1.0})}, 10.0, 0.5),
                  SynthesisFailure);
}

TEST_CASE("two-output synthesis matches the printed example to print precision") {
  // channels straight from the printed diagonal F
  const Rationald F1 = rat({3.0, 1.0}, {2.0, 1.0});    // (z+3)/(z+2)
  const Rationald F2 = rat({-4.0, 1.0}, {-2.0, 1.0});  // (z-4)/(z-2)
  const DiagonalSynthesis<double> syn = synthesize_diagonal<double>({F1, F2}, 10.0);
  REQUIRE(syn.channels.size() == 2);

  // printed channel 1: Q = 3.0838 (z - 0.25)(z + 2) / (z^2 - 0.3283z + 0.0372)
  //                    H = 0.6757 (z - 0.2526) / (z - 0.25)
  const Rationald Q1 = Rationald(3.0838 * (poly({-0.25, 1.0}) * poly({2.0, 1.0})),
                                 poly({0.0372, -0.3283, 1.0}));
  const Rationald H1 = rat({-0.6757 * 0.2526, 0.6757}, {-0.25, 1.0});
  CHECK(monic_match(syn.channels[0].Q, Q1, 2e-3));
  CHECK(monic_match(syn.channels[0].H, H1, 2e-3));

  // printed channel 2: Q = 1.2199 (z-2)(z+1/3)(z+1/2) /
  //                        ((z-1/2)(z^2 - 0.6446z + 0.1727))
  //                    H = 0.1803 (z+0.1404)(z+2.5933) / ((z+0.5)(z+1/3))
  const Rationald Q2 =
      Rationald(1.2199 * (poly({-2.0, 1.0}) * poly({1.0 / 3, 1.0}) * poly({0.5, 1.0})),
                poly({-0.5, 1.0}) * poly({0.1727, -0.6446, 1.0}));
  const Rationald H2 = Rationald(0.1803 * (poly({0.1404, 1.0}) * poly({2.5933, 1.0})),
                                 poly({0.5, 1.0}) * poly({1.0 / 3, 1.0}));
  CHECK(monic_match(syn.channels[1].Q, Q2, 2e-3));
  CHECK(monic_match(syn.channels[1].H, H2, 2e-3));

  for (int k = 0; k < 2; ++k) {
    check_scalar_loop(k == 0 ? F1 : F2, syn.channels[static_cast<std::size_t>(k)]);
    CHECK(syn.channels[static_cast<std::size_t>(k)].sup_Q <= 10.0 * (1.0 + 1e-6));
  }
}

TEST_CASE("stable channels pass through without feedback") {
  const Rationald stable = rat({0.0, 1.0}, {-0.5, 1.0});  // z/(z - 1/2)
  const DiagonalSynthesis<double> syn = synthesize_diagonal<double>({stable}, 10.0);
  CHECK(!syn.channels[0].feedback_needed);
  CHECK(syn.channels[0].H.num.is_zero());
  CHECK(monic_match(syn.channels[0].Q, rat({1.0}, {1.0}), 1e-12));
}

TEST_CASE("pole-only channel takes the all-pass route and respects gamma") {
  // biproper, minimum-phase numerator: only the pole contributes a node
  const Rationald F = rat({0.1, 1.0}, {-2.0, 1.0});  // (z + 0.1)/(z - 2)
  const DiagonalSynthesis<double> syn = synthesize_diagonal<double>({F}, 10.0);
  const ChannelSynthesis<double>& ch = syn.channels[0];
  // Q = (z - 2)/(z - 1/2), the normalized Blaschke factor of the pole
  CHECK(monic_match(ch.Q, rat({-2.0, 1.0}, {-0.5, 1.0}), 1e-9));
  CHECK(ch.sup_Q == doctest::Approx(2.0).epsilon(1e-6));
  check_scalar_loop(F, ch);

  // the all-pass sup equals 2, so gamma = 1.5 is infeasible
  CHECK_THROWS_AS((void)synthesize_diagonal<double>({F}, 1.5), SynthesisFailure);
}

TEST_CASE("degenerate inputs are rejected with the specific errors") {
  // pole on the unit circle
  CHECK_THROWS_AS((void)interpolation_data<double>({rat({1.0}, {-1.0, 1.0})}, 10.0),
                  BoundaryDegeneracy);
  // repeated unstable pole (double root at z = 2)
  CHECK_THROWS_AS((void)interpolation_data<double>({rat({1.0, 2.0}, {4.0, -4.0, 1.0})}, 10.0),
                  MultiplicityUnsupported);
  // nonpositive gamma
  CHECK_THROWS_AS((void)interpolation_data<double>({worked_channel}, -1.0), SynthesisFailure);
}

TEST_CASE("variable substitutions preserve values at sample points") {
  const Rationald r = rat({1.0, -2.0, 0.5}, {0.3, 1.0, 1.0});

  // tustin: z = (1 + s)/(1 - s)
  const Rationald rt = tustin(r);
  for (cd s : {cd(0.2, 0.3), cd(-0.4, 0.9)}) {
    const cd z = (1.0 + s) / (1.0 - s);
    CHECK(std::abs(reval(rt, s) - reval(r, z)) < 1e-12 * (1.0 + std::abs(reval(r, z))));
  }

  // compose_mobius: zvar = (xi - xi0)/(1 - xi0 xi)
  const double xi0 = 0.35;
  const Rationald rm = compose_mobius(r, xi0);
  for (cd xi : {cd(0.1, 0.2), cd(-0.6, 0.1)}) {
    const cd zv = (xi - xi0) / (1.0 - xi0 * xi);
    CHECK(std::abs(reval(rm, xi) - reval(r, zv)) < 1e-12 * (1.0 + std::abs(reval(r, zv))));
  }

  // substitute_xi_inverse: xi = 1/z
  const Rationald ri = substitute_xi_inverse(r);
  for (cd z : {cd(0.5, 0.7), cd(1.4, -0.2)}) {
    CHECK(std::abs(reval(ri, z) - reval(r, 1.0 / z)) < 1e-12 * (1.0 + std::abs(reval(r, 1.0 / z))));
  }
}

TEST_CASE("reproducibility: identical inputs give identical synthesis output") {
  const DiagonalSynthesis<double> a = synthesize_diagonal<double>({worked_channel}, 10.0);
  const DiagonalSynthesis<double> b = synthesize_diagonal<double>({worked_channel}, 10.0);
  REQUIRE(a.channels[0].Q.num.c.size() == b.channels[0].Q.num.c.size());
  for (Eigen::Index i = 0; i < a.channels[0].Q.num.c.size(); ++i)
    CHECK(a.channels[0].Q.num.c[i] == b.channels[0].Q.num.c[i]);
  CHECK(a.channels[0].H.num.c[0] == b.channels[0].H.num.c[0]);
}

#pragma once

// Synthesis of the stabilizing feedback H(z) for an unstable deterministic
// relation y = F(z) u with diagonal (or scalar) F, via boundary Nevanlinna-Pick
// interpolation of a Schur function on the reflected node set.  The central
// (degree-constrained, spectral zeros at the recentred origin) interpolant is
// computed by a Newton iteration with deterministic multistart; the scalar
// two-node family additionally admits a closed form with covariance parameter
// sigma.  The feedback is recovered through a Mobius recentring, division by
// the cross-channel Blaschke product, the substitution xi = 1/z, and exact
// deflation of the structural cancellations.

#include "lowrank/ratcore.hpp"
#include "lowrank/rng.hpp"

#include <optional>

namespace lowrank {

struct MultiplicityUnsupported : Error {
  explicit MultiplicityUnsupported(const std::string& m =
                                       "coincident or multiple interpolation nodes unsupported")
      : Error(m) {}
};
struct BoundaryDegeneracy : Error {
  explicit BoundaryDegeneracy(const std::string& m =
                                  "pole or zero too close to the unit circle")
      : Error(m) {}
};
struct NoAdmissibleRoot : Error {
  explicit NoAdmissibleRoot(const std::string& m =
                                "covariance equation has no root in (0, 1)")
      : Error(m) {}
};
struct SynthesisFailure : Error {
  explicit SynthesisFailure(const std::string& m = "feedback synthesis failed") : Error(m) {}
};

// ---------------------------------------------------------------------------
// interpolation data
// ---------------------------------------------------------------------------

enum class NodeKind { unstable_pole, nmp_zero, at_infinity };

template <typename Scalar>
struct InterpNode {
  std::complex<Scalar> xi;   // reflected location, strictly inside the disk
  NodeKind kind;
  Eigen::Index channel;      // owning channel
};

template <typename Scalar>
struct InterpolationData {
  std::vector<InterpNode<Scalar>> nodes;            // union over all channels
  std::vector<std::vector<Eigen::Index>> own;       // per channel: indices into nodes
  std::vector<std::vector<Eigen::Index>> cross;     // per channel: everyone else's nodes
  std::vector<bool> needs_feedback;                 // channel has at least one node
  Scalar gamma;
};

// Reflected interpolation nodes for a diagonal family of channel transfer
// functions.  Every unstable pole pi contributes (1/pi, value 0), every
// non-minimum-phase zero zeta contributes (1/zeta, value gamma^{-1} times the
// cross-channel Blaschke product); non-biproper unstable channels contribute a
// node at xi = 0 governing the behaviour at z = infinity.
template <typename Scalar>
InterpolationData<Scalar> interpolation_data(const std::vector<Rational<Scalar>>& channels,
                                             Scalar gamma,
                                             Scalar boundary_band = Scalar(1e-6)) {
  if (gamma <= Scalar(0)) throw SynthesisFailure("gamma must be positive");
  InterpolationData<Scalar> data;
  data.gamma = gamma;
  const std::size_t nch = channels.size();
  data.own.resize(nch);
  data.cross.resize(nch);
  data.needs_feedback.assign(nch, false);

  for (std::size_t ch = 0; ch < nch; ++ch) {
    const Rational<Scalar> f = simplify(channels[ch]);
    if (f.num.is_zero()) continue;  // identically zero channel: trivially stable
    bool any_unstable = false;
    auto scan = [&](const Polynomial<Scalar>& poly, NodeKind kind) {
      if (poly.degree() < 1) return;
      for (const auto& r : roots(poly)) {
        const Scalar mod = std::abs(r);
        if (std::abs(mod - Scalar(1)) <= boundary_band) throw BoundaryDegeneracy{};
        if (mod < Scalar(1)) continue;
        if (r.imag() < -Scalar(1e-10)) continue;  // keep one of each conjugate pair
        data.nodes.push_back(
            {std::complex<Scalar>(1, 0) / r, kind, static_cast<Eigen::Index>(ch)});
        any_unstable = true;
      }
    };
    scan(f.den, NodeKind::unstable_pole);
    scan(f.num, NodeKind::nmp_zero);
    if (any_unstable) {
      data.needs_feedback[ch] = true;
      const Eigen::Index rd = f.den.degree() - f.num.degree();
      if (rd != 0)
        data.nodes.push_back({std::complex<Scalar>(0, 0),
                              NodeKind::at_infinity, static_cast<Eigen::Index>(ch)});
    }
  }

  // reject coincident node locations (multiplicities are unsupported)
  for (std::size_t i = 0; i < data.nodes.size(); ++i)
    for (std::size_t j = i + 1; j < data.nodes.size(); ++j)
      if (std::abs(data.nodes[i].xi - data.nodes[j].xi) < Scalar(1e-8))
        throw MultiplicityUnsupported{};

  for (std::size_t k = 0; k < data.nodes.size(); ++k) {
    const auto chk = static_cast<std::size_t>(data.nodes[k].channel);
    data.own[chk].push_back(static_cast<Eigen::Index>(k));
    for (std::size_t ch = 0; ch < nch; ++ch)
      if (ch != chk && data.needs_feedback[ch] &&
          data.nodes[k].kind != NodeKind::at_infinity)
        data.cross[ch].push_back(static_cast<Eigen::Index>(k));
  }
  return data;
}

// Recentring point: the pole node with the largest real reflected location;
// if no real pole node exists, the first real zero node; otherwise 0.
template <typename Scalar>
Scalar recentring_point(const InterpolationData<Scalar>& data) {
  std::optional<Scalar> best;
  for (const auto& nd : data.nodes)
    if (nd.kind == NodeKind::unstable_pole && std::abs(nd.xi.imag()) < Scalar(1e-12))
      if (!best || nd.xi.real() > *best) best = nd.xi.real();
  if (best) return *best;
  for (const auto& nd : data.nodes)
    if (nd.kind == NodeKind::nmp_zero && std::abs(nd.xi.imag()) < Scalar(1e-12))
      return nd.xi.real();
  return Scalar(0);
}

// Mobius recentring z = (xi - xi0)/(1 - xi0 xi), a disk automorphism for real
// |xi0| < 1.
template <typename Scalar>
std::complex<Scalar> mobius_recentre(const std::complex<Scalar>& xi, Scalar xi0) {
  return (xi - xi0) / (Scalar(1) - xi0 * xi);
}

// Caratheodory value from a Schur value, in the orientation used throughout:
// phi = (1 - f) / (2 (1 + f)), so f = (1 - 2 phi)/(1 + 2 phi).
template <typename Scalar>
std::complex<Scalar> schur_to_caratheodory(const std::complex<Scalar>& f) {
  return (Scalar(1) - f) / (Scalar(2) * (Scalar(1) + f));
}

// ---------------------------------------------------------------------------
// degree-constrained central interpolant (Newton + deterministic multistart)
// ---------------------------------------------------------------------------

template <typename Scalar>
struct CentralSolution {
  Polynomial<Scalar> a;  // monic-constant: a[0] = 1
  Polynomial<Scalar> b;  // phi = b / a
  Scalar c = Scalar(0);  // middle coefficient of N = a rev(b) + b rev(a) = c z^n
};

namespace hdetail {

// Residual and Jacobian of the interpolation + spectral-zero system.  Unknowns
// x = (a_1..a_n, b_0..b_n); complex nodes (one per conjugate pair) contribute a
// real and an imaginary row.
template <typename Scalar>
void resid_jac(const VecX<Scalar>& x, const std::vector<std::complex<Scalar>>& zs,
               const std::vector<std::complex<Scalar>>& ws, Eigen::Index n,
               VecX<Scalar>& r, MatX<Scalar>& J, bool want_jac) {
  const Eigen::Index nn = 2 * n + 1;
  VecX<Scalar> a(n + 1), b(n + 1);
  a[0] = Scalar(1);
  a.tail(n) = x.head(n);
  b = x.tail(n + 1);

  Eigen::Index nrows = 0;
  for (const auto& z : zs) nrows += std::abs(z.imag()) > Scalar(1e-14) ? 2 : 1;
  nrows += n;
  r.resize(nrows);
  if (want_jac) J = MatX<Scalar>::Zero(nrows, nn);

  Eigen::Index ri = 0;
  for (std::size_t k = 0; k < zs.size(); ++k) {
    const std::complex<Scalar> z = zs[k];
    std::complex<Scalar> av(0), bv(0), zp(1);
    std::vector<std::complex<Scalar>> pow(static_cast<std::size_t>(n + 1));
    for (Eigen::Index i = 0; i <= n; ++i) {
      pow[static_cast<std::size_t>(i)] = zp;
      av += a[i] * zp;
      bv += b[i] * zp;
      zp *= z;
    }
    const std::complex<Scalar> E = bv - ws[k] * av;
    const bool cplx = std::abs(z.imag()) > Scalar(1e-14);
    r[ri] = E.real();
    if (cplx) r[ri + 1] = E.imag();
    if (want_jac) {
      for (Eigen::Index i = 1; i <= n; ++i) {
        const std::complex<Scalar> d = -ws[k] * pow[static_cast<std::size_t>(i)];
        J(ri, i - 1) = d.real();
        if (cplx) J(ri + 1, i - 1) = d.imag();
      }
      for (Eigen::Index i = 0; i <= n; ++i) {
        const std::complex<Scalar> d = pow[static_cast<std::size_t>(i)];
        J(ri, n + i) = d.real();
        if (cplx) J(ri + 1, n + i) = d.imag();
      }
    }
    ri += cplx ? 2 : 1;
  }

  // N = a * rev(b) + b * rev(a); impose N_j = 0 for j = 0..n-1
  auto gidx = [&](const VecX<Scalar>& v, Eigen::Index i) {
    return (i >= 0 && i <= n) ? v[i] : Scalar(0);
  };
  for (Eigen::Index j = 0; j < n; ++j) {
    Scalar Nj(0);
    for (Eigen::Index i = 0; i <= n; ++i)
      Nj += a[i] * gidx(b, n - (j - i)) + b[i] * gidx(a, n - (j - i));
    r[ri + j] = Nj;
    if (want_jac) {
      for (Eigen::Index i = 1; i <= n; ++i)
        J(ri + j, i - 1) = gidx(b, n + i - j) + gidx(b, i + j - n);
      for (Eigen::Index i = 0; i <= n; ++i)
        J(ri + j, n + i) = gidx(a, n + i - j) + gidx(a, i + j - n);
    }
  }
}

template <typename Scalar>
bool newton(VecX<Scalar>& x, const std::vector<std::complex<Scalar>>& zs,
            const std::vector<std::complex<Scalar>>& ws, Eigen::Index n,
            int itmax = 80) {
  VecX<Scalar> r;
  MatX<Scalar> J;
  for (int it = 0; it < itmax; ++it) {
    resid_jac(x, zs, ws, n, r, J, true);
    const Scalar nr = r.norm();
    if (nr < Scalar(1e-13)) return true;
    Eigen::FullPivLU<MatX<Scalar>> lu(J);
    const VecX<Scalar> dx = lu.solve(r);
    if (!dx.allFinite() || (J * dx - r).norm() > Scalar(1e-6) * (Scalar(1) + nr)) return false;
    Scalar t(1);
    bool improved = false;
    VecX<Scalar> rn;
    MatX<Scalar> Jdummy;
    for (int ls = 0; ls < 50; ++ls) {
      VecX<Scalar> xn = x - t * dx;
      resid_jac(xn, zs, ws, n, rn, Jdummy, false);
      if (rn.norm() < nr) {
        x = xn;
        improved = true;
        break;
      }
      t *= Scalar(0.5);
    }
    if (!improved) return false;
  }
  resid_jac(x, zs, ws, n, r, J, false);
  return r.norm() < Scalar(1e-10);
}

// Full validation of a candidate: denominator roots strictly outside the disk,
// a positive real part on the circle, a one-spike spectral-zero polynomial,
// and the interpolation conditions themselves.
template <typename Scalar>
std::optional<CentralSolution<Scalar>> validate(const VecX<Scalar>& x,
                                                const std::vector<std::complex<Scalar>>& zs,
                                                const std::vector<std::complex<Scalar>>& ws,
                                                Eigen::Index n) {
  CentralSolution<Scalar> sol;
  sol.a.c.resize(n + 1);
  sol.a.c[0] = Scalar(1);
  sol.a.c.tail(n) = x.head(n);
  sol.b.c = x.tail(n + 1);

  if (n >= 1)
    for (const auto& root : roots(sol.a))
      if (std::abs(root) < Scalar(1) + Scalar(1e-8)) return std::nullopt;

  const Scalar pi = Scalar(3.141592653589793238462643383279502884L);
  for (int k = 0; k < 2001; ++k) {
    const std::complex<Scalar> z = std::polar(Scalar(1), Scalar(2) * pi * Scalar(k) / Scalar(2001));
    const std::complex<Scalar> phi = peval(sol.b, z) / peval(sol.a, z);
    if (phi.real() <= Scalar(1e-12)) return std::nullopt;
  }

  VecX<Scalar> N = VecX<Scalar>::Zero(2 * n + 1);
  for (Eigen::Index i = 0; i <= n; ++i)
    for (Eigen::Index j = 0; j <= n; ++j) {
      N[i + (n - j)] += sol.a.c[i] * sol.b.c[j];  // a * rev(b)
      N[i + (n - j)] += sol.b.c[i] * sol.a.c[j];  // b * rev(a)
    }
  sol.c = N[n];
  Scalar off(0);
  for (Eigen::Index i = 0; i < 2 * n + 1; ++i)
    if (i != n) off = std::max(off, std::abs(N[i]));
  if (sol.c <= Scalar(0) || off > Scalar(1e-9) * std::max(Scalar(1), std::abs(sol.c)))
    return std::nullopt;

  for (std::size_t k = 0; k < zs.size(); ++k) {
    const std::complex<Scalar> E =
        peval(sol.b, zs[k]) - ws[k] * peval(sol.a, zs[k]);
    if (std::abs(E) > Scalar(1e-9)) return std::nullopt;
  }
  return sol;
}

}  // namespace hdetail

// All validated degree-n interpolants found by deterministic multistart; the
// central solution is expected (and observed) to be the unique element.
template <typename Scalar>
std::vector<CentralSolution<Scalar>> central_solution_catalogue(
    const std::vector<std::complex<Scalar>>& zs, const std::vector<std::complex<Scalar>>& ws,
    int tries = 80, std::uint64_t seed = 1) {
  Eigen::Index n = -1;
  for (const auto& z : zs) n += std::abs(z.imag()) > Scalar(1e-14) ? 2 : 1;
  if (n < 0) throw SynthesisFailure("no interpolation nodes");
  std::vector<CentralSolution<Scalar>> found;
  DeterministicRng rng(seed);
  for (int t = 0; t < tries; ++t) {
    VecX<Scalar> x0 = VecX<Scalar>::Zero(2 * n + 1);
    if (t == 0) {
      x0[n] = Scalar(0.5);
    } else {
      const Scalar sc = std::pow(Scalar(10), Scalar(rng.uniform(-1.5, 0.7)));
      for (Eigen::Index i = 0; i < x0.size(); ++i) x0[i] = Scalar(rng.normal()) * sc;
      x0[n] = Scalar(0.5) + Scalar(rng.normal()) * Scalar(0.3);
    }
    if (!hdetail::newton(x0, zs, ws, n)) continue;
    auto sol = hdetail::validate(x0, zs, ws, n);
    if (!sol) continue;
    bool dup = false;
    for (const auto& s : found)
      if ((s.a.c - sol->a.c).cwiseAbs().maxCoeff() < Scalar(1e-7) &&
          (s.b.c - sol->b.c).cwiseAbs().maxCoeff() < Scalar(1e-7)) {
        dup = true;
        break;
      }
    if (!dup) found.push_back(*sol);
  }
  return found;
}

template <typename Scalar>
CentralSolution<Scalar> central_solution(const std::vector<std::complex<Scalar>>& zs,
                                         const std::vector<std::complex<Scalar>>& ws,
                                         int tries = 80, std::uint64_t seed = 1) {
  auto found = central_solution_catalogue(zs, ws, tries, seed);
  if (found.empty()) throw SynthesisFailure("no validated interpolant found");
  std::sort(found.begin(), found.end(),
            [](const CentralSolution<Scalar>& l, const CentralSolution<Scalar>& r) {
              return l.c > r.c;
            });
  return found.front();
}

// ---------------------------------------------------------------------------
// scalar two-node closed form with covariance parameter sigma
// ---------------------------------------------------------------------------

// Root p in (0, 1) of the covariance equation
//   0 = (U^2 - 1) sigma^2 p^2 + (sigma^2 - 1 - 2 (u + U sigma) U sigma) p + (u + U sigma)^2.
template <typename Scalar>
Scalar solve_ceq(Scalar u, Scalar U, Scalar sigma) {
  const Scalar A = (U * U - Scalar(1)) * sigma * sigma;
  const Scalar B = sigma * sigma - Scalar(1) - Scalar(2) * (u + U * sigma) * U * sigma;
  const Scalar C = (u + U * sigma) * (u + U * sigma);
  auto in01 = [](Scalar v) { return v > Scalar(0) && v < Scalar(1); };
  if (std::abs(A) < Scalar(1e-15)) {
    const Scalar p = -C / B;
    if (!in01(p)) throw NoAdmissibleRoot{};
    return p;
  }
  const Scalar disc = B * B - Scalar(4) * A * C;
  if (disc < Scalar(0)) throw NoAdmissibleRoot{};
  const Scalar r1 = (-B + std::sqrt(disc)) / (Scalar(2) * A);
  const Scalar r2 = (-B - std::sqrt(disc)) / (Scalar(2) * A);
  if (in01(r1)) return r1;
  if (in01(r2)) return r2;
  throw NoAdmissibleRoot{};
}

// Closed-form Caratheodory interpolant for the recentred two-node scalar data
// (phi(0) = 1/2, Schur value gamma^{-1} at z1): phi = (1 + b z)/(2 (1 + a z)).
template <typename Scalar>
CentralSolution<Scalar> two_node_closed_form(Scalar z1, Scalar gamma, Scalar sigma) {
  const Scalar u = -Scalar(1) / (gamma * z1);
  const Scalar U = -Scalar(1) / gamma;
  Scalar a, b;
  if (sigma == Scalar(0)) {
    a = -u;
    b = u;
  } else {
    const Scalar p = solve_ceq(u, U, sigma);
    a = (Scalar(1) - U) * sigma * (Scalar(1) - p) - u;
    b = (Scalar(1) + U) * sigma * (Scalar(1) - p) + u;
  }
  CentralSolution<Scalar> sol;
  sol.a = Polynomial<Scalar>{Scalar(1), a};
  sol.b = Polynomial<Scalar>{Scalar(0.5), b / Scalar(2)};
  sol.c = Scalar(1);  // not meaningful for the sigma family
  // positivity on the circle
  const Scalar pi = Scalar(3.141592653589793238462643383279502884L);
  for (int k = 0; k < 2001; ++k) {
    const std::complex<Scalar> z = std::polar(Scalar(1), Scalar(2) * pi * k / Scalar(2001));
    if ((peval(sol.b, z) / peval(sol.a, z)).real() <= Scalar(0))
      throw SynthesisFailure("closed-form interpolant is not positive real");
  }
  return sol;
}

// ---------------------------------------------------------------------------
// Q and H assembly
// ---------------------------------------------------------------------------

namespace hdetail {

// Divide p by the real quadratic (xi - r)(xi - conj r); remainder must vanish.
template <typename Scalar>
Polynomial<Scalar> deflate_pair(const Polynomial<Scalar>& p_in, std::complex<Scalar> r,
                                Scalar rel_tol = Scalar(1e-6)) {
  Polynomial<Scalar> rem = trim(p_in);
  if (rem.degree() < 2) throw ContractViolation("deflate_pair: degree < 2");
  const Polynomial<Scalar> quad{std::norm(r), Scalar(-2) * r.real(), Scalar(1)};
  Polynomial<Scalar> quo;
  quo.c = VecX<Scalar>::Zero(rem.degree() - 1);
  const Scalar scale = rem.max_abs() * std::max(Scalar(1), std::norm(r));
  while (true) {
    const Polynomial<Scalar> rt = trim(rem, Scalar(0));
    if (rt.degree() < 2) break;
    const Eigen::Index d = rt.degree();
    const Scalar f = rt.c[d];
    quo.c[d - 2] += f;
    Polynomial<Scalar> shift;
    shift.c = VecX<Scalar>::Zero(d - 1);
    shift.c[d - 2] = f;
    rem = rt - shift * quad;
    if (trim(rem, Scalar(0)).degree() >= d) throw ContractViolation("deflate_pair stalled");
  }
  if (rem.max_abs() > rel_tol * std::max(Scalar(1), scale))
    throw ContractViolation("deflate_pair: nonzero remainder");
  return trim(quo, Scalar(0));
}

// Divide out the Blaschke factor at node xi_j (or a conjugate pair) from the
// numerator S: multiply by (1 - xi_j xi)/(xi_j - xi), exactly.
template <typename Scalar>
Polynomial<Scalar> divide_blaschke(Polynomial<Scalar> Sn, const std::complex<Scalar>& xij) {
  if (std::abs(xij.imag()) < Scalar(1e-12)) {
    Sn = -deflate(Sn, xij.real(), Scalar(1e-5));      // divide by (xi_j - xi)
    return Sn * Polynomial<Scalar>{Scalar(1), -xij.real()};  // times (1 - xi_j xi)
  }
  // conjugate pair: (xi_j - xi)(conj xi_j - xi) = |xi_j|^2 - 2 Re xi_j xi + xi^2
  Sn = deflate_pair(Sn, xij, Scalar(1e-5));
  return Sn * Polynomial<Scalar>{Scalar(1), Scalar(-2) * xij.real(), std::norm(xij)};
}

// Deflate q at every element of pts (real roots and conjugate-pair
// representatives with positive imaginary part).
template <typename Scalar>
Polynomial<Scalar> deflate_all(Polynomial<Scalar> q, const std::vector<std::complex<Scalar>>& pts,
                               Scalar rel_tol = Scalar(1e-5)) {
  for (const auto& r : pts) {
    if (std::abs(r.imag()) < Scalar(1e-10))
      q = deflate(q, r.real(), rel_tol);
    else
      q = deflate_pair(q, r, rel_tol);
  }
  return q;
}

}  // namespace hdetail

// Bilinear (Tustin-type) substitution z = (1 + s)/(1 - s), mapping the unit
// circle onto the imaginary axis.
template <typename Scalar>
Rational<Scalar> tustin(const Rational<Scalar>& r) {
  const Eigen::Index deg = std::max(r.num.degree(), r.den.degree());
  const Polynomial<Scalar> mn{Scalar(1), Scalar(1)};   // 1 + s
  const Polynomial<Scalar> md{Scalar(1), Scalar(-1)};  // 1 - s
  auto comp = [&](const Polynomial<Scalar>& p) {
    Polynomial<Scalar> out;
    for (Eigen::Index k = 0; k <= p.degree(); ++k) {
      Polynomial<Scalar> term = Polynomial<Scalar>::constant(p.c[k]);
      for (Eigen::Index i = 0; i < k; ++i) term = term * mn;
      for (Eigen::Index i = 0; i < deg - k; ++i) term = term * md;
      out = out + term;
    }
    return out;
  };
  return Rational<Scalar>(comp(r.num), comp(r.den));
}

// Compose a rational in the recentred variable with the Mobius map
// zvar = (xi - xi0)/(1 - xi0 xi), returning a rational in xi.
template <typename Scalar>
Rational<Scalar> compose_mobius(const Rational<Scalar>& r, Scalar xi0) {
  const Polynomial<Scalar> num = trim(r.num), den = trim(r.den);
  const Eigen::Index deg = std::max(num.degree(), den.degree());
  const Polynomial<Scalar> mn{-xi0, Scalar(1)};
  const Polynomial<Scalar> md{Scalar(1), -xi0};
  auto comp = [&](const Polynomial<Scalar>& p) {
    Polynomial<Scalar> out;
    for (Eigen::Index k = 0; k <= p.degree(); ++k) {
      Polynomial<Scalar> term = Polynomial<Scalar>::constant(p.c[k]);
      for (Eigen::Index i = 0; i < k; ++i) term = term * mn;
      for (Eigen::Index i = 0; i < deg - k; ++i) term = term * md;
      out = out + term;
    }
    return out;
  };
  return Rational<Scalar>(comp(num), comp(den));
}

// Substitute xi = 1/z by coefficient reversal in the joint max-degree frame.
template <typename Scalar>
Rational<Scalar> substitute_xi_inverse(const Rational<Scalar>& r) {
  const Polynomial<Scalar> num = trim(r.num), den = trim(r.den);
  const Eigen::Index K = std::max(num.degree(), den.degree());
  return Rational<Scalar>(reverse_in_frame(num, K), reverse_in_frame(den, K));
}

// Assemble Q(z) for one channel from its Caratheodory interpolant:
//   f = (a - 2b)/(a + 2b)  (in the recentred variable)
//   S(xi) = gamma f(mobius(xi)) / prod_cross Blaschke,   Q(z) = S(1/z),
// then make the denominator monic and cancel residual common factors.
template <typename Scalar>
Rational<Scalar> q_from_phi(const CentralSolution<Scalar>& sol, Scalar xi0, Scalar gamma,
                            const std::vector<std::complex<Scalar>>& cross_xis) {
  const Polynomial<Scalar> fn = sol.a - Scalar(2) * sol.b;
  const Polynomial<Scalar> fd = sol.a + Scalar(2) * sol.b;
  const Rational<Scalar> fxi = compose_mobius(Rational<Scalar>(fn, fd), xi0);
  Polynomial<Scalar> Sn = gamma * trim(fxi.num, Scalar(1e-12));
  const Polynomial<Scalar> Sd = trim(fxi.den, Scalar(1e-12));
  for (const auto& xij : cross_xis) Sn = hdetail::divide_blaschke(Sn, xij);
  const Rational<Scalar> Q = substitute_xi_inverse(Rational<Scalar>(Sn, Sd));
  return simplify(monic(Q));
}

// H = (Q - 1)/(Q F) with the structural cancellations taken by exact
// deflation: (z - zeta) divides Qn - Qd for every non-minimum-phase zero zeta
// of F, and (z - pi) divides Qn for every unstable pole pi.  Leading
// coefficients of F's numerator and denominator ride along with the deflated
// factors.
template <typename Scalar>
Rational<Scalar> h_from_q(const Rational<Scalar>& Q, const Rational<Scalar>& F_in,
                          const std::vector<std::complex<Scalar>>& zetas,
                          const std::vector<std::complex<Scalar>>& pis) {
  const Rational<Scalar> F = simplify(F_in);
  const Polynomial<Scalar> diff = trim(Q.num - Q.den);
  if (diff.is_zero()) return Rational<Scalar>{};  // Q = 1: no feedback needed
  const Polynomial<Scalar> hn =
      hdetail::deflate_all(diff, zetas) *
      (pis.empty() ? F.den : hdetail::deflate_all(F.den, pis));
  const Polynomial<Scalar> hd =
      (pis.empty() ? Q.num : hdetail::deflate_all(Q.num, pis)) *
      (zetas.empty() ? F.num : hdetail::deflate_all(F.num, zetas));
  return simplify(Rational<Scalar>(hn, hd));
}

// ---------------------------------------------------------------------------
// top-level synthesis
// ---------------------------------------------------------------------------

template <typename Scalar>
struct ChannelSynthesis {
  Rational<Scalar> Q;  // sensitivity-like function, 1/(1 - F H)
  Rational<Scalar> H;  // stabilizing feedback
  bool feedback_needed = false;
  Scalar sup_Q = Scalar(0);  // max |Q| over a dense circle sample
};

template <typename Scalar>
struct DiagonalSynthesis {
  std::vector<ChannelSynthesis<Scalar>> channels;
  RationalMatrix<Scalar> Q;  // diagonal
  RationalMatrix<Scalar> H;  // diagonal
  Scalar xi0 = Scalar(0);
  Scalar gamma = Scalar(0);
};

namespace hdetail {

template <typename Scalar>
Scalar circle_sup(const Rational<Scalar>& r, int npts = 2001) {
  const Scalar pi = Scalar(3.141592653589793238462643383279502884L);
  Scalar sup(0);
  for (int k = 0; k < npts; ++k) {
    const std::complex<Scalar> z = std::polar(Scalar(1), Scalar(2) * pi * k / Scalar(npts));
    sup = std::max(sup, std::abs(reval(r, z)));
  }
  return sup;
}

// Blaschke product over the cross nodes evaluated at xi (all factors
// (xi_j - xi)/(1 - xi_j xi), conjugate partners included implicitly).
template <typename Scalar>
std::complex<Scalar> cross_blaschke_at(const std::vector<std::complex<Scalar>>& cross,
                                       const std::complex<Scalar>& xi) {
  std::complex<Scalar> prod(1, 0);
  for (const auto& xj : cross) {
    prod *= (xj - xi) / (Scalar(1) - xj * xi);
    if (std::abs(xj.imag()) > Scalar(1e-12))
      prod *= (std::conj(xj) - xi) / (Scalar(1) - std::conj(xj) * xi);
  }
  return prod;
}

}  // namespace hdetail

// Synthesize a stabilizing diagonal feedback for a diagonal family of channel
// transfer functions.  sigma != 0 is admitted only in the scalar two-node
// (one unstable pole, one non-minimum-phase zero) configuration.
template <typename Scalar>
DiagonalSynthesis<Scalar> synthesize_diagonal(const std::vector<Rational<Scalar>>& channels,
                                              Scalar gamma, Scalar sigma = Scalar(0),
                                              int tries = 80, std::uint64_t seed = 1) {
  const std::size_t nch = channels.size();
  const InterpolationData<Scalar> data = interpolation_data(channels, gamma);
  const Scalar xi0 = recentring_point(data);

  DiagonalSynthesis<Scalar> out;
  out.xi0 = xi0;
  out.gamma = gamma;
  out.channels.resize(nch);
  out.Q = RationalMatrix<Scalar>::Identity(static_cast<Eigen::Index>(nch));
  out.H = RationalMatrix<Scalar>::Zero(static_cast<Eigen::Index>(nch),
                                       static_cast<Eigen::Index>(nch));

  const bool two_node_scalar_case =
      nch == 1 && data.nodes.size() == 2 &&
      data.nodes[0].kind != NodeKind::at_infinity &&
      data.nodes[1].kind != NodeKind::at_infinity &&
      std::abs(data.nodes[0].xi.imag()) < Scalar(1e-12) &&
      std::abs(data.nodes[1].xi.imag()) < Scalar(1e-12) &&
      data.nodes[0].kind != data.nodes[1].kind;
  if (sigma != Scalar(0) && !two_node_scalar_case)
    throw SynthesisFailure("sigma is supported only for the scalar two-node configuration");

  for (std::size_t ch = 0; ch < nch; ++ch) {
    ChannelSynthesis<Scalar>& chan = out.channels[ch];
    chan.Q = Rational<Scalar>::constant(Scalar(1));
    chan.H = Rational<Scalar>{};
    if (!data.needs_feedback[ch]) {
      out.Q(static_cast<Eigen::Index>(ch), static_cast<Eigen::Index>(ch)) = chan.Q;
      chan.sup_Q = Scalar(1);
      continue;
    }
    chan.feedback_needed = true;
    const Rational<Scalar> F = simplify(channels[ch]);

    // node bookkeeping for this channel
    std::vector<std::complex<Scalar>> own_xis, cross_xis, zetas, pis;
    bool all_zero_values = true;
    for (Eigen::Index k : data.own[ch]) {
      const auto& nd = data.nodes[static_cast<std::size_t>(k)];
      own_xis.push_back(nd.xi);
      if (nd.kind == NodeKind::unstable_pole) pis.push_back(Scalar(1) / nd.xi);
      if (nd.kind == NodeKind::nmp_zero) {
        zetas.push_back(Scalar(1) / nd.xi);
        all_zero_values = false;
      }
      if (nd.kind == NodeKind::at_infinity &&
          F.den.degree() > F.num.degree())
        all_zero_values = false;  // strictly proper: nonzero value at xi = 0
    }
    for (Eigen::Index k : data.cross[ch])
      cross_xis.push_back(data.nodes[static_cast<std::size_t>(k)].xi);

    if (all_zero_values) {
      // all-pass shortcut: Q = prod (z - pi)/(z - 1/pi), normalized at infinity
      std::vector<std::complex<Scalar>> qn_roots, qd_roots;
      Scalar hinf_norm(1);
      for (const auto& piv : pis) {
        qn_roots.push_back(piv);
        qd_roots.push_back(Scalar(1) / piv);
        hinf_norm *= std::abs(piv);
        if (std::abs(piv.imag()) > Scalar(1e-12)) {
          qn_roots.push_back(std::conj(piv));
          qd_roots.push_back(Scalar(1) / std::conj(piv));
          hinf_norm *= std::abs(piv);
        }
      }
      if (gamma * (Scalar(1) + Scalar(1e-6)) < hinf_norm)
        throw SynthesisFailure("gamma below the all-pass norm of the pole pattern");
      chan.Q = Rational<Scalar>(from_roots(qn_roots, Scalar(1)), from_roots(qd_roots, Scalar(1)));
      chan.H = h_from_q(chan.Q, F, zetas, pis);
    } else {
      // joint node set: own nodes plus every other channel's nodes
      std::vector<std::complex<Scalar>> xis = own_xis;
      xis.insert(xis.end(), cross_xis.begin(), cross_xis.end());
      std::vector<std::complex<Scalar>> zs, fvals;
      for (const auto& xi : xis) zs.push_back(mobius_recentre(xi, xi0));
      for (std::size_t i = 0; i < xis.size(); ++i) {
        std::complex<Scalar> v(0, 0);
        if (i < own_xis.size()) {
          const auto& nd = data.nodes[static_cast<std::size_t>(data.own[ch][i])];
          if (nd.kind == NodeKind::nmp_zero ||
              (nd.kind == NodeKind::at_infinity && F.den.degree() > F.num.degree()))
            v = hdetail::cross_blaschke_at(cross_xis, nd.xi) / gamma;
        }
        fvals.push_back(v);
      }
      CentralSolution<Scalar> sol;
      if (sigma != Scalar(0)) {
        // two-node closed form: recentred zero node and Schur value 1/gamma
        const Scalar z1 = (data.nodes[0].kind == NodeKind::nmp_zero ? zs[0] : zs[1]).real();
        sol = two_node_closed_form(z1, gamma, sigma);
      } else {
        std::vector<std::complex<Scalar>> ws;
        for (const auto& v : fvals) ws.push_back(schur_to_caratheodory(v));
        sol = central_solution(zs, ws, tries, seed);
      }
      chan.Q = q_from_phi(sol, xi0, gamma, cross_xis);
      chan.H = h_from_q(chan.Q, F, zetas, pis);
    }

    // final certificates for the channel
    chan.sup_Q = hdetail::circle_sup(chan.Q);
    if (sigma == Scalar(0) && chan.sup_Q > gamma * (Scalar(1) + Scalar(1e-6)))
      throw SynthesisFailure("synthesized Q violates the gamma bound");
    if (!chan.Q.den.is_zero() && chan.Q.den.degree() >= 1)
      for (const auto& root : roots(chan.Q.den))
        if (std::abs(root) >= Scalar(1) - Scalar(1e-8))
          throw SynthesisFailure("synthesized Q is not strictly stable");
    if (!chan.H.num.is_zero()) {
      if (chan.H.num.degree() > chan.H.den.degree())
        throw SynthesisFailure("synthesized H is improper");
      if (chan.H.den.degree() >= 1)
        for (const auto& root : roots(chan.H.den))
          if (std::abs(root) >= Scalar(1) - Scalar(1e-8))
            throw SynthesisFailure("synthesized H is not strictly stable");
    }
    out.Q(static_cast<Eigen::Index>(ch), static_cast<Eigen::Index>(ch)) = chan.Q;
    out.H(static_cast<Eigen::Index>(ch), static_cast<Eigen::Index>(ch)) = chan.H;
  }
  return out;
}

}  // namespace lowrank

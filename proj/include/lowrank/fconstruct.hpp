#pragma once

// Construction of the deterministic transfer function F(z) = [F0 F1] that maps
// the full-rank sub-process u = (u0, u1) onto the residual channels y, for a
// spectral factor with normalized D.  Covers the general case, the two
// degenerate cases (D = 0 and D of full column rank), the search over all
// admissible channel partitions with grid-level deduplication, and the
// causality classification of each candidate.

#include "lowrank/ratcore.hpp"
#include "lowrank/ssreal.hpp"

namespace lowrank {

template <typename Scalar>
struct FResult {
  std::size_t ordering_index = 0;  // position in the admissible enumeration
  Partition<Scalar> partition;
  Gammas<Scalar> gam;
  StateSpace<Scalar> realization;  // joint realization of [F0 F1]
  RationalMatrix<Scalar> F;        // (p - m) x m
  MinimalRealization<Scalar> minimal;
  std::vector<std::complex<Scalar>> poles;  // eigenvalues of the minimal A
  bool strictly_stable = true;
};

// Joint realization of F = [F0 F1]:
//   F0(z) = C2 (zI - Gamma1)^{-1} P1 B0 Sigma^{-1}
//   F1(z) = C2 Gamma1 (zI - Gamma1)^{-1} B1 (C1 B1)^{-1} + C2 B1 (C1 B1)^{-1}
// which share the state matrix Gamma1:
//   A = Gamma1, B = [P1 B0 Sigma^{-1} | Gamma1 Bt1], C = C2, D = [0 | C2 Bt1]
// with Bt1 = B1 (C1 B1)^{-1}.
template <typename Scalar>
FResult<Scalar> build_F(const NormalizedFactor<Scalar>& nf, const Partition<Scalar>& part,
                        Scalar stab_margin = Scalar(1e-10)) {
  const StateSpace<Scalar>& sys = nf.sys;
  const Eigen::Index n = sys.n(), m = sys.m(), rho = nf.rho;
  const Eigen::Index k = m - rho;
  const Eigen::Index py = static_cast<Eigen::Index>(part.y_rows.size());

  FResult<Scalar> out;
  out.partition = part;
  out.gam = gammas(sys, nf, part);

  MatX<Scalar> Bjoint(n, m), Djoint = MatX<Scalar>::Zero(py, m);
  if (rho > 0) {
    const MatX<Scalar> SigInv = nf.sigma.cwiseInverse().asDiagonal();
    Bjoint.leftCols(rho) = out.gam.P1 * (sys.B.leftCols(rho) * SigInv);
  }
  if (k > 0) {
    const MatX<Scalar> Bt1 =
        (part.C1B1.transpose().fullPivLu().solve(sys.B.rightCols(k).transpose())).transpose();
    Bjoint.rightCols(k) = out.gam.Gamma1 * Bt1;
    Djoint.rightCols(k) = part.C2 * Bt1;
  }
  out.realization = StateSpace<Scalar>{out.gam.Gamma1, Bjoint, part.C2, Djoint};
  out.F = transfer_function(out.realization);
  out.minimal = minimal_realization(out.realization);
  out.poles = eigenvalues(out.minimal.sys.A);
  out.strictly_stable = is_strictly_stable(out.minimal.sys.A, stab_margin);
  return out;
}

// D = 0 degenerate form: F(z) = z C2 (zI - Gamma1)^{-1} B (C1 B)^{-1}; when
// m = n this collapses to the constant C2 C1^{-1}.
template <typename Scalar>
RationalMatrix<Scalar> build_F_D_zero(const NormalizedFactor<Scalar>& nf,
                                      const Partition<Scalar>& part) {
  const StateSpace<Scalar>& sys = nf.sys;
  if (nf.rho != 0) throw ContractViolation("build_F_D_zero requires rho = 0");
  const Eigen::Index n = sys.n(), m = sys.m();
  if (!part.admissible) throw InadmissiblePartition{};
  if (m == n) {
    const MatX<Scalar> C2C1inv =
        part.C1.transpose().fullPivLu().solve(part.C2.transpose()).transpose();
    return RationalMatrix<Scalar>::from_constant(C2C1inv);
  }
  const Gammas<Scalar> g = gammas(sys, nf, part);
  const MatX<Scalar> Bt =
      (part.C1B1.transpose().fullPivLu().solve(sys.B.transpose())).transpose();
  const StateSpace<Scalar> proper{g.Gamma1, Bt, part.C2,
                                  MatX<Scalar>::Zero(part.C2.rows(), m)};
  RationalMatrix<Scalar> G = transfer_function(proper);
  const Polynomial<Scalar> zpoly{Scalar(0), Scalar(1)};
  for (auto& r : G.e) r = simplify(Rational<Scalar>(zpoly * r.num, r.den));
  return G;
}

// Full-column-rank D degenerate form: F(z) = C2 (zI - Gamma0)^{-1} B Sigma^{-1}.
template <typename Scalar>
RationalMatrix<Scalar> build_F_D_fullrank(const NormalizedFactor<Scalar>& nf,
                                          const Partition<Scalar>& part) {
  const StateSpace<Scalar>& sys = nf.sys;
  if (nf.rho != sys.m()) throw ContractViolation("build_F_D_fullrank requires rho = m");
  const Gammas<Scalar> g = gammas(sys, nf, part);
  const MatX<Scalar> SigInv = nf.sigma.cwiseInverse().asDiagonal();
  return transfer_function(
      StateSpace<Scalar>{g.Gamma0, sys.B * SigInv, part.C2,
                         MatX<Scalar>::Zero(part.C2.rows(), sys.m())});
}

// z-domain form of F1 (retained as an independent cross-check of the joint
// realization): F1(z) = z C2 (zI - Gamma1)^{-1} B1 (C1 B1)^{-1}.
template <typename Scalar>
RationalMatrix<Scalar> build_F1_zform(const NormalizedFactor<Scalar>& nf,
                                      const Partition<Scalar>& part) {
  const StateSpace<Scalar>& sys = nf.sys;
  const Eigen::Index k = sys.m() - nf.rho;
  if (k == 0) return RationalMatrix<Scalar>(part.C2.rows(), 0);
  const Gammas<Scalar> g = gammas(sys, nf, part);
  const MatX<Scalar> Bt1 =
      (part.C1B1.transpose().fullPivLu().solve(sys.B.rightCols(k).transpose())).transpose();
  RationalMatrix<Scalar> G = transfer_function(
      StateSpace<Scalar>{g.Gamma1, Bt1, part.C2, MatX<Scalar>::Zero(part.C2.rows(), k)});
  const Polynomial<Scalar> zpoly{Scalar(0), Scalar(1)};
  for (auto& r : G.e) r = simplify(Rational<Scalar>(zpoly * r.num, r.den));
  return G;
}

// The Schur-complement admissibility certificate: S(z) = C1 (zI - Gamma0)^{-1} B1
// must have det S not identically zero.  Checked on the evaluation grid.
template <typename Scalar>
bool schur_det_nonzero(const NormalizedFactor<Scalar>& nf, const Partition<Scalar>& part,
                       const UnitCircleGrid<Scalar>& grid, Scalar tol = Scalar(1e-10)) {
  const StateSpace<Scalar>& sys = nf.sys;
  const Eigen::Index k = sys.m() - nf.rho;
  if (k == 0) return true;
  const Gammas<Scalar> g = gammas(sys, nf, part);
  const MatX<Scalar> B1 = sys.B.rightCols(k);
  Scalar best(0);
  for (const auto& z : grid.points) {
    const CMatX<Scalar> R =
        (z * CMatX<Scalar>::Identity(sys.n(), sys.n()) - g.Gamma0.template cast<std::complex<Scalar>>())
            .fullPivLu()
            .solve(B1.template cast<std::complex<Scalar>>());
    const std::complex<Scalar> det = (part.C1.template cast<std::complex<Scalar>>() * R).determinant();
    best = std::max(best, std::abs(det));
  }
  return best > tol;
}

// ---------------------------------------------------------------------------
// search over admissible partitions
// ---------------------------------------------------------------------------

template <typename Scalar>
struct SearchResult {
  std::vector<FResult<Scalar>> candidates;   // one per admissible ordering
  std::vector<std::size_t> unique_indices;   // grid-deduplicated representatives
  bool any_stable = false;
  bool vacuous = false;                      // p == m: no residual channels
};

template <typename Scalar>
SearchResult<Scalar> search_stable_F(const NormalizedFactor<Scalar>& nf,
                                     const UnitCircleGrid<Scalar>& grid,
                                     Scalar dedup_tol = Scalar(1e-8),
                                     Scalar tol = Scalar(1e-9)) {
  SearchResult<Scalar> out;
  const StateSpace<Scalar>& sys = nf.sys;
  if (sys.p() == sys.m()) {
    out.vacuous = true;
    out.any_stable = true;  // the empty residual relation is trivially stable
    return out;
  }
  std::size_t idx = 0;
  for (const auto& part : partitions_with_nonsingular_C1B1(sys, nf.rho, tol)) {
    FResult<Scalar> fr = build_F(nf, part);
    fr.ordering_index = idx++;
    out.any_stable = out.any_stable || fr.strictly_stable;
    bool duplicate = false;
    for (std::size_t u : out.unique_indices) {
      const auto rep = rm_equal_on_grid(fr.F, out.candidates[u].F, grid, dedup_tol);
      if (rep.equal) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) out.unique_indices.push_back(out.candidates.size());
    out.candidates.push_back(std::move(fr));
  }
  return out;
}

// ---------------------------------------------------------------------------
// causality classification
// ---------------------------------------------------------------------------

enum class Causality {
  stable_causal,              // F strictly stable: y = F(z) u is a causal map
  unstable_requires_feedback  // F unstable: realizable only inside a stabilized loop
};

template <typename Scalar>
Causality classify_causality(const FResult<Scalar>& f) {
  return f.strictly_stable ? Causality::stable_causal : Causality::unstable_requires_feedback;
}

// Variant that also checks the proposed feedback: an unstable F paired with an
// identically zero H cannot be realized, which is a contract violation.
template <typename Scalar>
Causality classify_causality(const FResult<Scalar>& f, const RationalMatrix<Scalar>& H,
                             Scalar w_sup, const UnitCircleGrid<Scalar>& grid) {
  if (f.strictly_stable) return Causality::stable_causal;
  const Scalar hsup = rm_grid_sup(H, grid);
  if (hsup <= Scalar(1e-10) * (Scalar(1) + w_sup))
    throw ContractViolation("unstable F cannot be realized with zero feedback");
  return Causality::unstable_requires_feedback;
}

}  // namespace lowrank

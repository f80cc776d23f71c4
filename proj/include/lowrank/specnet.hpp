#pragma once

// Spectral-density algebra and the two system-theoretic decompositions built
// on top of F and H: the closed-loop operator T, the sparse network model
// (M, N), and the dynamic factor-analysis model with factor loading Wu.

#include <limits>

#include "lowrank/fconstruct.hpp"
#include "lowrank/ratcore.hpp"
#include "lowrank/ssreal.hpp"

namespace lowrank {

struct RankDeficientU : Error {
  explicit RankDeficientU(const std::string& m = "spectral density of u is rank deficient")
      : Error(m) {}
};
struct AlgebraicLoopSingular : Error {
  explicit AlgebraicLoopSingular(const std::string& m = "I - HF is singular as a rational matrix")
      : Error(m) {}
};

// Phi(z) = W(z) W(1/z)^T, kept exact as a rational matrix (never grid-only).
template <typename Scalar>
RationalMatrix<Scalar> spectral_density(const RationalMatrix<Scalar>& W) {
  return W * rm_para(W);
}

template <typename Scalar>
RationalMatrix<Scalar> spectral_density(const StateSpace<Scalar>& ss) {
  return spectral_density(transfer_function(ss));
}

// Para-Hermitian residual sup |Phi(z) - Phi(1/z)^T| over the grid.
template <typename Scalar>
Scalar para_hermitian_residual(const RationalMatrix<Scalar>& Phi,
                               const UnitCircleGrid<Scalar>& grid) {
  Scalar worst(0);
  const RationalMatrix<Scalar> Pt = rm_para(Phi);
  for (const auto& z : grid.points)
    worst = std::max(worst, (Phi.eval(z) - Pt.eval(z)).cwiseAbs().maxCoeff());
  return worst;
}

// Recover F symbolically from a permuted spectral density with the u-block
// leading: F = Phi_yu * Phi_u^{-1}.  Throws RankDeficientU when Phi_u has an
// identically vanishing determinant.
template <typename Scalar>
RationalMatrix<Scalar> f_from_spectra(const RationalMatrix<Scalar>& Phi, Eigen::Index m) {
  if (Phi.rows() != Phi.cols() || m <= 0 || m > Phi.rows()) throw DimensionMismatch{};
  const Eigen::Index p = Phi.rows();
  const RationalMatrix<Scalar> Phi_u = rm_block(Phi, 0, 0, m, m);
  const RationalMatrix<Scalar> Phi_yu = rm_block(Phi, m, 0, p - m, m);
  RationalMatrix<Scalar> Phi_u_inv;
  try {
    Phi_u_inv = rm_inverse(Phi_u);
  } catch (const SingularMatrix&) {
    throw RankDeficientU{};
  }
  return Phi_yu * Phi_u_inv;
}

// ---------------------------------------------------------------------------
// closed loop
// ---------------------------------------------------------------------------

template <typename Scalar>
struct ClosedLoop {
  RationalMatrix<Scalar> P;  // (I - HF)^{-1},  m x m
  RationalMatrix<Scalar> Q;  // (I - FH)^{-1},  (p-m) x (p-m)
  RationalMatrix<Scalar> T;  // [[P, PH], [QF, Q]]
  bool internally_stable = false;
  Scalar max_pole_radius = Scalar(0);
  Scalar identity_residual = Scalar(0);  // worst grid defect of the defining identities
};

namespace detail {

// A denominator root that fails the pairing stage is only a pole if the
// rational actually grows when approached: |r| sampled on a tight ring around
// the root must dominate |r| on a wider ring.  Imperfectly cancelled common
// factors (clusters of equal multiplicity split by coefficient noise) leave
// the value locally bounded and fail this ratio test.
template <typename Scalar>
bool growth_certifies_pole(const Rational<Scalar>& r, const std::complex<Scalar>& d) {
  const Scalar scale = std::max(Scalar(1), std::abs(d));
  const std::complex<Scalar> dirs[4] = {{Scalar(1), Scalar(0)},
                                        {Scalar(-1), Scalar(0)},
                                        {Scalar(0), Scalar(1)},
                                        {Scalar(0), Scalar(-1)}};
  Scalar near_min = std::numeric_limits<Scalar>::infinity();
  Scalar far_max = Scalar(0);
  for (const auto& u : dirs) {
    near_min = std::min(near_min, std::abs(reval(r, d + u * (Scalar(1e-3) * scale))));
    far_max = std::max(far_max, std::abs(reval(r, d + u * (Scalar(3e-2) * scale))));
  }
  return near_min > Scalar(6) * (far_max + std::numeric_limits<Scalar>::min());
}

// Largest pole radius over all entries.  Entries produced by high-degree
// matrix inversion carry exact common factors whose extracted roots split by
// more than the simplify cancellation band, so a denominator root closely
// shadowed by an unused numerator root is treated as an imperfectly cancelled
// common factor rather than a pole; roots of clusters that split too far for
// pairing are settled by the local growth certificate.
template <typename Scalar>
Scalar max_pole_radius_of(const RationalMatrix<Scalar>& M, Scalar shadow_tol = Scalar(1e-5)) {
  Scalar worst(0);
  for (const auto& r : M.e) {
    const Rational<Scalar> s = simplify(r);
    if (s.num.is_zero() || s.den.degree() < 1) continue;
    const auto dr = roots(s.den);
    const auto nr = roots_or_empty(s.num);
    std::vector<bool> used(nr.size(), false);
    for (const auto& d : dr) {
      Scalar best = shadow_tol * std::max(Scalar(1), std::abs(d));
      std::ptrdiff_t match = -1;
      for (std::size_t j = 0; j < nr.size(); ++j) {
        if (used[j]) continue;
        const Scalar dist = std::abs(nr[j] - d);
        if (dist <= best) {
          best = dist;
          match = static_cast<std::ptrdiff_t>(j);
        }
      }
      if (match >= 0) {
        used[static_cast<std::size_t>(match)] = true;
        continue;
      }
      if (growth_certifies_pole(s, d)) worst = std::max(worst, std::abs(d));
    }
  }
  return worst;
}

}  // namespace detail

// Build T = [[P, PH], [QF, Q]] from F ((p-m) x m) and H (m x (p-m)), verify the
// defining identities on the grid, and decide internal stability by the pole
// radii of all four blocks.
template <typename Scalar>
ClosedLoop<Scalar> closed_loop(const RationalMatrix<Scalar>& F, const RationalMatrix<Scalar>& H,
                               const UnitCircleGrid<Scalar>& grid,
                               Scalar stab_margin = Scalar(1e-9)) {
  if (F.cols() != H.rows() || F.rows() != H.cols()) throw DimensionMismatch{};
  const Eigen::Index m = F.cols(), q = F.rows();
  const RationalMatrix<Scalar> Im = RationalMatrix<Scalar>::Identity(m);
  const RationalMatrix<Scalar> Iq = RationalMatrix<Scalar>::Identity(q);
  ClosedLoop<Scalar> out;
  try {
    out.P = rm_inverse(Im - H * F);
    out.Q = rm_inverse(Iq - F * H);
  } catch (const SingularMatrix&) {
    throw AlgebraicLoopSingular{};
  }
  const RationalMatrix<Scalar> PH = rm_simplify(out.P * H);
  const RationalMatrix<Scalar> QF = rm_simplify(out.Q * F);
  out.T = rm_vcat(rm_hcat(out.P, PH), rm_hcat(QF, out.Q));

  // defining identities: P (I - HF) = I and Q (I - FH) = I
  Scalar resid(0);
  const RationalMatrix<Scalar> lhs1 = out.P * (Im - H * F);
  const RationalMatrix<Scalar> lhs2 = out.Q * (Iq - F * H);
  resid = std::max(rm_equal_on_grid(lhs1, Im, grid, Scalar(1e-9)).max_dev,
                   rm_equal_on_grid(lhs2, Iq, grid, Scalar(1e-9)).max_dev);
  out.identity_residual = resid;

  out.max_pole_radius = std::max(
      std::max(detail::max_pole_radius_of(out.P), detail::max_pole_radius_of(out.Q)),
      std::max(detail::max_pole_radius_of(PH), detail::max_pole_radius_of(QF)));
  out.internally_stable = out.max_pole_radius < Scalar(1) - stab_margin;
  return out;
}

// ---------------------------------------------------------------------------
// network model
// ---------------------------------------------------------------------------

template <typename Scalar>
struct NetworkModel {
  RationalMatrix<Scalar> M;  // p x p internal transfer matrix [[0, H], [F, 0]]
  RationalMatrix<Scalar> N;  // p x m noise loading [K; 0]
  std::vector<std::pair<Eigen::Index, Eigen::Index>> edges;  // (to, from), M_ij != 0
  Scalar resolvent_residual = Scalar(0);  // grid defect of (I - M)^{-1} = T
};

template <typename Scalar>
NetworkModel<Scalar> network_model(const RationalMatrix<Scalar>& F,
                                   const RationalMatrix<Scalar>& H,
                                   const RationalMatrix<Scalar>& K,
                                   const UnitCircleGrid<Scalar>& grid,
                                   const RationalMatrix<Scalar>* T_expected = nullptr,
                                   Scalar edge_tol = Scalar(1e-10)) {
  const Eigen::Index m = F.cols(), q = F.rows(), p = m + q;
  if (H.rows() != m || H.cols() != q || K.rows() != m) throw DimensionMismatch{};
  NetworkModel<Scalar> out;
  out.M = RationalMatrix<Scalar>::Zero(p, p);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < q; ++j) out.M(i, m + j) = H(i, j);
  for (Eigen::Index i = 0; i < q; ++i)
    for (Eigen::Index j = 0; j < m; ++j) out.M(m + i, j) = F(i, j);
  out.N = rm_vcat(K, RationalMatrix<Scalar>::Zero(q, K.cols()));

  const Scalar scale = Scalar(1) + rm_grid_sup(out.M, grid);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j) {
      RationalMatrix<Scalar> entry(1, 1);
      entry(0, 0) = out.M(i, j);
      if (rm_grid_sup(entry, grid) > edge_tol * scale) out.edges.emplace_back(i, j);
    }

  if (T_expected) {
    const RationalMatrix<Scalar> R =
        rm_inverse(RationalMatrix<Scalar>::Identity(p) - out.M);
    out.resolvent_residual = rm_equal_on_grid(R, *T_expected, grid, Scalar(1e-8)).max_dev;
  }
  return out;
}

// ---------------------------------------------------------------------------
// factor-analysis model
// ---------------------------------------------------------------------------

template <typename Scalar>
struct FactorModel {
  RationalMatrix<Scalar> Wu;  // m x m factor loading: the u-rows of W
  RationalMatrix<Scalar> K;   // noise shaping for the network model
  Scalar stacking_residual = Scalar(0);  // grid defect of W_perm = [Wu; F Wu]
};

// Wu = C_u (zI - A)^{-1} B + D_u with C_u the u-rows of the normalized C and
// D_u = [[Sigma, 0], [0, 0]] (so for D = 0 this is just C1 (zI - A)^{-1} B).
// K defaults to P^{-1} Wu = (I - HF) Wu when feedback is present, else Wu.
template <typename Scalar>
FactorModel<Scalar> factor_model(const NormalizedFactor<Scalar>& nf,
                                 const Partition<Scalar>& part,
                                 const RationalMatrix<Scalar>& F,
                                 const RationalMatrix<Scalar>* H,
                                 const UnitCircleGrid<Scalar>& grid) {
  const StateSpace<Scalar>& sys = nf.sys;
  const Eigen::Index n = sys.n(), m = sys.m(), rho = nf.rho;
  const Eigen::Index k = m - rho;

  MatX<Scalar> Cu(m, n);
  Cu.topRows(rho) = part.C0;
  Cu.bottomRows(k) = part.C1;
  MatX<Scalar> Du = MatX<Scalar>::Zero(m, m);
  for (Eigen::Index j = 0; j < rho; ++j) Du(j, j) = nf.sigma[j];

  FactorModel<Scalar> out;
  out.Wu = transfer_function(StateSpace<Scalar>{sys.A, sys.B, Cu, Du});

  if (H) {
    const RationalMatrix<Scalar> Pinv =
        RationalMatrix<Scalar>::Identity(m) - (*H) * F;  // P^{-1} = I - HF exactly
    out.K = rm_simplify(Pinv * out.Wu);
  } else {
    out.K = out.Wu;
  }

  // stacking check: the permuted W must equal [Wu; F Wu]
  const RationalMatrix<Scalar> W = transfer_function(sys);
  RationalMatrix<Scalar> W_perm(sys.p(), m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < rho; ++i) W_perm(i, j) = W(i, j);
    for (Eigen::Index i = 0; i < k; ++i)
      W_perm(rho + i, j) = W(part.u1_rows[static_cast<std::size_t>(i)], j);
    for (std::size_t i = 0; i < part.y_rows.size(); ++i)
      W_perm(m + static_cast<Eigen::Index>(i), j) = W(part.y_rows[i], j);
  }
  const RationalMatrix<Scalar> stacked = rm_vcat(out.Wu, F * out.Wu);
  out.stacking_residual = rm_equal_on_grid(W_perm, stacked, grid, Scalar(1e-8)).max_dev;
  return out;
}

}  // namespace lowrank

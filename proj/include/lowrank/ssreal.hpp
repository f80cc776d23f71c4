#pragma once

// State-space realizations (A, B, C, D) of tall spectral factors and the
// structural operations on them: exact symbolic transfer functions, inversion,
// normalization of D into block-diagonal form, enumeration of admissible
// channel partitions, the feedback matrices Gamma0 / Gamma1, stability tests,
// and minimal realization by balanced truncation of the Hankel factors.

#include "lowrank/ratcore.hpp"

#include <Eigen/SVD>

#include <limits>
#include <numeric>
#include <vector>

namespace lowrank {

struct SingularD : Error {
  explicit SingularD(const std::string& m = "D is singular") : Error(m) {}
};
struct InfeasibleSplit : Error {
  explicit InfeasibleSplit(const std::string& m = "no admissible channel split exists")
      : Error(m) {}
};
struct InadmissiblePartition : Error {
  explicit InadmissiblePartition(const std::string& m = "C1*B1 is singular") : Error(m) {}
};

template <typename Scalar>
struct StateSpace {
  MatX<Scalar> A, B, C, D;

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  Eigen::Index p() const { return C.rows(); }
};

// ---------------------------------------------------------------------------
// transfer function via the Leverrier–Faddeev recursion (exact rational form)
// ---------------------------------------------------------------------------

// Characteristic polynomial of A and the adjugate expansion
// adj(zI - A) = sum_k M_k z^{n-1-k}; returns {charpoly, M_0..M_{n-1}}.
template <typename Scalar>
std::pair<Polynomial<Scalar>, std::vector<MatX<Scalar>>> faddeev(const MatX<Scalar>& A) {
  const Eigen::Index n = A.rows();
  Polynomial<Scalar> chi;
  chi.c = VecX<Scalar>::Zero(n + 1);
  chi.c[n] = Scalar(1);
  std::vector<MatX<Scalar>> M;
  M.reserve(static_cast<std::size_t>(n));
  MatX<Scalar> Mk = MatX<Scalar>::Identity(n, n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    M.push_back(Mk);
    const MatX<Scalar> AM = A * Mk;
    const Scalar ck = -AM.trace() / Scalar(k);
    chi.c[n - k] = ck;
    Mk = AM + ck * MatX<Scalar>::Identity(n, n);
  }
  return {chi, M};
}

template <typename Scalar>
RationalMatrix<Scalar> transfer_function(const StateSpace<Scalar>& ss,
                                         Scalar simplify_tol = Scalar(1e-7)) {
  const Eigen::Index n = ss.n(), p = ss.p(), m = ss.m();
  if (n == 0) return RationalMatrix<Scalar>::from_constant(ss.D);
  auto [chi, M] = faddeev(ss.A);
  RationalMatrix<Scalar> out(p, m);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      Polynomial<Scalar> num;
      num.c = VecX<Scalar>::Zero(n + 1);
      for (Eigen::Index k = 0; k < n; ++k)
        num.c[n - 1 - k] = ss.C.row(i) * M[static_cast<std::size_t>(k)] * ss.B.col(j);
      num = num + ss.D(i, j) * chi;
      out(i, j) = simplify(Rational<Scalar>(num, chi), simplify_tol);
    }
  return out;
}

// Realization of W(z)^{-1} for square W with invertible D.
template <typename Scalar>
StateSpace<Scalar> invert_square(const StateSpace<Scalar>& ss, Scalar tol = Scalar(1e-12)) {
  if (ss.p() != ss.m()) throw DimensionMismatch("invert_square: W not square");
  Eigen::FullPivLU<MatX<Scalar>> lu(ss.D);
  lu.setThreshold(tol);
  if (lu.rank() < ss.D.rows()) throw SingularD{};
  const MatX<Scalar> Dinv = lu.inverse();
  return StateSpace<Scalar>{ss.A - ss.B * Dinv * ss.C, ss.B * Dinv, -Dinv * ss.C, Dinv};
}

// ---------------------------------------------------------------------------
// normalization of D
// ---------------------------------------------------------------------------

template <typename Scalar>
struct NormalizedFactor {
  StateSpace<Scalar> sys;   // (A, B V^T, U C, U D V^T)
  MatX<Scalar> U;           // p x p orthogonal
  MatX<Scalar> V;           // m x m orthogonal; U D V^T = [[Sigma, 0], [0, 0]]
  VecX<Scalar> sigma;       // rho diagonal entries of Sigma (may be negative)
  Eigen::Index rho = 0;
};

namespace detail {

// Complete `cols` (orthonormal n-vectors) to an orthonormal basis; each added
// vector is normalized so that its entry of largest index with magnitude above
// threshold is positive ("last nonzero positive").
template <typename Scalar>
void kernel_complete_last_positive(std::vector<VecX<Scalar>>& cols, Eigen::Index n) {
  for (Eigen::Index cand = 0; cand < n && static_cast<Eigen::Index>(cols.size()) < n; ++cand) {
    VecX<Scalar> v = VecX<Scalar>::Unit(n, cand);
    for (const auto& u : cols) v -= u.dot(v) * u;
    // one re-orthogonalization pass for robustness
    for (const auto& u : cols) v -= u.dot(v) * u;
    const Scalar nv = v.norm();
    if (nv < Scalar(1e-8)) continue;
    v /= nv;
    for (Eigen::Index i = n - 1; i >= 0; --i)
      if (std::abs(v[i]) > Scalar(1e-10)) {
        if (v[i] < Scalar(0)) v = -v;
        break;
      }
    cols.push_back(v);
  }
  if (static_cast<Eigen::Index>(cols.size()) != n)
    throw ContractViolation("kernel completion failed");
}

template <typename Scalar>
void flip_first_nonzero_positive(Eigen::Ref<VecX<Scalar>> v, Scalar thresh) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (std::abs(v[i]) > thresh) {
      if (v[i] < Scalar(0)) v = -v;
      return;
    }
}

}  // namespace detail

// Orthogonal (U, V) with U D V^T = [[Sigma, 0], [0, 0]].  When the nonzero
// rows of D are a leading block of mutually orthogonal rows the construction
// keeps U = I and takes v_j = row_j^T / s_j with s_j = sign(first nonzero) *
// ||row_j|| — this reproduces the worked examples verbatim, including signed
// Sigma entries.  Otherwise a sign-fixed full SVD is used.
template <typename Scalar>
NormalizedFactor<Scalar> normalize_D(const StateSpace<Scalar>& ss,
                                     Scalar tol_rank = Scalar(1e-9)) {
  const Eigen::Index p = ss.p(), m = ss.m();
  const Scalar dscale = ss.D.size() ? ss.D.cwiseAbs().maxCoeff() : Scalar(0);
  const Scalar zero_row_tol = Scalar(1e-12) * std::max(Scalar(1), dscale);

  // classify rows, test for the verbatim path
  std::vector<Eigen::Index> nz;
  for (Eigen::Index i = 0; i < p; ++i)
    if (ss.D.row(i).cwiseAbs().maxCoeff() > zero_row_tol) nz.push_back(i);
  bool verbatim = true;
  for (std::size_t k = 0; k < nz.size(); ++k)
    if (nz[k] != static_cast<Eigen::Index>(k)) verbatim = false;  // must be a leading block
  if (static_cast<Eigen::Index>(nz.size()) > m) verbatim = false;
  if (verbatim)
    for (std::size_t a = 0; a < nz.size() && verbatim; ++a)
      for (std::size_t b = a + 1; b < nz.size(); ++b)
        if (std::abs(ss.D.row(nz[a]).dot(ss.D.row(nz[b]))) >
            Scalar(1e-10) * std::max(Scalar(1), dscale * dscale)) {
          verbatim = false;
          break;
        }

  NormalizedFactor<Scalar> out;
  if (verbatim) {
    const Eigen::Index r = static_cast<Eigen::Index>(nz.size());
    out.U = MatX<Scalar>::Identity(p, p);
    out.sigma = VecX<Scalar>::Zero(r);
    std::vector<VecX<Scalar>> vcols;
    for (Eigen::Index j = 0; j < r; ++j) {
      const VecX<Scalar> row = ss.D.row(j).transpose();
      Scalar s = row.norm();
      for (Eigen::Index i = 0; i < m; ++i)
        if (std::abs(row[i]) > zero_row_tol) {
          if (row[i] < Scalar(0)) s = -s;
          break;
        }
      out.sigma[j] = s;
      vcols.push_back(row / s);
    }
    detail::kernel_complete_last_positive(vcols, m);
    MatX<Scalar> Vn(m, m);
    for (Eigen::Index j = 0; j < m; ++j) Vn.col(j) = vcols[static_cast<std::size_t>(j)];
    out.V = Vn.transpose();
  } else {
    Eigen::JacobiSVD<MatX<Scalar>> svd(ss.D, Eigen::ComputeFullU | Eigen::ComputeFullV);
    MatX<Scalar> u = svd.matrixU();        // p x p
    MatX<Scalar> v = svd.matrixV();        // m x m, D = u * S * v^T
    const VecX<Scalar> sv = svd.singularValues();
    const Scalar smax = sv.size() ? sv[0] : Scalar(0);
    Eigen::Index r = 0;
    while (r < sv.size() && sv[r] > tol_rank * smax && sv[r] > Scalar(0)) ++r;
    const Scalar thresh = Scalar(1e-10);
    for (Eigen::Index j = 0; j < r; ++j) {
      // make the first nonzero of v-column j (a row of V^T) positive; flip u too
      Eigen::Index i = 0;
      while (i < m && std::abs(v(i, j)) <= thresh) ++i;
      if (i < m && v(i, j) < Scalar(0)) {
        v.col(j) = -v.col(j);
        u.col(j) = -u.col(j);
      }
    }
    for (Eigen::Index j = r; j < m; ++j)
      detail::flip_first_nonzero_positive<Scalar>(v.col(j), thresh);
    for (Eigen::Index j = r; j < p; ++j)
      detail::flip_first_nonzero_positive<Scalar>(u.col(j), thresh);
    out.U = u.transpose();
    out.V = v.transpose();
    out.sigma = sv.head(r);
  }

  // effective rank under tol_rank (signed entries compare by magnitude)
  const Scalar smax = out.sigma.size() ? out.sigma.cwiseAbs().maxCoeff() : Scalar(0);
  Eigen::Index rho = 0;
  for (Eigen::Index j = 0; j < out.sigma.size(); ++j)
    if (std::abs(out.sigma[j]) > tol_rank * smax) ++rho;
  out.rho = rho;
  out.sigma.conservativeResize(rho);

  out.sys = StateSpace<Scalar>{ss.A, ss.B * out.V.transpose(), out.U * ss.C,
                               out.U * ss.D * out.V.transpose()};
  return out;
}

// ---------------------------------------------------------------------------
// channel partitions
// ---------------------------------------------------------------------------

template <typename Scalar>
struct Partition {
  std::vector<Eigen::Index> u1_rows;  // indices into the normalized output rows
  std::vector<Eigen::Index> y_rows;
  MatX<Scalar> C0, C1, C2;            // rho x n, (m-rho) x n, (p-m) x n
  MatX<Scalar> C1B1;                  // (m-rho) x (m-rho)
  Scalar c1b1_min_sv = Scalar(0);
  bool admissible = false;
};

// All channel splits of a normalized factor: the first rho outputs are pinned
// as u0; u1 is any size-(m-rho) subset of the remaining outputs, enumerated in
// lexicographic order of the sorted index tuple; y keeps the leftover outputs
// in their original order.  A split is admissible iff C1*B1 is nonsingular.
template <typename Scalar>
std::vector<Partition<Scalar>> enumerate_partitions(const StateSpace<Scalar>& sys,
                                                    Eigen::Index rho,
                                                    Scalar tol = Scalar(1e-9)) {
  const Eigen::Index p = sys.p(), m = sys.m(), n = sys.n();
  const Eigen::Index k = m - rho;  // size of u1
  if (k > p - rho || k > n) throw InfeasibleSplit{};
  const MatX<Scalar> B1 = sys.B.rightCols(k);

  std::vector<Partition<Scalar>> out;
  std::vector<Eigen::Index> pick(static_cast<std::size_t>(k));
  std::iota(pick.begin(), pick.end(), rho);
  auto emit = [&]() {
    Partition<Scalar> part;
    part.u1_rows = pick;
    for (Eigen::Index i = rho; i < p; ++i)
      if (std::find(pick.begin(), pick.end(), i) == pick.end()) part.y_rows.push_back(i);
    part.C0 = sys.C.topRows(rho);
    part.C1.resize(k, n);
    for (Eigen::Index i = 0; i < k; ++i) part.C1.row(i) = sys.C.row(pick[static_cast<std::size_t>(i)]);
    part.C2.resize(static_cast<Eigen::Index>(part.y_rows.size()), n);
    for (std::size_t i = 0; i < part.y_rows.size(); ++i)
      part.C2.row(static_cast<Eigen::Index>(i)) = sys.C.row(part.y_rows[i]);
    part.C1B1 = part.C1 * B1;
    if (k == 0) {
      part.admissible = true;
      part.c1b1_min_sv = std::numeric_limits<Scalar>::infinity();
    } else {
      Eigen::JacobiSVD<MatX<Scalar>> svd(part.C1B1);
      const Scalar mx = svd.singularValues()[0];
      const Scalar mn = svd.singularValues()[k - 1];
      part.c1b1_min_sv = mn;
      part.admissible = mx > Scalar(0) && mn > tol * mx;
    }
    out.push_back(std::move(part));
  };

  if (k == 0) {
    emit();
    return out;
  }
  // lexicographic combinations of {rho, ..., p-1} choose k
  while (true) {
    emit();
    Eigen::Index i = k - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == p - k + i) --i;
    if (i < 0) break;
    ++pick[static_cast<std::size_t>(i)];
    for (Eigen::Index j = i + 1; j < k; ++j)
      pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
  }
  return out;
}

template <typename Scalar>
std::vector<Partition<Scalar>> partitions_with_nonsingular_C1B1(const StateSpace<Scalar>& sys,
                                                               Eigen::Index rho,
                                                               Scalar tol = Scalar(1e-9)) {
  std::vector<Partition<Scalar>> keep;
  for (auto& part : enumerate_partitions(sys, rho, tol))
    if (part.admissible) keep.push_back(std::move(part));
  return keep;
}

// ---------------------------------------------------------------------------
// Gamma matrices and stability
// ---------------------------------------------------------------------------

template <typename Scalar>
struct Gammas {
  MatX<Scalar> Gamma0, Gamma1;
  MatX<Scalar> P1;  // I - B1 (C1 B1)^{-1} C1, the oblique projection used by Gamma1
};

template <typename Scalar>
Gammas<Scalar> gammas(const StateSpace<Scalar>& sys, const NormalizedFactor<Scalar>& nf,
                      const Partition<Scalar>& part) {
  const Eigen::Index n = sys.n(), m = sys.m(), rho = nf.rho;
  Gammas<Scalar> g;
  if (rho == 0) {
    g.Gamma0 = sys.A;
  } else {
    const MatX<Scalar> B0 = sys.B.leftCols(rho);
    const MatX<Scalar> SigInv = nf.sigma.cwiseInverse().asDiagonal();
    g.Gamma0 = sys.A - B0 * SigInv * part.C0;
  }
  const Eigen::Index k = m - rho;
  if (k == 0) {
    g.P1 = MatX<Scalar>::Identity(n, n);
    g.Gamma1 = g.Gamma0;
  } else {
    if (!part.admissible) throw InadmissiblePartition{};
    const MatX<Scalar> B1 = sys.B.rightCols(k);
    const MatX<Scalar> X = part.C1B1.fullPivLu().solve(part.C1);  // (C1B1)^{-1} C1
    const MatX<Scalar> M = B1 * X;
    // I - M suffers catastrophic cancellation when the oblique projection
    // collapses (k = n makes B1 (C1B1)^{-1} C1 the identity, so P1 and Gamma1
    // vanish identically); the leftover noise fabricates state dimensions and
    // spurious poles downstream.  Entries below the roundoff floor of the
    // subtraction are snapped to exact zero.
    const Scalar p1_noise = Scalar(100) * std::numeric_limits<Scalar>::epsilon() *
                            Scalar(n) *
                            std::max(Scalar(1), M.cwiseAbs().maxCoeff());
    g.P1 = MatX<Scalar>::Identity(n, n) - M;
    g.P1 = (g.P1.cwiseAbs().array() < p1_noise)
               .select(MatX<Scalar>::Zero(n, n), g.P1);
    g.Gamma1 = g.P1 * g.Gamma0;
  }
  return g;
}

template <typename Scalar>
Scalar spectral_radius(const MatX<Scalar>& M) {
  if (M.rows() == 0) return Scalar(0);
  Eigen::EigenSolver<MatX<Scalar>> es(M, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

template <typename Scalar>
bool is_strictly_stable(const MatX<Scalar>& M, Scalar margin = Scalar(1e-10)) {
  return spectral_radius(M) < Scalar(1) - margin;
}

template <typename Scalar>
std::vector<std::complex<Scalar>> eigenvalues(const MatX<Scalar>& M) {
  if (M.rows() == 0) return {};
  Eigen::EigenSolver<MatX<Scalar>> es(M, false);
  std::vector<std::complex<Scalar>> out(static_cast<std::size_t>(M.rows()));
  for (Eigen::Index i = 0; i < M.rows(); ++i) out[static_cast<std::size_t>(i)] = es.eigenvalues()[i];
  return out;
}

// ---------------------------------------------------------------------------
// minimal realization
// ---------------------------------------------------------------------------

template <typename Scalar>
struct MinimalRealization {
  StateSpace<Scalar> sys;
  Eigen::Index rank = 0;  // McMillan degree = rank of the Hankel product O*R
};

template <typename Scalar>
MatX<Scalar> observability_matrix(const MatX<Scalar>& A, const MatX<Scalar>& C) {
  const Eigen::Index n = A.rows(), p = C.rows();
  MatX<Scalar> O(p * n, n);
  MatX<Scalar> blk = C;
  for (Eigen::Index k = 0; k < n; ++k) {
    O.middleRows(k * p, p) = blk;
    blk = blk * A;
  }
  return O;
}

template <typename Scalar>
MatX<Scalar> reachability_matrix(const MatX<Scalar>& A, const MatX<Scalar>& B) {
  const Eigen::Index n = A.rows(), m = B.cols();
  MatX<Scalar> R(n, n * m);
  MatX<Scalar> blk = B;
  for (Eigen::Index k = 0; k < n; ++k) {
    R.middleCols(k * m, m) = blk;
    blk = A * blk;
  }
  return R;
}

// Balanced truncation of the exact factorization H = O * R: with the SVD
// H = U S V^T restricted to the numerical rank r,
//   A_hat = S^{-1/2} U^T (O A R) V S^{-1/2},  B_hat = S^{-1/2} U^T (O B),
//   C_hat = (C R) V S^{-1/2},                 D_hat = D.
template <typename Scalar>
MinimalRealization<Scalar> minimal_realization(const StateSpace<Scalar>& ss,
                                               Scalar tol = Scalar(1e-9)) {
  const Eigen::Index n = ss.n();
  if (n == 0) return {ss, 0};
  const MatX<Scalar> O = observability_matrix(ss.A, ss.C);
  const MatX<Scalar> R = reachability_matrix(ss.A, ss.B);
  Eigen::JacobiSVD<MatX<Scalar>> svd(O * R, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VecX<Scalar> sv = svd.singularValues();
  const Scalar smax = sv.size() ? sv[0] : Scalar(0);
  Eigen::Index r = 0;
  while (r < sv.size() && smax > Scalar(0) && sv[r] > tol * smax) ++r;
  if (r == 0)
    return {StateSpace<Scalar>{MatX<Scalar>::Zero(0, 0), MatX<Scalar>::Zero(0, ss.m()),
                               MatX<Scalar>::Zero(ss.p(), 0), ss.D},
            0};
  const MatX<Scalar> U = svd.matrixU().leftCols(r);
  const MatX<Scalar> V = svd.matrixV().leftCols(r);
  const VecX<Scalar> shalf = sv.head(r).cwiseSqrt();
  const MatX<Scalar> Li = shalf.cwiseInverse().asDiagonal() * U.transpose();  // S^-1/2 U^T
  const MatX<Scalar> Ri = V * MatX<Scalar>(shalf.cwiseInverse().asDiagonal());
  MinimalRealization<Scalar> out;
  out.rank = r;
  out.sys = StateSpace<Scalar>{Li * (O * ss.A * R) * Ri, Li * (O * ss.B),
                               (ss.C * R) * Ri, ss.D};
  return out;
}

}  // namespace lowrank

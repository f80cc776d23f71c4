#pragma once

// Polynomial / rational-function / rational-matrix arithmetic with
// numerically tolerant simplification.  Coefficients are stored in
// ascending power order (c[k] multiplies z^k); the zero polynomial is the
// empty coefficient vector.  All types are templated on the real scalar
// and use Eigen as the only math dependency.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <complex>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace lowrank {

template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using CVecX = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;
template <typename Scalar>
using CMatX = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};
struct ZeroPolynomial : Error {
  explicit ZeroPolynomial(const std::string& m = "zero polynomial") : Error(m) {}
};
struct ConstantPolynomial : Error {
  explicit ConstantPolynomial(const std::string& m = "constant polynomial") : Error(m) {}
};
struct SingularMatrix : Error {
  explicit SingularMatrix(const std::string& m = "singular rational matrix") : Error(m) {}
};
struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& m = "dimension mismatch") : Error(m) {}
};
struct ContractViolation : Error {
  explicit ContractViolation(const std::string& m = "contract violation") : Error(m) {}
};

// ---------------------------------------------------------------------------
// Polynomial
// ---------------------------------------------------------------------------

template <typename Scalar>
struct Polynomial {
  VecX<Scalar> c;  // ascending powers; empty <=> zero polynomial

  Polynomial() = default;
  explicit Polynomial(VecX<Scalar> coeffs) : c(std::move(coeffs)) {}
  Polynomial(std::initializer_list<Scalar> coeffs)
      : c(Eigen::Map<const VecX<Scalar>>(coeffs.begin(),
                                         static_cast<Eigen::Index>(coeffs.size()))) {}

  static Polynomial constant(Scalar v) {
    Polynomial p;
    p.c.resize(1);
    p.c[0] = v;
    return p;
  }

  bool is_zero() const { return c.size() == 0; }
  Eigen::Index degree() const { return c.size() - 1; }  // -1 for the zero polynomial
  Scalar lead() const { return c.size() ? c[c.size() - 1] : Scalar(0); }
  Scalar max_abs() const { return c.size() ? c.cwiseAbs().maxCoeff() : Scalar(0); }
};

// Drop trailing coefficients that are negligible relative to the largest one.
template <typename Scalar>
Polynomial<Scalar> trim(const Polynomial<Scalar>& p, Scalar rel_eps = Scalar(1e-12)) {
  if (p.c.size() == 0) return p;
  const Scalar scale = p.max_abs();
  if (scale == Scalar(0)) return Polynomial<Scalar>{};
  Eigen::Index n = p.c.size();
  while (n > 0 && std::abs(p.c[n - 1]) <= rel_eps * scale) --n;
  Polynomial<Scalar> out;
  out.c = p.c.head(n);
  return out;
}

template <typename Scalar>
Polynomial<Scalar> operator+(const Polynomial<Scalar>& a, const Polynomial<Scalar>& b) {
  Polynomial<Scalar> out;
  out.c = VecX<Scalar>::Zero(std::max(a.c.size(), b.c.size()));
  out.c.head(a.c.size()) += a.c;
  out.c.head(b.c.size()) += b.c;
  return trim(out, Scalar(0));  // exact-zero trim only; keep tiny genuine coefficients
}

template <typename Scalar>
Polynomial<Scalar> operator-(const Polynomial<Scalar>& a) {
  Polynomial<Scalar> out;
  out.c = -a.c;
  return out;
}

template <typename Scalar>
Polynomial<Scalar> operator-(const Polynomial<Scalar>& a, const Polynomial<Scalar>& b) {
  return a + (-b);
}

template <typename Scalar>
Polynomial<Scalar> operator*(const Polynomial<Scalar>& a, const Polynomial<Scalar>& b) {
  if (a.is_zero() || b.is_zero()) return Polynomial<Scalar>{};
  Polynomial<Scalar> out;
  out.c = VecX<Scalar>::Zero(a.c.size() + b.c.size() - 1);
  for (Eigen::Index i = 0; i < a.c.size(); ++i)
    for (Eigen::Index j = 0; j < b.c.size(); ++j) out.c[i + j] += a.c[i] * b.c[j];
  return out;
}

template <typename Scalar>
Polynomial<Scalar> operator*(Scalar s, const Polynomial<Scalar>& a) {
  Polynomial<Scalar> out;
  out.c = s * a.c;
  return trim(out, Scalar(0));
}

template <typename Scalar, typename T>
T peval(const Polynomial<Scalar>& p, const T& z) {
  T acc(0);
  for (Eigen::Index k = p.c.size() - 1; k >= 0; --k) acc = acc * z + T(p.c[k]);
  return acc;
}

// p(1/z) expressed over the power frame z^K: returns coefficients of z^K * p(1/z).
template <typename Scalar>
Polynomial<Scalar> reverse_in_frame(const Polynomial<Scalar>& p, Eigen::Index K) {
  Polynomial<Scalar> out;
  out.c = VecX<Scalar>::Zero(K + 1);
  for (Eigen::Index k = 0; k < p.c.size(); ++k) out.c[K - k] = p.c[k];
  return trim(out, Scalar(0));
}

// Companion-matrix roots.  Throws on the zero or constant polynomial.
template <typename Scalar>
std::vector<std::complex<Scalar>> roots(const Polynomial<Scalar>& p_in) {
  const Polynomial<Scalar> p = trim(p_in);
  if (p.is_zero()) throw ZeroPolynomial{};
  if (p.degree() == 0) throw ConstantPolynomial{};
  const Eigen::Index n = p.degree();
  MatX<Scalar> comp = MatX<Scalar>::Zero(n, n);
  for (Eigen::Index i = 1; i < n; ++i) comp(i, i - 1) = Scalar(1);
  for (Eigen::Index i = 0; i < n; ++i) comp(i, n - 1) = -p.c[i] / p.c[n];
  Eigen::EigenSolver<MatX<Scalar>> es(comp, /*computeEigenvectors=*/false);
  std::vector<std::complex<Scalar>> out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = es.eigenvalues()[i];
  return out;
}

// Degree-0-safe variant: returns an empty set for constants, throws only on zero.
template <typename Scalar>
std::vector<std::complex<Scalar>> roots_or_empty(const Polynomial<Scalar>& p) {
  const Polynomial<Scalar> t = trim(p);
  if (t.is_zero()) throw ZeroPolynomial{};
  if (t.degree() == 0) return {};
  return roots(t);
}

// Real polynomial with the given roots (conjugate pairs combined) and leading
// coefficient.  Unpaired imaginary parts must be negligible.
template <typename Scalar>
Polynomial<Scalar> from_roots(std::vector<std::complex<Scalar>> rs, Scalar lead) {
  Polynomial<Scalar> out = Polynomial<Scalar>::constant(lead);
  const Scalar imag_tol = Scalar(1e-8);
  std::vector<bool> used(rs.size(), false);
  for (std::size_t i = 0; i < rs.size(); ++i) {
    if (used[i]) continue;
    const auto r = rs[i];
    if (std::abs(r.imag()) <= imag_tol * (Scalar(1) + std::abs(r))) {
      out = out * Polynomial<Scalar>{-r.real(), Scalar(1)};
      used[i] = true;
    } else {
      // find the conjugate partner
      std::size_t j = i + 1;
      for (; j < rs.size(); ++j)
        if (!used[j] && std::abs(rs[j] - std::conj(r)) <=
                            Scalar(1e-6) * (Scalar(1) + std::abs(r)))
          break;
      if (j == rs.size()) throw ContractViolation("unpaired complex root");
      out = out * Polynomial<Scalar>{std::norm(r), Scalar(-2) * r.real(), Scalar(1)};
      used[i] = used[j] = true;
    }
  }
  return out;
}

// Synthetic division of p by (z - r); the remainder p(r) must be negligible.
template <typename Scalar>
Polynomial<Scalar> deflate(const Polynomial<Scalar>& p_in, Scalar r,
                           Scalar rel_tol = Scalar(1e-6)) {
  const Polynomial<Scalar> p = trim(p_in);
  if (p.degree() < 1) throw ContractViolation("deflate: degree < 1");
  const Eigen::Index n = p.degree();
  Polynomial<Scalar> q;
  q.c = VecX<Scalar>::Zero(n);
  Scalar carry = p.c[n];
  for (Eigen::Index k = n - 1; k >= 0; --k) {
    q.c[k] = carry;
    carry = p.c[k] + r * carry;
  }
  const Scalar scale = p.max_abs() * std::max(Scalar(1), std::abs(r));
  if (std::abs(carry) > rel_tol * scale)
    throw ContractViolation("deflate: nonzero remainder " + std::to_string(double(carry)));
  return q;
}

// ---------------------------------------------------------------------------
// RationalFunction
// ---------------------------------------------------------------------------

template <typename Scalar>
struct Rational {
  Polynomial<Scalar> num;  // zero polynomial allowed
  Polynomial<Scalar> den;  // must be nonzero

  Rational() : num{}, den{Polynomial<Scalar>::constant(Scalar(1))} {}
  Rational(Polynomial<Scalar> n, Polynomial<Scalar> d)
      : num(trim(std::move(n))), den(trim(std::move(d))) {
    if (den.is_zero()) throw ZeroPolynomial("rational with zero denominator");
  }
  static Rational constant(Scalar v) {
    return Rational(Polynomial<Scalar>::constant(v), Polynomial<Scalar>::constant(Scalar(1)));
  }

  bool is_zero() const { return num.is_zero(); }
};

template <typename Scalar>
Rational<Scalar> monic(const Rational<Scalar>& r) {
  if (r.den.is_zero()) throw ZeroPolynomial{};
  const Scalar lc = r.den.lead();
  return Rational<Scalar>(Scalar(1) / lc * r.num, Scalar(1) / lc * r.den);
}

template <typename Scalar>
Rational<Scalar> operator+(const Rational<Scalar>& a, const Rational<Scalar>& b) {
  return Rational<Scalar>(a.num * b.den + b.num * a.den, a.den * b.den);
}
template <typename Scalar>
Rational<Scalar> operator-(const Rational<Scalar>& a) {
  return Rational<Scalar>(-a.num, a.den);
}
template <typename Scalar>
Rational<Scalar> operator-(const Rational<Scalar>& a, const Rational<Scalar>& b) {
  return a + (-b);
}
template <typename Scalar>
Rational<Scalar> operator*(const Rational<Scalar>& a, const Rational<Scalar>& b) {
  return Rational<Scalar>(a.num * b.num, a.den * b.den);
}
template <typename Scalar>
Rational<Scalar> operator*(Scalar s, const Rational<Scalar>& a) {
  return Rational<Scalar>(s * a.num, a.den);
}
template <typename Scalar>
Rational<Scalar> inverse(const Rational<Scalar>& a) {
  if (a.num.is_zero()) throw SingularMatrix("inverse of zero rational");
  return Rational<Scalar>(a.den, a.num);
}
template <typename Scalar>
Rational<Scalar> operator/(const Rational<Scalar>& a, const Rational<Scalar>& b) {
  return a * inverse(b);
}

template <typename Scalar, typename T>
T reval(const Rational<Scalar>& r, const T& z) {
  return peval(r.num, z) / peval(r.den, z);
}

// r(1/z) as a rational function of z.
template <typename Scalar>
Rational<Scalar> substitute_inverse_z(const Rational<Scalar>& r) {
  const Eigen::Index K = std::max(r.num.degree(), r.den.degree());
  if (r.num.is_zero()) return Rational<Scalar>{};
  return Rational<Scalar>(reverse_in_frame(r.num, K), reverse_in_frame(r.den, K));
}

// Cancel num/den root pairs closer than tol (absolute distance; the examples'
// exact-rational cancellations sit far inside this band).  Falls back to the
// monic input whenever the reduced form disagrees with the original on a
// checkpoint set, so simplify never corrupts a value.  tol = 0 requests no
// root-based cancellation.
template <typename Scalar>
Rational<Scalar> simplify(const Rational<Scalar>& r_in, Scalar tol = Scalar(1e-7)) {
  Rational<Scalar> r(trim(r_in.num, Scalar(1e-13)), trim(r_in.den, Scalar(1e-13)));
  if (r.num.is_zero())
    return Rational<Scalar>(Polynomial<Scalar>{}, Polynomial<Scalar>::constant(Scalar(1)));
  if (tol <= Scalar(0) || r.den.degree() == 0 || r.num.degree() == 0) return monic(r);

  auto nr = roots(r.num);
  auto dr = roots(r.den);
  std::vector<bool> n_used(nr.size(), false), d_used(dr.size(), false);
  for (std::size_t i = 0; i < dr.size(); ++i) {
    Scalar best = tol * std::max(Scalar(1), std::abs(dr[i]));
    std::ptrdiff_t match = -1;
    for (std::size_t j = 0; j < nr.size(); ++j) {
      if (n_used[j]) continue;
      const Scalar dist = std::abs(nr[j] - dr[i]);
      if (dist <= best) {
        best = dist;
        match = static_cast<std::ptrdiff_t>(j);
      }
    }
    if (match >= 0) {
      d_used[i] = true;
      n_used[static_cast<std::size_t>(match)] = true;
    }
  }
  std::vector<std::complex<Scalar>> nk, dk;
  for (std::size_t j = 0; j < nr.size(); ++j)
    if (!n_used[j]) nk.push_back(nr[j]);
  for (std::size_t i = 0; i < dr.size(); ++i)
    if (!d_used[i]) dk.push_back(dr[i]);
  if (nk.size() == nr.size()) return monic(r);  // nothing cancelled

  Rational<Scalar> red;
  try {
    red = monic(Rational<Scalar>(from_roots(nk, r.num.lead()), from_roots(dk, r.den.lead())));
  } catch (const Error&) {
    return monic(r);
  }
  // verify agreement away from poles; reject the reduction if it moved the value
  for (int k = 0; k < 7; ++k) {
    const std::complex<Scalar> z = std::polar(Scalar(1), Scalar(0.37) + Scalar(0.41) * k);
    const auto dv = peval(r.den, z);
    const auto dv2 = peval(red.den, z);
    if (std::abs(dv) < Scalar(1e-6) || std::abs(dv2) < Scalar(1e-6)) continue;
    const auto a = peval(r.num, z) / dv;
    const auto b = peval(red.num, z) / dv2;
    if (std::abs(a - b) > Scalar(1e-8) * (Scalar(1) + std::abs(a))) return monic(r);
  }
  return red;
}

// ---------------------------------------------------------------------------
// UnitCircleGrid
// ---------------------------------------------------------------------------

template <typename Scalar>
struct UnitCircleGrid {
  std::vector<std::complex<Scalar>> points;

  // G equispaced interior angles theta_j = pi*(j+1/2)/G on (0,pi) plus `extra`
  // deterministic pseudo-random angles; conjugate symmetry of real-coefficient
  // identities makes the upper half circle sufficient.
  static UnitCircleGrid make(int G = 64, int extra = 16, std::uint64_t seed = 0xC0FFEEull) {
    UnitCircleGrid g;
    const Scalar pi = Scalar(3.141592653589793238462643383279502884L);
    for (int j = 0; j < G; ++j)
      g.points.push_back(std::polar(Scalar(1), pi * (Scalar(j) + Scalar(0.5)) / Scalar(G)));
    std::mt19937_64 rng(seed);
    for (int j = 0; j < extra; ++j) {
      const Scalar u = Scalar(rng() >> 11) * Scalar(1.1102230246251565e-16);  // 2^-53
      g.points.push_back(std::polar(Scalar(1), pi * u));
    }
    return g;
  }
};

// ---------------------------------------------------------------------------
// RationalMatrix
// ---------------------------------------------------------------------------

template <typename Scalar>
struct RationalMatrix {
  Eigen::Index rows_ = 0, cols_ = 0;
  std::vector<Rational<Scalar>> e;  // row-major

  RationalMatrix() = default;
  RationalMatrix(Eigen::Index r, Eigen::Index c)
      : rows_(r), cols_(c), e(static_cast<std::size_t>(r * c)) {}

  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }
  Rational<Scalar>& operator()(Eigen::Index i, Eigen::Index j) {
    return e[static_cast<std::size_t>(i * cols_ + j)];
  }
  const Rational<Scalar>& operator()(Eigen::Index i, Eigen::Index j) const {
    return e[static_cast<std::size_t>(i * cols_ + j)];
  }

  static RationalMatrix Zero(Eigen::Index r, Eigen::Index c) { return RationalMatrix(r, c); }
  static RationalMatrix Identity(Eigen::Index n) {
    RationalMatrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) m(i, i) = Rational<Scalar>::constant(Scalar(1));
    return m;
  }
  static RationalMatrix from_constant(const MatX<Scalar>& M) {
    RationalMatrix m(M.rows(), M.cols());
    for (Eigen::Index i = 0; i < M.rows(); ++i)
      for (Eigen::Index j = 0; j < M.cols(); ++j) m(i, j) = Rational<Scalar>::constant(M(i, j));
    return m;
  }

  CMatX<Scalar> eval(const std::complex<Scalar>& z) const {
    CMatX<Scalar> out(rows_, cols_);
    for (Eigen::Index i = 0; i < rows_; ++i)
      for (Eigen::Index j = 0; j < cols_; ++j) out(i, j) = reval((*this)(i, j), z);
    return out;
  }
};

template <typename Scalar>
RationalMatrix<Scalar> operator+(const RationalMatrix<Scalar>& a, const RationalMatrix<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch{};
  RationalMatrix<Scalar> out(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) + b(i, j);
  return out;
}

template <typename Scalar>
RationalMatrix<Scalar> operator-(const RationalMatrix<Scalar>& a) {
  RationalMatrix<Scalar> out(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out(i, j) = -a(i, j);
  return out;
}

template <typename Scalar>
RationalMatrix<Scalar> operator-(const RationalMatrix<Scalar>& a, const RationalMatrix<Scalar>& b) {
  return a + (-b);
}

template <typename Scalar>
RationalMatrix<Scalar> operator*(const RationalMatrix<Scalar>& a, const RationalMatrix<Scalar>& b) {
  if (a.cols() != b.rows()) throw DimensionMismatch{};
  RationalMatrix<Scalar> out(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      Rational<Scalar> acc;  // zero
      for (Eigen::Index k = 0; k < a.cols(); ++k) acc = acc + a(i, k) * b(k, j);
      out(i, j) = simplify(acc);
    }
  return out;
}

template <typename Scalar>
RationalMatrix<Scalar> rm_transpose(const RationalMatrix<Scalar>& a) {
  RationalMatrix<Scalar> out(a.cols(), a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

// M(1/z)^T — the para-conjugate of a real-coefficient rational matrix.
template <typename Scalar>
RationalMatrix<Scalar> rm_para(const RationalMatrix<Scalar>& a) {
  RationalMatrix<Scalar> out(a.cols(), a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out(j, i) = substitute_inverse_z(a(i, j));
  return out;
}

template <typename Scalar>
RationalMatrix<Scalar> rm_simplify(const RationalMatrix<Scalar>& a, Scalar tol = Scalar(1e-7)) {
  RationalMatrix<Scalar> out(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out(i, j) = simplify(a(i, j), tol);
  return out;
}

template <typename Scalar>
RationalMatrix<Scalar> rm_hcat(const RationalMatrix<Scalar>& a, const RationalMatrix<Scalar>& b) {
  if (a.rows() != b.rows()) throw DimensionMismatch{};
  RationalMatrix<Scalar> out(a.rows(), a.cols() + b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
    for (Eigen::Index j = 0; j < b.cols(); ++j) out(i, a.cols() + j) = b(i, j);
  }
  return out;
}

template <typename Scalar>
RationalMatrix<Scalar> rm_vcat(const RationalMatrix<Scalar>& a, const RationalMatrix<Scalar>& b) {
  if (a.cols() != b.cols()) throw DimensionMismatch{};
  RationalMatrix<Scalar> out(a.rows() + b.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
  for (Eigen::Index i = 0; i < b.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out(a.rows() + i, j) = b(i, j);
  return out;
}

template <typename Scalar>
RationalMatrix<Scalar> rm_block(const RationalMatrix<Scalar>& a, Eigen::Index i0,
                                Eigen::Index j0, Eigen::Index nr, Eigen::Index nc) {
  RationalMatrix<Scalar> out(nr, nc);
  for (Eigen::Index i = 0; i < nr; ++i)
    for (Eigen::Index j = 0; j < nc; ++j) out(i, j) = a(i0 + i, j0 + j);
  return out;
}

// --- common-denominator machinery for the symbolic inverse ------------------

namespace detail {

// Merge per-entry denominator root multisets into a minimal common multiple:
// for each root cluster take the maximum multiplicity over entries.
template <typename Scalar>
std::vector<std::complex<Scalar>> merge_root_multisets(
    const std::vector<std::vector<std::complex<Scalar>>>& sets, Scalar tol = Scalar(1e-7)) {
  std::vector<std::complex<Scalar>> reps;   // cluster representatives
  std::vector<int> mult;                    // running max multiplicity
  for (const auto& rs : sets) {
    std::vector<int> local(reps.size(), 0);
    for (const auto& r : rs) {
      std::ptrdiff_t hit = -1;
      for (std::size_t k = 0; k < reps.size(); ++k)
        if (std::abs(r - reps[k]) <= tol * std::max(Scalar(1), std::abs(reps[k]))) {
          hit = static_cast<std::ptrdiff_t>(k);
          break;
        }
      if (hit < 0) {
        reps.push_back(r);
        mult.push_back(0);
        local.push_back(1);
      } else {
        ++local[static_cast<std::size_t>(hit)];
      }
    }
    for (std::size_t k = 0; k < reps.size(); ++k)
      mult[k] = std::max(mult[k], k < local.size() ? local[k] : 0);
  }
  std::vector<std::complex<Scalar>> out;
  for (std::size_t k = 0; k < reps.size(); ++k)
    for (int i = 0; i < mult[k]; ++i) out.push_back(reps[k]);
  return out;
}

// Polynomial determinant by cofactor expansion (n <= 4 in this artifact).
template <typename Scalar>
Polynomial<Scalar> poly_det(const std::vector<Polynomial<Scalar>>& a, Eigen::Index n) {
  if (n == 1) return a[0];
  Polynomial<Scalar> acc;
  for (Eigen::Index j = 0; j < n; ++j) {
    std::vector<Polynomial<Scalar>> minor;
    minor.reserve(static_cast<std::size_t>((n - 1) * (n - 1)));
    for (Eigen::Index i = 1; i < n; ++i)
      for (Eigen::Index k = 0; k < n; ++k)
        if (k != j) minor.push_back(a[static_cast<std::size_t>(i * n + k)]);
    Polynomial<Scalar> term = a[static_cast<std::size_t>(j)] * poly_det(minor, n - 1);
    acc = (j % 2 == 0) ? acc + term : acc - term;
  }
  return acc;
}

}  // namespace detail

// Symbolic inverse via common denominator + polynomial adjugate:
// M = N(z)/d(z)  =>  M^{-1} = d * adj(N) / det(N).
template <typename Scalar>
RationalMatrix<Scalar> rm_inverse(const RationalMatrix<Scalar>& M) {
  if (M.rows() != M.cols()) throw DimensionMismatch("rm_inverse: non-square");
  const Eigen::Index n = M.rows();
  if (n == 0) return M;

  std::vector<std::vector<std::complex<Scalar>>> den_roots;
  for (const auto& r : M.e)
    den_roots.push_back(r.den.degree() > 0 ? roots(r.den)
                                           : std::vector<std::complex<Scalar>>{});
  const auto common = detail::merge_root_multisets(den_roots);
  const Polynomial<Scalar> d = from_roots(common, Scalar(1));

  // N_ij = num_ij * (d / den_ij), the cofactor computed by deflation
  std::vector<Polynomial<Scalar>> N(static_cast<std::size_t>(n * n));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& r = M(i, j);
      Polynomial<Scalar> q = d;
      for (const auto& root : den_roots[static_cast<std::size_t>(i * M.cols() + j)]) {
        if (std::abs(root.imag()) <= Scalar(1e-8) * (Scalar(1) + std::abs(root))) {
          q = deflate(q, root.real(), Scalar(1e-5));
        } else if (root.imag() > Scalar(0)) {  // deflate the conjugate pair once
          Polynomial<Scalar> quad{std::norm(root), Scalar(-2) * root.real(), Scalar(1)};
          // long division by the quadratic
          Polynomial<Scalar> rem = q, quo;
          quo.c = VecX<Scalar>::Zero(std::max<Eigen::Index>(rem.c.size() - 2, 1));
          while (trim(rem).degree() >= 2) {
            const Eigen::Index dr = trim(rem).degree();
            rem = trim(rem);
            const Scalar f = rem.c[dr] / quad.c[2];
            quo.c[dr - 2] += f;
            Polynomial<Scalar> shift;
            shift.c = VecX<Scalar>::Zero(dr - 1);
            shift.c[dr - 2] = f;
            rem = rem - shift * quad;
          }
          q = trim(quo);
        }
        // negative-imag roots are handled together with their conjugates
      }
      const Scalar lead_fix = r.den.lead();
      N[static_cast<std::size_t>(i * n + j)] = (Scalar(1) / lead_fix) * (r.num * q);
    }

  const Polynomial<Scalar> det = trim(detail::poly_det(N, n), Scalar(1e-12));
  if (det.is_zero()) throw SingularMatrix("rm_inverse: determinant identically zero");

  RationalMatrix<Scalar> out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      // adj(N)_{ij} = (-1)^{i+j} * minor_{ji}
      std::vector<Polynomial<Scalar>> minor;
      for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < n; ++c)
          if (r != j && c != i) minor.push_back(N[static_cast<std::size_t>(r * n + c)]);
      Polynomial<Scalar> cof =
          (n == 1) ? Polynomial<Scalar>::constant(Scalar(1)) : detail::poly_det(minor, n - 1);
      if ((i + j) % 2 == 1) cof = -cof;
      out(i, j) = simplify(Rational<Scalar>(d * cof, det));
    }
  return out;
}

// --- grid equality ----------------------------------------------------------

template <typename Scalar>
struct GridCompareReport {
  bool equal = false;
  Scalar max_dev = Scalar(0);
  std::complex<Scalar> argmax{};
  int skipped = 0;  // points within 1e-6 of a pole of either side
};

template <typename Scalar>
GridCompareReport<Scalar> rm_equal_on_grid(const RationalMatrix<Scalar>& A,
                                           const RationalMatrix<Scalar>& B,
                                           const UnitCircleGrid<Scalar>& grid, Scalar tol) {
  if (A.rows() != B.rows() || A.cols() != B.cols()) throw DimensionMismatch{};
  GridCompareReport<Scalar> rep;
  for (const auto& z : grid.points) {
    bool near_pole = false;
    auto check = [&](const RationalMatrix<Scalar>& M) {
      for (const auto& r : M.e) {
        const Scalar dv = std::abs(peval(r.den, z));
        if (dv < Scalar(1e-6) * std::max(Scalar(1), r.den.max_abs())) near_pole = true;
      }
    };
    check(A);
    check(B);
    if (near_pole) {
      ++rep.skipped;
      continue;
    }
    const Scalar dev = (A.eval(z) - B.eval(z)).cwiseAbs().maxCoeff();
    if (dev > rep.max_dev) {
      rep.max_dev = dev;
      rep.argmax = z;
    }
  }
  rep.equal = rep.max_dev <= tol;
  return rep;
}

template <typename Scalar>
Scalar rm_grid_sup(const RationalMatrix<Scalar>& A, const UnitCircleGrid<Scalar>& grid) {
  Scalar sup(0);
  for (const auto& z : grid.points) sup = std::max(sup, A.eval(z).cwiseAbs().maxCoeff());
  return sup;
}

using Polyd = Polynomial<double>;
using Rationald = Rational<double>;
using RationalMatrixd = RationalMatrix<double>;
using UnitCircleGridd = UnitCircleGrid<double>;

}  // namespace lowrank

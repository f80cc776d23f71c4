#pragma once
// JSON model I/O, analysis / synthesis / network / factor reports, path
// simulation, Welch cross-spectral verification, and CSV output: the plumbing
// shared by the command-line tool and the test suites.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <unsupported/Eigen/FFT>

#include "lowrank/fconstruct.hpp"
#include "lowrank/hsynth.hpp"
#include "lowrank/ratcore.hpp"
#include "lowrank/rng.hpp"
#include "lowrank/specnet.hpp"
#include "lowrank/ssreal.hpp"

namespace lowrank {

using json = nlohmann::json;

struct InputError : Error {
  explicit InputError(const std::string& m) : Error(m) {}
};
struct UnstableA : Error {
  explicit UnstableA(const std::string& m = "A is not strictly stable") : Error(m) {}
};

// ---------------------------------------------------------------------------
// deterministic numeric formatting: everything serialized is first rounded to
// 12 significant digits so identical inputs give byte-identical reports
// ---------------------------------------------------------------------------

inline double round12(double v) {
  if (!std::isfinite(v)) return v;
  if (v == 0.0) return 0.0;  // normalize -0
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return std::strtod(buf, nullptr);
}

inline json jnum(double v) { return round12(v); }

inline json jvec(const VecX<double>& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(jnum(v[i]));
  return a;
}

inline json jmat(const MatX<double>& M) {
  json a = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(jnum(M(i, j)));
    a.push_back(row);
  }
  return a;
}

inline json jcvec(const std::vector<std::complex<double>>& v) {
  json a = json::array();
  for (const auto& z : v) a.push_back(json::array({jnum(z.real()), jnum(z.imag())}));
  return a;
}

inline json jpoly(const Polynomial<double>& p) {
  json a = json::array();
  for (Eigen::Index i = 0; i < p.c.size(); ++i) a.push_back(jnum(p.c[i]));
  return a;
}

inline json jrat(const Rational<double>& r) {
  const Rational<double> mr = r.num.is_zero() ? r : monic(r);
  return json{{"num", jpoly(mr.num)}, {"den", jpoly(mr.den)}};
}

inline json jrm(const RationalMatrix<double>& M) {
  json a = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(jrat(M(i, j)));
    a.push_back(row);
  }
  return a;
}

// ---------------------------------------------------------------------------
// model files
// ---------------------------------------------------------------------------

struct Model {
  std::string name;
  StateSpace<double> ss;
  std::vector<std::string> labels;  // one per output component
};

inline MatX<double> mat_from_json(const json& j, const std::string& key) {
  if (!j.is_array()) throw InputError(key + " must be an array of arrays");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = -1;
  for (const auto& row : j) {
    if (!row.is_array()) throw InputError(key + " must be an array of arrays");
    if (cols < 0) cols = static_cast<Eigen::Index>(row.size());
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw InputError(key + " has ragged rows");
  }
  if (rows == 0 || cols <= 0) throw InputError(key + " must be non-empty");
  MatX<double> M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& cell = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
      if (!cell.is_number()) throw InputError(key + " entries must be numbers");
      M(i, c) = cell.get<double>();
    }
  return M;
}

inline Model model_from_json(const json& j) {
  if (!j.is_object()) throw InputError("model file must be a JSON object");
  for (const char* key : {"A", "B", "C"})
    if (!j.contains(key)) throw InputError(std::string("model is missing \"") + key + "\"");
  Model model;
  model.name = j.value("name", std::string("model"));
  model.ss.A = mat_from_json(j.at("A"), "A");
  model.ss.B = mat_from_json(j.at("B"), "B");
  model.ss.C = mat_from_json(j.at("C"), "C");
  const Eigen::Index n = model.ss.A.rows(), m = model.ss.B.cols(), p = model.ss.C.rows();
  if (model.ss.A.cols() != n) throw InputError("A must be square");
  if (model.ss.B.rows() != n) throw InputError("B must have as many rows as A");
  if (model.ss.C.cols() != n) throw InputError("C must have as many columns as A");
  if (j.contains("D")) {
    model.ss.D = mat_from_json(j.at("D"), "D");
    if (model.ss.D.rows() != p || model.ss.D.cols() != m)
      throw InputError("D must be p x m");
  } else {
    model.ss.D = MatX<double>::Zero(p, m);
  }
  if (p < m) throw InputError("spectral factor must be tall or square (p >= m)");
  if (j.contains("labels")) {
    const auto& lab = j.at("labels");
    if (!lab.is_array() || static_cast<Eigen::Index>(lab.size()) != p)
      throw InputError("labels must list one name per output component");
    for (const auto& l : lab) {
      if (!l.is_string()) throw InputError("labels must be strings");
      model.labels.push_back(l.get<std::string>());
    }
  } else {
    for (Eigen::Index i = 0; i < p; ++i) model.labels.push_back("z" + std::to_string(i + 1));
  }
  return model;
}

inline Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("invalid JSON in " + path + ": " + e.what());
  }
  return model_from_json(j);
}

// Output labels in normalized coordinates: when the normalizing U is the
// identity they coincide with the model labels, otherwise the rows are linear
// combinations and get generic names.
inline std::vector<std::string> normalized_labels(const Model& model,
                                                  const NormalizedFactor<double>& nf) {
  const Eigen::Index p = nf.sys.p();
  const bool u_is_identity =
      (nf.U - MatX<double>::Identity(p, p)).cwiseAbs().maxCoeff() < 1e-12;
  if (u_is_identity) return model.labels;
  std::vector<std::string> out;
  for (Eigen::Index i = 0; i < p; ++i) out.push_back("c" + std::to_string(i + 1));
  return out;
}

// ---------------------------------------------------------------------------
// shared pipeline: normalization + admissible channel splits + grid
// ---------------------------------------------------------------------------

struct Pipeline {
  NormalizedFactor<double> nf;
  std::vector<Partition<double>> admissible;
  UnitCircleGrid<double> grid;
};

inline Pipeline make_pipeline(const Model& model, double tol_rank, int grid_pts) {
  if (grid_pts < 4) throw InputError("--grid must be at least 4");
  Pipeline p{normalize_D(model.ss, tol_rank), {}, UnitCircleGrid<double>::make(grid_pts)};
  if (p.nf.sys.p() > p.nf.sys.m())
    p.admissible = partitions_with_nonsingular_C1B1(p.nf.sys, p.nf.rho);
  return p;
}

// Grid defect of the left-kernel identity [-F I] W = 0 for one channel split,
// i.e. sup |F W_u - W_y| over the grid, with the rows of the normalized W
// reordered into (u, y).
inline double kernel_residual(const RationalMatrix<double>& Wn, const NormalizedFactor<double>& nf,
                              const Partition<double>& part, const RationalMatrix<double>& F,
                              const UnitCircleGrid<double>& grid) {
  const Eigen::Index m = nf.sys.m(), rho = nf.rho;
  RationalMatrix<double> Wu(m, Wn.cols());
  for (Eigen::Index i = 0; i < rho; ++i)
    for (Eigen::Index j = 0; j < Wn.cols(); ++j) Wu(i, j) = Wn(i, j);
  for (std::size_t i = 0; i < part.u1_rows.size(); ++i)
    for (Eigen::Index j = 0; j < Wn.cols(); ++j)
      Wu(rho + static_cast<Eigen::Index>(i), j) = Wn(part.u1_rows[i], j);
  RationalMatrix<double> Wy(static_cast<Eigen::Index>(part.y_rows.size()), Wn.cols());
  for (std::size_t i = 0; i < part.y_rows.size(); ++i)
    for (Eigen::Index j = 0; j < Wn.cols(); ++j)
      Wy(static_cast<Eigen::Index>(i), j) = Wn(part.y_rows[i], j);
  return rm_grid_sup(F * Wu - Wy, grid);
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

struct AnalyzeOptions {
  bool all_orderings = true;
  int ordering = -1;  // >= 0 selects one admissible split
  double tol_rank = 1e-9;
  int grid = 64;
};

struct CliReport {
  json report;
  bool verified = true;
};

inline CliReport analyze_model(const Model& model, const AnalyzeOptions& opt) {
  const Pipeline pipe = make_pipeline(model, opt.tol_rank, opt.grid);
  const NormalizedFactor<double>& nf = pipe.nf;
  const RationalMatrix<double> Wn = transfer_function(nf.sys);
  const SearchResult<double> search = search_stable_F(nf, pipe.grid);
  const std::vector<std::string> labels = normalized_labels(model, nf);

  CliReport out;
  json& rep = out.report;
  rep["model"] = model.name;
  rep["n"] = nf.sys.n();
  rep["m"] = nf.sys.m();
  rep["p"] = nf.sys.p();
  rep["rho"] = nf.rho;
  rep["sigma"] = jvec(nf.sigma);
  rep["tol_rank"] = jnum(opt.tol_rank);
  rep["U"] = jmat(nf.U);
  rep["V"] = jmat(nf.V);
  rep["labels"] = labels;
  rep["vacuous"] = search.vacuous;
  rep["any_stable"] = search.any_stable;
  rep["admissible_count"] = search.candidates.size();

  auto emit = [&](const FResult<double>& fr) {
    json o;
    o["index"] = fr.ordering_index;
    json u_rows = json::array(), y_rows = json::array(), u_labels = json::array(),
         y_labels = json::array();
    for (Eigen::Index i = 0; i < nf.rho; ++i) {
      u_rows.push_back(i);
      u_labels.push_back(labels[static_cast<std::size_t>(i)]);
    }
    for (Eigen::Index r : fr.partition.u1_rows) {
      u_rows.push_back(r);
      u_labels.push_back(labels[static_cast<std::size_t>(r)]);
    }
    for (Eigen::Index r : fr.partition.y_rows) {
      y_rows.push_back(r);
      y_labels.push_back(labels[static_cast<std::size_t>(r)]);
    }
    o["u_rows"] = u_rows;
    o["y_rows"] = y_rows;
    o["u_labels"] = u_labels;
    o["y_labels"] = y_labels;
    o["c1b1_min_sv"] = jnum(fr.partition.c1b1_min_sv);
    o["schur_det_nonzero"] = schur_det_nonzero(nf, fr.partition, pipe.grid);
    o["F"] = jrm(fr.F);
    o["mcmillan_degree"] = fr.minimal.rank;
    o["poles"] = jcvec(fr.poles);
    o["strictly_stable"] = fr.strictly_stable;
    o["causality"] = fr.strictly_stable ? "stable_causal" : "unstable_requires_feedback";
    const double res = kernel_residual(Wn, nf, fr.partition, fr.F, pipe.grid);
    o["kernel_residual"] = jnum(res);
    if (!(res < 1e-8)) out.verified = false;
    return o;
  };

  json orderings = json::array();
  if (opt.ordering >= 0) {
    if (static_cast<std::size_t>(opt.ordering) >= search.candidates.size())
      throw InputError("--ordering " + std::to_string(opt.ordering) + " out of range: " +
                       std::to_string(search.candidates.size()) + " admissible splits");
    orderings.push_back(emit(search.candidates[static_cast<std::size_t>(opt.ordering)]));
  } else {
    for (const auto& fr : search.candidates) orderings.push_back(emit(fr));
  }
  rep["orderings"] = orderings;
  json uniq = json::array();
  for (std::size_t u : search.unique_indices) uniq.push_back(u);
  rep["unique_f_indices"] = uniq;
  if (!search.vacuous && search.candidates.empty()) out.verified = false;
  rep["verified"] = out.verified;
  return out;
}

// ---------------------------------------------------------------------------
// synthesize
// ---------------------------------------------------------------------------

struct SynthesizeOptions {
  int ordering = 0;
  double gamma = 10.0;
  double sigma = 0.0;
  double tol_rank = 1e-9;
  int grid = 64;
};

// Diagonal entries of F, provided it is 1x1 or square with vanishing
// off-diagonal entries on the grid; anything else is outside the supported
// synthesis class.
inline std::vector<Rational<double>> diagonal_channels(const RationalMatrix<double>& F,
                                                       const UnitCircleGrid<double>& grid) {
  if (F.rows() != F.cols())
    throw InputError("synthesis supports scalar or square diagonal F only (F is " +
                     std::to_string(F.rows()) + "x" + std::to_string(F.cols()) + ")");
  const double scale = 1.0 + rm_grid_sup(F, grid);
  std::vector<Rational<double>> chans;
  for (Eigen::Index i = 0; i < F.rows(); ++i) {
    for (Eigen::Index j = 0; j < F.cols(); ++j) {
      if (i == j) continue;
      RationalMatrix<double> e(1, 1);
      e(0, 0) = F(i, j);
      if (rm_grid_sup(e, grid) > 1e-9 * scale)
        throw InputError("synthesis supports scalar or diagonal F only (nonzero off-diagonal)");
    }
    chans.push_back(F(i, i));
  }
  return chans;
}

inline CliReport synthesize_model(const Model& model, const SynthesizeOptions& opt) {
  const Pipeline pipe = make_pipeline(model, opt.tol_rank, opt.grid);
  const NormalizedFactor<double>& nf = pipe.nf;
  const Eigen::Index m = nf.sys.m(), p = nf.sys.p();
  if (p == m) throw InputError("nothing to synthesize: the process has no residual channels");
  if (opt.ordering < 0 || static_cast<std::size_t>(opt.ordering) >= pipe.admissible.size())
    throw InputError("--ordering " + std::to_string(opt.ordering) + " out of range: " +
                     std::to_string(pipe.admissible.size()) + " admissible splits");
  FResult<double> fr = build_F(nf, pipe.admissible[static_cast<std::size_t>(opt.ordering)]);
  fr.ordering_index = static_cast<std::size_t>(opt.ordering);
  const Eigen::Index q = fr.F.rows();

  CliReport out;
  json& rep = out.report;
  rep["model"] = model.name;
  rep["ordering"] = opt.ordering;
  rep["gamma"] = jnum(opt.gamma);
  rep["sigma"] = jnum(opt.sigma);
  rep["F"] = jrm(fr.F);
  rep["poles"] = jcvec(fr.poles);
  rep["strictly_stable"] = fr.strictly_stable;

  RationalMatrix<double> H = RationalMatrix<double>::Zero(m, q);
  json channels = json::array();
  if (fr.strictly_stable) {
    rep["feedback_needed"] = false;
    rep["Q"] = jrm(RationalMatrix<double>::Identity(q));
  } else {
    rep["feedback_needed"] = true;
    const auto chans = diagonal_channels(fr.F, pipe.grid);
    const DiagonalSynthesis<double> ds =
        synthesize_diagonal(chans, opt.gamma, opt.sigma);
    H = ds.H;
    rep["Q"] = jrm(ds.Q);
    rep["xi0"] = jnum(ds.xi0);
    for (const auto& ch : ds.channels) {
      json c;
      c["Q"] = jrat(ch.Q);
      c["H"] = jrat(ch.H);
      c["feedback_needed"] = ch.feedback_needed;
      c["sup_Q"] = jnum(ch.sup_Q);
      channels.push_back(c);
    }
  }
  rep["channels"] = channels;
  rep["H"] = jrm(H);

  const ClosedLoop<double> cl = closed_loop(fr.F, H, pipe.grid);
  rep["closed_loop"] = json{{"internally_stable", cl.internally_stable},
                            {"max_pole_radius", jnum(cl.max_pole_radius)},
                            {"identity_residual", jnum(cl.identity_residual)}};
  out.verified = cl.internally_stable && cl.identity_residual < 1e-9;
  rep["verified"] = out.verified;
  return out;
}

// ---------------------------------------------------------------------------
// simulation
// ---------------------------------------------------------------------------

inline MatX<double> simulate_paths(const StateSpace<double>& ss, long T,
                                   std::uint64_t seed, long burn = 1024) {
  if (T <= 0) throw InputError("--T must be positive");
  if (ss.n() > 0 && spectral_radius(ss.A) >= 1.0 - 1e-12) throw UnstableA{};
  DeterministicRng rng(seed);
  VecX<double> x = VecX<double>::Zero(ss.n());
  VecX<double> w(ss.m());
  MatX<double> Z(T, ss.p());
  for (long t = 0; t < burn + T; ++t) {
    for (Eigen::Index j = 0; j < ss.m(); ++j) w[j] = rng.normal();
    if (t >= burn) Z.row(t - burn) = (ss.C * x + ss.D * w).transpose();
    x = ss.A * x + ss.B * w;
  }
  return Z;
}

inline void write_csv(std::ostream& os, const std::vector<std::string>& labels,
                      const MatX<double>& Z) {
  os << "t";
  for (const auto& l : labels) os << "," << l;
  os << "\n";
  char buf[40];
  for (Eigen::Index t = 0; t < Z.rows(); ++t) {
    os << t;
    for (Eigen::Index j = 0; j < Z.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.12g", Z(t, j));
      os << "," << buf;
    }
    os << "\n";
  }
}

// ---------------------------------------------------------------------------
// exact second-order statistics
// ---------------------------------------------------------------------------

inline CMatX<double> eval_tf(const StateSpace<double>& ss, std::complex<double> z) {
  if (ss.n() == 0) return ss.D.cast<std::complex<double>>();
  const CMatX<double> R = (z * CMatX<double>::Identity(ss.n(), ss.n()) -
                           ss.A.cast<std::complex<double>>());
  return ss.C.cast<std::complex<double>>() *
             R.partialPivLu().solve(ss.B.cast<std::complex<double>>()) +
         ss.D.cast<std::complex<double>>();
}

// Steady-state covariance P = A P A' + B B' via the Kronecker-vectorized
// linear system (the state dimensions here are tiny).
inline MatX<double> lyapunov_state_cov(const MatX<double>& A, const MatX<double>& B) {
  const Eigen::Index n = A.rows();
  if (n == 0) return MatX<double>::Zero(0, 0);
  if (spectral_radius(A) >= 1.0 - 1e-12) throw UnstableA{};
  MatX<double> K = MatX<double>::Identity(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index l = 0; l < n; ++l) K(i + n * j, k + n * l) -= A(i, k) * A(j, l);
  const MatX<double> Q = B * B.transpose();
  VecX<double> vecQ(n * n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) vecQ[i + n * j] = Q(i, j);
  const VecX<double> vecP = K.fullPivLu().solve(vecQ);
  MatX<double> P(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) P(i, j) = vecP[i + n * j];
  return P;
}

// ---------------------------------------------------------------------------
// Welch cross-spectral estimator
// ---------------------------------------------------------------------------

struct WelchEstimate {
  int L = 0;          // segment length, 2 * floor(T / (K+1))
  int K = 0;          // number of half-overlapping segments
  double U = 0;       // window power, sum of squared window samples
  std::vector<double> freqs;        // 2 pi k / L for k = 0..L/2
  std::vector<CMatX<double>> Phat;  // cross-spectral matrix per bin
};

inline WelchEstimate welch_csd(const MatX<double>& Z, int K = 64) {
  const Eigen::Index T = Z.rows(), p = Z.cols();
  WelchEstimate est;
  est.K = K;
  est.L = static_cast<int>(2 * (T / (K + 1)));
  if (est.L < 8) throw InputError("time series too short for the Welch estimator");
  const int L = est.L, hop = L / 2;
  const double pi = 3.141592653589793238462643383279502884;
  VecX<double> win(L);
  for (int i = 0; i < L; ++i) win[i] = 0.5 - 0.5 * std::cos(2.0 * pi * i / L);
  est.U = win.squaredNorm();

  const int nb = L / 2 + 1;
  est.Phat.assign(static_cast<std::size_t>(nb), CMatX<double>::Zero(p, p));
  est.freqs.resize(static_cast<std::size_t>(nb));
  for (int k = 0; k < nb; ++k) est.freqs[static_cast<std::size_t>(k)] = 2.0 * pi * k / L;

  Eigen::FFT<double> fft;
  std::vector<double> seg(static_cast<std::size_t>(L));
  std::vector<std::complex<double>> spec;
  CMatX<double> X(nb, p);
  for (int s = 0; s < K; ++s) {
    const Eigen::Index off = static_cast<Eigen::Index>(s) * hop;
    for (Eigen::Index c = 0; c < p; ++c) {
      for (int i = 0; i < L; ++i) seg[static_cast<std::size_t>(i)] = Z(off + i, c) * win[i];
      fft.fwd(spec, seg);
      for (int k = 0; k < nb; ++k) X(k, c) = spec[static_cast<std::size_t>(k)];
    }
    for (int k = 0; k < nb; ++k)
      est.Phat[static_cast<std::size_t>(k)] += X.row(k).transpose() * X.row(k).conjugate();
  }
  const double norm = 1.0 / (static_cast<double>(K) * est.U);
  for (auto& P : est.Phat) P *= norm;
  return est;
}

// ---------------------------------------------------------------------------
// spectral verification of simulated paths
// ---------------------------------------------------------------------------

struct SpectralCheckOptions {
  int welch_windows = 64;
  int grid = 64;               // comparison angles theta_j = pi (j + 1/2) / grid
  double eig_ratio_tol = 0.02; // rank signature of the band-averaged estimate
  double dev_tol = 0.15;       // Frobenius-relative deviation from exact Phi
  double fhat_tol = 0.2;       // cross-spectral ratio vs exact F (scalar u)
  double td_tol = 0.005;       // sample vs population covariance eigenvalue ratio
};

struct SpectralCheckReport {
  int L = 0;
  double eig_ratio_max = 0;
  double phi_dev_max = 0;
  double fhat_rel_max = -1;  // -1: not computed
  double td_ratio = 0;
  double td_ratio_exact = 0;
  bool eig_ok = true, dev_ok = true, fhat_ok = true, td_ok = true, pass = false;
};

// Compares the Welch estimate of the simulated paths against the exact
// spectral density of the model.  Band averages pool the periodogram bins in
// each grid cell [theta - pi/(2 grid), theta + pi/(2 grid)], excluding DC and
// Nyquist; the exact density is averaged over the same bins.  Columns of Z
// must be in model order; the optional F check assumes the first m columns
// are the full-rank subprocess u.
inline SpectralCheckReport spectral_check(const StateSpace<double>& ss, const MatX<double>& Z,
                                          const RationalMatrix<double>* F = nullptr,
                                          const SpectralCheckOptions& opt = {}) {
  const Eigen::Index p = ss.p(), m = ss.m();
  if (Z.cols() != p) throw DimensionMismatch("spectral_check: Z has wrong width");
  const WelchEstimate est = welch_csd(Z, opt.welch_windows);
  SpectralCheckReport rep;
  rep.L = est.L;
  const double pi = 3.141592653589793238462643383279502884;
  const double dth = 2.0 * pi / est.L;
  const double half_cell = pi / (2.0 * opt.grid);
  const int nb = static_cast<int>(est.Phat.size());

  for (int g = 0; g < opt.grid; ++g) {
    const double theta = pi * (g + 0.5) / opt.grid;
    CMatX<double> Pc = CMatX<double>::Zero(p, p), Pex = CMatX<double>::Zero(p, p);
    CMatX<double> Pn = CMatX<double>::Zero(p, p);
    int cell_count = 0, near_count = 0;
    for (int k = 1; k < nb - 1; ++k) {
      const double f = est.freqs[static_cast<std::size_t>(k)];
      if (std::abs(f - theta) <= half_cell * (1 + 1e-9)) {
        Pc += est.Phat[static_cast<std::size_t>(k)];
        const CMatX<double> W = eval_tf(ss, std::polar(1.0, f));
        Pex += W * W.adjoint();
        ++cell_count;
      }
      if (std::abs(f - theta) <= 0.5 * dth * (1 + 1e-9)) {
        Pn += est.Phat[static_cast<std::size_t>(k)];
        ++near_count;
      }
    }
    if (cell_count == 0 || near_count == 0)
      throw InputError("time series too short: empty comparison band");
    Pc /= cell_count;
    Pex /= cell_count;
    Pn /= near_count;

    rep.phi_dev_max = std::max(rep.phi_dev_max, (Pc - Pex).norm() / Pex.norm());
    if (p > m) {
      const CMatX<double> Ph = (Pc + Pc.adjoint()) / 2.0;
      Eigen::SelfAdjointEigenSolver<CMatX<double>> es(Ph);
      const VecX<double> ev = es.eigenvalues();  // ascending
      rep.eig_ratio_max = std::max(rep.eig_ratio_max, ev[p - 1 - m] / ev[p - 1]);
    }
    if (F && m == 1) {
      for (Eigen::Index r = 0; r < F->rows(); ++r) {
        const std::complex<double> fhat = Pn(m + r, 0) / Pn(0, 0).real();
        const std::complex<double> fex = reval((*F)(r, 0), std::polar(1.0, theta));
        rep.fhat_rel_max =
            std::max(rep.fhat_rel_max, std::abs(fhat - fex) / std::abs(fex));
      }
    }
  }

  const MatX<double> S = Z.transpose() * Z / static_cast<double>(Z.rows());
  const MatX<double> P = lyapunov_state_cov(ss.A, ss.B);
  const MatX<double> Sz = ss.C * P * ss.C.transpose() + ss.D * ss.D.transpose();
  if (p > m) {
    Eigen::SelfAdjointEigenSolver<MatX<double>> es(S), ee(Sz);
    rep.td_ratio = es.eigenvalues()[p - 1 - m] / es.eigenvalues()[p - 1];
    rep.td_ratio_exact = ee.eigenvalues()[p - 1 - m] / ee.eigenvalues()[p - 1];
  }

  rep.eig_ok = rep.eig_ratio_max < opt.eig_ratio_tol;
  rep.dev_ok = rep.phi_dev_max < opt.dev_tol;
  rep.fhat_ok = rep.fhat_rel_max < 0 || rep.fhat_rel_max < opt.fhat_tol;
  rep.td_ok = std::abs(rep.td_ratio - rep.td_ratio_exact) < opt.td_tol;
  rep.pass = rep.eig_ok && rep.dev_ok && rep.fhat_ok && rep.td_ok;
  return rep;
}

inline json spectral_check_to_json(const SpectralCheckReport& rep,
                                   const SpectralCheckOptions& opt) {
  json j;
  j["L"] = rep.L;
  j["welch_windows"] = opt.welch_windows;
  j["eig_ratio_max"] = jnum(rep.eig_ratio_max);
  j["eig_ratio_tol"] = jnum(opt.eig_ratio_tol);
  j["phi_dev_max"] = jnum(rep.phi_dev_max);
  j["phi_dev_tol"] = jnum(opt.dev_tol);
  if (rep.fhat_rel_max >= 0) {
    j["fhat_rel_max"] = jnum(rep.fhat_rel_max);
    j["fhat_tol"] = jnum(opt.fhat_tol);
  }
  j["td_ratio"] = jnum(rep.td_ratio);
  j["td_ratio_exact"] = jnum(rep.td_ratio_exact);
  j["td_tol"] = jnum(opt.td_tol);
  j["pass"] = rep.pass;
  return j;
}

// ---------------------------------------------------------------------------
// network / factor reports
// ---------------------------------------------------------------------------

struct NetworkOptions {
  int ordering = 0;
  double gamma = 10.0;
  double tol_rank = 1e-9;
  int grid = 64;
};

inline CliReport network_report(const Model& model, const NetworkOptions& opt) {
  const Pipeline pipe = make_pipeline(model, opt.tol_rank, opt.grid);
  const NormalizedFactor<double>& nf = pipe.nf;
  const Eigen::Index m = nf.sys.m(), p = nf.sys.p();
  if (p == m) throw InputError("no residual channels: the network is trivial (p == m)");
  if (opt.ordering < 0 || static_cast<std::size_t>(opt.ordering) >= pipe.admissible.size())
    throw InputError("--ordering " + std::to_string(opt.ordering) + " out of range: " +
                     std::to_string(pipe.admissible.size()) + " admissible splits");
  const Partition<double>& part = pipe.admissible[static_cast<std::size_t>(opt.ordering)];
  const FResult<double> fr = build_F(nf, part);
  const Eigen::Index q = fr.F.rows();

  RationalMatrix<double> H = RationalMatrix<double>::Zero(m, q);
  const bool feedback = !fr.strictly_stable;
  if (feedback) {
    const auto chans = diagonal_channels(fr.F, pipe.grid);
    H = synthesize_diagonal(chans, opt.gamma).H;
  }
  const ClosedLoop<double> cl = closed_loop(fr.F, H, pipe.grid);
  const FactorModel<double> fm = factor_model(nf, part, fr.F, feedback ? &H : nullptr, pipe.grid);
  const NetworkModel<double> nm = network_model(fr.F, H, fm.K, pipe.grid, &cl.T);

  const std::vector<std::string> labels = normalized_labels(model, nf);
  std::vector<std::string> nodes;
  for (Eigen::Index i = 0; i < nf.rho; ++i) nodes.push_back(labels[static_cast<std::size_t>(i)]);
  for (Eigen::Index r : part.u1_rows) nodes.push_back(labels[static_cast<std::size_t>(r)]);
  for (Eigen::Index r : part.y_rows) nodes.push_back(labels[static_cast<std::size_t>(r)]);

  CliReport out;
  json& rep = out.report;
  rep["model"] = model.name;
  rep["ordering"] = opt.ordering;
  rep["gamma"] = jnum(opt.gamma);
  rep["feedback_needed"] = feedback;
  rep["nodes"] = nodes;
  json edges = json::array();
  for (const auto& [to, from] : nm.edges)
    edges.push_back(json{{"from", nodes[static_cast<std::size_t>(from)]},
                         {"to", nodes[static_cast<std::size_t>(to)]}});
  rep["edges"] = edges;
  rep["edge_count"] = nm.edges.size();
  rep["M"] = jrm(nm.M);
  rep["N"] = jrm(nm.N);
  rep["resolvent_residual"] = jnum(nm.resolvent_residual);
  rep["internally_stable"] = cl.internally_stable;
  out.verified = cl.internally_stable && nm.resolvent_residual < 1e-8;
  rep["verified"] = out.verified;
  return out;
}

struct FactorOptions {
  int ordering = 0;
  double tol_rank = 1e-9;
  int grid = 64;
};

inline CliReport factor_report(const Model& model, const FactorOptions& opt) {
  const Pipeline pipe = make_pipeline(model, opt.tol_rank, opt.grid);
  const NormalizedFactor<double>& nf = pipe.nf;
  if (nf.sys.p() == nf.sys.m())
    throw InputError("no residual channels: the factor decomposition is trivial (p == m)");
  if (opt.ordering < 0 || static_cast<std::size_t>(opt.ordering) >= pipe.admissible.size())
    throw InputError("--ordering " + std::to_string(opt.ordering) + " out of range: " +
                     std::to_string(pipe.admissible.size()) + " admissible splits");
  const Partition<double>& part = pipe.admissible[static_cast<std::size_t>(opt.ordering)];
  const FResult<double> fr = build_F(nf, part);
  const RationalMatrix<double>* no_feedback = nullptr;
  const FactorModel<double> fm = factor_model(nf, part, fr.F, no_feedback, pipe.grid);

  CliReport out;
  json& rep = out.report;
  rep["model"] = model.name;
  rep["ordering"] = opt.ordering;
  rep["Wu"] = jrm(fm.Wu);
  rep["F"] = jrm(fr.F);
  rep["K"] = jrm(fm.K);
  rep["strictly_stable"] = fr.strictly_stable;
  rep["stacking_residual"] = jnum(fm.stacking_residual);
  out.verified = fm.stacking_residual < 1e-8;
  rep["verified"] = out.verified;
  return out;
}

}  // namespace lowrank

#pragma once

// Standard-form conic linear programs
//
//     min c'x   s.t.  A x = b,  x in K = K_1 x ... x K_p,
//     max b'y   s.t.  A'y + s = c,  s in K*,
//
// over free, nonnegative, second-order and PSD cones, solved with a
// primal-dual interior-point method on the homogeneous self-dual embedding
// (Nesterov-Todd scaling, Mehrotra predictor-corrector).
//
// PSD blocks use the scaled lower-triangle vectorization: column-major over
// the lower triangle, off-diagonal entries multiplied by sqrt(2), so the
// Euclidean inner product of two vectors equals the trace inner product.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseQR>
#include <Eigen/OrderingMethods>

#include "cptensor/errors.hpp"

namespace cptensor {

// ---------------------------------------------------------------------------
// Cones

enum class ConeKind { Free, NonNeg, SecondOrder, PsdTriangle };

inline int svec_dim(int side) { return side * (side + 1) / 2; }

/// Position of entry (i, j), i >= j, inside svec of a side x side matrix.
inline int svec_index(int i, int j, int side) {
  if (i < j) std::swap(i, j);
  return j * side - j * (j - 1) / 2 + (i - j);
}

struct ConeBlock {
  ConeKind kind = ConeKind::Free;
  int size = 0;  // dimension, or matrix side for PsdTriangle

  static ConeBlock free(int n) { return {ConeKind::Free, n}; }
  static ConeBlock nonneg(int n) { return {ConeKind::NonNeg, n}; }
  static ConeBlock second_order(int n) { return {ConeKind::SecondOrder, n}; }
  static ConeBlock psd(int side) { return {ConeKind::PsdTriangle, side}; }

  int dim() const { return kind == ConeKind::PsdTriangle ? svec_dim(size) : size; }
  /// Barrier degree: 0 for free, dim for NonNeg, 1 for SOC, side for PSD.
  int degree() const {
    switch (kind) {
      case ConeKind::Free: return 0;
      case ConeKind::NonNeg: return size;
      case ConeKind::SecondOrder: return 1;
      case ConeKind::PsdTriangle: return size;
    }
    return 0;
  }
  friend bool operator==(const ConeBlock&, const ConeBlock&) = default;
};

struct ConeSpec {
  std::vector<ConeBlock> blocks;

  int dim() const {
    int d = 0;
    for (const auto& b : blocks) d += b.dim();
    return d;
  }
  std::vector<int> offsets() const {
    std::vector<int> off;
    int o = 0;
    for (const auto& b : blocks) {
      off.push_back(o);
      o += b.dim();
    }
    return off;
  }
  int degree() const {
    int d = 0;
    for (const auto& b : blocks) d += b.degree();
    return d;
  }
};

inline Eigen::VectorXd svec(const Eigen::MatrixXd& m) {
  const int n = static_cast<int>(m.rows());
  Eigen::VectorXd v(svec_dim(n));
  int k = 0;
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) v(k++) = i == j ? m(i, j) : std::sqrt(2.0) * m(i, j);
  return v;
}

inline Eigen::MatrixXd smat(const Eigen::Ref<const Eigen::VectorXd>& v, int n) {
  detail::require(v.size() == svec_dim(n), "svec length does not match the matrix side");
  Eigen::MatrixXd m(n, n);
  int k = 0;
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) {
      const double x = i == j ? v(k) : v(k) / std::sqrt(2.0);
      m(i, j) = m(j, i) = x;
      ++k;
    }
  return m;
}

/// Membership of a vectorized point in one block, up to `tol`.
inline bool in_cone(const ConeBlock& blk, const Eigen::Ref<const Eigen::VectorXd>& x, double tol = 0.0) {
  switch (blk.kind) {
    case ConeKind::Free: return true;
    case ConeKind::NonNeg: return x.size() == 0 || x.minCoeff() >= -tol;
    case ConeKind::SecondOrder: return x(0) + tol >= x.tail(x.size() - 1).norm();
    case ConeKind::PsdTriangle: {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(smat(x, blk.size), Eigen::EigenvaluesOnly);
      return es.eigenvalues().size() == 0 || es.eigenvalues().minCoeff() >= -tol;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Problems and results

struct Triplet {
  int row = 0;
  int col = 0;
  double val = 0.0;
};

struct ConicProgram {
  int m = 0;  // number of equality rows
  Eigen::VectorXd c;
  Eigen::VectorXd b;
  std::vector<Triplet> A;
  ConeSpec cone;

  int n() const { return cone.dim(); }

  void validate() const {
    detail::require(c.size() == cone.dim(), "objective length must equal the cone dimension");
    detail::require(b.size() == m, "right-hand side length must equal the row count");
    for (const auto& t : A)
      detail::require(t.row >= 0 && t.row < m && t.col >= 0 && t.col < n(), "constraint triplet out of range");
    for (const auto& blk : cone.blocks) detail::require(blk.size >= 0, "negative cone size");
  }

  Eigen::SparseMatrix<double> matrix() const {
    Eigen::SparseMatrix<double> a(m, n());
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(A.size());
    for (const auto& e : A) t.emplace_back(e.row, e.col, e.val);
    a.setFromTriplets(t.begin(), t.end());
    a.makeCompressed();
    return a;
  }
};

enum class SolveStatus { Optimal, PrimalInfeasible, DualInfeasible, NumericalLimit };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::PrimalInfeasible: return "PrimalInfeasible";
    case SolveStatus::DualInfeasible: return "DualInfeasible";
    case SolveStatus::NumericalLimit: return "NumericalLimit";
  }
  return "?";
}

struct SolveOptions {
  double tol = 1e-8;
  int max_iter = 200;
  std::uint64_t seed = 0;  // the method is deterministic; kept for interface symmetry
  bool verbose = false;
};

struct SolveResult {
  SolveStatus status = SolveStatus::NumericalLimit;
  Eigen::VectorXd x, y, s;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  /// PrimalInfeasible: y with b'y = 1 and s = -A'y in K*.
  /// DualInfeasible: x in K with c'x = -1 and A x = 0.
  Eigen::VectorXd certificate;
  double primal_residual = 0.0;  // |Ax - b| / (1 + |b|)
  double dual_residual = 0.0;    // |A'y + s - c| / (1 + |c|)
  double gap = 0.0;              // |c'x - b'y| / (1 + |c'x|)
  double certificate_residual = 0.0;
  double initial_primal_residual = 0.0;
  double initial_dual_residual = 0.0;
  int iterations = 0;
};

// ---------------------------------------------------------------------------
// Interior-point internals

namespace detail {

/// Nesterov-Todd scaling of one non-free block, with the convention
/// W x = W^{-T} s = lambda.
struct BlockScaling {
  ConeBlock blk;
  int off = 0;
  Eigen::VectorXd lam;  // scaled point (vectorized)
  // NonNeg
  Eigen::VectorXd w;
  // SecondOrder: W = beta (2 v v' - J)
  double beta = 1.0;
  Eigen::VectorXd v;
  // PSD
  Eigen::MatrixXd R, Rinv, T;
  Eigen::VectorXd eig;  // diagonal of the scaled point

  static Eigen::VectorXd soc_J(Eigen::VectorXd u) {
    u.tail(u.size() - 1) *= -1.0;
    return u;
  }
  static double soc_det(const Eigen::VectorXd& u) { return u(0) * u(0) - u.tail(u.size() - 1).squaredNorm(); }

  Eigen::VectorXd soc_W(const Eigen::VectorXd& u) const {
    return beta * (2.0 * v.dot(u) * v - soc_J(u));
  }
  Eigen::VectorXd soc_Winv(const Eigen::VectorXd& u) const {
    const Eigen::VectorXd Jv = soc_J(v);
    return (2.0 * Jv.dot(u) * Jv - soc_J(u)) / beta;
  }

  static Eigen::MatrixXd factor(const Eigen::MatrixXd& m) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() == Eigen::Success) {
      Eigen::MatrixXd L = llt.matrixL();
      if (L.diagonal().minCoeff() > 0.0 && L.allFinite()) return L;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    const double floor = 1e-300 + 1e-30 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    Eigen::VectorXd d = es.eigenvalues().cwiseMax(floor).cwiseSqrt();
    return es.eigenvectors() * d.asDiagonal();
  }

  void update(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& s) {
    switch (blk.kind) {
      case ConeKind::Free: break;
      case ConeKind::NonNeg:
        w = (s.array() / x.array()).sqrt();
        lam = (s.array() * x.array()).sqrt();
        break;
      case ConeKind::SecondOrder: {
        const double xd = std::sqrt(std::max(soc_det(x), 1e-300));
        const double sd = std::sqrt(std::max(soc_det(s), 1e-300));
        beta = std::sqrt(sd / xd);
        const Eigen::VectorXd xb = x / xd, sb = s / sd;
        const double gamma = std::sqrt(std::max((1.0 + xb.dot(sb)) / 2.0, 1e-300));
        Eigen::VectorXd wb = (sb + soc_J(xb)) / (2.0 * gamma);
        Eigen::VectorXd e = Eigen::VectorXd::Zero(x.size());
        e(0) = 1.0;
        v = (wb + e) / std::sqrt(2.0 * (wb(0) + 1.0));
        lam = soc_W(x);
        break;
      }
      case ConeKind::PsdTriangle: {
        const int n = blk.size;
        const Eigen::MatrixXd L1 = factor(smat(x, n));
        const Eigen::MatrixXd L2 = factor(smat(s, n));
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(L2.transpose() * L1, Eigen::ComputeFullU | Eigen::ComputeFullV);
        eig = svd.singularValues().cwiseMax(1e-300);
        const Eigen::VectorXd isq = eig.cwiseSqrt().cwiseInverse();
        R = L1 * svd.matrixV() * isq.asDiagonal();
        Rinv = isq.asDiagonal() * svd.matrixU().transpose() * L2.transpose();
        T = R * R.transpose();
        lam = svec(Eigen::MatrixXd(eig.asDiagonal()));
        break;
      }
    }
  }

  /// W dx
  Eigen::VectorXd apply_W(const Eigen::VectorXd& u) const {
    switch (blk.kind) {
      case ConeKind::NonNeg: return w.cwiseProduct(u);
      case ConeKind::SecondOrder: return soc_W(u);
      case ConeKind::PsdTriangle: return svec(Rinv * smat(u, blk.size) * Rinv.transpose());
      default: return u;
    }
  }
  /// W^{-T} ds
  Eigen::VectorXd apply_WinvT(const Eigen::VectorXd& u) const {
    switch (blk.kind) {
      case ConeKind::NonNeg: return u.cwiseQuotient(w);
      case ConeKind::SecondOrder: return soc_Winv(u);
      case ConeKind::PsdTriangle: return svec(R.transpose() * smat(u, blk.size) * R);
      default: return u;
    }
  }
  /// W' u
  Eigen::VectorXd apply_WT(const Eigen::VectorXd& u) const {
    switch (blk.kind) {
      case ConeKind::NonNeg: return w.cwiseProduct(u);
      case ConeKind::SecondOrder: return soc_W(u);
      case ConeKind::PsdTriangle: return svec(Rinv.transpose() * smat(u, blk.size) * Rinv);
      default: return u;
    }
  }
  /// H^{-1} u with H = W'W.
  Eigen::VectorXd apply_Hinv(const Eigen::VectorXd& u) const {
    switch (blk.kind) {
      case ConeKind::NonNeg: return u.cwiseQuotient(w.cwiseProduct(w));
      case ConeKind::SecondOrder: return soc_Winv(soc_Winv(u));
      case ConeKind::PsdTriangle: return svec(T * smat(u, blk.size) * T);
      default: return u;
    }
  }
  /// W^{-1} u
  Eigen::VectorXd apply_Winv(const Eigen::VectorXd& u) const {
    switch (blk.kind) {
      case ConeKind::NonNeg: return u.cwiseQuotient(w);
      case ConeKind::SecondOrder: return soc_Winv(u);
      case ConeKind::PsdTriangle: return svec(R * smat(u, blk.size) * R.transpose());
      default: return u;
    }
  }
  /// Dense H^{-1} for NonNeg and SOC blocks.
  Eigen::MatrixXd dense_Hinv() const {
    const int d = blk.dim();
    if (blk.kind == ConeKind::NonNeg) return Eigen::VectorXd(w.cwiseProduct(w).cwiseInverse()).asDiagonal();
    Eigen::MatrixXd h(d, d);
    for (int j = 0; j < d; ++j) h.col(j) = apply_Hinv(Eigen::VectorXd::Unit(d, j));
    return h;
  }

  /// lambda o u
  Eigen::VectorXd lam_prod(const Eigen::VectorXd& u) const { return jordan(lam, u); }

  /// lambda \ r (inverse of u -> lambda o u).
  Eigen::VectorXd lam_div(const Eigen::VectorXd& r) const {
    switch (blk.kind) {
      case ConeKind::NonNeg: return r.cwiseQuotient(lam);
      case ConeKind::SecondOrder: {
        const Eigen::Index k = r.size() - 1;
        const double l0 = lam(0);
        const double det = soc_det(lam);
        Eigen::VectorXd u(r.size());
        u(0) = (l0 * r(0) - lam.tail(k).dot(r.tail(k))) / det;
        u.tail(k) = (r.tail(k) - u(0) * lam.tail(k)) / l0;
        return u;
      }
      case ConeKind::PsdTriangle: {
        const int n = blk.size;
        Eigen::VectorXd u(r.size());
        int idx = 0;
        for (int j = 0; j < n; ++j)
          for (int i = j; i < n; ++i, ++idx) u(idx) = r(idx) * 2.0 / (eig(i) + eig(j));
        return u;
      }
      default: return r;
    }
  }

  Eigen::VectorXd jordan(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    switch (blk.kind) {
      case ConeKind::NonNeg: return a.cwiseProduct(b);
      case ConeKind::SecondOrder: {
        const Eigen::Index k = a.size() - 1;
        Eigen::VectorXd u(a.size());
        u(0) = a.dot(b);
        u.tail(k) = a(0) * b.tail(k) + b(0) * a.tail(k);
        return u;
      }
      case ConeKind::PsdTriangle: {
        const Eigen::MatrixXd A = smat(a, blk.size), B = smat(b, blk.size);
        return svec(0.5 * (A * B + B * A));
      }
      default: return a.cwiseProduct(b);
    }
  }

  Eigen::VectorXd identity() const {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(blk.dim());
    switch (blk.kind) {
      case ConeKind::NonNeg: e.setOnes(); break;
      case ConeKind::SecondOrder: e(0) = 1.0; break;
      case ConeKind::PsdTriangle:
        for (int j = 0; j < blk.size; ++j) e(svec_index(j, j, blk.size)) = 1.0;
        break;
      default: break;
    }
    return e;
  }

  /// Largest alpha with lam + alpha*d in the cone (+inf when unbounded).
  double max_step(const Eigen::VectorXd& d) const {
    const double inf = std::numeric_limits<double>::infinity();
    switch (blk.kind) {
      case ConeKind::NonNeg: {
        double a = inf;
        for (Eigen::Index i = 0; i < d.size(); ++i)
          if (d(i) < 0.0) a = std::min(a, -lam(i) / d(i));
        return a;
      }
      case ConeKind::SecondOrder: {
        const Eigen::Index k = d.size() - 1;
        const double qa = d(0) * d(0) - d.tail(k).squaredNorm();
        const double qb = lam(0) * d(0) - lam.tail(k).dot(d.tail(k));
        const double qc = std::max(soc_det(lam), 0.0);
        double a = inf;
        if (d(0) < 0.0) a = std::min(a, -lam(0) / d(0));
        // roots of qa t^2 + 2 qb t + qc = 0
        if (std::abs(qa) < 1e-300) {
          if (qb < 0.0) a = std::min(a, -qc / (2.0 * qb));
        } else {
          const double disc = qb * qb - qa * qc;
          if (disc >= 0.0) {
            const double sq = std::sqrt(disc);
            for (double t : {(-qb - sq) / qa, (-qb + sq) / qa})
              if (t > 0.0) a = std::min(a, t);
          }
        }
        return a;
      }
      case ConeKind::PsdTriangle: {
        const Eigen::VectorXd isq = eig.cwiseSqrt().cwiseInverse();
        const Eigen::MatrixXd m = isq.asDiagonal() * smat(d, blk.size) * isq.asDiagonal();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
        const double mn = es.eigenvalues().minCoeff();
        return mn < 0.0 ? -1.0 / mn : inf;
      }
      default: return inf;
    }
  }
};

/// Per-PSD-block sparse structure of A: for each row touching the block,
/// the list of (i, j, a) entries of smat(A_row restricted to the block).
struct PsdRowStructure {
  struct Entry {
    int i, j;
    double a;  // coefficient of the svec coordinate
  };
  std::vector<int> rows;
  std::vector<std::vector<Entry>> entries;
};

inline std::string program_text(const ConicProgram& p) {
  std::ostringstream os;
  os.precision(17);
  os << "# cptensor conic dump v1\n";
  os << "# min c'x s.t. Ax = b, x in K; PSD blocks use scaled lower-triangle column-major vectorization\n";
  os << "m " << p.m << " n " << p.n() << " nnz " << p.A.size() << "\n";
  os << "cones";
  for (const auto& blk : p.cone.blocks) {
    const char* tag = blk.kind == ConeKind::Free ? "F" : blk.kind == ConeKind::NonNeg ? "L" : blk.kind == ConeKind::SecondOrder ? "Q" : "S";
    os << ' ' << tag << ' ' << blk.size;
  }
  os << "\nA\n";
  for (const auto& t : p.A) os << t.row << ' ' << t.col << ' ' << t.val << '\n';
  os << "b\n";
  for (Eigen::Index i = 0; i < p.b.size(); ++i) os << p.b(i) << '\n';
  os << "c\n";
  for (Eigen::Index i = 0; i < p.c.size(); ++i) os << p.c(i) << '\n';
  return os.str();
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

inline void maybe_dump(const ConicProgram& p) {
  const char* dir = std::getenv("CPT_DUMP_DIR");
  if (dir == nullptr || *dir == '\0') return;
  const std::string text = program_text(p);
  std::ostringstream name;
  name << "cpt_" << std::hex << fnv1a(text) << ".txt";
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::ofstream out(std::filesystem::path(dir) / name.str());
  out << text;
}

class HsdeSolver {
 public:
  HsdeSolver(const ConicProgram& p, const SolveOptions& opt) : p_(p), opt_(opt) {}

  SolveResult run() {
    p_.validate();
    A0_ = p_.matrix();
    if (auto early = presolve()) return *early;
    setup_blocks();
    return iterate();
  }

 private:
  const ConicProgram& p_;
  SolveOptions opt_;
  Eigen::SparseMatrix<double> A0_;  // original
  Eigen::SparseMatrix<double> A_;   // presolved and scaled, column-major
  Eigen::VectorXd b_, c_;
  std::vector<int> kept_;  // presolved row -> original row
  Eigen::VectorXd D_;      // row scale of kept rows
  double sb_ = 1.0, sc_ = 1.0;
  std::vector<int> offs_;
  std::vector<BlockScaling> sc_blocks_;  // non-free blocks
  std::vector<int> free_cols_;
  std::vector<PsdRowStructure> psd_struct_;  // aligned with sc_blocks_ (empty for non-PSD)
  int nu_ = 0;

  // ---------------- presolve
  std::optional<SolveResult> presolve() {
    const int m = p_.m, n = p_.n();
    Eigen::SparseMatrix<double, Eigen::RowMajor> Ar = A0_;
    // Normalized row signature for duplicate detection.
    std::vector<std::pair<std::vector<std::pair<int, double>>, int>> sigs;
    std::vector<double> row_scale(static_cast<std::size_t>(m), 0.0);
    for (int i = 0; i < m; ++i) {
      std::vector<std::pair<int, double>> entries;
      double nrm = 0.0;
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Ar, i); it; ++it)
        if (it.value() != 0.0) {
          entries.emplace_back(static_cast<int>(it.col()), it.value());
          nrm += it.value() * it.value();
        }
      nrm = std::sqrt(nrm);
      if (nrm == 0.0) {
        if (p_.b(i) != 0.0) {
          SolveResult r;
          r.status = SolveStatus::PrimalInfeasible;
          r.y = Eigen::VectorXd::Zero(m);
          r.y(i) = 1.0 / p_.b(i);
          r.s = Eigen::VectorXd::Zero(n);
          r.x = Eigen::VectorXd::Zero(n);
          r.certificate = r.y;
          return r;
        }
        continue;
      }
      row_scale[static_cast<std::size_t>(i)] = 1.0 / nrm;
      const double lead = entries.front().second;
      for (auto& e : entries) e.second /= lead;
      sigs.emplace_back(std::move(entries), i);
    }
    std::sort(sigs.begin(), sigs.end(), [](const auto& a, const auto& b) {
      if (a.first.size() != b.first.size()) return a.first.size() < b.first.size();
      for (std::size_t k = 0; k < a.first.size(); ++k) {
        if (a.first[k].first != b.first[k].first) return a.first[k].first < b.first[k].first;
        if (a.first[k].second != b.first[k].second) return a.first[k].second < b.first[k].second;
      }
      return a.second < b.second;
    });
    std::vector<bool> keep(static_cast<std::size_t>(m), false);
    for (std::size_t k = 0; k < sigs.size(); ++k) {
      const int i = sigs[k].second;
      if (k > 0 && sigs[k].first == sigs[k - 1].first) {
        const int j = sigs[k - 1].second;  // rows i and j are parallel: A_i = (lead_i/lead_j) A_j
        const double lead_i = Ar.row(i).coeff(sigs[k].first.front().first);
        const double lead_j = Ar.row(j).coeff(sigs[k].first.front().first);
        const double ratio = lead_i / lead_j;
        const double bi = p_.b(i), bj = p_.b(j);
        if (std::abs(bi - ratio * bj) > 1e-12 * (1.0 + std::abs(bi))) {
          SolveResult r;
          r.status = SolveStatus::PrimalInfeasible;
          r.y = Eigen::VectorXd::Zero(m);
          const double val = bi - ratio * bj;
          r.y(i) = 1.0 / val;
          r.y(j) = -ratio / val;
          r.s = Eigen::VectorXd::Zero(n);
          r.x = Eigen::VectorXd::Zero(n);
          r.certificate = r.y;
          return r;
        }
        sigs[k].second = j;  // keep pointing to the representative
        continue;
      }
      keep[static_cast<std::size_t>(i)] = true;
    }
    for (int i = 0; i < m; ++i)
      if (keep[static_cast<std::size_t>(i)]) kept_.push_back(i);
    const int mk = static_cast<int>(kept_.size());
    D_.resize(mk);
    std::vector<Eigen::Triplet<double>> trip;
    b_.resize(mk);
    for (int r = 0; r < mk; ++r) {
      const int i = kept_[static_cast<std::size_t>(r)];
      D_(r) = row_scale[static_cast<std::size_t>(i)];
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Ar, i); it; ++it)
        trip.emplace_back(r, static_cast<int>(it.col()), it.value() * D_(r));
      b_(r) = p_.b(i) * D_(r);
    }
    A_.resize(mk, n);
    A_.setFromTriplets(trip.begin(), trip.end());
    A_.makeCompressed();
    sb_ = std::max(1.0, b_.size() ? b_.cwiseAbs().maxCoeff() : 0.0);
    sc_ = std::max(1.0, p_.c.size() ? p_.c.cwiseAbs().maxCoeff() : 0.0);
    b_ /= sb_;
    c_ = p_.c / sc_;
    return std::nullopt;
  }

  void setup_blocks() {
    offs_ = p_.cone.offsets();
    for (std::size_t k = 0; k < p_.cone.blocks.size(); ++k) {
      const auto& blk = p_.cone.blocks[k];
      if (blk.kind == ConeKind::Free) {
        for (int j = 0; j < blk.dim(); ++j) free_cols_.push_back(offs_[k] + j);
        continue;
      }
      if (blk.dim() == 0) continue;
      BlockScaling bs;
      bs.blk = blk;
      bs.off = offs_[k];
      sc_blocks_.push_back(bs);
      nu_ += blk.degree();
      PsdRowStructure st;
      if (blk.kind == ConeKind::PsdTriangle) {
        const int side = blk.size;
        std::vector<std::pair<int, int>> pos(static_cast<std::size_t>(blk.dim()));
        for (int j = 0; j < side; ++j)
          for (int i = j; i < side; ++i) pos[static_cast<std::size_t>(svec_index(i, j, side))] = {i, j};
        std::vector<int> row_slot(static_cast<std::size_t>(A_.rows()), -1);
        for (int col = 0; col < blk.dim(); ++col)
          for (Eigen::SparseMatrix<double>::InnerIterator it(A_, bs.off + col); it; ++it) {
            const int r = static_cast<int>(it.row());
            if (row_slot[static_cast<std::size_t>(r)] < 0) {
              row_slot[static_cast<std::size_t>(r)] = static_cast<int>(st.rows.size());
              st.rows.push_back(r);
              st.entries.emplace_back();
            }
            const auto [pi, pj] = pos[static_cast<std::size_t>(col)];
            st.entries[static_cast<std::size_t>(row_slot[static_cast<std::size_t>(r)])].push_back({pi, pj, it.value()});
          }
      }
      psd_struct_.push_back(std::move(st));
    }
  }

  // ---------------- helpers on stacked vectors
  Eigen::VectorXd seg(const Eigen::VectorXd& v, const BlockScaling& b) const { return v.segment(b.off, b.blk.dim()); }

  Eigen::VectorXd identity_vec() const {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(p_.n());
    for (const auto& b : sc_blocks_) e.segment(b.off, b.blk.dim()) = b.identity();
    return e;
  }

  Eigen::VectorXd apply_Hinv(const Eigen::VectorXd& u) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(u.size());
    for (const auto& b : sc_blocks_) out.segment(b.off, b.blk.dim()) = b.apply_Hinv(seg(u, b));
    return out;
  }

  Eigen::VectorXd apply_Winv(const Eigen::VectorXd& u) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(u.size());
    for (const auto& b : sc_blocks_) out.segment(b.off, b.blk.dim()) = b.apply_Winv(seg(u, b));
    return out;
  }

  Eigen::VectorXd apply_WinvT(const Eigen::VectorXd& u) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(u.size());
    for (const auto& b : sc_blocks_) out.segment(b.off, b.blk.dim()) = b.apply_WinvT(seg(u, b));
    return out;
  }

  Eigen::VectorXd apply_W(const Eigen::VectorXd& u) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(u.size());
    for (const auto& b : sc_blocks_) out.segment(b.off, b.blk.dim()) = b.apply_W(seg(u, b));
    return out;
  }

  /// Zero the free coordinates.
  Eigen::VectorXd conic_part(Eigen::VectorXd u) const {
    for (int j : free_cols_) u(j) = 0.0;
    return u;
  }

  // ---------------- KKT
  struct Kkt {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    Eigen::MatrixXd K;
    int m = 0, nf = 0;
  };

  Eigen::MatrixXd assemble_M() const {
    const int m = static_cast<int>(A_.rows());
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t k = 0; k < sc_blocks_.size(); ++k) {
      const auto& b = sc_blocks_[k];
      if (b.blk.kind != ConeKind::PsdTriangle) {
        const Eigen::SparseMatrix<double> Ab = A_.middleCols(b.off, b.blk.dim());
        const Eigen::MatrixXd H = b.dense_Hinv();
        const Eigen::MatrixXd AH = Ab * H;  // m x dim (dense)
        M.noalias() += AH * Ab.transpose();
        continue;
      }
      const auto& st = psd_struct_[k];
      const int side = b.blk.size;
      const double r2 = std::sqrt(2.0);
      const Eigen::MatrixXd& T = b.T;
      Eigen::MatrixXd P(side, side);
      for (std::size_t a = 0; a < st.rows.size(); ++a) {
        P.setZero();
        for (const auto& e : st.entries[a]) {
          if (e.i == e.j) {
            P.noalias() += e.a * T.col(e.i) * T.col(e.i).transpose();
          } else {
            const double v = e.a / r2;
            P.noalias() += v * (T.col(e.i) * T.col(e.j).transpose() + T.col(e.j) * T.col(e.i).transpose());
          }
        }
        const int ra = st.rows[a];
        for (std::size_t c = a; c < st.rows.size(); ++c) {
          double acc = 0.0;
          for (const auto& e : st.entries[c]) acc += e.i == e.j ? e.a * P(e.i, e.i) : r2 * e.a * P(e.i, e.j);
          const int rc = st.rows[c];
          M(ra, rc) += acc;
          if (rc != ra) M(rc, ra) += acc;
        }
      }
    }
    return M;
  }

  bool factor(Kkt& kkt) const {
    const int m = static_cast<int>(A_.rows());
    const int nf = static_cast<int>(free_cols_.size());
    kkt.m = m;
    kkt.nf = nf;
    kkt.K = Eigen::MatrixXd::Zero(m + nf, m + nf);
    kkt.K.topLeftCorner(m, m) = assemble_M();
    for (int j = 0; j < nf; ++j)
      for (Eigen::SparseMatrix<double>::InnerIterator it(A_, free_cols_[static_cast<std::size_t>(j)]); it; ++it) {
        kkt.K(it.row(), m + j) = it.value();
        kkt.K(m + j, it.row()) = it.value();
      }
    kkt.lu.compute(kkt.K);
    return true;
  }

  Eigen::VectorXd kkt_solve(const Kkt& kkt, const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd sol = kkt.lu.solve(rhs);
    for (int it = 0; it < 3; ++it) {
      const Eigen::VectorXd res = rhs - kkt.K * sol;
      if (!res.allFinite()) break;
      sol += kkt.lu.solve(res);
    }
    return sol;
  }

  struct Dir {
    Eigen::VectorXd dx, dy, ds;
    double dtau = 0.0, dkappa = 0.0;
  };

  /// Solves   A dx = r1,   A_c' dy - H dx_c = r2 (conic coordinates),
  ///          A_f' dy = r3 (free coordinates, carried inside r2)
  /// through the reduced saddle system. Iterative refinement works on the
  /// scaled unknown W dx_c, since H itself is too ill-conditioned near the
  /// optimum for its forward action to give a meaningful residual.
  void reduced_solve(const Kkt& kkt, const Eigen::VectorXd& r1, const Eigen::VectorXd& r2, Eigen::VectorXd& dy,
                     Eigen::VectorXd& dx) const {
    const int m = kkt.m, nf = kkt.nf;
    const Eigen::VectorXd r2s = apply_WinvT(conic_part(r2));
    dy = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd dxs = Eigen::VectorXd::Zero(p_.n());  // W dx on conic coordinates, dx on free ones
    Eigen::VectorXd e1 = r1, e2 = r2s;
    for (int j : free_cols_) e2(j) = r2(j);
    double err = e1.norm() + e2.norm();
    for (int pass = 0; pass < 4 && err > 0.0; ++pass) {
      Eigen::VectorXd rhs(m + nf);
      rhs.head(m) = e1 + A_ * apply_Winv(conic_part(e2));
      for (int j = 0; j < nf; ++j) rhs(m + j) = e2(free_cols_[static_cast<std::size_t>(j)]);
      const Eigen::VectorXd sol = kkt_solve(kkt, rhs);
      const Eigen::VectorXd cy = sol.head(m);
      Eigen::VectorXd cxs = apply_WinvT(conic_part(A_.transpose() * cy)) - conic_part(e2);
      for (int j = 0; j < nf; ++j) cxs(free_cols_[static_cast<std::size_t>(j)]) = sol(m + j);
      if (!all_finite(cy, cxs)) break;

      const Eigen::VectorXd ny = dy + cy, nxs = dxs + cxs;
      Eigen::VectorXd nx = apply_Winv(conic_part(nxs));
      for (int j : free_cols_) nx(j) = nxs(j);
      const Eigen::VectorXd aty = A_.transpose() * ny;
      Eigen::VectorXd n1 = r1 - A_ * nx;
      Eigen::VectorXd n2 = r2s - apply_WinvT(conic_part(aty)) + conic_part(nxs);
      for (int j : free_cols_) n2(j) = r2(j) - aty(j);
      const double nerr = n1.norm() + n2.norm();
      if (pass > 0 && !(nerr < 0.5 * err)) break;
      dy = ny;
      dxs = nxs;
      e1 = n1;
      e2 = n2;
      err = nerr;
    }
    dx = apply_Winv(conic_part(dxs));
    for (int j : free_cols_) dx(j) = dxs(j);
  }

  static bool all_finite(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.allFinite() && b.allFinite(); }

  /// Solves the Newton system for the given complementarity right-hand side
  /// (rc in scaled space, rtk for tau*kappa) and residual weight eta.
  Dir direction(const Kkt& kkt, double tau, double kappa, const Eigen::VectorXd& rp, const Eigen::VectorXd& rd,
                double rg, const Eigen::VectorXd& rc, double rtk, double eta, const Eigen::VectorXd& dy2,
                const Eigen::VectorXd& dx2) const {
    Eigen::VectorXd t = Eigen::VectorXd::Zero(p_.n());
    for (const auto& b : sc_blocks_) t.segment(b.off, b.blk.dim()) = b.apply_WT(b.lam_div(rc.segment(b.off, b.blk.dim())));
    // ds = t - H dx and A'dy + ds - c dtau = -eta rd give A_c'dy - H dx_c = -eta rd_c - t + c_c dtau.
    Eigen::VectorXd dy1, dx1;
    reduced_solve(kkt, -eta * rp, -eta * rd - t, dy1, dx1);
    Dir d;
    const double num = -eta * rg - c_.dot(dx1) + b_.dot(dy1) - rtk / tau;
    // c'dx2 - b'dy2 = -|W dx2|^2; the quadratic form keeps the sign exact.
    const Eigen::VectorXd wdx2 = apply_W(conic_part(dx2));
    const double den = -wdx2.squaredNorm() - kappa / tau;
    d.dtau = num / den;
    d.dkappa = (rtk - kappa * d.dtau) / tau;
    d.dy = dy1 + d.dtau * dy2;
    d.dx = dx1 + d.dtau * dx2;
    d.ds = conic_part(-eta * rd - A_.transpose() * d.dy + c_ * d.dtau);
    return d;
  }

  double step_length(const Dir& d, double tau, double kappa) const {
    double a = std::numeric_limits<double>::infinity();
    for (const auto& b : sc_blocks_) {
      a = std::min(a, b.max_step(b.apply_W(seg(d.dx, b))));
      a = std::min(a, b.max_step(b.apply_WinvT(seg(d.ds, b))));
    }
    if (d.dtau < 0.0) a = std::min(a, -tau / d.dtau);
    if (d.dkappa < 0.0) a = std::min(a, -kappa / d.dkappa);
    return a;
  }

  // ---------------- unscaled metrics
  struct Metrics {
    double pres, dres, gap, pobj, dobj;
    double pinf = std::numeric_limits<double>::infinity();
    double dinf = std::numeric_limits<double>::infinity();
    Eigen::VectorXd x, y, s;
  };

  Eigen::VectorXd unscale_y(const Eigen::VectorXd& yt) const {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(p_.m);
    for (std::size_t r = 0; r < kept_.size(); ++r) y(kept_[r]) = yt(static_cast<Eigen::Index>(r)) * D_(static_cast<Eigen::Index>(r)) * sc_;
    return y;
  }

  Metrics metrics(const Eigen::VectorXd& xt, const Eigen::VectorXd& yt, const Eigen::VectorXd& st, double tau) const {
    Metrics mt;
    const Eigen::VectorXd x = xt * sb_, y = unscale_y(yt), s = st * sc_;
    mt.x = x / tau;
    mt.y = y / tau;
    mt.s = s / tau;
    const double bn = p_.b.norm(), cn = p_.c.norm();
    mt.pres = (A0_ * mt.x - p_.b).norm() / (1.0 + bn);
    mt.dres = (A0_.transpose() * mt.y + mt.s - p_.c).norm() / (1.0 + cn);
    mt.pobj = p_.c.dot(mt.x);
    mt.dobj = p_.b.dot(mt.y);
    mt.gap = std::abs(mt.pobj - mt.dobj) / (1.0 + std::abs(mt.pobj));
    const double by = p_.b.dot(y);
    if (by > 0.0) {
      const Eigen::VectorXd r = A0_.transpose() * y + s;
      mt.pinf = r.norm() / by;
    }
    const double cx = p_.c.dot(x);
    if (cx < 0.0) mt.dinf = (A0_ * x).norm() / (-cx);
    return mt;
  }

  SolveResult iterate() {
    const int n = p_.n();
    const int m = static_cast<int>(A_.rows());
    Eigen::VectorXd x = identity_vec(), s = identity_vec(), y = Eigen::VectorXd::Zero(m);
    double tau = 1.0, kappa = 1.0;
    const Eigen::VectorXd e = identity_vec();

    SolveResult best;
    double best_merit = std::numeric_limits<double>::infinity();
    SolveResult res;
    int small_steps = 0;

    for (int iter = 0; iter <= opt_.max_iter; ++iter) {
      const Eigen::VectorXd rp = A_ * x - b_ * tau;
      const Eigen::VectorXd rd = A_.transpose() * y + s - c_ * tau;
      const double rg = c_.dot(x) - b_.dot(y) + kappa;

      const Metrics mt = metrics(x, y, s, tau);
      if (iter == 0) {
        res.initial_primal_residual = mt.pres;
        res.initial_dual_residual = mt.dres;
      }
      if (opt_.verbose)
        std::fprintf(stderr, "it %3d pres %.2e dres %.2e gap %.2e pobj %.6e dobj %.6e tau %.2e kap %.2e\n", iter,
                     mt.pres, mt.dres, mt.gap, mt.pobj, mt.dobj, tau, kappa);
      if (!(std::isfinite(mt.pres) && std::isfinite(mt.dres) && std::isfinite(mt.gap))) break;

      const double merit = std::max({mt.pres, mt.dres, mt.gap});
      if (merit < best_merit) {
        best_merit = merit;
        fill(best, mt, SolveStatus::NumericalLimit, iter);
      }
      if (mt.pres <= opt_.tol && mt.dres <= opt_.tol && mt.gap <= opt_.tol) {
        fill(res, mt, SolveStatus::Optimal, iter);
        return res;
      }
      if (mt.pinf <= opt_.tol) return infeasible(res, x, y, s, SolveStatus::PrimalInfeasible, iter);
      if (mt.dinf <= opt_.tol) return infeasible(res, x, y, s, SolveStatus::DualInfeasible, iter);
      if (iter == opt_.max_iter) break;

      // scaling
      for (auto& b : sc_blocks_) b.update(seg(x, b), seg(s, b));
      const double mu = (conic_part(x).dot(conic_part(s)) + tau * kappa) / (nu_ + 1);

      Kkt kkt;
      factor(kkt);
      // tau-coefficient system: A dx = b, A_c'dy - H dx_c = c_c, A_f'dy = c_f
      Eigen::VectorXd dy2, dx2;
      reduced_solve(kkt, b_, c_, dy2, dx2);

      // predictor
      Eigen::VectorXd lamlam = Eigen::VectorXd::Zero(n);
      for (const auto& b : sc_blocks_) lamlam.segment(b.off, b.blk.dim()) = b.lam_prod(b.lam);
      const Dir da = direction(kkt, tau, kappa, rp, rd, rg, -lamlam, -tau * kappa, 1.0, dy2, dx2);
      const double aa = std::min(1.0, step_length(da, tau, kappa));
      const double sigma = std::clamp(std::pow(1.0 - aa, 3), 0.0, 1.0);

      // corrector
      Eigen::VectorXd rc = -lamlam + sigma * mu * e;
      for (const auto& b : sc_blocks_)
        rc.segment(b.off, b.blk.dim()) -= b.jordan(b.apply_WinvT(seg(da.ds, b)), b.apply_W(seg(da.dx, b)));
      const double rtk = -tau * kappa - da.dtau * da.dkappa + sigma * mu;
      const Dir d = direction(kkt, tau, kappa, rp, rd, rg, rc, rtk, 1.0 - sigma, dy2, dx2);
      const double amax = step_length(d, tau, kappa);
      const double alpha = std::min(1.0, 0.99 * amax);
      if (!std::isfinite(alpha) || !d.dx.allFinite() || !d.dy.allFinite() || !d.ds.allFinite()) break;
      if (opt_.verbose) {
        const double e1 = (A_ * d.dx - b_ * d.dtau + (1.0 - sigma) * rp).norm();
        const double e2 = (A_.transpose() * d.dy + d.ds - c_ * d.dtau + (1.0 - sigma) * rd).norm();
        const double e3 = c_.dot(d.dx) - b_.dot(d.dy) + d.dkappa + (1.0 - sigma) * rg;
        std::fprintf(stderr, "   alpha %.3e aff %.3e sigma %.2e mu %.2e newton res %.1e %.1e %.1e rcond %.1e\n", alpha, aa, sigma, mu, e1, e2, e3, kkt.lu.rcond());
      }

      x += alpha * d.dx;
      y += alpha * d.dy;
      s += alpha * d.ds;
      tau += alpha * d.dtau;
      kappa += alpha * d.dkappa;
      res.iterations = iter + 1;
      best.iterations = iter + 1;

      small_steps = alpha < 1e-7 ? small_steps + 1 : 0;
      if (small_steps >= 3) break;
    }
    best.status = SolveStatus::NumericalLimit;
    best.initial_primal_residual = res.initial_primal_residual;
    best.initial_dual_residual = res.initial_dual_residual;
    return best;
  }

  static void fill(SolveResult& r, const Metrics& mt, SolveStatus st, int iter) {
    r.status = st;
    r.x = mt.x;
    r.y = mt.y;
    r.s = mt.s;
    r.primal_objective = mt.pobj;
    r.dual_objective = mt.dobj;
    r.primal_residual = mt.pres;
    r.dual_residual = mt.dres;
    r.gap = mt.gap;
    r.iterations = iter;
  }

  SolveResult infeasible(SolveResult& r, const Eigen::VectorXd& xt, const Eigen::VectorXd& yt, const Eigen::VectorXd& st,
                         SolveStatus status, int iter) const {
    r.status = status;
    r.iterations = iter;
    const Eigen::VectorXd x = xt * sb_, y = unscale_y(yt), s = st * sc_;
    if (status == SolveStatus::PrimalInfeasible) {
      const double by = p_.b.dot(y);
      r.y = y / by;
      r.s = s / by;
      r.x = Eigen::VectorXd::Zero(p_.n());
      r.certificate = r.y;
      r.certificate_residual = (A0_.transpose() * r.y + r.s).norm();
    } else {
      const double cx = -p_.c.dot(x);
      r.x = x / cx;
      r.y = Eigen::VectorXd::Zero(p_.m);
      r.s = Eigen::VectorXd::Zero(p_.n());
      r.certificate = r.x;
      r.certificate_residual = (A0_ * r.x).norm();
    }
    return r;
  }
};

/// Linearly dependent free columns make the Newton system singular. They
/// are removed before the solve (their x stays 0); a dependent column whose
/// cost disagrees with the combination it equals makes A'y + s = c
/// unsolvable on the free part, which is reported through a ray directly.
class FreeColumnReduction {
 public:
  explicit FreeColumnReduction(const ConicProgram& p) : p_(p) {
    const auto off = p.cone.offsets();
    std::vector<int> free;
    for (std::size_t k = 0; k < p.cone.blocks.size(); ++k)
      if (p.cone.blocks[k].kind == ConeKind::Free)
        for (int j = 0; j < p.cone.blocks[k].dim(); ++j) free.push_back(off[k] + j);
    if (free.size() < 2 || p.m == 0) return;

    const Eigen::SparseMatrix<double> A = p.matrix();
    Eigen::SparseMatrix<double> Af(p.m, static_cast<Eigen::Index>(free.size()));
    {
      std::vector<Eigen::Triplet<double>> t;
      for (std::size_t j = 0; j < free.size(); ++j)
        for (Eigen::SparseMatrix<double>::InnerIterator it(A, free[j]); it; ++it)
          t.emplace_back(static_cast<int>(it.row()), static_cast<int>(j), it.value());
      Af.setFromTriplets(t.begin(), t.end());
      Af.makeCompressed();
    }
    double scale = 0.0;
    for (Eigen::Index j = 0; j < Af.cols(); ++j) scale = std::max(scale, Af.col(j).norm());
    if (scale == 0.0) return;
    Eigen::SparseQR<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> qr;
    qr.setPivotThreshold(1e-10 * scale);
    qr.compute(Af);
    if (qr.info() != Eigen::Success) return;
    const Eigen::Index rank = qr.rank();
    if (rank == Af.cols()) return;

    std::vector<bool> keep(free.size(), false);
    for (Eigen::Index r = 0; r < rank; ++r) keep[static_cast<std::size_t>(qr.colsPermutation().indices()(r))] = true;
    std::vector<int> kept_free, dropped_free;
    for (std::size_t j = 0; j < free.size(); ++j) (keep[j] ? kept_free : dropped_free).push_back(static_cast<int>(j));

    // Express each dropped column through the kept ones (dense least squares
    // on the small kept block) and compare costs.
    Eigen::MatrixXd K(p.m, static_cast<Eigen::Index>(kept_free.size()));
    for (std::size_t j = 0; j < kept_free.size(); ++j) K.col(static_cast<Eigen::Index>(j)) = Af.col(kept_free[j]);
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> kqr(K);
    Eigen::VectorXd ck(static_cast<Eigen::Index>(kept_free.size()));
    for (std::size_t j = 0; j < kept_free.size(); ++j) ck(static_cast<Eigen::Index>(j)) = p.c(free[static_cast<std::size_t>(kept_free[j])]);
    for (int jd : dropped_free) {
      const Eigen::VectorXd col = Af.col(jd);
      const Eigen::VectorXd a = kqr.solve(col);
      if ((K * a - col).norm() > 1e-8 * (1.0 + col.norm())) return;  // not numerically dependent after all
      const double cj = p.c(free[static_cast<std::size_t>(jd)]);
      const double mismatch = cj - ck.dot(a);
      if (std::abs(mismatch) > 1e-9 * (1.0 + std::abs(cj) + ck.cwiseAbs().dot(a.cwiseAbs()))) {
        ray_ = Eigen::VectorXd::Zero(p.n());
        ray_->coeffRef(free[static_cast<std::size_t>(jd)]) = 1.0;
        for (std::size_t j = 0; j < kept_free.size(); ++j)
          ray_->coeffRef(free[static_cast<std::size_t>(kept_free[j])]) = -a(static_cast<Eigen::Index>(j));
        *ray_ /= -mismatch;  // c'ray = -1
        return;
      }
    }

    // Reduced program.
    std::vector<bool> drop(static_cast<std::size_t>(p.n()), false);
    for (int jd : dropped_free) drop[static_cast<std::size_t>(free[static_cast<std::size_t>(jd)])] = true;
    new_index_.assign(static_cast<std::size_t>(p.n()), -1);
    int next = 0;
    for (int j = 0; j < p.n(); ++j)
      if (!drop[static_cast<std::size_t>(j)]) new_index_[static_cast<std::size_t>(j)] = next++;
    reduced_.m = p.m;
    reduced_.b = p.b;
    reduced_.c.resize(next);
    for (int j = 0; j < p.n(); ++j)
      if (new_index_[static_cast<std::size_t>(j)] >= 0) reduced_.c(new_index_[static_cast<std::size_t>(j)]) = p.c(j);
    for (const auto& t : p.A)
      if (new_index_[static_cast<std::size_t>(t.col)] >= 0) reduced_.A.push_back({t.row, new_index_[static_cast<std::size_t>(t.col)], t.val});
    for (std::size_t k = 0; k < p.cone.blocks.size(); ++k) {
      ConeBlock blk = p.cone.blocks[k];
      if (blk.kind == ConeKind::Free) {
        int kept = 0;
        for (int j = 0; j < blk.dim(); ++j) kept += drop[static_cast<std::size_t>(off[k] + j)] ? 0 : 1;
        blk = ConeBlock::free(kept);
      }
      reduced_.cone.blocks.push_back(blk);
    }
    active_ = true;
  }

  bool active() const { return active_; }
  const ConicProgram& reduced() const { return reduced_; }

  std::optional<SolveResult> inconsistent() const {
    if (!ray_) return std::nullopt;
    SolveResult r;
    r.status = SolveStatus::DualInfeasible;
    r.x = *ray_;
    r.y = Eigen::VectorXd::Zero(p_.m);
    r.s = Eigen::VectorXd::Zero(p_.n());
    r.certificate = r.x;
    r.certificate_residual = (p_.matrix() * r.x).norm();
    return r;
  }

  SolveResult expand(SolveResult r) const {
    auto lift = [&](const Eigen::VectorXd& v) {
      if (v.size() != reduced_.n()) return v;
      Eigen::VectorXd out = Eigen::VectorXd::Zero(p_.n());
      for (int j = 0; j < p_.n(); ++j)
        if (new_index_[static_cast<std::size_t>(j)] >= 0) out(j) = v(new_index_[static_cast<std::size_t>(j)]);
      return out;
    };
    r.x = lift(r.x);
    if (r.status == SolveStatus::DualInfeasible) r.certificate = lift(r.certificate);
    if (r.s.size() == reduced_.n()) {
      Eigen::VectorXd s = lift(r.s);
      if (r.y.size() == p_.m) {
        const Eigen::VectorXd full = p_.c - p_.matrix().transpose() * r.y;
        const double sgn = r.status == SolveStatus::PrimalInfeasible ? 0.0 : 1.0;  // rays have c-part 0
        const Eigen::VectorXd ray_part = -(p_.matrix().transpose() * r.y);
        for (int j = 0; j < p_.n(); ++j)
          if (new_index_[static_cast<std::size_t>(j)] < 0) s(j) = sgn > 0 ? full(j) : ray_part(j);
      }
      r.s = s;
    }
    return r;
  }

 private:
  const ConicProgram& p_;
  ConicProgram reduced_;
  std::vector<int> new_index_;
  std::optional<Eigen::VectorXd> ray_;
  bool active_ = false;
};

}  // namespace detail

/// Solves a standard-form conic program. Never throws on numerical trouble:
/// that is reported as NumericalLimit with the best iterate seen.
inline SolveResult solve(const ConicProgram& p, const SolveOptions& opt = {}) {
  detail::require(opt.tol >= 1e-12 && opt.tol <= 1e-2, "tolerance must lie in [1e-12, 1e-2]");
  detail::require(opt.max_iter >= 1, "max_iter must be positive");
  p.validate();
  detail::maybe_dump(p);
  const detail::FreeColumnReduction red(p);
  if (auto ray = red.inconsistent()) return *ray;
  if (!red.active()) return detail::HsdeSolver(p, opt).run();
  return red.expand(detail::HsdeSolver(red.reduced(), opt).run());
}

/// Dual slack of each PSD block as a symmetric matrix (block order).
inline std::vector<Eigen::MatrixXd> dual_weighted_sum(const SolveResult& r, const ConicProgram& p) {
  if (r.status != SolveStatus::Optimal) throw DomainError("dual slacks requested for a non-optimal result");
  std::vector<Eigen::MatrixXd> out;
  const auto off = p.cone.offsets();
  for (std::size_t k = 0; k < p.cone.blocks.size(); ++k)
    if (p.cone.blocks[k].kind == ConeKind::PsdTriangle)
      out.push_back(smat(r.s.segment(off[k], p.cone.blocks[k].dim()), p.cone.blocks[k].size));
  return out;
}

/// Primal value of each PSD block as a symmetric matrix (block order).
inline std::vector<Eigen::MatrixXd> primal_psd_blocks(const Eigen::VectorXd& x, const ConicProgram& p) {
  std::vector<Eigen::MatrixXd> out;
  const auto off = p.cone.offsets();
  for (std::size_t k = 0; k < p.cone.blocks.size(); ++k)
    if (p.cone.blocks[k].kind == ConeKind::PsdTriangle)
      out.push_back(smat(x.segment(off[k], p.cone.blocks[k].dim()), p.cone.blocks[k].size));
  return out;
}

// ---------------------------------------------------------------------------
// Dual-form builder
//
// Problems stated over a decision vector y ("maximize b'y subject to affine
// cone constraints in y") map to the dual side of a standard-form program:
// each cone constraint F0 + sum_i y_i F_i in K becomes a primal block with
// c = F0 and A-column entries -F_i, and each equality a'y = r becomes a free
// primal column with A-column a and cost r.

class DualFormBuilder {
 public:
  explicit DualFormBuilder(int nvars) : m_(nvars), b_(Eigen::VectorXd::Zero(nvars)) {}

  int nvars() const { return m_; }
  /// Maximize obj'y (accumulates).
  void add_objective(int var, double coeff) { b_(var) += coeff; }

  /// sum_k coeffs[k].second * y_{coeffs[k].first} = rhs.
  int add_equality(const std::vector<std::pair<int, double>>& coeffs, double rhs) {
    const int col = next_col();
    for (const auto& [v, a] : coeffs) push(v, col, a);
    free_c_.push_back(rhs);
    free_cols_.push_back(static_cast<int>(free_c_.size()) - 1);
    eq_cols_.push_back(col);
    return static_cast<int>(free_c_.size()) - 1;
  }

  /// Affine cone constraint: constant vector f0 (length blk.dim()) plus the
  /// listed (var, coordinate, value) terms must lie in blk.
  struct Term {
    int var;
    int coord;
    double val;
  };
  int add_block(const ConeBlock& blk, const Eigen::VectorXd& f0, const std::vector<Term>& terms) {
    detail::require(blk.kind != ConeKind::Free, "free blocks are not cone constraints");
    detail::require(f0.size() == blk.dim(), "constant vector length must match the block");
    blocks_.push_back({blk, f0, terms});
    return static_cast<int>(blocks_.size()) - 1;
  }

  /// Standard-form program: free columns first (one per equality, in order),
  /// then cone blocks in insertion order.
  ConicProgram build() const {
    ConicProgram p;
    p.m = m_;
    p.b = b_;
    const int nf = static_cast<int>(free_c_.size());
    if (nf > 0) p.cone.blocks.push_back(ConeBlock::free(nf));
    for (const auto& bk : blocks_) p.cone.blocks.push_back(bk.blk);
    p.c = Eigen::VectorXd::Zero(p.cone.dim());
    for (int j = 0; j < nf; ++j) p.c(j) = free_c_[static_cast<std::size_t>(j)];
    for (const auto& t : eq_trip_) p.A.push_back(t);
    int off = nf;
    for (const auto& bk : blocks_) {
      p.c.segment(off, bk.blk.dim()) = bk.f0;
      for (const auto& t : bk.terms) p.A.push_back({t.var, off + t.coord, -t.val});
      off += bk.blk.dim();
    }
    return p;
  }

  /// Offset of the cone block `k` inside the primal vector of build().
  int block_offset(int k) const {
    int off = static_cast<int>(free_c_.size());
    for (int i = 0; i < k; ++i) off += blocks_[static_cast<std::size_t>(i)].blk.dim();
    return off;
  }
  int equality_count() const { return static_cast<int>(free_c_.size()); }

 private:
  struct Block {
    ConeBlock blk;
    Eigen::VectorXd f0;
    std::vector<Term> terms;
  };
  int next_col() const { return static_cast<int>(free_c_.size()); }
  void push(int var, int col, double a) {
    detail::require(var >= 0 && var < m_, "variable index out of range");
    if (a != 0.0) eq_trip_.push_back({var, col, a});
  }

  int m_;
  Eigen::VectorXd b_;
  std::vector<double> free_c_;
  std::vector<int> free_cols_;
  std::vector<int> eq_cols_;
  std::vector<Triplet> eq_trip_;
  std::vector<Block> blocks_;
};

}  // namespace cptensor

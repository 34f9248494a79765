#pragma once

// Moment and localizing matrices, the simplex relaxation cone, flat
// truncation and atom extraction from flat moment sequences.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "cptensor/dehom.hpp"
#include "cptensor/polycore.hpp"

namespace cptensor {

/// One localizing block L_q^{(k)}[z]: rows and columns are indexed by the
/// monomials of degree <= k - ceil(deg q / 2), and every entry is a fixed
/// linear functional of z.
struct LocalizingSpec {
  struct Entry {
    int row;
    int col;
    std::int64_t tms_index;
    double coeff;
  };

  Polynomial q;
  int k = 0;
  int order = 0;
  std::vector<PowerIndex> basis;

  int nvars() const { return q.nvars(); }
  int side() const { return static_cast<int>(basis.size()); }

  /// Upper-triangle (row <= col) contributions, one per term of q.
  std::vector<Entry> entries() const {
    std::vector<Entry> out;
    for (int r = 0; r < side(); ++r)
      for (int c = r; c < side(); ++c) {
        const PowerIndex rc = basis[r] + basis[c];
        for (const auto& [a, coef] : q.terms()) out.push_back({r, c, rank_upto(a + rc), coef});
      }
    return out;
  }

  Eigen::MatrixXd evaluate(const Tms& z) const {
    detail::require(z.nvars == nvars(), "tms variable count mismatch");
    detail::require(z.deg >= 2 * k, "tms degree too small for this relaxation order");
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(side(), side());
    for (const auto& e : entries()) m(e.row, e.col) += e.coeff * z.values[static_cast<std::size_t>(e.tms_index)];
    return m.selfadjointView<Eigen::Upper>();
  }
};

inline int ceil_half(int v) { return (v + 1) / 2; }

inline LocalizingSpec make_localizing(const Polynomial& q, int k) {
  detail::require(!q.is_zero(), "localizing polynomial must be nonzero");
  detail::require(q.degree() <= 2 * k, "localizing polynomial degree exceeds 2k");
  LocalizingSpec spec;
  spec.q = q;
  spec.k = k;
  spec.order = k - ceil_half(q.degree());
  spec.basis = monomials_upto(q.nvars(), spec.order);
  return spec;
}

/// M_k[z], entry (alpha, beta) = z_{alpha+beta}.
inline Eigen::MatrixXd moment_matrix(const Tms& z, int k) {
  detail::require(k >= 0, "negative order");
  if (z.deg < 2 * k) throw StructuralError("tms degree too small for the moment matrix order");
  return make_localizing(Polynomial::constant(z.nvars, 1.0), k).evaluate(z);
}

/// L_q^{(k)}[z]; satisfies <q a^2, z> = vec(a)' L vec(a) for deg(q a^2) <= 2k.
inline Eigen::MatrixXd localizing_matrix(const Polynomial& q, const Tms& z, int k) {
  if (z.deg < 2 * k) throw StructuralError("tms degree too small for the localizing order");
  return make_localizing(q, k).evaluate(z);
}

/// Blocks whose joint positive semidefiniteness defines S[Delta-bar]_{2k}:
/// M_k, L_{x_i} (i = 1..nbar), L_{1-e'x}, L_{1-|x|^2}.
inline std::vector<LocalizingSpec> cone_constraints_simplex(int n, int k) {
  detail::require(n >= 2 && k >= 1, "simplex cone needs n >= 2 and k >= 1");
  const SimplexDescription simplex(n - 1);
  std::vector<LocalizingSpec> out;
  out.push_back(make_localizing(Polynomial::constant(n - 1, 1.0), k));
  for (const auto& g : simplex.constraints()) out.push_back(make_localizing(g, k));
  return out;
}

// ---------------------------------------------------------------------------
// Flat truncation

struct FlatReport {
  int t = 0;
  int rank_prev = 0;  // rank M_{t-1}
  int rank = 0;       // rank M_t
  std::vector<double> singular_prev;
  std::vector<double> singular;
  double tau = 0.0;   // relative rank threshold used
  bool flat = false;
};

/// Singular values of a symmetric matrix, descending.
inline std::vector<double> symmetric_singular_values(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  std::vector<double> sv;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) sv.push_back(std::abs(es.eigenvalues()(i)));
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

/// Count of sigma_i > tau * max(sigma_1, 1).
inline int numerical_rank(const std::vector<double>& sv, double tau) {
  const double cut = tau * std::max(sv.empty() ? 0.0 : sv.front(), 1.0);
  return static_cast<int>(std::count_if(sv.begin(), sv.end(), [cut](double s) { return s > cut; }));
}

inline FlatReport flat_truncation(const Tms& z, int t, double tau = 1e-6) {
  detail::require(t >= 1, "flat truncation needs t >= 1");
  if (z.deg < 2 * t) throw StructuralError("tms degree too small for flat truncation order");
  FlatReport rep;
  rep.t = t;
  rep.tau = tau;
  rep.singular_prev = symmetric_singular_values(moment_matrix(z, t - 1));
  rep.singular = symmetric_singular_values(moment_matrix(z, t));
  rep.rank_prev = numerical_rank(rep.singular_prev, tau);
  rep.rank = numerical_rank(rep.singular, tau);
  rep.flat = rep.rank == rep.rank_prev;
  return rep;
}

// ---------------------------------------------------------------------------
// Atom extraction

/// Recovers the r-atomic measure sum_j weight_j delta_{v_j} behind a flat
/// truncation z|_{2t}: rank-r factor of M_t, monomial basis of degree <= t-1,
/// multiplication matrices, a random convex combination and its real Schur
/// form, then least-squares weights over all moments of degree <= 2t.
inline std::vector<Atom> extract_atoms(const Tms& z, int t, int r, std::uint64_t seed = 20231,
                                       double weight_tol = 1e-6) {
  detail::require(t >= 1 && r >= 0, "extraction needs t >= 1 and r >= 0");
  if (z.deg < 2 * t) throw StructuralError("tms degree too small for extraction order");
  if (r == 0) return {};
  const int nv = z.nvars;
  const auto rows = monomials_upto(nv, t);
  const int s = static_cast<int>(rows.size());
  const int s_prev = static_cast<int>(count_upto(nv, t - 1));
  if (r > s_prev) throw ExtractionError("rank exceeds the size of M_{t-1}");

  // (1) M_t ~ V V'
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(moment_matrix(z, t));
  Eigen::MatrixXd V(s, r);
  for (int j = 0; j < r; ++j) {
    const Eigen::Index col = s - 1 - j;
    V.col(j) = es.eigenvectors().col(col) * std::sqrt(std::max(es.eigenvalues()(col), 0.0));
  }

  // (2) basis rows among degree <= t-1, greedy by largest residual norm
  std::vector<int> basis;
  {
    Eigen::MatrixXd R = V.topRows(s_prev);
    std::vector<bool> used(static_cast<std::size_t>(s_prev), false);
    const double scale = std::max(R.rowwise().norm().maxCoeff(), 1e-300);
    for (int j = 0; j < r; ++j) {
      int best = -1;
      double best_norm = 0.0;
      for (int i = 0; i < s_prev; ++i) {
        if (used[static_cast<std::size_t>(i)]) continue;
        const double nrm = R.row(i).norm();
        if (nrm > best_norm) {
          best_norm = nrm;
          best = i;
        }
      }
      if (best < 0 || best_norm <= 1e-9 * scale) throw ExtractionError("moment basis is rank deficient");
      used[static_cast<std::size_t>(best)] = true;
      basis.push_back(best);
      const Eigen::RowVectorXd q = R.row(best) / best_norm;
      R -= (R * q.transpose()) * q;
    }
    std::sort(basis.begin(), basis.end());
  }

  // (3) U = V V(B,:)^{-1}, so U(B,:) = I
  Eigen::MatrixXd VB(r, r);
  for (int j = 0; j < r; ++j) VB.row(j) = V.row(basis[static_cast<std::size_t>(j)]);
  const Eigen::MatrixXd U = VB.transpose().partialPivLu().solve(V.transpose()).transpose();

  // (4) multiplication matrices
  std::vector<Eigen::MatrixXd> mult(static_cast<std::size_t>(nv), Eigen::MatrixXd(r, r));
  for (int i = 0; i < nv; ++i) {
    for (int j = 0; j < r; ++j) {
      const PowerIndex shifted = rows[static_cast<std::size_t>(basis[static_cast<std::size_t>(j)])] +
                                 PowerIndex::unit(nv, i);
      mult[static_cast<std::size_t>(i)].row(j) = U.row(static_cast<Eigen::Index>(rank_upto(shifted)));
    }
  }

  // (5) random convex combination and its real Schur form
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unif(0.1, 1.0);
  std::vector<double> c(static_cast<std::size_t>(nv));
  double csum = 0.0;
  for (double& ci : c) csum += (ci = unif(gen));
  Eigen::MatrixXd N = Eigen::MatrixXd::Zero(r, r);
  for (int i = 0; i < nv; ++i) N += (c[static_cast<std::size_t>(i)] / csum) * mult[static_cast<std::size_t>(i)];
  Eigen::RealSchur<Eigen::MatrixXd> schur(N);
  if (schur.info() != Eigen::Success) throw ExtractionError("real Schur decomposition failed");
  const Eigen::MatrixXd& T = schur.matrixT();
  const double tscale = std::max(T.cwiseAbs().maxCoeff(), 1.0);
  for (int j = 0; j + 1 < r; ++j)
    if (std::abs(T(j + 1, j)) > 1e-10 * tscale) throw ExtractionError("complex conjugate atoms in Schur form");
  const Eigen::MatrixXd& Q = schur.matrixU();

  // (6) atom coordinates
  std::vector<Atom> atoms(static_cast<std::size_t>(r));
  for (int j = 0; j < r; ++j) {
    auto& pt = atoms[static_cast<std::size_t>(j)].point;
    pt.resize(static_cast<std::size_t>(nv));
    for (int i = 0; i < nv; ++i)
      pt[static_cast<std::size_t>(i)] = Q.col(j).dot(mult[static_cast<std::size_t>(i)] * Q.col(j));
  }

  // (7) weights by least squares on all moments of degree <= 2t
  const Tms target = z.truncated(2 * t);
  Eigen::MatrixXd Vand(static_cast<Eigen::Index>(target.size()), r);
  for (int j = 0; j < r; ++j) {
    const auto mv = monomial_vector(atoms[static_cast<std::size_t>(j)].point, 2 * t);
    Vand.col(j) = Eigen::Map<const Eigen::VectorXd>(mv.data(), static_cast<Eigen::Index>(mv.size()));
  }
  const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(target.values.data(),
                                                                static_cast<Eigen::Index>(target.size()));
  const Eigen::VectorXd w = Vand.colPivHouseholderQr().solve(rhs);
  const double wcut = weight_tol * std::max(1.0, std::abs(z.values[0]));
  for (int j = 0; j < r; ++j) atoms[static_cast<std::size_t>(j)].weight = w(j) < wcut ? 0.0 : w(j);

  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.point > b.point; });
  return atoms;
}

}  // namespace cptensor

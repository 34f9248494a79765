#pragma once

// Algorithms on completely positive tensors built from the dehomogenized
// moment relaxations: membership with decomposition, linear conic
// optimization over the CP cone (with approximation and completion
// builders), the non-dehomogenized baseline relaxation and a copositivity
// bound.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cptensor/conic.hpp"
#include "cptensor/dehom.hpp"
#include "cptensor/moment.hpp"
#include "cptensor/polycore.hpp"

namespace cptensor {

// ---------------------------------------------------------------------------
// Generic objective

/// R(x) = [x]_{half}' R1' R1 [x]_{half} with R1 square and standard normal.
struct GenericObjective {
  int nvars = 0;
  int half_degree = 0;  // d1 for membership
  std::uint64_t seed = 0;
  Eigen::MatrixXd R1;

  Polynomial polynomial() const {
    const auto basis = monomials_upto(nvars, half_degree);
    const Eigen::MatrixXd G = R1.transpose() * R1;
    Polynomial p(nvars);
    for (std::size_t a = 0; a < basis.size(); ++a)
      for (std::size_t b = 0; b < basis.size(); ++b)
        p.add_term(basis[a] + basis[b], G(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
    return p;
  }
};

inline GenericObjective generic_sos(int nvars, int half_degree, std::uint64_t seed) {
  detail::require(nvars >= 1 && half_degree >= 0, "generic objective needs nvars >= 1");
  GenericObjective g;
  g.nvars = nvars;
  g.half_degree = half_degree;
  g.seed = seed;
  const auto side = static_cast<Eigen::Index>(count_upto(nvars, half_degree));
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  g.R1.resize(side, side);
  for (Eigen::Index i = 0; i < side; ++i)
    for (Eigen::Index j = 0; j < side; ++j) g.R1(i, j) = normal(gen);
  return g;
}

inline int order_d0(int d) { return (d + 1) / 2; }
inline int order_d1(int d) { return (d + 2) / 2; }

/// Generic SOS objective in the n-1 dehomogenized variables, degree 2*d1.
inline GenericObjective generate_R(int n, int d, std::uint64_t seed) {
  detail::require(n >= 2 && d >= 1, "generate_R needs n >= 2 and d >= 1");
  return generic_sos(n - 1, order_d1(d), seed);
}

// ---------------------------------------------------------------------------
// Shared relaxation plumbing

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Adds the PSD block of one localizing matrix whose tms starts at z_off.
inline void add_localizing_block(DualFormBuilder& b, const LocalizingSpec& spec, int z_off) {
  const int side = spec.side();
  const double r2 = std::sqrt(2.0);
  std::vector<DualFormBuilder::Term> terms;
  for (const auto& e : spec.entries())
    terms.push_back({z_off + static_cast<int>(e.tms_index), svec_index(e.row, e.col, side),
                     e.row == e.col ? e.coeff : r2 * e.coeff});
  b.add_block(ConeBlock::psd(side), Eigen::VectorXd::Zero(svec_dim(side)), terms);
}

/// Adds equality rows L_q^{(k)}[z] = 0, one per distinct monomial x^beta
/// with deg(q x^beta) <= 2k.
inline void add_ideal_rows(DualFormBuilder& b, const Polynomial& q, int k, int z_off) {
  const int deg = q.degree();
  if (deg > 2 * k) return;
  for (const auto& beta : monomials_upto(q.nvars(), 2 * k - deg)) {
    std::vector<std::pair<int, double>> row;
    for (const auto& [a, c] : q.terms()) row.emplace_back(z_off + static_cast<int>(rank_upto(a + beta)), c);
    b.add_equality(row, 0.0);
  }
}

/// sum_{a,b} G(a,b) x^{basis_a + basis_b} for a Gram matrix clipped to PSD.
inline Polynomial gram_polynomial(const Eigen::MatrixXd& G, const std::vector<PowerIndex>& basis, int nvars) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  const Eigen::MatrixXd Gp =
      es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
  Polynomial p(nvars);
  for (std::size_t a = 0; a < basis.size(); ++a)
    for (std::size_t c = 0; c < basis.size(); ++c)
      p.add_term(basis[a] + basis[c], Gp(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c)));
  return p;
}

/// sum_j g_j * sigma_j from the primal PSD blocks of a moment program whose
/// PSD blocks follow `specs` in order.
inline Polynomial quadratic_module_element(const std::vector<LocalizingSpec>& specs,
                                           const std::vector<Eigen::MatrixXd>& grams, int nvars) {
  detail::require(specs.size() == grams.size(), "Gram block count mismatch");
  Polynomial q(nvars);
  for (std::size_t j = 0; j < specs.size(); ++j) q += specs[j].q * gram_polynomial(grams[j], specs[j].basis, nvars);
  return q;
}

inline double l1_norm(const Polynomial& p) {
  double s = 0.0;
  for (const auto& [a, c] : p.terms()) s += std::abs(c);
  return s;
}

inline Polynomial polynomial_from_graded(int nvars, int deg, const Eigen::VectorXd& coeffs) {
  const auto basis = monomials_upto(nvars, deg);
  detail::require(coeffs.size() == static_cast<Eigen::Index>(basis.size()), "coefficient length mismatch");
  Polynomial p(nvars);
  for (std::size_t i = 0; i < basis.size(); ++i) p.add_term(basis[i], coeffs(static_cast<Eigen::Index>(i)));
  return p;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Membership

enum class Verdict { CP, NotCP, Inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::CP: return "CP";
    case Verdict::NotCP: return "NotCP";
    case Verdict::Inconclusive: return "Inconclusive";
  }
  return "?";
}

/// Independent check of a separating functional: p >= -slack on the
/// feasible body while <p, y> = value, so value + slack < 0 proves y lies
/// outside the CP moment cone.
struct FarkasCheck {
  bool valid = false;
  double value = 0.0;  // <p, y>
  double slack = 0.0;  // |p - Gram part|_1 times the mass of y
  Polynomial p;        // separating polynomial (dehomogenized or homogeneous)
};

struct MembershipOptions {
  std::uint64_t seed = 20231;
  int order_max = -1;          // -1: d1 + 3
  double tol = 1e-4;           // relative reconstruction tolerance
  double solver_tol = 1e-8;
  bool polish = true;
  bool dehomogenize = true;    // false: non-dehomogenized baseline
  bool verbose = false;
};

struct MembershipReport {
  Verdict verdict = Verdict::Inconclusive;
  int order = 0;                 // relaxation order of the verdict (or last tried)
  int flat_t = 0;                // t at which flat truncation held
  CpDecomposition decomposition;
  double residual = 0.0;         // |sum lambda [u]^hom - y| (htms coordinates)
  double relative_residual = 0.0;  // Hilbert-Schmidt, relative to 1 + |A|
  bool polished = false;
  std::vector<FlatReport> flat_trail;
  std::vector<std::pair<int, SolveStatus>> solves;  // (order, status)
  int solver_iterations = 0;
  std::size_t program_variables = 0;  // moment variables at the last order
  std::optional<FarkasCheck> certificate;
  std::map<std::string, double> timings;
  std::string message;
};

namespace detail {

/// Residual F = sum_j lambda_j [u_j]^hom_d - y in htms coordinates.
inline Eigen::VectorXd decomposition_residual(const std::vector<Atom>& atoms, const Htms& y) {
  Eigen::VectorXd F = -Eigen::Map<const Eigen::VectorXd>(y.values.data(), static_cast<Eigen::Index>(y.size()));
  for (const auto& a : atoms) {
    const auto m = monomial_vector_hom(a.point, y.d);
    F += a.weight * Eigen::Map<const Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
  }
  return F;
}

/// Levenberg-Marquardt refinement of (lambda_j, v_j) with u_j = (v_j, 1 - e'v_j)
/// against the htms target; returns the refined atoms when they stay in the
/// simplex with nonnegative weights and strictly lower residual.
inline std::optional<std::vector<Atom>> polish_atoms(const std::vector<Atom>& atoms, const Htms& y) {
  const int r = static_cast<int>(atoms.size());
  const int n = y.n;
  const int nb = n - 1;
  if (r == 0 || n < 2) return std::nullopt;
  const auto expo = monomials_exact(n, y.d);
  const int np = r * (1 + nb);

  auto unpack = [&](const Eigen::VectorXd& th) {
    std::vector<Atom> out(static_cast<std::size_t>(r));
    for (int j = 0; j < r; ++j) {
      auto& a = out[static_cast<std::size_t>(j)];
      a.weight = th(j);
      a.point.assign(static_cast<std::size_t>(n), 0.0);
      double s = 0.0;
      for (int i = 0; i < nb; ++i) s += (a.point[static_cast<std::size_t>(i)] = th(r + j * nb + i));
      a.point[static_cast<std::size_t>(nb)] = 1.0 - s;
    }
    return out;
  };
  Eigen::VectorXd th(np);
  for (int j = 0; j < r; ++j) {
    th(j) = atoms[static_cast<std::size_t>(j)].weight;
    for (int i = 0; i < nb; ++i) th(r + j * nb + i) = atoms[static_cast<std::size_t>(j)].point[static_cast<std::size_t>(i)];
  }

  auto jacobian = [&](const std::vector<Atom>& at) {
    Eigen::MatrixXd J(static_cast<Eigen::Index>(expo.size()), np);
    for (int j = 0; j < r; ++j) {
      const auto& u = at[static_cast<std::size_t>(j)].point;
      const double lam = at[static_cast<std::size_t>(j)].weight;
      for (std::size_t row = 0; row < expo.size(); ++row) {
        const PowerIndex& al = expo[row];
        double mono = 1.0;
        for (int l = 0; l < n; ++l) mono *= std::pow(u[static_cast<std::size_t>(l)], al[l]);
        J(static_cast<Eigen::Index>(row), j) = mono;
        auto dmono = [&](int i) {
          if (al[i] == 0) return 0.0;
          double v = al[i];
          for (int l = 0; l < n; ++l) v *= std::pow(u[static_cast<std::size_t>(l)], al[l] - (l == i ? 1 : 0));
          return v;
        };
        const double dlast = dmono(nb);
        for (int i = 0; i < nb; ++i) J(static_cast<Eigen::Index>(row), r + j * nb + i) = lam * (dmono(i) - dlast);
      }
    }
    return J;
  };

  std::vector<Atom> cur = unpack(th);
  Eigen::VectorXd F = decomposition_residual(cur, y);
  const double f_start = F.norm();
  double f = f_start;
  double mu = 1e-3;
  const double target = 1e-14 * (1.0 + y.norm());
  for (int it = 0; it < 100 && f > target; ++it) {
    const Eigen::MatrixXd J = jacobian(cur);
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * F;
    bool improved = false;
    for (int tries = 0; tries < 12; ++tries) {
      Eigen::MatrixXd Hm = JtJ;
      Hm.diagonal() += mu * JtJ.diagonal().cwiseMax(1e-12);
      const Eigen::VectorXd step = Hm.ldlt().solve(-g);
      if (!step.allFinite()) break;
      const Eigen::VectorXd cand = th + step;
      const auto cand_atoms = unpack(cand);
      const Eigen::VectorXd Fc = decomposition_residual(cand_atoms, y);
      if (Fc.norm() < f) {
        th = cand;
        cur = cand_atoms;
        F = Fc;
        f = Fc.norm();
        mu = std::max(mu / 3.0, 1e-12);
        improved = true;
        break;
      }
      mu *= 4.0;
    }
    if (!improved) break;
  }
  if (!(f < f_start)) return std::nullopt;
  for (const auto& a : cur) {
    if (a.weight < 0.0) return std::nullopt;
    for (double v : a.point)
      if (v < -CpDecomposition::kSimplexTol) return std::nullopt;
  }
  for (auto& a : cur)
    for (double& v : a.point) v = std::max(v, 0.0);
  return cur;
}

/// Turns an atomic measure on the dehomogenized body into a decomposition of
/// y, optionally polishes it, and scores it. Returns false when the atoms are
/// rejected or the relative residual exceeds tol.
inline bool finish_decomposition(const std::vector<Atom>& body_atoms, bool homogeneous_points, const Htms& y,
                                 const MembershipOptions& opt, MembershipReport& rep) {
  std::vector<Atom> atoms;
  try {
    for (const auto& a : body_atoms) {
      if (a.weight <= 0.0) continue;
      Atom u;
      u.weight = a.weight;
      if (homogeneous_points) {
        // points already in R^n; must lie on the simplex
        double s = 0.0;
        for (double v : a.point) {
          if (v < -1e-3) throw AtomRejected("atom has a negative coordinate");
          s += v;
        }
        if (std::abs(s - 1.0) > 1e-3) throw AtomRejected("atom is off the simplex");
        double t = 0.0;
        for (double v : a.point) t += std::max(v, 0.0);
        for (double v : a.point) u.point.push_back(std::max(v, 0.0) / t);
      } else {
        u.point = lift_atom(a.point);
      }
      atoms.push_back(std::move(u));
    }
  } catch (const AtomRejected&) {
    return false;
  }
  double res = decomposition_residual(atoms, y).norm();
  bool polished = false;
  if (opt.polish) {
    if (auto better = polish_atoms(atoms, y)) {
      const double r2 = decomposition_residual(*better, y).norm();
      if (r2 < res) {
        atoms = std::move(*better);
        res = r2;
        polished = true;
      }
    }
  }
  CpDecomposition dec;
  dec.d = y.d;
  dec.atoms = atoms;
  std::sort(dec.atoms.begin(), dec.atoms.end(), [](const Atom& a, const Atom& b) { return a.point > b.point; });
  const SymTensor target = phi_inverse(y);
  SymTensor diff = reconstruct(dec, y.n);
  diff += -1.0 * target;
  const double rel = hs_norm(diff) / (1.0 + hs_norm(target));
  if (!(rel <= opt.tol) || !dec.valid(y.n)) return false;
  rep.decomposition = std::move(dec);
  rep.residual = res;
  rep.relative_residual = rel;
  rep.polished = polished;
  return true;
}

/// Flat-truncation scan over t in [t_lo, k] with a short ladder of rank
/// thresholds; the first t whose extraction reconstructs y wins. The tight
/// rungs matter for high-degree data, where the smallest true singular
/// values of M_t sit many decades below sigma_1.
inline bool scan_flat(const Tms& z, int t_lo, int k, bool homogeneous_points, const Htms& y,
                      const MembershipOptions& opt, MembershipReport& rep) {
  static constexpr double kRankTol[] = {1e-6, 1e-5, 1e-4, 1e-8, 1e-10};
  for (int t = std::max(t_lo, 1); t <= k; ++t) {
    bool logged = false;
    for (double tau : kRankTol) {
      const FlatReport fr = flat_truncation(z, t, tau);
      if (!logged) {
        rep.flat_trail.push_back(fr);
        logged = true;
      }
      if (!fr.flat) continue;
      try {
        const auto atoms = extract_atoms(z, t, fr.rank, opt.seed);
        if (finish_decomposition(atoms, homogeneous_points, y, opt, rep)) {
          rep.flat_trail.back() = fr;
          rep.flat_t = t;
          return true;
        }
      } catch (const ExtractionError&) {
      }
    }
  }
  return false;
}

}  // namespace detail

/// Moment relaxation of order k for membership of y: variables z over
/// N^{n-1}_{2k} in graded order, one pinned equality per alpha in N^{n-1}_d
/// (in graded order, as the leading free columns), the simplex cone blocks,
/// and the objective <R, z> (maximized as -<R, z>).
inline ConicProgram build_membership_relaxation(const Htms& y, int k, const GenericObjective& R) {
  detail::require(y.n >= 2, "membership relaxation needs n >= 2");
  if (k < order_d1(y.d)) throw DomainError("relaxation order must be at least d1");
  const int nbar = y.n - 1;
  detail::require(R.nvars == nbar && 2 * R.half_degree <= 2 * k, "objective does not fit the relaxation");
  const Tms pinned = varpi_adjoint_inverse(y);
  const int nz = static_cast<int>(count_upto(nbar, 2 * k));
  DualFormBuilder b(nz);
  for (int i = 0; i < static_cast<int>(pinned.size()); ++i)
    b.add_equality({{i, 1.0}}, pinned.values[static_cast<std::size_t>(i)]);
  const Polynomial objective = R.polynomial();
  for (const auto& [a, c] : objective.terms()) b.add_objective(static_cast<int>(rank_upto(a)), -c);
  for (const auto& spec : cone_constraints_simplex(y.n, k)) detail::add_localizing_block(b, spec, 0);
  return b.build();
}

/// Relaxation without dehomogenization: z over N^n_{2k}, y = z restricted to
/// degree d, L_{1-e'x}[z] = 0 entrywise, PSD blocks M_k, L_{x_i}, L_{1-|x|^2}.
/// The pins come first among the free columns, then the ideal rows.
namespace detail {
inline std::vector<PowerIndex> traditional_ideal_monomials(int n, int k) { return monomials_upto(n, 2 * (k - 1)); }
}  // namespace detail

inline ConicProgram build_traditional_relaxation(const Htms& y, int k, const GenericObjective& R) {
  detail::require(y.n >= 1, "traditional relaxation needs n >= 1");
  if (k < order_d1(y.d)) throw DomainError("relaxation order must be at least d1");
  const int n = y.n;
  detail::require(R.nvars == n && R.half_degree <= k, "objective does not fit the relaxation");
  const int nz = static_cast<int>(count_upto(n, 2 * k));
  DualFormBuilder b(nz);
  const auto exact = monomials_exact(n, y.d);
  for (std::size_t i = 0; i < exact.size(); ++i)
    b.add_equality({{static_cast<int>(rank_upto(exact[i])), 1.0}}, y.values[i]);
  Polynomial one_minus = Polynomial::constant(n, 1.0);
  for (int i = 0; i < n; ++i) one_minus.add_term(PowerIndex::unit(n, i), -1.0);
  // Entry (r, c) of L_{1-e'x}^{(k)}[z] only depends on basis_r + basis_c, so
  // one row per monomial of degree <= 2k-2 gives every entry exactly once.
  for (const auto& gamma : detail::traditional_ideal_monomials(n, k)) {
    std::vector<std::pair<int, double>> row;
    for (const auto& [a, coef] : one_minus.terms()) row.emplace_back(static_cast<int>(rank_upto(a + gamma)), coef);
    b.add_equality(row, 0.0);
  }
  const Polynomial objective = R.polynomial();
  for (const auto& [a, c] : objective.terms()) b.add_objective(static_cast<int>(rank_upto(a)), -c);
  for (const auto& spec : [&] {
         std::vector<LocalizingSpec> s{make_localizing(Polynomial::constant(n, 1.0), k)};
         for (int i = 0; i < n; ++i) s.push_back(make_localizing(Polynomial::variable(n, i), k));
         Polynomial ball = Polynomial::constant(n, 1.0);
         for (int i = 0; i < n; ++i) ball.add_term(PowerIndex::unit(n, i) + PowerIndex::unit(n, i), -1.0);
         s.push_back(make_localizing(ball, k));
         return s;
       }())
    detail::add_localizing_block(b, spec, 0);
  return b.build();
}

namespace detail {

inline std::vector<LocalizingSpec> traditional_specs(int n, int k) {
  std::vector<LocalizingSpec> s{make_localizing(Polynomial::constant(n, 1.0), k)};
  for (int i = 0; i < n; ++i) s.push_back(make_localizing(Polynomial::variable(n, i), k));
  Polynomial ball = Polynomial::constant(n, 1.0);
  for (int i = 0; i < n; ++i) ball.add_term(PowerIndex::unit(n, i) + PowerIndex::unit(n, i), -1.0);
  s.push_back(make_localizing(ball, k));
  return s;
}

}  // namespace detail

/// Re-verifies a membership infeasibility ray without trusting the solver.
/// `ray` is the standard-form x with A x = 0, x in K, c'x < 0 for the program
/// of build_membership_relaxation(y, k, .).
inline FarkasCheck verify_not_cp(const Htms& y, int k, const Eigen::VectorXd& ray, const ConicProgram& prog) {
  FarkasCheck chk;
  const int nbar = y.n - 1;
  const Tms pinned = varpi_adjoint_inverse(y);
  const auto np = static_cast<Eigen::Index>(pinned.size());
  if (ray.size() != prog.n() || ray.size() < np) return chk;
  chk.p = detail::polynomial_from_graded(nbar, y.d, ray.head(np));
  const auto specs = cone_constraints_simplex(y.n, k);
  const Polynomial q = detail::quadratic_module_element(specs, primal_psd_blocks(ray, prog), nbar);
  chk.value = pinned.apply(chk.p);
  chk.slack = detail::l1_norm(chk.p - q) * std::max(pinned.values[0], 0.0);
  chk.valid = chk.value + chk.slack < -1e-12 * (1.0 + std::abs(chk.value));
  return chk;
}

/// Same check for the non-dehomogenized relaxation: the separating form p of
/// degree d satisfies p = Gram part - (1 - e'x) phi + r, so p >= -|r|_1 on
/// the simplex and the mass of y is <(e'x)^d, y>.
inline FarkasCheck verify_not_cp_traditional(const Htms& y, int k, const Eigen::VectorXd& ray,
                                             const ConicProgram& prog) {
  FarkasCheck chk;
  const int n = y.n;
  const auto exact = monomials_exact(n, y.d);
  const Polynomial one_minus = [&] {
    Polynomial p = Polynomial::constant(n, 1.0);
    for (int i = 0; i < n; ++i) p.add_term(PowerIndex::unit(n, i), -1.0);
    return p;
  }();
  const auto ideal = detail::traditional_ideal_monomials(n, k);
  const auto nfree = static_cast<Eigen::Index>(exact.size() + ideal.size());
  if (ray.size() != prog.n() || ray.size() < nfree) return chk;
  Polynomial p(n);
  double value = 0.0, mass = 0.0;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    p.add_term(exact[i], ray(static_cast<Eigen::Index>(i)));
    value += ray(static_cast<Eigen::Index>(i)) * y.values[i];
    mass += static_cast<double>(multinomial(exact[i])) * y.values[i];
  }
  Polynomial phi(n);
  Eigen::Index col = static_cast<Eigen::Index>(exact.size());
  for (const auto& gamma : ideal) phi.add_term(gamma, ray(col++));
  const Polynomial q = detail::quadratic_module_element(detail::traditional_specs(n, k), primal_psd_blocks(ray, prog), n);
  chk.p = p;
  chk.value = value;
  chk.slack = detail::l1_norm(p + one_minus * phi - q) * std::max(mass, 0.0);
  chk.valid = chk.value + chk.slack < -1e-12 * (1.0 + std::abs(chk.value));
  return chk;
}

namespace detail {

inline MembershipReport check_cp_scalar(const SymTensor& t) {
  MembershipReport rep;
  const double v = t.values()[0];
  rep.decomposition.d = t.d();
  if (v >= 0.0) {
    rep.verdict = Verdict::CP;
    if (v > 0.0) rep.decomposition.atoms.push_back({v, {1.0}});
    rep.message = "single variable";
  } else {
    rep.verdict = Verdict::NotCP;
    FarkasCheck chk;
    chk.valid = true;
    chk.value = v;
    chk.p = Polynomial::monomial(PowerIndex{t.d()}, 1.0);
    rep.certificate = chk;
    rep.message = "single variable with a negative entry";
  }
  return rep;
}

}  // namespace detail

/// Membership test with decomposition for a symmetric tensor.
inline MembershipReport check_cp(const SymTensor& t, const MembershipOptions& opt = {}) {
  const auto t_start = detail::Clock::now();
  const int n = t.n();
  const int d = t.d();
  detail::require(n >= 1 && d >= 1, "check_cp needs n >= 1 and d >= 1");
  if (n == 1) return detail::check_cp_scalar(t);

  MembershipReport rep;
  rep.decomposition.d = d;
  const Htms y = phi(t);
  const int d0 = order_d0(d), d1 = order_d1(d);
  const int kmax = opt.order_max < 0 ? d1 + 3 : opt.order_max;
  if (y.norm() == 0.0) {
    rep.verdict = Verdict::CP;
    rep.order = d1;
    rep.message = "zero tensor";
    return rep;
  }

  const GenericObjective R = opt.dehomogenize ? generate_R(n, d, opt.seed) : generic_sos(n, d1, opt.seed);
  SolveOptions so;
  so.tol = opt.solver_tol;
  so.seed = opt.seed;
  so.verbose = opt.verbose;
  double t_build = 0.0, t_solve = 0.0, t_extract = 0.0;
  for (int k = d1; k <= kmax; ++k) {
    rep.order = k;
    auto t0 = detail::Clock::now();
    const ConicProgram prog =
        opt.dehomogenize ? build_membership_relaxation(y, k, R) : build_traditional_relaxation(y, k, R);
    rep.program_variables = static_cast<std::size_t>(prog.m);
    t_build += detail::seconds_since(t0);
    t0 = detail::Clock::now();
    const SolveResult res = solve(prog, so);
    t_solve += detail::seconds_since(t0);
    rep.solves.emplace_back(k, res.status);
    rep.solver_iterations += res.iterations;

    if (res.status == SolveStatus::DualInfeasible) {
      const FarkasCheck chk = opt.dehomogenize ? verify_not_cp(y, k, res.certificate, prog)
                                               : verify_not_cp_traditional(y, k, res.certificate, prog);
      if (chk.valid) {
        rep.verdict = Verdict::NotCP;
        rep.certificate = chk;
        rep.message = "moment relaxation infeasible";
        break;
      }
      rep.message = "infeasibility certificate failed re-verification";
      continue;
    }
    if (res.status != SolveStatus::Optimal && res.status != SolveStatus::NumericalLimit) continue;
    if (res.y.size() != prog.m) continue;

    t0 = detail::Clock::now();
    const int nv = opt.dehomogenize ? n - 1 : n;
    std::vector<double> zv(res.y.data(), res.y.data() + res.y.size());
    const Tms z(nv, 2 * k, std::move(zv));
    const bool ok = detail::scan_flat(z, d0, k, !opt.dehomogenize, y, opt, rep);
    t_extract += detail::seconds_since(t0);
    if (ok) {
      rep.verdict = Verdict::CP;
      rep.message = res.status == SolveStatus::Optimal ? "flat truncation"
                                                       : "flat truncation (solver stopped at its numerical limit)";
      break;
    }
    rep.message = "no flat truncation up to the current order";
  }
  if (rep.verdict == Verdict::Inconclusive && rep.message.empty()) rep.message = "order limit reached";
  rep.timings["build"] = t_build;
  rep.timings["solve"] = t_solve;
  rep.timings["extract"] = t_extract;
  rep.timings["total"] = detail::seconds_since(t_start);
  return rep;
}

// ---------------------------------------------------------------------------
// Linear conic optimization over the CP cone

/// min c'w  s.t.  a_0 + sum w_i a_i in CP_{n,d},  f_0 + sum w_i f_i in K.
struct CpConicProblem {
  Eigen::VectorXd c;
  std::vector<Htms> a;               // a_0 .. a_ell
  ConeSpec K;                        // auxiliary cone, may be empty
  std::vector<Eigen::VectorXd> f;    // f_0 .. f_ell, each of length K.dim(); empty when K is empty

  int ell() const { return static_cast<int>(c.size()); }
  int n() const { return a.empty() ? 0 : a.front().n; }
  int d() const { return a.empty() ? 0 : a.front().d; }

  void validate() const {
    detail::require(static_cast<int>(a.size()) == ell() + 1, "need tensors a_0 .. a_ell");
    for (const auto& ai : a) {
      detail::require(ai.n == n() && ai.d == d(), "all tensors must share (n, d)");
      detail::require(ai.values.size() == static_cast<std::size_t>(count_exact(n(), d())), "htms length mismatch");
    }
    detail::require(n() >= 2 && d() >= 1, "conic problems need n >= 2 and d >= 1");
    if (K.blocks.empty()) {
      detail::require(f.empty(), "vectors f given without a cone K");
    } else {
      detail::require(static_cast<int>(f.size()) == ell() + 1, "need vectors f_0 .. f_ell");
      for (const auto& fi : f) detail::require(fi.size() == K.dim(), "f_i length must match K");
    }
  }

  /// a(w) = a_0 + sum w_i a_i.
  Htms a_of(const Eigen::VectorXd& w) const {
    Htms out = a.front();
    for (int i = 0; i < ell(); ++i)
      for (std::size_t j = 0; j < out.values.size(); ++j)
        out.values[j] += w(i) * a[static_cast<std::size_t>(i + 1)].values[j];
    return out;
  }
};

/// Dual-side certificate (p-hat, eta) read off the standard-form primal.
struct DualCertificate {
  Polynomial p_hat;                   // in n-1 variables, degree <= d
  std::vector<Eigen::MatrixXd> gram;  // Gram blocks, cone order
  Eigen::VectorXd eta;                // multiplier in K*
  double gap = 0.0;                   // c'w + <a0-hat, p-hat> + f0'eta
  double constraint_residual = 0.0;   // max_i |<a_i-hat, p-hat> + f_i'eta - c_i|
  bool zero_gap = false;
};

enum class ConicStatus { Optimal, Infeasible, Unbounded, Inconclusive };

inline const char* to_string(ConicStatus s) {
  switch (s) {
    case ConicStatus::Optimal: return "Optimal";
    case ConicStatus::Infeasible: return "Infeasible";
    case ConicStatus::Unbounded: return "Unbounded";
    case ConicStatus::Inconclusive: return "Inconclusive";
  }
  return "?";
}

struct ConicOptions {
  std::uint64_t seed = 20231;
  int order_max = -1;        // -1: d0 + 3
  double tol = 1e-4;         // relative reconstruction tolerance for a(w)
  double solver_tol = 1e-8;
  double gap_tol = 1e-5;     // zero-gap test, relative to 1 + |c'w|
  double recovery_slack = 1e-7;  // allowed objective increase during flat recovery
  bool verbose = false;
};

struct CpConicResult {
  ConicStatus status = ConicStatus::Inconclusive;
  int order = 0;
  Eigen::VectorXd w;
  double value = 0.0;            // c'w
  double relaxation_value = 0.0; // optimal value of the relaxation at `order`
  bool flat_at_relaxation = false;  // false: w came from the flat-recovery solve
  MembershipReport membership;   // decomposition of a(w)
  std::optional<DualCertificate> certificate;
  std::vector<std::pair<int, SolveStatus>> solves;
  int solver_iterations = 0;
  std::map<std::string, double> timings;
  std::string message;
};

namespace detail {

/// Layout: variables (w_1..w_ell, z over N^{n-1}_{2k}); free columns are the
/// pins for alpha in N^{n-1}_d in graded order; then the simplex cone blocks,
/// then the blocks of K (non-free ones), then an optional objective cap.
inline ConicProgram build_cp_conic_program(const CpConicProblem& p, int k, const Polynomial* generic,
                                           std::optional<double> cap) {
  p.validate();
  const int ell = p.ell();
  const int nbar = p.n() - 1;
  if (k < order_d0(p.d())) throw DomainError("relaxation order must be at least d0");
  const int nz = static_cast<int>(count_upto(nbar, 2 * k));
  DualFormBuilder b(ell + nz);
  std::vector<Tms> hat;
  for (const auto& ai : p.a) hat.push_back(varpi_adjoint_inverse(ai));
  const int npin = static_cast<int>(hat.front().size());
  for (int j = 0; j < npin; ++j) {
    std::vector<std::pair<int, double>> row{{ell + j, 1.0}};
    for (int i = 0; i < ell; ++i) {
      const double v = hat[static_cast<std::size_t>(i + 1)].values[static_cast<std::size_t>(j)];
      if (v != 0.0) row.emplace_back(i, -v);
    }
    b.add_equality(row, hat.front().values[static_cast<std::size_t>(j)]);
  }
  if (generic) {
    for (const auto& [a, c] : generic->terms()) b.add_objective(ell + static_cast<int>(rank_upto(a)), -c);
  } else {
    for (int i = 0; i < ell; ++i) b.add_objective(i, -p.c(i));
  }
  for (const auto& spec : cone_constraints_simplex(p.n(), k)) add_localizing_block(b, spec, ell);
  const auto offs = p.K.offsets();
  for (std::size_t blk = 0; blk < p.K.blocks.size(); ++blk) {
    const ConeBlock& cb = p.K.blocks[blk];
    if (cb.kind == ConeKind::Free) continue;
    const auto off = static_cast<Eigen::Index>(offs[blk]);
    std::vector<DualFormBuilder::Term> terms;
    for (int i = 0; i < ell; ++i) {
      const Eigen::VectorXd& fi = p.f[static_cast<std::size_t>(i + 1)];
      for (int q = 0; q < cb.dim(); ++q)
        if (fi(off + q) != 0.0) terms.push_back({i, q, fi(off + q)});
    }
    b.add_block(cb, p.f.front().segment(off, cb.dim()), terms);
  }
  if (cap) {
    std::vector<DualFormBuilder::Term> terms;
    for (int i = 0; i < ell; ++i)
      if (p.c(i) != 0.0) terms.push_back({i, 0, -p.c(i)});
    b.add_block(ConeBlock::nonneg(1), Eigen::VectorXd::Constant(1, *cap), terms);
  }
  return b.build();
}

inline DualCertificate read_certificate(const CpConicProblem& p, const ConicProgram& prog, const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& w, double gap_tol) {
  DualCertificate cert;
  const int nbar = p.n() - 1;
  std::vector<Tms> hat;
  for (const auto& ai : p.a) hat.push_back(varpi_adjoint_inverse(ai));
  const auto npin = static_cast<Eigen::Index>(hat.front().size());
  cert.p_hat = polynomial_from_graded(nbar, p.d(), x.head(npin));
  cert.gram = primal_psd_blocks(x, prog);
  const int nsimplex = static_cast<int>(cone_constraints_simplex(p.n(), 1).size());
  cert.gram.resize(static_cast<std::size_t>(nsimplex));
  // eta: primal values on the blocks of K, in K's coordinates
  cert.eta = Eigen::VectorXd::Zero(p.K.dim());
  {
    const auto poffs = prog.cone.offsets();
    const auto koffs = p.K.offsets();
    std::size_t pb = 1 + static_cast<std::size_t>(nsimplex);  // free block, then simplex blocks
    for (std::size_t blk = 0; blk < p.K.blocks.size(); ++blk) {
      const ConeBlock& cb = p.K.blocks[blk];
      if (cb.kind == ConeKind::Free) continue;
      cert.eta.segment(koffs[blk], cb.dim()) = x.segment(poffs[pb], cb.dim());
      ++pb;
    }
  }
  auto pair_with = [&](const Tms& ah, int i) {
    double v = ah.apply(cert.p_hat);
    if (p.K.dim() > 0) v += p.f[static_cast<std::size_t>(i)].dot(cert.eta);
    return v;
  };
  for (int i = 1; i <= p.ell(); ++i)
    cert.constraint_residual =
        std::max(cert.constraint_residual, std::abs(pair_with(hat[static_cast<std::size_t>(i)], i) - p.c(i - 1)));
  const double cw = p.c.dot(w);
  cert.gap = cw + pair_with(hat.front(), 0);
  cert.zero_gap = std::abs(cert.gap) <= gap_tol * (1.0 + std::abs(cw));
  return cert;
}

}  // namespace detail

inline ConicProgram build_cp_conic_relaxation(const CpConicProblem& p, int k) {
  return detail::build_cp_conic_program(p, k, nullptr, std::nullopt);
}

/// Moment-SOS loop for CP conic problems. At each order the relaxation is
/// solved; if its moment solution is flat, w is returned. Otherwise the same
/// relaxation is re-solved with the objective capped at its optimum plus a
/// small slack and a generic SOS objective on z, which selects a flat point
/// of the optimal face when one exists.
inline CpConicResult solve_cp_conic(const CpConicProblem& p, const ConicOptions& opt = {}) {
  const auto t_start = detail::Clock::now();
  p.validate();
  CpConicResult out;
  const int d = p.d(), d0 = order_d0(d), d1 = order_d1(d);
  const int kmax = opt.order_max < 0 ? d0 + 3 : opt.order_max;
  const int ell = p.ell();
  const int nbar = p.n() - 1;
  SolveOptions so;
  so.tol = opt.solver_tol;
  so.seed = opt.seed;
  so.verbose = opt.verbose;
  MembershipOptions mo;
  mo.seed = opt.seed;
  mo.tol = opt.tol;
  double t_solve = 0.0, t_extract = 0.0;

  auto try_flat = [&](const SolveResult& r, int k, MembershipReport& rep) {
    const Eigen::VectorXd w = r.y.head(ell);
    const Htms aw = p.a_of(w);
    std::vector<double> zv(r.y.data() + ell, r.y.data() + r.y.size());
    const Tms z(nbar, 2 * k, std::move(zv));
    rep.decomposition.d = d;
    const double scale = 1.0 + aw.norm();
    if (std::abs(z.values[0]) <= 1e-9 * scale && aw.norm() <= 1e-7 * scale) {
      rep.verdict = Verdict::CP;
      rep.message = "zero measure";
      return true;
    }
    const auto t0 = detail::Clock::now();
    const bool ok = detail::scan_flat(z, d0, k, false, aw, mo, rep);
    t_extract += detail::seconds_since(t0);
    if (ok) {
      rep.verdict = Verdict::CP;
      rep.order = k;
      rep.message = "flat truncation";
    }
    return ok;
  };

  for (int k = d0; k <= kmax; ++k) {
    out.order = k;
    const ConicProgram prog = build_cp_conic_relaxation(p, k);
    auto t0 = detail::Clock::now();
    const SolveResult res = solve(prog, so);
    t_solve += detail::seconds_since(t0);
    out.solves.emplace_back(k, res.status);
    out.solver_iterations += res.iterations;
    if (res.status == SolveStatus::DualInfeasible) {
      out.status = ConicStatus::Infeasible;
      out.message = "moment relaxation infeasible";
      DualCertificate cert;
      const Eigen::VectorXd& ray = res.certificate;
      cert = detail::read_certificate(p, prog, ray, Eigen::VectorXd::Zero(ell), opt.gap_tol);
      cert.zero_gap = false;
      out.certificate = cert;
      break;
    }
    if (res.status == SolveStatus::PrimalInfeasible) {
      out.status = ConicStatus::Unbounded;
      out.message = "relaxation unbounded below";
      break;
    }
    if (res.status != SolveStatus::Optimal && res.status != SolveStatus::NumericalLimit) continue;

    const Eigen::VectorXd w = res.y.head(ell);
    const double val = p.c.dot(w);
    out.relaxation_value = val;
    MembershipReport rep;
    if (try_flat(res, k, rep)) {
      out.status = ConicStatus::Optimal;
      out.w = w;
      out.value = val;
      out.flat_at_relaxation = true;
      out.membership = std::move(rep);
    } else {
      // flat recovery on the optimal face
      const int half = std::min(d1, k);
      const Polynomial R = generic_sos(nbar, half, opt.seed).polynomial();
      const double cap = val + opt.recovery_slack * (1.0 + std::abs(val));
      const ConicProgram rprog = detail::build_cp_conic_program(p, k, &R, cap);
      t0 = detail::Clock::now();
      const SolveResult rres = solve(rprog, so);
      t_solve += detail::seconds_since(t0);
      out.solves.emplace_back(k, rres.status);
      out.solver_iterations += rres.iterations;
      MembershipReport rrep;
      rrep.flat_trail = rep.flat_trail;
      if ((rres.status == SolveStatus::Optimal || rres.status == SolveStatus::NumericalLimit) &&
          rres.y.size() == rprog.m && try_flat(rres, k, rrep)) {
        out.status = ConicStatus::Optimal;
        out.w = rres.y.head(ell);
        out.value = p.c.dot(out.w);
        out.flat_at_relaxation = false;
        out.membership = std::move(rrep);
      } else {
        out.w = w;
        out.value = val;
        out.membership = std::move(rrep);
      }
    }
    if (res.status == SolveStatus::Optimal && res.x.size() == prog.n())
      out.certificate = detail::read_certificate(p, prog, res.x, w, opt.gap_tol);
    if (out.status == ConicStatus::Optimal) {
      out.message = out.flat_at_relaxation ? "flat truncation" : "flat truncation after recovery on the optimal face";
      break;
    }
    out.message = "no flat truncation up to the current order";
  }
  out.timings["solve"] = t_solve;
  out.timings["extract"] = t_extract;
  out.timings["total"] = detail::seconds_since(t_start);
  return out;
}

/// Best CP approximation in the Hilbert-Schmidt norm: variables (w0, w_alpha),
/// SecondOrder block (w0, sqrt(m_alpha) (C_alpha - w_alpha)), objective w0.
inline CpConicProblem build_approximation(const SymTensor& C) {
  const int n = C.n(), d = C.d();
  const auto N = static_cast<int>(count_exact(n, d));
  const auto expo = monomials_exact(n, d);
  CpConicProblem p;
  p.c = Eigen::VectorXd::Zero(1 + N);
  p.c(0) = 1.0;
  p.a.assign(static_cast<std::size_t>(2 + N), Htms(n, d));
  for (int j = 0; j < N; ++j) p.a[static_cast<std::size_t>(2 + j)].values[static_cast<std::size_t>(j)] = 1.0;
  p.K.blocks.push_back(ConeBlock::second_order(1 + N));
  p.f.assign(static_cast<std::size_t>(2 + N), Eigen::VectorXd::Zero(1 + N));
  p.f[1](0) = 1.0;
  for (int j = 0; j < N; ++j) {
    const double s = std::sqrt(static_cast<double>(multinomial(expo[static_cast<std::size_t>(j)])));
    p.f[0](1 + j) = s * C.values()[static_cast<std::size_t>(j)];
    p.f[static_cast<std::size_t>(2 + j)](1 + j) = -s;
  }
  return p;
}

/// Canonicalizes a label set for completion. Sorted tuples stand for their
/// whole permutation class; an unsorted tuple requires all its permutations
/// to be listed as well.
inline std::vector<std::vector<int>> canonical_label_set(const std::vector<std::vector<int>>& labels, int n, int d) {
  std::set<std::vector<int>> given(labels.begin(), labels.end());
  std::set<std::vector<int>> canon;
  for (const auto& l : labels) {
    detail::require(static_cast<int>(l.size()) == d, "label tuple length must equal d");
    for (int v : l) detail::require(v >= 0 && v < n, "label out of range");
    std::vector<int> s = l;
    std::sort(s.begin(), s.end());
    if (s != l) {
      std::vector<int> perm = s;
      do {
        if (!given.count(perm)) throw DomainError("unknown label set is not closed under permutation");
      } while (std::next_permutation(perm.begin(), perm.end()));
    }
    canon.insert(s);
  }
  return {canon.begin(), canon.end()};
}

/// CP completion: unknown entries (0-based label tuples) become variables.
/// The objective sums every unknown entry of the full tensor, so each
/// canonical class is weighted by its number of distinct permutations.
inline CpConicProblem build_completion(const SymTensor& C0, const std::vector<std::vector<int>>& unknown) {
  const int n = C0.n(), d = C0.d();
  const auto labels = canonical_label_set(unknown, n, d);
  CpConicProblem p;
  const int ell = static_cast<int>(labels.size());
  p.c.resize(ell);
  for (int i = 0; i < ell; ++i)
    p.c(i) = static_cast<double>(multinomial(PowerIndex::from_labels(n, labels[static_cast<std::size_t>(i)])));
  Htms a0 = phi(C0);
  std::vector<std::int64_t> pos;
  for (const auto& l : labels) {
    const std::int64_t r = rank_exact(PowerIndex::from_labels(n, l));
    a0.values[static_cast<std::size_t>(r)] = 0.0;
    pos.push_back(r);
  }
  p.a.push_back(a0);
  for (int i = 0; i < ell; ++i) {
    Htms e(n, d);
    e.values[static_cast<std::size_t>(pos[static_cast<std::size_t>(i)])] = 1.0;
    p.a.push_back(e);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Copositivity

enum class CoposVerdict { CertifiedCopositive, NotCertified };

inline const char* to_string(CoposVerdict v) {
  return v == CoposVerdict::CertifiedCopositive ? "CertifiedCopositive" : "NotCertified";
}

struct CoposOptions {
  double tol_cop = 1e-3;
  double solver_tol = 1e-8;
  double identity_tol = 1e-6;  // relative l1 mismatch of the SOS identity
  /// Adds the products g_i g_j (i < j) of the simplex generators to the
  /// quadratic module; without them the Horn matrix is not certified at k = 2.
  bool pairwise_products = true;
  bool verbose = false;
};

struct CoposResult {
  int order = 0;
  double bound = 0.0;  // f_k, the maximal gamma
  CoposVerdict verdict = CoposVerdict::NotCertified;
  SolveStatus status = SolveStatus::NumericalLimit;
  double identity_residual = 0.0;  // |varpi(f) - gamma - certificate|_1
  bool certificate_valid = false;
  int solver_iterations = 0;
  std::string message;
};

/// Lagrange multiplier tuple for min varpi(f) on the simplex body:
/// lambda_i = d_i p - x'grad p (i < n), lambda_n = -x'grad p.
inline std::vector<Polynomial> copositivity_multipliers(const Polynomial& p) {
  const int nb = p.nvars();
  Polynomial xg(nb);
  for (int i = 0; i < nb; ++i) xg += Polynomial::variable(nb, i) * p.derivative(i);
  std::vector<Polynomial> lam;
  for (int i = 0; i < nb; ++i) lam.push_back(p.derivative(i) - xg);
  lam.push_back(Polynomial::constant(nb, 0.0) - xg);
  return lam;
}

inline CoposResult check_copositive(const SymTensor& t, int k, const CoposOptions& opt = {}) {
  const int n = t.n(), d = t.d();
  CoposResult out;
  out.order = k;
  if (k < (d + 1) / 2) throw DomainError("relaxation order must be at least ceil(d/2)");
  if (n == 1) {
    out.bound = t.values()[0];
    out.status = SolveStatus::Optimal;
    out.certificate_valid = true;
    out.verdict = out.bound >= -opt.tol_cop ? CoposVerdict::CertifiedCopositive : CoposVerdict::NotCertified;
    out.message = "single variable";
    return out;
  }
  const int nb = n - 1;
  const Polynomial p = varpi(form_polynomial(t), d);
  const SimplexDescription simplex(nb);
  const auto g = simplex.linear_constraints();
  const auto lam = copositivity_multipliers(p);

  std::vector<LocalizingSpec> specs{make_localizing(Polynomial::constant(nb, 1.0), k)};
  for (const auto& gi : g) specs.push_back(make_localizing(gi, k));
  if (opt.pairwise_products && k >= 1)
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = i + 1; j < g.size(); ++j) specs.push_back(make_localizing(g[i] * g[j], k));
  for (const auto& li : lam) {
    const Polynomial lp = li.pruned(0.0);
    if (lp.is_zero() || lp.degree() > 2 * k) continue;
    specs.push_back(make_localizing(lp, k));
  }
  std::vector<Polynomial> h;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Polynomial hi = (lam[i] * g[i]).pruned(0.0);
    if (!hi.is_zero() && hi.degree() <= 2 * k) h.push_back(hi);
  }

  const int nz = static_cast<int>(count_upto(nb, 2 * k));
  DualFormBuilder b(nz);
  b.add_equality({{0, 1.0}}, 1.0);
  std::vector<std::pair<Polynomial, PowerIndex>> ideal_cols;
  for (const auto& hj : h)
    for (const auto& beta : monomials_upto(nb, 2 * k - hj.degree())) {
      std::vector<std::pair<int, double>> row;
      for (const auto& [a, c] : hj.terms()) row.emplace_back(static_cast<int>(rank_upto(a + beta)), c);
      b.add_equality(row, 0.0);
      ideal_cols.emplace_back(hj, beta);
    }
  for (const auto& [a, c] : p.terms()) b.add_objective(static_cast<int>(rank_upto(a)), -c);
  for (const auto& spec : specs) detail::add_localizing_block(b, spec, 0);
  const ConicProgram prog = b.build();

  SolveOptions so;
  so.tol = opt.solver_tol;
  so.verbose = opt.verbose;
  const SolveResult res = solve(prog, so);
  out.status = res.status;
  out.solver_iterations = res.iterations;
  if (res.status == SolveStatus::DualInfeasible) {
    out.message = "moment relaxation infeasible";
    return out;
  }
  if (res.status == SolveStatus::PrimalInfeasible) {
    out.message = "SOS relaxation infeasible";
    return out;
  }
  if (res.x.size() != prog.n()) {
    out.message = "solver failed";
    return out;
  }
  // gamma = -x_0; identity p - gamma = sum g_j sigma_j - sum phi_j h_j
  const double gamma = -res.x(0);
  out.bound = gamma;
  Polynomial cert = detail::quadratic_module_element(specs, primal_psd_blocks(res.x, prog), nb);
  for (std::size_t j = 0; j < ideal_cols.size(); ++j)
    cert -= ideal_cols[j].first * Polynomial::monomial(ideal_cols[j].second, res.x(static_cast<Eigen::Index>(1 + j)));
  const Polynomial mismatch = p - Polynomial::constant(nb, gamma) - cert;
  out.identity_residual = detail::l1_norm(mismatch);
  // The identity is re-checked with PSD-clipped Gram blocks, so it certifies
  // varpi(f) >= gamma - residual on the critical set whatever the solver status.
  out.certificate_valid = out.identity_residual <= opt.identity_tol * (1.0 + detail::l1_norm(p));
  out.verdict = out.certificate_valid && gamma - out.identity_residual >= -opt.tol_cop
                    ? CoposVerdict::CertifiedCopositive
                    : CoposVerdict::NotCertified;
  out.message = out.certificate_valid ? "SOS certificate verified" : "SOS identity not verified";
  return out;
}

}  // namespace cptensor

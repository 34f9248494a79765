#pragma once

// Dehomogenization on the simplex: x_n <- 1 - (x_1 + ... + x_{n-1}).
// Maps forms of degree d in n variables to polynomials of degree <= d in
// nbar = n-1 variables, and homogeneous moment sequences to ordinary ones.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "cptensor/polycore.hpp"

namespace cptensor {

/// Truncated moment sequence z indexed by N^{nvars}_{deg} in graded order.
struct Tms {
  int nvars = 0;
  int deg = 0;
  std::vector<double> values;

  Tms() = default;
  Tms(int nv, int dg) : nvars(nv), deg(dg), values(static_cast<std::size_t>(count_upto(nv, dg)), 0.0) {}
  Tms(int nv, int dg, std::vector<double> v) : nvars(nv), deg(dg), values(std::move(v)) {
    detail::require(values.size() == static_cast<std::size_t>(count_upto(nvars, deg)),
                    "tms length must equal binomial(nvars+deg, deg)");
  }

  std::size_t size() const { return values.size(); }

  double at(const PowerIndex& alpha) const {
    detail::require(alpha.size() == nvars && alpha.degree() <= deg, "exponent outside tms index set");
    return values[static_cast<std::size_t>(rank_upto(alpha))];
  }

  /// Restriction to N^{nvars}_t; the graded order makes it a prefix.
  Tms truncated(int t) const {
    detail::require(t >= 0 && t <= deg, "truncation degree exceeds tms degree");
    const auto len = static_cast<std::size_t>(count_upto(nvars, t));
    return Tms(nvars, t, std::vector<double>(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(len)));
  }

  /// <p, z> = sum_alpha p_alpha z_alpha.
  double apply(const Polynomial& p) const {
    detail::require(p.nvars() == nvars, "polynomial variable count mismatch");
    double s = 0.0;
    for (const auto& [a, c] : p.terms()) s += c * at(a);
    return s;
  }

  double norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
  }

  /// [v]_deg.
  static Tms moments_of(std::span<const double> v, int deg) {
    return Tms(static_cast<int>(v.size()), deg, monomial_vector(v, deg));
  }
};

/// The simplicial body in R^{nbar} described by
/// x_1, ..., x_nbar >= 0, 1 - e'x >= 0 and the redundant ball 1 - |x|^2 >= 0.
struct SimplexDescription {
  int nbar = 0;

  explicit SimplexDescription(int nb) : nbar(nb) { detail::require(nb >= 1, "simplex needs nbar >= 1"); }

  /// (x_1, ..., x_nbar, 1 - e'x, 1 - |x|^2).
  std::vector<Polynomial> constraints() const {
    auto g = linear_constraints();
    Polynomial ball = Polynomial::constant(nbar, 1.0);
    for (int i = 0; i < nbar; ++i) ball.add_term(PowerIndex::unit(nbar, i) + PowerIndex::unit(nbar, i), -1.0);
    g.push_back(std::move(ball));
    return g;
  }

  /// (x_1, ..., x_nbar, 1 - e'x) without the ball.
  std::vector<Polynomial> linear_constraints() const {
    std::vector<Polynomial> g;
    for (int i = 0; i < nbar; ++i) g.push_back(Polynomial::variable(nbar, i));
    g.push_back(one_minus_sum());
    return g;
  }

  Polynomial one_minus_sum() const {
    Polynomial p = Polynomial::constant(nbar, 1.0);
    for (int i = 0; i < nbar; ++i) p.add_term(PowerIndex::unit(nbar, i), -1.0);
    return p;
  }

  bool contains(std::span<const double> x, double tol = 0.0) const {
    double s = 0.0;
    for (double v : x) {
      if (v < -tol) return false;
      s += v;
    }
    return s <= 1.0 + tol;
  }
};

/// varpi(f) = f(xbar, 1 - e'xbar) for a form f of degree d in n >= 2 variables.
inline Polynomial varpi(const Polynomial& f, int d) {
  const int n = f.nvars();
  detail::require(n >= 2, "dehomogenization needs n >= 2");
  if (!f.is_homogeneous(d)) throw DomainError("varpi expects a homogeneous form of degree d");
  const int nbar = n - 1;
  const Polynomial last = SimplexDescription(nbar).one_minus_sum();
  std::vector<Polynomial> powers{Polynomial::constant(nbar, 1.0)};
  for (int k = 1; k <= d; ++k) powers.push_back(powers.back() * last);

  Polynomial out(nbar);
  for (const auto& [a, c] : f.terms()) out += Polynomial::monomial(a.head(), c) * powers[a[n - 1]];
  return out;
}

inline Polynomial varpi(const Polynomial& f) { return varpi(f, f.degree()); }

/// varpi^{-1}(p) = sum_alpha p_alpha xbar^alpha (e'x)^{d-|alpha|}.
inline Polynomial varpi_inverse(const Polynomial& p, int d) {
  const int nbar = p.nvars();
  detail::require(nbar >= 1, "varpi_inverse needs at least one variable");
  if (p.degree() > d) throw DomainError("polynomial degree exceeds the target form degree");
  const int n = nbar + 1;
  Polynomial sum(n);
  for (int i = 0; i < n; ++i) sum.add_term(PowerIndex::unit(n, i), 1.0);
  std::vector<Polynomial> powers{Polynomial::constant(n, 1.0)};
  for (int k = 1; k <= d; ++k) powers.push_back(powers.back() * sum);

  Polynomial out(n);
  for (const auto& [a, c] : p.terms()) out += Polynomial::monomial(a.append(0), c) * powers[d - a.degree()];
  return out;
}

/// z = varpi^{-T}(y): z_alpha = < xbar^alpha (e'x)^{d-|alpha|}, y > for
/// alpha in N^{n-1}_d. The expansion uses integer multinomial coefficients,
/// so integral input gives exact integral output for integer T.
template <class T>
std::vector<T> varpi_adjoint_inverse_values(int n, int d, std::span<const T> y) {
  detail::require(n >= 2 && d >= 0, "varpi_adjoint_inverse needs n >= 2");
  detail::require(y.size() == static_cast<std::size_t>(count_exact(n, d)), "htms length mismatch");
  const int nbar = n - 1;
  std::vector<std::vector<PowerIndex>> tails(d + 1);
  std::vector<std::vector<T>> tail_weights(d + 1);
  for (int m = 0; m <= d; ++m) {
    tails[m] = monomials_exact(n, m);
    for (const auto& b : tails[m]) tail_weights[m].push_back(static_cast<T>(multinomial(b)));
  }
  std::vector<T> z;
  z.reserve(static_cast<std::size_t>(count_upto(nbar, d)));
  for (const auto& alpha : monomials_upto(nbar, d)) {
    const int m = d - alpha.degree();
    const PowerIndex lifted = alpha.append(0);
    T acc{};
    for (std::size_t j = 0; j < tails[m].size(); ++j)
      acc += tail_weights[m][j] * y[static_cast<std::size_t>(rank_exact(lifted + tails[m][j]))];
    z.push_back(acc);
  }
  return z;
}

inline Tms varpi_adjoint_inverse(const Htms& y) {
  return Tms(y.n - 1, y.d, varpi_adjoint_inverse_values<double>(y.n, y.d, y.values));
}

/// Largest violation of v in Delta-bar: max(-min v_i, e'v - 1, 0).
inline double simplex_violation(std::span<const double> v) {
  double worst = 0.0;
  double s = 0.0;
  for (double x : v) {
    worst = std::max(worst, -x);
    s += x;
  }
  return std::max(worst, s - 1.0);
}

/// u = (v, 1 - e'v), clipped into the simplex. Violations above
/// `reject_tol` raise AtomRejected.
inline std::vector<double> lift_atom(std::span<const double> v, double reject_tol = 1e-3) {
  const double viol = simplex_violation(v);
  if (viol > reject_tol) throw AtomRejected("atom lies outside the simplex by " + std::to_string(viol));
  std::vector<double> u(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  u.push_back(1.0 - s);
  bool clipped = false;
  for (double& x : u) {
    if (x < 0.0) {
      x = 0.0;
      clipped = true;
    }
  }
  if (clipped) {
    double t = 0.0;
    for (double x : u) t += x;
    for (double& x : u) x /= t;
  }
  return u;
}

}  // namespace cptensor

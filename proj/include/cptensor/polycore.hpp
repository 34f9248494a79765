#pragma once

// Monomial indexing, sparse polynomials, symmetric tensors in canonical
// storage and the tensor <-> homogeneous moment isomorphism.
//
// Canonical orders:
//   * exact degree d ("hom"): lexicographically descending exponents,
//     x1^2, x1x2, ..., x1xn, x2^2, ...  (equivalently: sorted multi-indices
//     i1 <= ... <= id in ascending lexicographic order);
//   * degree <= D: graded, i.e. 1, x1, ..., xn, x1^2, x1x2, ..., each degree
//     block in the exact-degree order above.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cptensor/errors.hpp"

namespace cptensor {

// ---------------------------------------------------------------------------
// Combinatorics

/// Binomial coefficient C(n, k); zero outside 0 <= k <= n.
inline std::int64_t binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::int64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;  // exact at every step
  return r;
}

/// Number of monomials of exact degree `deg` in `nvars` variables.
inline std::int64_t count_exact(int nvars, int deg) {
  if (deg < 0) return 0;
  if (nvars == 0) return deg == 0 ? 1 : 0;
  return binomial(nvars + deg - 1, deg);
}

/// Number of monomials of degree <= `deg` in `nvars` variables.
inline std::int64_t count_upto(int nvars, int deg) {
  if (deg < 0) return 0;
  return binomial(nvars + deg, deg);
}

// ---------------------------------------------------------------------------
// PowerIndex

/// Exponent vector alpha in N^n. Ordered canonically (graded, then
/// lexicographically descending), so std::map iterates in [x]_d order.
class PowerIndex {
 public:
  PowerIndex() = default;
  explicit PowerIndex(std::vector<int> exponents) : e_(std::move(exponents)) {
    for (int a : e_) require_nonneg(a);
  }
  PowerIndex(std::initializer_list<int> exponents) : PowerIndex(std::vector<int>(exponents)) {}

  static PowerIndex zero(int nvars) { return PowerIndex(std::vector<int>(nvars, 0)); }
  static PowerIndex unit(int nvars, int i) {
    std::vector<int> e(nvars, 0);
    e.at(i) = 1;
    return PowerIndex(std::move(e));
  }
  /// Exponent vector of the monomial x_{i1} ... x_{id} (0-based labels).
  static PowerIndex from_labels(int nvars, std::span<const int> labels) {
    std::vector<int> e(nvars, 0);
    for (int i : labels) {
      detail::require(i >= 0 && i < nvars, "label out of range");
      ++e[i];
    }
    return PowerIndex(std::move(e));
  }

  int size() const { return static_cast<int>(e_.size()); }
  int degree() const { return std::accumulate(e_.begin(), e_.end(), 0); }
  int operator[](int i) const { return e_[i]; }
  const std::vector<int>& exponents() const { return e_; }

  /// Sorted 0-based labels (i1 <= ... <= id) of the monomial.
  std::vector<int> labels() const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i) out.insert(out.end(), e_[i], i);
    return out;
  }

  PowerIndex operator+(const PowerIndex& o) const {
    detail::require(size() == o.size(), "PowerIndex size mismatch");
    std::vector<int> e(e_);
    for (int i = 0; i < size(); ++i) e[i] += o.e_[i];
    return PowerIndex(std::move(e));
  }

  /// Drops the last coordinate (alpha in N^n -> N^{n-1}).
  PowerIndex head() const { return PowerIndex(std::vector<int>(e_.begin(), e_.end() - 1)); }
  /// Appends one coordinate.
  PowerIndex append(int a) const {
    std::vector<int> e(e_);
    e.push_back(a);
    return PowerIndex(std::move(e));
  }

  friend bool operator==(const PowerIndex&, const PowerIndex&) = default;
  friend std::strong_ordering operator<=>(const PowerIndex& a, const PowerIndex& b) {
    if (auto c = a.degree() <=> b.degree(); c != 0) return c;
    if (auto c = a.size() <=> b.size(); c != 0) return c;
    for (int i = 0; i < a.size(); ++i) {
      if (a.e_[i] != b.e_[i]) return b.e_[i] <=> a.e_[i];  // descending
    }
    return std::strong_ordering::equal;
  }

  /// "210" style label; comma-separated once any exponent exceeds 9.
  std::string to_string() const {
    const bool wide = std::any_of(e_.begin(), e_.end(), [](int a) { return a > 9; });
    std::string s;
    for (std::size_t i = 0; i < e_.size(); ++i) {
      if (wide && i > 0) s += ',';
      s += std::to_string(e_[i]);
    }
    return s;
  }

 private:
  static void require_nonneg(int a) { detail::require(a >= 0, "negative exponent"); }
  std::vector<int> e_;
};

/// d! / prod(alpha_i!) -- the number of label tuples giving x^alpha.
inline std::int64_t multinomial(const PowerIndex& alpha) {
  std::int64_t r = 1;
  int total = 0;
  for (int i = 0; i < alpha.size(); ++i) {
    total += alpha[i];
    r *= binomial(total, alpha[i]);
  }
  return r;
}

/// Position of alpha among the exact-degree monomials of its degree.
inline std::int64_t rank_exact(const PowerIndex& alpha) {
  const int nv = alpha.size();
  int remaining = alpha.degree();
  std::int64_t r = 0;
  for (int i = 0; i + 1 < nv; ++i) {
    // monomials whose i-th exponent exceeds alpha_i come first
    r += count_upto(nv - i - 1, remaining - alpha[i] - 1);
    remaining -= alpha[i];
  }
  return r;
}

/// Inverse of rank_exact.
inline PowerIndex unrank_exact(int nvars, int deg, std::int64_t r) {
  detail::require(r >= 0 && r < count_exact(nvars, deg), "rank out of range");
  std::vector<int> e(nvars, 0);
  int remaining = deg;
  for (int i = 0; i + 1 < nvars; ++i) {
    const int m = nvars - i - 1;
    int a = remaining;
    while (a > 0 && count_upto(m, remaining - a) <= r) --a;
    r -= count_upto(m, remaining - a - 1);
    e[i] = a;
    remaining -= a;
  }
  if (nvars > 0) e[nvars - 1] = remaining;
  return PowerIndex(std::move(e));
}

/// Position of alpha in the graded order of all monomials of degree <= D.
inline std::int64_t rank_upto(const PowerIndex& alpha) {
  return count_upto(alpha.size(), alpha.degree() - 1) + rank_exact(alpha);
}

/// Exponents of exact degree `deg` in canonical order.
inline std::vector<PowerIndex> monomials_exact(int nvars, int deg) {
  std::vector<PowerIndex> out;
  out.reserve(static_cast<std::size_t>(count_exact(nvars, deg)));
  if (nvars == 0) {
    if (deg == 0) out.emplace_back();
    return out;
  }
  std::vector<int> e(nvars, 0);
  std::function<void(int, int)> rec = [&](int pos, int rem) {
    if (pos == nvars - 1) {
      e[pos] = rem;
      out.emplace_back(e);
      return;
    }
    for (int a = rem; a >= 0; --a) {
      e[pos] = a;
      rec(pos + 1, rem - a);
    }
  };
  rec(0, deg);
  return out;
}

/// Exponents of degree <= `deg` in canonical graded order.
inline std::vector<PowerIndex> monomials_upto(int nvars, int deg) {
  std::vector<PowerIndex> out;
  out.reserve(static_cast<std::size_t>(count_upto(nvars, deg)));
  for (int t = 0; t <= deg; ++t) {
    auto block = monomials_exact(nvars, t);
    out.insert(out.end(), block.begin(), block.end());
  }
  return out;
}

/// [x]_deg evaluated at a point: all monomials of degree <= deg.
inline std::vector<double> monomial_vector(std::span<const double> x, int deg) {
  std::vector<double> out;
  for (const auto& a : monomials_upto(static_cast<int>(x.size()), deg)) {
    double v = 1.0;
    for (int i = 0; i < a.size(); ++i) v *= std::pow(x[i], a[i]);
    out.push_back(v);
  }
  return out;
}

/// [x]_deg^hom: monomials of exact degree deg.
inline std::vector<double> monomial_vector_hom(std::span<const double> x, int deg) {
  std::vector<double> out;
  for (const auto& a : monomials_exact(static_cast<int>(x.size()), deg)) {
    double v = 1.0;
    for (int i = 0; i < a.size(); ++i) v *= std::pow(x[i], a[i]);
    out.push_back(v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Polynomial

/// Sparse real polynomial in a fixed number of variables. Exact zeros are
/// never stored.
class Polynomial {
 public:
  using Terms = std::map<PowerIndex, double>;

  explicit Polynomial(int nvars = 0) : n_(nvars) {}

  static Polynomial constant(int nvars, double c) {
    Polynomial p(nvars);
    p.add_term(PowerIndex::zero(nvars), c);
    return p;
  }
  static Polynomial variable(int nvars, int i) {
    Polynomial p(nvars);
    p.add_term(PowerIndex::unit(nvars, i), 1.0);
    return p;
  }
  static Polynomial monomial(const PowerIndex& alpha, double c = 1.0) {
    Polynomial p(alpha.size());
    p.add_term(alpha, c);
    return p;
  }
  /// Polynomial with coefficients listed against `basis`.
  static Polynomial from_coefficients(int nvars, std::span<const PowerIndex> basis,
                                      std::span<const double> coeffs) {
    detail::require(basis.size() == coeffs.size(), "coefficient count mismatch");
    Polynomial p(nvars);
    for (std::size_t i = 0; i < basis.size(); ++i) p.add_term(basis[i], coeffs[i]);
    return p;
  }

  int nvars() const { return n_; }
  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  int degree() const {
    int d = 0;
    for (const auto& [a, c] : terms_) d = std::max(d, a.degree());
    return d;
  }

  bool is_homogeneous(int deg) const {
    return std::all_of(terms_.begin(), terms_.end(),
                       [deg](const auto& t) { return t.first.degree() == deg; });
  }

  double coeff(const PowerIndex& alpha) const {
    auto it = terms_.find(alpha);
    return it == terms_.end() ? 0.0 : it->second;
  }

  void add_term(const PowerIndex& alpha, double c) {
    detail::require(alpha.size() == n_, "monomial has wrong variable count");
    if (c == 0.0) return;
    auto [it, inserted] = terms_.try_emplace(alpha, c);
    if (!inserted) {
      it->second += c;
      if (it->second == 0.0) terms_.erase(it);
    }
  }

  /// Coefficient vector against `basis` (terms outside the basis are an error).
  std::vector<double> coefficients(std::span<const PowerIndex> basis) const {
    std::map<PowerIndex, std::size_t> pos;
    for (std::size_t i = 0; i < basis.size(); ++i) pos[basis[i]] = i;
    std::vector<double> out(basis.size(), 0.0);
    for (const auto& [a, c] : terms_) {
      auto it = pos.find(a);
      detail::require(it != pos.end(), "polynomial has a term outside the basis");
      out[it->second] = c;
    }
    return out;
  }

  double evaluate(std::span<const double> x) const {
    detail::require(static_cast<int>(x.size()) == n_, "evaluation point has wrong length");
    double s = 0.0;
    for (const auto& [a, c] : terms_) {
      double v = c;
      for (int i = 0; i < n_; ++i)
        if (a[i] > 0) v *= std::pow(x[i], a[i]);
      s += v;
    }
    return s;
  }

  Polynomial derivative(int i) const {
    Polynomial out(n_);
    for (const auto& [a, c] : terms_) {
      if (a[i] == 0) continue;
      std::vector<int> e = a.exponents();
      --e[i];
      out.add_term(PowerIndex(std::move(e)), c * a[i]);
    }
    return out;
  }

  /// Drops coefficients with |c| <= tol.
  Polynomial pruned(double tol) const {
    Polynomial out(n_);
    for (const auto& [a, c] : terms_)
      if (std::abs(c) > tol) out.terms_.emplace(a, c);
    return out;
  }

  /// Terms of degree <= deg.
  Polynomial truncated(int deg) const {
    Polynomial out(n_);
    for (const auto& [a, c] : terms_)
      if (a.degree() <= deg) out.terms_.emplace(a, c);
    return out;
  }

  double max_abs_coeff() const {
    double m = 0.0;
    for (const auto& [a, c] : terms_) m = std::max(m, std::abs(c));
    return m;
  }

  Polynomial& operator+=(const Polynomial& o) {
    detail::require(n_ == o.n_, "polynomial variable count mismatch");
    for (const auto& [a, c] : o.terms_) add_term(a, c);
    return *this;
  }
  Polynomial& operator-=(const Polynomial& o) { return *this += (-1.0) * o; }
  Polynomial& operator*=(double s) {
    if (s == 0.0) {
      terms_.clear();
      return *this;
    }
    for (auto& [a, c] : terms_) c *= s;
    return *this;
  }

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(double s, Polynomial p) { return p *= s; }
  friend Polynomial operator*(Polynomial p, double s) { return p *= s; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    detail::require(a.n_ == b.n_, "polynomial variable count mismatch");
    Polynomial out(a.n_);
    for (const auto& [ea, ca] : a.terms_)
      for (const auto& [eb, cb] : b.terms_) out.add_term(ea + eb, ca * cb);
    return out;
  }

  Polynomial pow(int k) const {
    detail::require(k >= 0, "negative power");
    Polynomial out = constant(n_, 1.0);
    Polynomial base = *this;
    while (k > 0) {
      if (k & 1) out = out * base;
      k >>= 1;
      if (k > 0) base = base * base;
    }
    return out;
  }

  friend bool operator==(const Polynomial&, const Polynomial&) = default;

 private:
  int n_;
  Terms terms_;
};

// ---------------------------------------------------------------------------
// Symmetric tensors and homogeneous moment sequences

/// Homogeneous truncated moment sequence y, indexed by exact-degree-d
/// exponents in canonical order.
struct Htms {
  int n = 0;
  int d = 0;
  std::vector<double> values;

  Htms() = default;
  Htms(int n_, int d_) : n(n_), d(d_), values(static_cast<std::size_t>(count_exact(n_, d_)), 0.0) {}
  Htms(int n_, int d_, std::vector<double> v) : n(n_), d(d_), values(std::move(v)) {
    detail::require(values.size() == static_cast<std::size_t>(count_exact(n, d)),
                    "htms length must equal binomial(n+d-1, d)");
  }

  std::size_t size() const { return values.size(); }
  double at(const PowerIndex& alpha) const {
    detail::require(alpha.size() == n && alpha.degree() == d, "exponent outside htms index set");
    return values[static_cast<std::size_t>(rank_exact(alpha))];
  }
  double norm() const {
    return std::sqrt(std::inner_product(values.begin(), values.end(), values.begin(), 0.0));
  }

  /// [u]_d^hom.
  static Htms moments_of(std::span<const double> u, int d) {
    return Htms(static_cast<int>(u.size()), d, monomial_vector_hom(u, d));
  }
};

/// Symmetric tensor of order d over R^n. One value per sorted multi-index,
/// stored in canonical order; the full entry at any permutation of the
/// multi-index is the stored value.
class SymTensor {
 public:
  SymTensor() = default;
  SymTensor(int n, int d) : n_(n), d_(d), v_(static_cast<std::size_t>(count_exact(n, d)), 0.0) {
    detail::require(n >= 1 && d >= 1, "tensor needs n >= 1 and d >= 1");
  }
  SymTensor(int n, int d, std::vector<double> values) : n_(n), d_(d), v_(std::move(values)) {
    detail::require(n >= 1 && d >= 1, "tensor needs n >= 1 and d >= 1");
    detail::require(v_.size() == static_cast<std::size_t>(count_exact(n, d)),
                    "canonical value count must equal binomial(n+d-1, d)");
  }

  /// Symmetric matrix as an order-2 tensor; asymmetry beyond `tol` is an error.
  static SymTensor from_matrix(const Eigen::MatrixXd& m, double tol = 0.0) {
    detail::require(m.rows() == m.cols() && m.rows() >= 1, "matrix must be square");
    SymTensor t(static_cast<int>(m.rows()), 2);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        detail::require(std::abs(m(i, j) - m(j, i)) <= tol, "matrix is not symmetric");
    for (std::size_t k = 0; k < t.size(); ++k) {
      auto l = t.labels(k);
      t.v_[k] = m(l[0], l[1]);
    }
    return t;
  }

  /// weight * u^{(x) d}.
  static SymTensor rank_one(std::span<const double> u, int d, double weight = 1.0) {
    SymTensor t(static_cast<int>(u.size()), d);
    auto mv = monomial_vector_hom(u, d);
    for (std::size_t k = 0; k < mv.size(); ++k) t.v_[k] = weight * mv[k];
    return t;
  }

  int n() const { return n_; }
  int d() const { return d_; }
  std::size_t size() const { return v_.size(); }
  const std::vector<double>& values() const { return v_; }
  double operator[](std::size_t k) const { return v_[k]; }
  double& operator[](std::size_t k) { return v_[k]; }

  /// Position of a multi-index (any permutation, 0-based) in canonical storage.
  std::size_t position(std::span<const int> idx) const {
    detail::require(static_cast<int>(idx.size()) == d_, "multi-index length must equal the order");
    return static_cast<std::size_t>(rank_exact(PowerIndex::from_labels(n_, idx)));
  }
  double at(std::span<const int> idx) const { return v_[position(idx)]; }
  double at(std::initializer_list<int> idx) const {
    return at(std::span<const int>(idx.begin(), idx.size()));
  }
  void set(std::span<const int> idx, double value) { v_[position(idx)] = value; }

  PowerIndex power(std::size_t k) const { return unrank_exact(n_, d_, static_cast<std::int64_t>(k)); }
  std::vector<int> labels(std::size_t k) const { return power(k).labels(); }

  SymTensor& operator+=(const SymTensor& o) {
    detail::require(n_ == o.n_ && d_ == o.d_, "tensor shape mismatch");
    for (std::size_t k = 0; k < v_.size(); ++k) v_[k] += o.v_[k];
    return *this;
  }
  SymTensor& operator*=(double s) {
    for (double& x : v_) x *= s;
    return *this;
  }
  friend SymTensor operator+(SymTensor a, const SymTensor& b) { return a += b; }
  friend SymTensor operator-(SymTensor a, const SymTensor& b) { return a += (-1.0) * b; }
  friend SymTensor operator*(double s, SymTensor t) { return t *= s; }
  friend bool operator==(const SymTensor&, const SymTensor&) = default;

 private:
  int n_ = 0;
  int d_ = 0;
  std::vector<double> v_;
};

/// phi: S^d(R^n) -> R^{N-bar^n_d}, y_alpha = A_{i1..id} for x^alpha = x_{i1}..x_{id}.
inline Htms phi(const SymTensor& t) { return Htms(t.n(), t.d(), t.values()); }

/// Inverse of phi.
inline SymTensor phi_inverse(const Htms& y) { return SymTensor(y.n, y.d, y.values); }

/// Hilbert-Schmidt inner product: sum over all n^d label tuples, evaluated
/// as a multinomial-weighted sum over canonical entries.
inline double hs_inner(const SymTensor& a, const SymTensor& b) {
  detail::require(a.n() == b.n() && a.d() == b.d(), "tensor shape mismatch");
  const auto basis = monomials_exact(a.n(), a.d());
  double s = 0.0;
  for (std::size_t k = 0; k < basis.size(); ++k)
    s += static_cast<double>(multinomial(basis[k])) * a[k] * b[k];
  return s;
}

inline double hs_norm(const SymTensor& a) { return std::sqrt(hs_inner(a, a)); }

/// The form B(x) = sum over all label tuples of B_{i1..id} x_{i1}..x_{id}.
inline double eval_form(const SymTensor& t, std::span<const double> x) {
  detail::require(static_cast<int>(x.size()) == t.n(), "point length must equal tensor dimension");
  const auto basis = monomials_exact(t.n(), t.d());
  double s = 0.0;
  for (std::size_t k = 0; k < basis.size(); ++k) {
    double v = static_cast<double>(multinomial(basis[k])) * t[k];
    for (int i = 0; i < t.n(); ++i)
      if (basis[k][i] > 0) v *= std::pow(x[i], basis[k][i]);
    s += v;
  }
  return s;
}

/// The form of a tensor as a Polynomial (multinomial-weighted coefficients).
inline Polynomial form_polynomial(const SymTensor& t) {
  Polynomial p(t.n());
  const auto basis = monomials_exact(t.n(), t.d());
  for (std::size_t k = 0; k < basis.size(); ++k)
    p.add_term(basis[k], static_cast<double>(multinomial(basis[k])) * t[k]);
  return p;
}

/// Inverse of form_polynomial for a homogeneous polynomial of degree d.
inline SymTensor tensor_of_form(const Polynomial& f, int d) {
  if (!f.is_homogeneous(d)) throw DomainError("form is not homogeneous of the requested degree");
  SymTensor t(f.nvars(), d);
  for (const auto& [a, c] : f.terms())
    t[static_cast<std::size_t>(rank_exact(a))] = c / static_cast<double>(multinomial(a));
  return t;
}

// ---------------------------------------------------------------------------
// CP decompositions

struct Atom {
  double weight = 0.0;
  std::vector<double> point;
};

/// sum_i weight_i * u_i^{(x) d} with u_i in the simplex.
struct CpDecomposition {
  static constexpr double kWeightTol = 1e-6;
  static constexpr double kSimplexTol = 1e-6;

  int d = 0;
  std::vector<Atom> atoms;

  /// Nonnegative weights and simplex atoms within the library tolerances.
  bool valid(int n) const {
    for (const auto& a : atoms) {
      if (a.weight < -kWeightTol) return false;
      if (static_cast<int>(a.point.size()) != n) return false;
      double s = 0.0;
      for (double v : a.point) {
        if (v < -kSimplexTol) return false;
        s += v;
      }
      if (std::abs(s - 1.0) > kSimplexTol) return false;
    }
    return true;
  }
};

inline SymTensor reconstruct(const CpDecomposition& dec, int n) {
  SymTensor t(n, dec.d);
  for (const auto& a : dec.atoms) {
    detail::require(static_cast<int>(a.point.size()) == n, "atom length must equal n");
    t += SymTensor::rank_one(a.point, dec.d, a.weight);
  }
  return t;
}

}  // namespace cptensor

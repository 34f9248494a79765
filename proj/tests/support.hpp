#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "cptensor/conic.hpp"
#include "cptensor/polycore.hpp"

namespace cpt_test {

inline std::vector<double> random_vector(std::mt19937_64& g, int n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (double& x : v) x = u(g);
  return v;
}

/// Uniform-ish point of the standard simplex in R^n.
inline std::vector<double> random_simplex_point(std::mt19937_64& g, int n) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> v(static_cast<std::size_t>(n));
  double s = 0.0;
  for (double& x : v) s += (x = e(g));
  for (double& x : v) x /= s;
  return v;
}

/// Random dense polynomial with every monomial of degree <= deg (or == deg).
inline cptensor::Polynomial random_polynomial(std::mt19937_64& g, int nvars, int deg, bool homogeneous) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  cptensor::Polynomial p(nvars);
  const auto basis = homogeneous ? cptensor::monomials_exact(nvars, deg) : cptensor::monomials_upto(nvars, deg);
  for (const auto& a : basis) p.add_term(a, u(g));
  return p;
}

/// Entry of sum_i w_i u_i^{(x)d} at a label tuple, by brute force.
inline double atomic_entry(const std::vector<std::vector<double>>& u, const std::vector<double>& w,
                           std::span<const int> labels) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    double p = w[i];
    for (int l : labels) p *= u[i][static_cast<std::size_t>(l)];
    s += p;
  }
  return s;
}

/// Calls f on every label tuple in {0..n-1}^d.
template <class F>
void for_each_tuple(int n, int d, F&& f) {
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  while (true) {
    f(std::span<const int>(idx));
    int pos = d - 1;
    while (pos >= 0 && ++idx[static_cast<std::size_t>(pos)] == n) idx[static_cast<std::size_t>(pos--)] = 0;
    if (pos < 0) return;
  }
}


inline Eigen::MatrixXd random_spd(std::mt19937_64& g, int n, double shift) {
  std::normal_distribution<double> N(0.0, 1.0);
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = N(g);
  return a * a.transpose() / n + shift * Eigen::MatrixXd::Identity(n, n);
}

inline Eigen::VectorXd random_interior(std::mt19937_64& g, const cptensor::ConeSpec& cone) {
  std::uniform_real_distribution<double> U(0.2, 2.0);
  std::normal_distribution<double> N(0.0, 1.0);
  Eigen::VectorXd v(cone.dim());
  int off = 0;
  for (const auto& blk : cone.blocks) {
    switch (blk.kind) {
      case cptensor::ConeKind::Free:
        for (int i = 0; i < blk.dim(); ++i) v(off + i) = N(g);
        break;
      case cptensor::ConeKind::NonNeg:
        for (int i = 0; i < blk.dim(); ++i) v(off + i) = U(g);
        break;
      case cptensor::ConeKind::SecondOrder: {
        double nr = 0.0;
        for (int i = 1; i < blk.dim(); ++i) {
          v(off + i) = N(g);
          nr += v(off + i) * v(off + i);
        }
        v(off) = std::sqrt(nr) + U(g);
        break;
      }
      case cptensor::ConeKind::PsdTriangle: v.segment(off, blk.dim()) = cptensor::svec(random_spd(g, blk.size, 0.3)); break;
    }
    off += blk.dim();
  }
  return v;
}

/// Random program with a planted interior primal-dual pair; s is zero on
/// free coordinates.
inline cptensor::ConicProgram planted(std::mt19937_64& g, const cptensor::ConeSpec& cone, int m, Eigen::VectorXd* xs = nullptr) {
  std::normal_distribution<double> N(0.0, 1.0);
  std::bernoulli_distribution keep(0.6);
  cptensor::ConicProgram p;
  p.m = m;
  p.cone = cone;
  const int n = cone.dim();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      if (keep(g)) {
        A(i, j) = N(g);
        p.A.push_back({i, j, A(i, j)});
      }
  const Eigen::VectorXd x0 = random_interior(g, cone);
  Eigen::VectorXd s0 = random_interior(g, cone);
  int off = 0;
  for (const auto& blk : cone.blocks) {
    if (blk.kind == cptensor::ConeKind::Free) s0.segment(off, blk.dim()).setZero();
    off += blk.dim();
  }
  Eigen::VectorXd y0(m);
  for (int i = 0; i < m; ++i) y0(i) = N(g);
  p.b = A * x0;
  p.c = A.transpose() * y0 + s0;
  if (xs) *xs = x0;
  return p;
}


}  // namespace cpt_test

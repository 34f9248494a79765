#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "cptensor/moment.hpp"
#include "support.hpp"

using namespace cptensor;

namespace {

Tms atomic_tms(const std::vector<std::vector<double>>& pts, const std::vector<double>& w, int deg) {
  Tms z(static_cast<int>(pts.front().size()), deg);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto mv = monomial_vector(pts[i], deg);
    for (std::size_t k = 0; k < mv.size(); ++k) z.values[k] += w[i] * mv[k];
  }
  return z;
}

/// Greedy matching of recovered atoms to planted ones; returns the worst
/// coordinate distance and the worst weight distance.
std::pair<double, double> match_atoms(const std::vector<Atom>& got, const std::vector<std::vector<double>>& pts,
                                      const std::vector<double>& w) {
  std::vector<bool> used(got.size(), false);
  double worst_pt = 0.0, worst_w = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double best = 1e300;
    std::size_t bj = 0;
    for (std::size_t j = 0; j < got.size(); ++j) {
      if (used[j]) continue;
      double dist = 0.0;
      for (std::size_t c = 0; c < pts[i].size(); ++c) dist = std::max(dist, std::abs(got[j].point[c] - pts[i][c]));
      if (dist < best) {
        best = dist;
        bj = j;
      }
    }
    used[bj] = true;
    worst_pt = std::max(worst_pt, best);
    worst_w = std::max(worst_w, std::abs(got[bj].weight - w[i]));
  }
  return {worst_pt, worst_w};
}

}  // namespace

TEST(MomentMatrix, TwoVariableOrderTwoLayout) {
  // z indexed 00,10,01,20,11,02,30,21,12,03,40,31,22,13,04 with values 0..14.
  std::vector<double> v(15);
  for (int i = 0; i < 15; ++i) v[i] = i;
  const Tms z(2, 4, v);
  const Eigen::MatrixXd m = moment_matrix(z, 2);
  Eigen::MatrixXd expected(6, 6);
  expected << 0, 1, 2, 3, 4, 5,   //
      1, 3, 4, 6, 7, 8,           //
      2, 4, 5, 7, 8, 9,           //
      3, 6, 7, 10, 11, 12,        //
      4, 7, 8, 11, 12, 13,        //
      5, 8, 9, 12, 13, 14;
  EXPECT_EQ(m, expected);

  Eigen::MatrixXd lx1(3, 3);
  lx1 << 1, 3, 4, 3, 6, 7, 4, 7, 8;
  EXPECT_EQ(localizing_matrix(Polynomial::variable(2, 0), z, 2), lx1);

  const Eigen::MatrixXd l1 = localizing_matrix(SimplexDescription(2).one_minus_sum(), z, 2);
  Eigen::MatrixXd le(3, 3);
  le << 0 - 1 - 2, 1 - 3 - 4, 2 - 4 - 5,  //
      1 - 3 - 4, 3 - 6 - 7, 4 - 7 - 8,    //
      2 - 4 - 5, 4 - 7 - 8, 5 - 8 - 9;
  EXPECT_EQ(l1, le);
}

TEST(MomentMatrix, RankOneForDiracAndSymmetric) {
  const std::vector<double> v{0.3, 0.2};
  const Eigen::MatrixXd m = moment_matrix(Tms::moments_of(v, 4), 2);
  const auto mv = monomial_vector(v, 2);
  const Eigen::Map<const Eigen::VectorXd> b(mv.data(), 6);
  EXPECT_LE((m - b * b.transpose()).cwiseAbs().maxCoeff(), 1e-15);

  std::mt19937_64 g(31);
  const Tms z(3, 6, cpt_test::random_vector(g, static_cast<int>(count_upto(3, 6))));
  const Eigen::MatrixXd r = moment_matrix(z, 3);
  EXPECT_EQ(r, r.transpose());
  EXPECT_EQ(localizing_matrix(Polynomial::constant(3, 1.0), z, 3), r);
  EXPECT_THROW(moment_matrix(z, 4), StructuralError);
}

TEST(LocalizingMatrix, DefiningIdentityOnRandomTriples) {
  std::mt19937_64 g(32);
  std::uniform_int_distribution<int> pick(1, 3);
  for (int trial = 0; trial < 100; ++trial) {
    const int nv = pick(g), k = pick(g);
    const int dq = std::uniform_int_distribution<int>(0, 2)(g);
    const Polynomial q = cpt_test::random_polynomial(g, nv, dq, false);
    const int order = k - ceil_half(q.degree());
    const Tms z(nv, 2 * k, cpt_test::random_vector(g, static_cast<int>(count_upto(nv, 2 * k))));
    const auto basis = monomials_upto(nv, order);
    const auto av = cpt_test::random_vector(g, static_cast<int>(basis.size()));
    const Polynomial a = Polynomial::from_coefficients(nv, basis, av);
    const double lhs = z.apply(q * a * a);
    const Eigen::Map<const Eigen::VectorXd> va(av.data(), static_cast<Eigen::Index>(av.size()));
    const double rhs = va.dot(localizing_matrix(q, z, k) * va);
    EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(SimplexCone, BlockSizes) {
  const auto blocks = cone_constraints_simplex(3, 2);
  ASSERT_EQ(blocks.size(), 5u);
  EXPECT_EQ(blocks[0].side(), 6);
  for (std::size_t i = 1; i < blocks.size(); ++i) EXPECT_EQ(blocks[i].side(), 3);
  EXPECT_EQ(cone_constraints_simplex(5, 4)[0].side(), 70);
  const auto small = cone_constraints_simplex(2, 1);
  ASSERT_EQ(small.size(), 4u);
  EXPECT_EQ(small[0].side(), 2);
  for (std::size_t i = 1; i < small.size(); ++i) EXPECT_EQ(small[i].side(), 1);
}

TEST(SimplexCone, MeasuresOnTheSimplexGivePsdBlocks) {
  std::mt19937_64 g(33);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 4, k = 2;
    std::vector<std::vector<double>> pts;
    std::vector<double> w;
    for (int i = 0; i < 5; ++i) {
      auto u = cpt_test::random_simplex_point(g, n);
      u.pop_back();
      pts.push_back(u);
      w.push_back(0.1 + i);
    }
    const Tms z = atomic_tms(pts, w, 2 * k);
    for (const auto& spec : cone_constraints_simplex(n, k)) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(spec.evaluate(z));
      EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8 * z.norm());
    }
  }
}

TEST(FlatTruncation, Cases) {
  const std::vector<double> v{0.3, 0.2};
  for (int t = 1; t <= 3; ++t) {
    const auto rep = flat_truncation(Tms::moments_of(v, 2 * t), t);
    EXPECT_EQ(rep.rank_prev, 1);
    EXPECT_EQ(rep.rank, 1);
    EXPECT_TRUE(rep.flat);
  }
  const Tms two = atomic_tms({{0.1, 0.3}, {0.5, 0.2}}, {2.0, 3.0}, 4);
  const auto rep2 = flat_truncation(two, 2);
  EXPECT_EQ(rep2.rank_prev, 2);
  EXPECT_EQ(rep2.rank, 2);
  EXPECT_TRUE(rep2.flat);

  std::mt19937_64 g(34);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 7; ++i) {
    auto u = cpt_test::random_simplex_point(g, 3);
    u.pop_back();
    pts.push_back(u);
  }
  const auto rep7 = flat_truncation(atomic_tms(pts, std::vector<double>(7, 1.0), 2), 1);
  EXPECT_EQ(rep7.rank_prev, 1);
  EXPECT_GT(rep7.rank, 1);
  EXPECT_FALSE(rep7.flat);
}

TEST(ExtractAtoms, SingleDirac) {
  const std::vector<double> v{0.25, 0.5};
  const auto atoms = extract_atoms(Tms::moments_of(v, 4), 2, 1);
  ASSERT_EQ(atoms.size(), 1u);
  EXPECT_NEAR(atoms[0].weight, 1.0, 1e-8);
  EXPECT_NEAR(atoms[0].point[0], 0.25, 1e-8);
  EXPECT_NEAR(atoms[0].point[1], 0.5, 1e-8);
}

TEST(ExtractAtoms, TwoPlantedAtoms) {
  const std::vector<std::vector<double>> pts{{0.1, 0.3}, {0.5, 0.2}};
  const auto atoms = extract_atoms(atomic_tms(pts, {2.0, 3.0}, 4), 2, 2);
  const auto [dp, dw] = match_atoms(atoms, pts, {2.0, 3.0});
  EXPECT_LE(dp, 1e-6);
  EXPECT_LE(dw, 1e-6);
}

TEST(ExtractAtoms, FourAtomMeasureWithRationalAtoms) {
  // Atoms u in the 5-simplex, measured after dropping the last coordinate.
  const std::vector<std::vector<double>> u{
      {0, 0, 0, 0, 1}, {2.0 / 8, 0, 0, 3.0 / 8, 3.0 / 8}, {2.0 / 3, 1.0 / 3, 0, 0, 0}, {0, 3.0 / 5, 0, 2.0 / 5, 0}};
  const std::vector<double> w{1.0, 64.0 / 3.0, 4.5, 25.0 / 6.0};
  std::vector<std::vector<double>> pts;
  for (const auto& x : u) pts.emplace_back(x.begin(), x.end() - 1);
  const Tms z = atomic_tms(pts, w, 4);
  const auto rep = flat_truncation(z, 2);
  ASSERT_TRUE(rep.flat);
  ASSERT_EQ(rep.rank, 4);
  const auto atoms = extract_atoms(z, 2, 4);
  std::vector<Atom> lifted;
  for (const auto& a : atoms) lifted.push_back({a.weight, lift_atom(a.point)});
  const auto [dp, dw] = match_atoms(lifted, u, w);
  EXPECT_LE(dp, 1e-3);
  EXPECT_LE(dw, 1e-3);
}

TEST(ExtractAtoms, RandomPlantedRoundTrip) {
  std::mt19937_64 g(35);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + trial % 4;
    const int r = 1 + trial % 4;
    const int nv = n - 1;
    int t = 1;
    while (count_upto(nv, t - 1) < r) ++t;
    std::vector<std::vector<double>> pts;
    std::vector<double> w;
    for (int i = 0; i < r; ++i) {
      auto u = cpt_test::random_simplex_point(g, n);
      u.pop_back();
      pts.push_back(u);
      w.push_back(0.5 + std::uniform_real_distribution<double>(0, 1)(g));
    }
    const Tms z = atomic_tms(pts, w, 2 * t);
    const auto atoms = extract_atoms(z, t, r, 7 + trial);
    ASSERT_EQ(atoms.size(), static_cast<std::size_t>(r));
    const auto [dp, dw] = match_atoms(atoms, pts, w);
    EXPECT_LE(dp, 1e-6) << "trial " << trial;
    EXPECT_LE(dw, 1e-6) << "trial " << trial;
  }
}

TEST(ExtractAtoms, RankBeyondBasisIsRejected) {
  const Tms z = atomic_tms({{0.1, 0.3}, {0.5, 0.2}}, {2.0, 3.0}, 2);
  EXPECT_THROW(extract_atoms(z, 1, 2), ExtractionError);
}

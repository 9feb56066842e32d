#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "pqlab/solver.hpp"

using namespace pqlab;
using std::numbers::pi;

namespace {

MeshPtr mesh() {
  static const auto m = Mesh::build(Domain::interval(1.0), 2048);
  return m;
}

ProblemParams pq(double a, double b) {
  ProblemParams prm;
  prm.alpha = a;
  prm.beta = b;
  return prm;
}

struct Env {
  CurveSolver solver{mesh(), ProblemParams{}};
  SpectralTable table;
  Env() {
    table.merge(spectral_table_1d(3.0, 5, mesh()));
    table.merge(spectral_table_1d(1.5, 5, mesh()));
  }
  RegionVerdict at(double a, double b) { return classify(make_classify_inputs(solver, table, pq(a, b))); }
  double l(double r, int k) const { return exact_1d_eigenvalue(r, k, 1.0); }
};

Env& env() {
  static Env e;
  return e;
}

}  // namespace

TEST(Verify, SignClassesAndNodalDomains) {
  const auto prm = pq(0.0, 0.0);
  EXPECT_TRUE(verify_solution(GridFunction(mesh()), prm).flags.trivial);
  const auto s2 = verify_solution(GridFunction::from(mesh(), [](double x) { return std::sin(2 * pi * x); }), prm);
  EXPECT_EQ(s2.sign, SignClass::sign_changing);
  EXPECT_EQ(s2.nodal_domains, 2);
  const auto s3 = verify_solution(GridFunction::from(mesh(), [](double x) { return -std::sin(pi * x); }), prm);
  EXPECT_EQ(s3.sign, SignClass::negative);
  EXPECT_EQ(s3.nodal_domains, 1);
  EXPECT_GT(s3.residual, 0.0);
}

TEST(Registry, PairsAreIdentifiedUpToSign) {
  SolutionRegistry reg(3.0, 1e-3);
  const auto u = GridFunction::from(mesh(), [](double x) { return -std::sin(pi * x); });
  EXPECT_TRUE(reg.add({u, 2.0, 0.0, SignClass::negative, 1}));
  EXPECT_FALSE(reg.add({-u, 2.0, 0.0, SignClass::positive, 1}));
  EXPECT_FALSE(reg.add({1.0005 * u, 2.0, 0.0, SignClass::negative, 1}));
  EXPECT_TRUE(reg.add({GridFunction::from(mesh(), [](double x) { return std::sin(2 * pi * x); }), -1.0, 0.0,
                       SignClass::sign_changing, 2}));
  EXPECT_FALSE(reg.add({GridFunction(mesh()), 0.0, 0.0, SignClass::trivial, 0}));
  ASSERT_EQ(reg.size(), 2);
  // stored with a positive largest value
  EXPECT_EQ(reg.entries()[0].sign, SignClass::positive);
  EXPECT_GT(reg.entries()[0].u.values[mesh()->size() / 2], 0.0);
  reg.sort_by_energy();
  EXPECT_EQ(reg.entries()[0].energy, -1.0);
  std::ostringstream os;
  reg.write_csv(os);
  EXPECT_EQ(os.str().rfind("index,energy,residual,sign_class,nodal_domains,level_tag\n", 0), 0u);
}

TEST(Classify, NegativeEnergyCases) {
  auto& e = env();
  auto v = e.at(0.0, 8.0);
  EXPECT_EQ(v.k, 1);
  EXPECT_EQ(v.k_citation, "Thm1(i)");
  EXPECT_EQ(v.l, 0);
  v = e.at(0.0, 20.0);
  EXPECT_EQ(v.k, 2);
  EXPECT_EQ(v.k_citation, "Thm1(i)");
  v = e.at(e.solver.constants().lambda1p, 5.8);
  EXPECT_EQ(v.k, 1);
  EXPECT_EQ(v.k_citation, "Thm1(ii)");
  v = e.at(e.solver.constants().lambda1p, 20.0);
  EXPECT_EQ(v.k, 1);
  EXPECT_EQ(v.k_citation, "Cor. thm12(iii)");
}

TEST(Classify, PositiveEnergyAndEmptyCases) {
  auto& e = env();
  auto v = e.at(300.0, 0.0);
  EXPECT_EQ(v.l, 2);
  EXPECT_EQ(v.l_citation, "Thm3");
  EXPECT_EQ(v.resonance, Tri::no);
  v = e.at(0.5 * e.l(3.0, 1), 0.5 * e.l(1.5, 1));
  EXPECT_EQ(v.k, 0);
  EXPECT_EQ(v.l, 0);
  EXPECT_FALSE(v.hypotheses_log.empty());
  v = e.at(e.l(3.0, 2), 0.0);
  EXPECT_EQ(v.resonance, Tri::yes);
  const auto j = v.to_json();
  EXPECT_TRUE(j.contains("citations"));
}

TEST(LevelBounds, SuffixMinimaAndFailure) {
  const auto b = negative_level_bounds(2, mesh(), pq(0.0, 20.0));
  ASSERT_EQ(b.bounds.size(), 2u);
  EXPECT_LT(b.bounds[0], 0.0);
  EXPECT_LT(b.bounds[1], 0.0);
  EXPECT_LE(b.bounds[0], b.bounds[1]);
  // two bumps of length 1/2 need β above their q-quotient (about 15)
  try {
    negative_level_bounds(2, mesh(), pq(0.0, 8.0));
    FAIL() << "expected construction_error";
  } catch (const construction_error& err) {
    EXPECT_NE(std::string(err.what()).find("<"), std::string::npos) << err.what();
  }
}

TEST(Search, TwoNegativePairsAboveTheSecondQEigenvalue) {
  const auto prm = pq(0.0, 20.0);
  SearchStats stats;
  const auto reg = find_negative(2, mesh(), prm, {}, nullptr, &stats);
  ASSERT_GE(reg.size(), 2);
  const auto b = negative_level_bounds(2, mesh(), prm);
  auto entries = reg.entries();
  std::sort(entries.begin(), entries.end(), [](auto& x, auto& y) { return x.energy < y.energy; });
  for (int j = 0; j < 2; ++j) {
    const auto r = verify_solution(entries[j].u, prm);
    EXPECT_LT(r.energy, 0.0);
    EXPECT_LE(r.residual, 1e-6);
    EXPECT_LE(r.energy, b.bounds[j] + 2e-6);
    EXPECT_LT(r.nehari_deviation, 1e-6);
  }
  EXPECT_EQ(verify_solution(entries[0].u, prm).sign, SignClass::positive);
  EXPECT_EQ(verify_solution(entries[1].u, prm).nodal_domains, 2);
  EXPECT_GT(stats.starts, 0);
}

TEST(Search, TwoPositivePairsAboveTheSecondPEigenvalue) {
  const auto prm = pq(300.0, 0.0);
  const auto reg = find_positive(2, mesh(), prm);
  ASSERT_GE(reg.size(), 2);
  auto entries = reg.entries();
  std::sort(entries.begin(), entries.end(), [](auto& x, auto& y) { return x.energy < y.energy; });
  for (const auto& e : entries) {
    const auto r = verify_solution(e.u, prm);
    EXPECT_GT(r.energy, 0.0);
    EXPECT_LE(r.residual, 1e-6);
    EXPECT_TRUE(r.flags.b_plus);
  }
  const auto least = verify_solution(entries[0].u, prm).sign;
  EXPECT_TRUE(least == SignClass::positive || least == SignClass::negative);
}

TEST(Search, TrivialRegionEveryStartGoesToZero) {
  const auto prm = pq(0.5 * exact_1d_eigenvalue(3.0, 1, 1.0), 0.5 * exact_1d_eigenvalue(1.5, 1, 1.0));
  SolveOptions opt;
  opt.min_starts = 16;
  opt.starts_per_level = 16;
  SearchStats stats;
  try {
    find_negative(1, mesh(), prm, opt, nullptr, &stats);
    FAIL() << "expected budget_error";
  } catch (const budget_error& e) {
    EXPECT_TRUE(e.registry().empty());
  }
  EXPECT_EQ(stats.starts, 16);
  EXPECT_EQ(stats.to_zero, stats.starts);
}

TEST(Search, Deterministic) {
  const auto prm = pq(300.0, 0.0);
  SolveOptions o;
  o.seed = 4;
  const auto a = find_positive(1, mesh(), prm, o);
  const auto b = find_positive(1, mesh(), prm, o);
  ASSERT_EQ(a.size(), b.size());
  for (int i = 0; i < a.size(); ++i) EXPECT_EQ(a.entries()[i].u.values, b.entries()[i].u.values);
}

TEST(BoundedBelow, OnTheComplementOfLowModes) {
  const auto prm = pq(20.0, 10.0);
  EXPECT_THROW(check_bounded_below_on_Y(15.0, mesh(), prm, 10), invalid_input);
  const auto rep = check_bounded_below_on_Y(100.0, mesh(), prm, 200, 3);
  EXPECT_GT(rep.accepted, 0);
  EXPECT_TRUE(rep.bounded);
  EXPECT_GE(rep.fitted_constant, 0.0);
}

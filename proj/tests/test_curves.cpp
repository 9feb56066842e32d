#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "pqlab/curves.hpp"

using namespace pqlab;

namespace {

class Curve31 : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { solver = new CurveSolver(Mesh::build(Domain::interval(1.0), 512), ProblemParams{}); }
  static void TearDownTestSuite() { delete solver; }
  static CurveSolver* solver;
};
CurveSolver* Curve31::solver = nullptr;

}  // namespace

TEST(Extended, Semantics) {
  EXPECT_TRUE(Extended::inf().is_inf());
  EXPECT_EQ(Extended::inf().str(), "+inf");
  EXPECT_THROW(Extended::inf().value(), not_applicable);
  EXPECT_THROW(Extended::of(INFINITY), invalid_input);
  EXPECT_TRUE(Extended::inf().above(1e300));
  EXPECT_FALSE(Extended::of(2.0).above(3.0));
}

TEST(Constants, BetaStarForTheLaplacianIsPiToTheThreeHalves) {
  ProblemParams prm;
  prm.p = 2.0;
  prm.q = 1.5;
  const auto c = curve_constants(Mesh::build(Domain::interval(1.0), 2048), prm);
  // φ_2 = sin πx and ∫|cos|^{1.5} = ∫|sin|^{1.5} over a period
  EXPECT_NEAR(c.beta_star / std::pow(std::numbers::pi, 1.5), 1.0, 1e-5);
  EXPECT_GT(c.beta_star, c.lambda1q);
  EXPECT_GT(c.alpha_star, c.lambda1p);
}

TEST_F(Curve31, Branches) {
  const auto& c = solver->constants();
  auto below = solver->beta_star_of_alpha(0.9 * c.lambda1p);
  EXPECT_TRUE(below.value.is_inf());
  EXPECT_EQ(below.method, "sentinel");
  auto end = solver->beta_star_of_alpha(c.lambda1p);
  EXPECT_NEAR(end.value.value(), c.beta_star, 1e-9 * c.beta_star);
  auto top = solver->beta_star_of_alpha(1.2 * c.alpha_star);
  EXPECT_NEAR(top.value.value(), c.lambda1q, 1e-9 * c.lambda1q);
  EXPECT_EQ(top.method, "eigen");
}

// β*(α) leaves β* like a square root: already at 1e-4 above λ_1(p) the
// subspace bound sits well below β*
TEST_F(Curve31, NearTheEndpointStaysBelowTheSubspaceBound) {
  const auto& c = solver->constants();
  for (double e : {3e-8, 1e-6, 1e-4, 1e-3}) {
    const auto pt = solver->beta_star_of_alpha(c.lambda1p * (1.0 + e));
    ASSERT_FALSE(pt.oracle.is_inf());
    EXPECT_LE(pt.value.value(), pt.oracle.value() * (1.0 + 1e-9)) << e << ' ' << pt.method;
    EXPECT_LT(pt.value.value(), c.beta_star) << e;
  }
}

TEST_F(Curve31, InteriorPointIsAConstrainedMinimizer) {
  const auto& c = solver->constants();
  const double a = 0.5 * (c.lambda1p + c.alpha_star);
  const auto pt = solver->beta_star_of_alpha(a);
  ASSERT_FALSE(pt.value.is_inf());
  const double b = pt.value.value();
  EXPECT_GT(b, c.lambda1q);
  EXPECT_LT(b, c.beta_star);
  ASSERT_TRUE(pt.minimizer.has_value());
  EXPECT_NEAR(rayleigh_quotient(*pt.minimizer, 3.0), a, 1e-6 * a);
  EXPECT_NEAR(rayleigh_quotient(*pt.minimizer, 1.5), b, 1e-8 * b);
  EXPECT_GE(pt.multiplier, 0.0);
  EXPECT_LT(pt.multiplier, 1.0);
  // the two-dimensional subspace only gives an upper bound
  EXPECT_GE(solver->subspace_oracle(true, a).value(), b * (1 - 1e-9));
}

TEST_F(Curve31, MonotoneAndDual) {
  const auto& c = solver->constants();
  std::vector<double> grid;
  for (int i = 0; i < 8; ++i) grid.push_back(c.lambda1p * 0.95 + i * (1.2 * c.alpha_star - 0.95 * c.lambda1p) / 7);
  const auto cc = sample_curve(*solver, grid);
  EXPECT_TRUE(cc.is_nonincreasing());
  EXPECT_TRUE(cc.points.front().value.is_inf());
  const auto d = check_curve_duality(*solver, grid);
  EXPECT_GE(d.rows.size(), 2u);
  EXPECT_LT(d.max_deviation, 2e-2);
  std::ostringstream os;
  cc.write_csv(os);
  EXPECT_EQ(os.str().rfind("alpha,beta_star,method,residual\n", 0), 0u);
  EXPECT_NE(os.str().find("+inf,sentinel"), std::string::npos);
}

TEST_F(Curve31, AlphaStarOfBeta) {
  const auto& c = solver->constants();
  EXPECT_TRUE(solver->alpha_star_of_beta(0.9 * c.lambda1q).value.is_inf());
  EXPECT_NEAR(solver->alpha_star_of_beta(1.1 * c.beta_star).value.value(), c.lambda1p, 1e-9 * c.lambda1p);
  EXPECT_NEAR(solver->alpha_star_of_beta(c.lambda1q).value.value(), c.alpha_star, 1e-6 * c.alpha_star);
}

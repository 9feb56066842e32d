#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "pqlab/curves.hpp"
#include "pqlab/functionals.hpp"

using namespace pqlab;
using std::numbers::pi;

namespace {

MeshPtr mesh512() {
  static const auto m = Mesh::build(Domain::interval(1.0), 512);
  return m;
}

ProblemParams pq(double a, double b) {
  ProblemParams prm;
  prm.alpha = a;
  prm.beta = b;
  return prm;
}

}  // namespace

TEST(Functionals, DecompositionAndHomogeneity) {
  std::mt19937_64 rng(3);
  const auto u = random_test_function(mesh512(), rng, 3.0);
  const auto prm = pq(12.0, 4.0);
  const auto v = evaluate(u, prm);
  EXPECT_NEAR(v.E, v.H / 3.0 + v.G / 1.5, 1e-14);
  EXPECT_NEAR(v.F, v.H + v.G, 1e-14);
  const auto w = evaluate(2.0 * u, prm);
  EXPECT_NEAR(w.H, 8.0 * v.H, 1e-12 * std::abs(w.H));
  EXPECT_NEAR(w.G, std::pow(2.0, 1.5) * v.G, 1e-12 * std::abs(w.G) + 1e-14);
  EXPECT_DOUBLE_EQ(energy(u, prm), v.E);
}

TEST(Functionals, LevelMembership) {
  const auto u = GridFunction::from(mesh512(), [](double x) { return std::sin(pi * x); });
  // R_3(sin) ≈ 31.0 and R_1.5(sin) ≈ 5.57 on (0,1)
  auto f = level_membership(u, pq(0.0, 0.0));
  EXPECT_TRUE(f.h_pos && f.g_pos && f.e_pos && !f.b_plus);
  f = level_membership(u, pq(100.0, 0.0));
  EXPECT_TRUE(f.h_neg && f.g_pos && f.b_plus);
  f = level_membership(u, pq(0.0, 20.0));
  EXPECT_TRUE(f.h_pos && f.g_neg && !f.b_plus);
  const double r = rayleigh_quotient(u, 3.0);
  f = level_membership(u, pq(r, 0.0));
  EXPECT_TRUE(f.h_zero);
  EXPECT_TRUE(level_membership(GridFunction(mesh512()), pq(1.0, 1.0)).trivial);
}

TEST(Functionals, RandomTestFunctionsAreReproducible) {
  std::mt19937_64 a(mix_seed(9, 4)), b(mix_seed(9, 4)), c(mix_seed(9, 5));
  const auto u = random_test_function(mesh512(), a, 3.0);
  const auto v = random_test_function(mesh512(), b, 3.0);
  const auto w = random_test_function(mesh512(), c, 3.0);
  EXPECT_EQ(u.values, v.values);
  EXPECT_NE(u.values, w.values);
  EXPECT_NEAR(grad_seminorm(u, 3.0), 1.0, 1e-12);
  EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
}

class SignLemma : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    solver = new CurveSolver(mesh512(), ProblemParams{});
    const auto& c = solver->constants();
    alpha = c.lambda1p + 0.25 * (c.alpha_star - c.lambda1p);
    point = new CurvePoint(solver->beta_star_of_alpha(alpha));
  }
  static void TearDownTestSuite() {
    delete point;
    delete solver;
  }
  SignLemmaContext context(bool near_phi_q) const {
    const auto& c = solver->constants();
    SignLemmaContext ctx;
    ctx.lambda1_p = c.lambda1p;
    ctx.lambda1_q = c.lambda1q;
    ctx.beta_star_alpha = point->value.value();
    ctx.sharp_point = near_phi_q ? c.phi_q.phi : *point->minimizer;
    return ctx;
  }
  static CurveSolver* solver;
  static CurvePoint* point;
  static double alpha;
};
CurveSolver* SignLemma::solver = nullptr;
CurvePoint* SignLemma::point = nullptr;
double SignLemma::alpha = 0.0;

TEST_F(SignLemma, NoViolationsBelowTheCurve) {
  const auto ctx0 = context(false);
  const double beta = ctx0.lambda1_q + 0.9 * (ctx0.beta_star_alpha - ctx0.lambda1_q);
  const auto prm = pq(alpha, beta);
  for (auto clause : {SignClause::h_nonpos_implies_g_pos, SignClause::g_neg_implies_h_pos,
                      SignClause::g_nonpos_implies_h_nonneg}) {
    const auto ctx = context(clause != SignClause::h_nonpos_implies_g_pos);
    const auto r = check_sign_lemma(mesh512(), prm, clause, 2000, 17, ctx);
    EXPECT_TRUE(r.hypothesis_ok) << r.hypothesis;
    EXPECT_EQ(r.violations, 0) << static_cast<int>(clause);
    EXPECT_GT(r.hits, 100);
  }
}

TEST_F(SignLemma, HypothesisFailsAboveTheCurve) {
  const auto ctx = context(false);
  const auto r = check_sign_lemma(mesh512(), pq(alpha, ctx.beta_star_alpha * 1.01), SignClause::h_nonpos_implies_g_pos,
                                  100, 1, ctx);
  EXPECT_FALSE(r.hypothesis_ok);
  EXPECT_EQ(r.hits, 0);
  // below λ_1(p) the lemma does not apply either
  const auto r2 = check_sign_lemma(mesh512(), pq(0.5 * ctx.lambda1_p, 1.0), SignClause::g_neg_implies_h_pos, 100, 1, ctx);
  EXPECT_FALSE(r2.hypothesis_ok);
}

TEST_F(SignLemma, BeyondTheCurveTheInclusionBreaks) {
  // at β well above β*(α) the β*(α) minimizer has H ≤ 0 and G < 0
  const auto& u = *point->minimizer;
  const auto v = evaluate(u, pq(alpha, point->value.value() * 1.2));
  EXPECT_LE(v.H, 1e-8 * grad_seminorm(u, 3.0));
  EXPECT_LT(v.G, 0.0);
}

TEST_F(SignLemma, WorkerCountDoesNotChangeResults) {
  const auto ctx = context(true);
  const double beta = ctx.lambda1_q + 0.9 * (ctx.beta_star_alpha - ctx.lambda1_q);
  const auto a = check_sign_lemma(mesh512(), pq(alpha, beta), SignClause::g_neg_implies_h_pos, 400, 5, ctx, 1);
  const auto b = check_sign_lemma(mesh512(), pq(alpha, beta), SignClause::g_neg_implies_h_pos, 400, 5, ctx, 3);
  EXPECT_EQ(a.hits, b.hits);
  EXPECT_EQ(a.violations, b.violations);
}

TEST(Functionals, SignLemmaRejectsBadInput) {
  EXPECT_THROW(check_sign_lemma(mesh512(), pq(0, 0), SignClause::g_neg_implies_h_pos, 0, 1, {}), invalid_input);
}

#include <gtest/gtest.h>

#include <cmath>

#include "afcest/assembly.hpp"
#include "afcest/problems.hpp"

using namespace afcest;

TEST(BoundaryLayer, VanishesOnTheBoundary) {
  for (double eps : {1e-1, 1e-3, 1e-8}) {
    const ProblemSpec p = example_boundary_layer(eps);
    ASSERT_TRUE(p.exact);
    for (double s = 0.0; s <= 1.0; s += 0.125) {
      EXPECT_NEAR(p.exact->u({0.0, s}), 0.0, 1e-15);
      EXPECT_NEAR(p.exact->u({1.0, s}), 0.0, 1e-15);
      EXPECT_EQ(p.exact->u({s, 0.0}), 0.0);
      EXPECT_EQ(p.exact->u({s, 1.0}), 0.0);
    }
  }
}

TEST(BoundaryLayer, CenterValue) {
  const ProblemSpec p = example_boundary_layer(1e-3);
  EXPECT_NEAR(p.exact->u({0.5, 0.5}), 0.125, 1e-15);
}

TEST(BoundaryLayer, Coefficients) {
  const ProblemSpec p = example_boundary_layer(1e-3);
  EXPECT_EQ(p.epsilon, 1e-3);
  EXPECT_EQ(p.b({0.3, 0.7}).x, 2.0);
  EXPECT_EQ(p.b({0.3, 0.7}).y, 1.0);
  EXPECT_EQ(p.c({0.3, 0.7}), 1.0);
  EXPECT_EQ(p.sigma0, 1.0);
  EXPECT_EQ(p.u_dirichlet({0.0, 0.4}), 0.0);
}

TEST(BoundaryLayer, NoOverflowForTinyEpsilon) {
  const ProblemSpec p = example_boundary_layer(1e-10);
  for (double x : {0.0, 0.5, 0.999999, 1.0}) {
    EXPECT_TRUE(std::isfinite(p.exact->u({x, 0.5})));
    EXPECT_TRUE(std::isfinite(p.exact->grad({x, 0.5}).x));
    EXPECT_TRUE(std::isfinite(p.f({x, 0.5})));
  }
}

TEST(BoundaryLayer, StrongResidualVanishesAtQuadraturePoints) {
  for (double eps : {1.0, 1e-2, 1e-3}) {
    const ProblemSpec p = example_boundary_layer(eps);
    const Mesh m = unit_square_macro();
    for (Index c = 0; c < 2; ++c) {
      const P1Cell k = p1_cell(m, c);
      for (const auto& q : cell_rule()) EXPECT_LT(std::abs(strong_residual(p, k.map(q.bary))), 1e-8);
    }
  }
}

TEST(Benchmarks, ConvectionIsDivergenceFree) {
  for (const ProblemSpec& p : {example_boundary_layer(1e-3), example_hmm86(1e-4)})
    for (Point x : {Point{0.2, 0.3}, Point{0.5, 0.5}, Point{0.9, 0.1}}) EXPECT_LE(std::abs(divergence_b(p, x)), 1e-10);
}

// The Galerkin residual of the nodal interpolant shrinks under refinement.
TEST(BoundaryLayer, InterpolantResidualDecreases) {
  const ProblemSpec p = example_boundary_layer(0.1);
  double previous = 1e300;
  for (int level = 2; level <= 6; ++level) {
    const Mesh m = refine_uniform(unit_square_macro(), level);
    const DiscreteSystem sys = assemble_galerkin(m, p);
    const auto iu = interpolate(m, p.exact->u);
    const auto r = sys.A.multiply(iu);
    double worst = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i)
      if (!sys.dirichlet[i]) worst = std::max(worst, std::abs(r[i] - sys.F[i]));
    EXPECT_LT(worst, previous) << "level " << level;
    previous = worst;
  }
}

TEST(Hmm86, ConvectionDirection) {
  const ProblemSpec p = example_hmm86(1e-4);
  EXPECT_DOUBLE_EQ(p.b({0.5, 0.5}).x, 0.5);
  EXPECT_DOUBLE_EQ(p.b({0.5, 0.5}).y, -std::sqrt(3.0) / 2.0);
  EXPECT_EQ(p.sigma0, 0.0);
  EXPECT_EQ(p.c({0.1, 0.1}), 0.0);
  EXPECT_EQ(p.f({0.1, 0.1}), 0.0);
  EXPECT_FALSE(p.exact);
  ASSERT_TRUE(p.solution_bounds);
  EXPECT_EQ(p.solution_bounds->first, 0.0);
  EXPECT_EQ(p.solution_bounds->second, 1.0);
}

TEST(Hmm86, DirichletData) {
  const ProblemSpec p = example_hmm86(1e-4);
  EXPECT_EQ(p.u_dirichlet({0.0, 0.8}), 1.0);
  EXPECT_EQ(p.u_dirichlet({0.0, 0.5}), 0.0);
  EXPECT_EQ(p.u_dirichlet({0.5, 1.0}), 1.0);
  EXPECT_EQ(p.u_dirichlet({0.0, 1.0}), 1.0);
  EXPECT_EQ(p.u_dirichlet({1.0, 1.0}), 1.0);
  EXPECT_EQ(p.u_dirichlet({0.0, 0.7}), 0.0);
  EXPECT_EQ(p.u_dirichlet({0.0, 0.0}), 0.0);
  EXPECT_EQ(p.u_dirichlet({1.0, 0.5}), 0.0);
  EXPECT_EQ(p.u_dirichlet({0.5, 0.0}), 0.0);
}

TEST(Problems, ByName) {
  EXPECT_EQ(problem_by_name("boundary_layer", 1e-3).name, "boundary_layer");
  EXPECT_EQ(problem_by_name("hmm86", 1e-4).name, "hmm86");
  EXPECT_THROW(problem_by_name("poisson", 1.0), std::invalid_argument);
}

TEST(Problems, ValidationRejectsBadData) {
  EXPECT_THROW(example_boundary_layer(0.0), std::invalid_argument);
  EXPECT_THROW(example_hmm86(-1.0), std::invalid_argument);
  EXPECT_THROW(constant_problem({.epsilon = 0.0}), std::invalid_argument);
}

TEST(Problems, ConstantCoefficients) {
  const ProblemSpec p = constant_problem({.epsilon = 0.5, .bx = 1.0, .by = -2.0, .c = 3.0, .f = 4.0, .u_dirichlet = 5.0});
  EXPECT_EQ(p.epsilon, 0.5);
  EXPECT_EQ(p.b({0, 0}).y, -2.0);
  EXPECT_EQ(p.sigma0, 3.0);
  EXPECT_EQ(p.f({0.3, 0.3}), 4.0);
  EXPECT_EQ(p.u_dirichlet({0.0, 0.3}), 5.0);
}

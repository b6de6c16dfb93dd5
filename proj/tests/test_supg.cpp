#include <gtest/gtest.h>

#include <cmath>

#include "afcest/supg.hpp"

using namespace afcest;

TEST(Tau, VanishesWithoutConvection) {
  const Mesh mesh = refine_uniform(unit_square_macro(), 2);
  for (double t : compute_tau(mesh, constant_problem({.epsilon = 1.0, .f = 1.0})).tau) EXPECT_EQ(t, 0.0);
}

TEST(Tau, ClassicalFormula) {
  const Mesh mesh = refine_uniform(unit_square_macro(), 2);
  const ProblemSpec p = example_boundary_layer(1e-3);
  const SupgParameters tau = compute_tau(mesh, p);
  const double h = std::sqrt(2.0) / 4.0;
  const double bnorm = std::sqrt(5.0);
  const double pe = bnorm * h / (2.0 * p.epsilon);
  const double expected = h / (2.0 * bnorm) * (1.0 / std::tanh(pe) - 1.0 / pe);
  for (double t : tau.tau) EXPECT_NEAR(t, expected, 1e-15);
  TauOptions constant;
  constant.formula = TauFormula::ConstantH;
  constant.scale = 0.5;
  for (double t : compute_tau(mesh, p, constant).tau) EXPECT_NEAR(t, 0.5 * h, 1e-15);
  EXPECT_THROW(tau_formula_from_string("optimal"), std::invalid_argument);
}

TEST(Tau, LangevinSeriesIsContinuous) {
  const double x = 1e-2;
  const double series = langevin(x * (1.0 - 1e-12));
  const double closed = 1.0 / std::tanh(x * (1.0 + 1e-12)) - 1.0 / (x * (1.0 + 1e-12));
  EXPECT_NEAR(series, closed, 1e-12);
  EXPECT_NEAR(langevin(1e-8), 1e-8 / 3.0, 1e-22);
}

TEST(Supg, EqualsGalerkinWithoutConvection) {
  const ProblemSpec p = constant_problem({.epsilon = 1.0, .f = 1.0});
  const Mesh mesh = refine_uniform(unit_square_macro(), 3);
  const DiscreteSystem sys = assemble_galerkin(mesh, p);
  const LinearSystem ls = apply_dirichlet(sys, sys.A, sys.F);
  const auto galerkin = sparse_solve(ls.M, ls.rhs);
  const auto supg = solve_supg(mesh, p).values;
  for (std::size_t i = 0; i < supg.size(); ++i) EXPECT_NEAR(supg[i], galerkin[i], 1e-14);
}

// Observed overshoot on 289 dofs is about 0.04; the bound is a smoke test.
TEST(Supg, BoundaryLayerOvershootIsBounded) {
  const ProblemSpec p = example_boundary_layer(1e-3);
  const Mesh mesh = refine_uniform(unit_square_macro(), 4);
  const auto u = solve_supg(mesh, p).values;
  double max_exact = 0.0;
  for (const Point& x : mesh.vertices()) max_exact = std::max(max_exact, p.exact->u(x));
  EXPECT_LE(*std::max_element(u.begin(), u.end()), max_exact + 0.3);
}

TEST(Supg, ConstantDataIsReproduced) {
  const ProblemSpec p = constant_problem({.epsilon = 1e-4, .bx = 1.0, .by = 2.0, .c = 3.0, .f = 3.0 * 0.4, .u_dirichlet = 0.4});
  const Mesh mesh = refine_uniform(unit_square_macro(), 4);
  for (double x : solve_supg(mesh, p).values) EXPECT_NEAR(x, 0.4, 1e-12);
}

TEST(Supg, SolutionIsLinearInTheData) {
  const Mesh mesh = refine_uniform(unit_square_macro(), 4);
  ConstantCoefficients base{.epsilon = 1e-3, .bx = 1.0, .by = -0.5, .c = 0.7};
  ConstantCoefficients a = base, b = base, sum = base;
  a.f = 1.0;
  a.u_dirichlet = 0.2;
  b.f = -3.0;
  b.u_dirichlet = 1.5;
  sum.f = a.f + 2.0 * b.f;
  sum.u_dirichlet = a.u_dirichlet + 2.0 * b.u_dirichlet;
  const auto ua = solve_supg(mesh, constant_problem(a)).values;
  const auto ub = solve_supg(mesh, constant_problem(b)).values;
  const auto us = solve_supg(mesh, constant_problem(sum)).values;
  for (std::size_t i = 0; i < us.size(); ++i) EXPECT_NEAR(us[i], ua[i] + 2.0 * ub[i], 1e-10);
}

TEST(SupgNorm, LinearExactSolutionGivesZero) {
  ProblemSpec p = constant_problem({.epsilon = 1e-2, .bx = 1.0, .c = 1.0});
  p.exact = ExactSolution{[](Point q) { return q.x + q.y; }, [](Point) { return Point{1.0, 1.0}; },
                          [](Point) { return 0.0; }};
  const Mesh mesh = refine_uniform(unit_square_macro(), 3);
  EXPECT_NEAR(supg_norm_error(interpolate(mesh, p.exact->u), p, mesh, compute_tau(mesh, p)), 0.0, 1e-13);
}

TEST(SupgNorm, ZeroTauGivesEnergyError) {
  const ProblemSpec p = example_boundary_layer(1e-2);
  const Mesh mesh = refine_uniform(unit_square_macro(), 3);
  const auto u = solve_supg(mesh, p).values;
  SupgParameters zero{std::vector<double>(mesh.num_cells(), 0.0)};
  EXPECT_NEAR(supg_norm_error(u, p, mesh, zero), energy_norm_error(u, p, mesh), 1e-14);
  EXPECT_GE(supg_norm_error(u, p, mesh, compute_tau(mesh, p)), energy_norm_error(u, p, mesh));
}

TEST(SupgNorm, DecreasesOnFineUniformGrids) {
  const ProblemSpec p = example_boundary_layer(1e-3);
  double previous = 1e300;
  for (int level = 6; level <= 8; ++level) {
    const Mesh mesh = refine_uniform(unit_square_macro(), level);
    const SupgParameters tau = compute_tau(mesh, p);
    const auto u = solve_supg(mesh, p, tau).values;
    const double e = supg_norm_error(u, p, mesh, tau);
    EXPECT_GE(e, energy_norm_error(u, p, mesh));
    EXPECT_LT(e, previous) << mesh.num_vertices() << " dofs";
    previous = e;
  }
}

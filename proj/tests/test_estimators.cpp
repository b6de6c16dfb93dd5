#include <gtest/gtest.h>

#include <cmath>

#include "afcest/adaptivity.hpp"
#include "afcest/checks.hpp"
#include "afcest/estimators.hpp"

using namespace afcest;

namespace {

struct UniformRun {
  Mesh mesh;
  DiscreteSystem sys;
  AfcSolution sol;
  EstimatorReport report;
  double error = 0.0;
};

UniformRun uniform_run(const ProblemSpec& p, int level, LimiterKind kind) {
  UniformRun r{refine_uniform(macro_mesh_for(p), level), {}, {}, {}, 0.0};
  r.sys = assemble_system(r.mesh, p);
  r.sol = solve_afc(r.sys, r.mesh, p, kind, SolverOptions{});
  r.report = afc_energy_estimate(r.mesh, p, r.sys, r.sol.u.values, r.sol.state, estimator_constants(r.mesh));
  if (p.exact) r.error = energy_norm_error(r.sol.u.values, p, r.mesh);
  return r;
}

ProblemSpec scaled(const ProblemSpec& p, double s) {
  ProblemSpec q = p;
  q.f = [f = p.f, s](Point x) { return s * f(x); };
  q.g = [g = p.g, s](Point x) { return s * g(x); };
  q.u_dirichlet = [u = p.u_dirichlet, s](Point x) { return s * u(x); };
  if (p.exact) {
    const ExactSolution e = *p.exact;
    q.exact = ExactSolution{[e, s](Point x) { return s * e.u(x); }, [e, s](Point x) { return s * e.grad(x); },
                            [e, s](Point x) { return s * e.laplacian(x); }};
  }
  return q;
}

}  // namespace

TEST(Constants, Kappas) {
  const Mesh mesh = refine_uniform(unit_square_macro(), 2);
  const MeshGeometry g = compute_cell_geometry(mesh);
  const EstimatorConstants raw = estimator_constants(g, 2.0, EdgeConstant::Raw);
  EXPECT_EQ(raw.c_y, 4.0);
  EXPECT_EQ(raw.c_i, 1.0);
  EXPECT_EQ(raw.c_f, 1.0);
  EXPECT_DOUBLE_EQ(raw.c_edge_max, g.c_edge_max);
  EXPECT_DOUBLE_EQ(raw.kappa1, 5.0 * g.c_edge_max);
  EXPECT_DOUBLE_EQ(raw.kappa2, 4.0 * raw.kappa1);
  const EstimatorConstants scaled_k = estimator_constants(g);
  EXPECT_DOUBLE_EQ(scaled_k.c_edge_max, g.c_edge_scaled_max);
  EXPECT_DOUBLE_EQ(scaled_k.kappa2, scaled_k.kappa1);
  EXPECT_GT(scaled_k.kappa1, 0.0);
  EXPECT_THROW(estimator_constants(g, 0.0), std::invalid_argument);
  EXPECT_EQ(edge_constant_from_string("raw"), EdgeConstant::Raw);
  EXPECT_THROW(edge_constant_from_string("max"), std::invalid_argument);
}

TEST(AfcEnergy, ZeroDataGivesZero) {
  const ProblemSpec p = constant_problem({.epsilon = 1e-3, .bx = 2.0, .by = 1.0, .c = 1.0});
  const UniformRun r = uniform_run(p, 3, LimiterKind::Kuzmin);
  for (double x : r.sol.u.values) EXPECT_EQ(x, 0.0);
  EXPECT_EQ(r.report.eta, 0.0);
}

TEST(AfcEnergy, MissingLimiterStateIsAnError) {
  const ProblemSpec p = example_boundary_layer(1e-3);
  const Mesh mesh = refine_uniform(unit_square_macro(), 2);
  const DiscreteSystem sys = assemble_system(mesh, p);
  const std::vector<double> u(mesh.num_vertices(), 0.0);
  EXPECT_THROW(afc_energy_estimate(mesh, p, sys, u, LimiterState{}, estimator_constants(mesh)), std::invalid_argument);
}

TEST(AfcEnergy, IdentitiesAndEdgeSharing) {
  const ProblemSpec p = example_boundary_layer(1e-3);
  for (LimiterKind kind : {LimiterKind::Kuzmin, LimiterKind::Bjk}) {
    const UniformRun r = uniform_run(p, 4, kind);
    EXPECT_TRUE(estimator_identities_hold(r.report));
    const auto edges = eta_dh_edges(r.mesh, p, r.sys.D, r.sol.state, r.sol.u.values, estimator_constants(r.mesh));
    double by_edges = 0.0, by_cells = 0.0;
    for (double v : edges) by_edges += v;
    for (double v : r.report.dh_sq) by_cells += v;
    EXPECT_NEAR(by_edges, r.report.eta3 * r.report.eta3, 1e-12 * by_edges);
    EXPECT_NEAR(by_cells, by_edges, 1e-12 * by_edges);
    EXPECT_GT(r.report.eta3, 0.0);
  }
}

TEST(AfcEnergy, Hmm86UsesEpsilonBranches) {
  const ProblemSpec p = example_hmm86(1e-4);
  const UniformRun r = uniform_run(p, 4, LimiterKind::Kuzmin);
  EXPECT_TRUE(std::isfinite(r.report.eta));
  EXPECT_GT(r.report.eta, 0.0);
  EXPECT_TRUE(estimator_identities_hold(r.report));
  EXPECT_EQ(min_sigma(2.0, 1.0, 0.0), 2.0);
  EXPECT_EQ(min_sigma(2.0, 1.0, 1.0), 1.0);
}

// Effectivity on uniform grids within a factor of 2 of 157.8, 258.8, 150.7.
TEST(AfcEnergy, UniformKuzminEffectivity) {
  const ProblemSpec p = example_boundary_layer(1e-3);
  const std::pair<int, double> targets[] = {{2, 157.8}, {4, 258.8}, {6, 150.7}};
  for (auto [level, target] : targets) {
    const UniformRun r = uniform_run(p, level, LimiterKind::Kuzmin);
    const double eff = r.report.eta / r.error;
    EXPECT_GE(eff, target / 2.0) << r.mesh.num_vertices() << " dofs";
    EXPECT_LE(eff, target * 2.0) << r.mesh.num_vertices() << " dofs";
  }
}

TEST(AfcEnergy, UpperBoundOnBoundaryLayerRuns) {
  const ProblemSpec p = example_boundary_layer(1e-3);
  for (LimiterKind kind : {LimiterKind::Kuzmin, LimiterKind::Bjk})
    for (int level = 2; level <= 6; ++level) {
      const UniformRun r = uniform_run(p, level, kind);
      EXPECT_GE(r.report.eta, r.error) << to_string(kind) << " level " << level;
    }
}

// With the limiter frozen the scheme is linear: scaling the data scales the
// solution, the estimator and the error alike.
TEST(AfcEnergy, ScalingWithFrozenLimiter) {
  const ProblemSpec p = example_boundary_layer(1e-3);
  const ProblemSpec q = scaled(p, 3.5);
  const UniformRun r = uniform_run(p, 4, LimiterKind::Bjk);
  const DiscreteSystem sys_q = assemble_system(r.mesh, q);
  const auto u1 = solve_frozen(r.sys, r.sol.state);
  const auto uq = solve_frozen(sys_q, r.sol.state);
  for (std::size_t i = 0; i < u1.size(); ++i) EXPECT_NEAR(uq[i], 3.5 * u1[i], 1e-12);
  const auto k = estimator_constants(r.mesh);
  const auto e1 = afc_energy_estimate(r.mesh, p, r.sys, u1, r.sol.state, k);
  const auto eq = afc_energy_estimate(r.mesh, q, sys_q, uq, r.sol.state, k);
  EXPECT_NEAR(eq.eta, 3.5 * e1.eta, 1e-10 * eq.eta);
  const double err1 = energy_norm_error(u1, p, r.mesh), errq = energy_norm_error(uq, q, r.mesh);
  EXPECT_NEAR(errq, 3.5 * err1, 1e-10 * errq);
  EXPECT_NEAR(eq.eta / errq, e1.eta / err1, 1e-9 * e1.eta / err1);
}

TEST(AfcSupgEnergy, EqualSolutionsGiveZeroDifference) {
  const ProblemSpec p = example_boundary_layer(1e-3);
  const Mesh mesh = refine_uniform(unit_square_macro(), 3);
  const auto u = solve_supg(mesh, p).values;
  const EstimatorReport r = afc_supg_energy_estimate(mesh, p, u, u, estimator_constants(mesh));
  EXPECT_EQ(r.eta_afc_supg, 0.0);
  EXPECT_NEAR(r.eta, std::sqrt(2.0) * r.eta_supg, 1e-14 * r.eta);
  EXPECT_TRUE(estimator_identities_hold(r));
  const std::vector<double> short_u(3, 0.0);
  EXPECT_THROW(afc_supg_energy_estimate(mesh, p, short_u, u, estimator_constants(mesh)), std::invalid_argument);
}

TEST(AfcSupgEnergy, IdentityOnAfcSolutions) {
  const ProblemSpec p = example_boundary_layer(1e-3);
  const UniformRun r = uniform_run(p, 4, LimiterKind::Kuzmin);
  const auto us = solve_supg(r.mesh, p).values;
  const EstimatorReport e = afc_supg_energy_estimate(r.mesh, p, r.sol.u.values, us, estimator_constants(r.mesh));
  EXPECT_TRUE(estimator_identities_hold(e));
  EXPECT_NEAR(e.eta * e.eta, 2.0 * (e.eta_supg * e.eta_supg + e.eta_afc_supg * e.eta_afc_supg), 1e-12 * e.eta * e.eta);
}

// Reference values at 25 dofs: eta = 13.72 and eta_SUPG = 9.70, factor 2.
TEST(AfcSupgEnergy, CoarseGridMagnitude) {
  const ProblemSpec p = example_boundary_layer(1e-3);
  const UniformRun r = uniform_run(p, 2, LimiterKind::Kuzmin);
  const auto us = solve_supg(r.mesh, p).values;
  const EstimatorReport e = afc_supg_energy_estimate(r.mesh, p, r.sol.u.values, us, estimator_constants(r.mesh));
  EXPECT_GE(e.eta, 13.7241 / 2.0);
  EXPECT_LE(e.eta, 13.7241 * 2.0);
  EXPECT_GE(e.eta_supg, 9.70433 / 2.0);
  EXPECT_LE(e.eta_supg, 9.70433 * 2.0);
}

TEST(Effectivity, Basics) {
  EXPECT_EQ(effectivity_index(2.0, 1.0), 2.0);
  EXPECT_FALSE(effectivity_index(2.0, 0.0));
}

TEST(SmearInt, Ramp) {
  const Mesh mesh = refine_uniform(unit_square_macro(), 3);
  const auto u = interpolate(mesh, [](Point x) { return x.x; });
  ASSERT_TRUE(smear_int(mesh, u));
  EXPECT_NEAR(*smear_int(mesh, u), 0.8, 1e-12);
  const std::vector<double> zero(mesh.num_vertices(), 0.0);
  EXPECT_FALSE(smear_int(mesh, zero));
}

TEST(SmearInt, Hmm86AdaptiveKuzmin) {
  const ProblemSpec p = example_hmm86(1e-4);
  AdaptiveOptions opts;
  opts.max_dofs = 35000;
  const AdaptiveRunRecord run = adaptive_loop(p, opts);
  const LevelRecord* best = nullptr;
  for (const auto& r : run.levels)
    if (!best || std::abs(double(r.dofs) - 28548.0) < std::abs(double(best->dofs) - 28548.0)) best = &r;
  ASSERT_TRUE(best && best->smear_int);
  EXPECT_NEAR(*best->smear_int, 0.039, 0.01) << best->dofs << " dofs";
}

// The share of eta_dh in eta shrinks for BJK on adaptive grids and stays of
// the order of eta for Kuzmin.
TEST(AfcEnergy, DiffusionTermShare) {
  const ProblemSpec p = example_boundary_layer(1e-3);
  AdaptiveOptions opts;
  opts.max_dofs = 30000;
  opts.limiter = LimiterKind::Bjk;
  const auto bjk = adaptive_loop(p, opts);
  opts.limiter = LimiterKind::Kuzmin;
  const auto kuzmin = adaptive_loop(p, opts);
  auto share = [](const LevelRecord& r) { return *r.eta_dh_total / r.eta; };
  ASSERT_GT(bjk.levels.size(), 6u);
  for (std::size_t i = bjk.levels.size() - 4; i < bjk.levels.size(); ++i)
    EXPECT_LT(share(bjk.levels[i]), share(bjk.levels[i - 1])) << bjk.levels[i].dofs << " dofs";
  EXPECT_LT(share(bjk.levels.back()), share(kuzmin.levels.back()));
  EXPECT_GT(share(kuzmin.levels.back()), 0.5);
}

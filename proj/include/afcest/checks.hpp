#pragma once

// Randomized property suites shared by the `check` subcommand and the tests.
// Every suite is deterministic for a given seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "afcest/afc.hpp"
#include "afcest/assembly.hpp"
#include "afcest/estimators.hpp"
#include "afcest/mesh.hpp"
#include "afcest/problems.hpp"

namespace afcest {

struct CheckResult {
  std::string name;
  bool passed = true;
  std::string detail;
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

}  // namespace detail

/// Uniform mesh with interior vertices moved by up to `amount` times the
/// local spacing. Used to obtain non-Delaunay meshes with obtuse cells.
inline Mesh perturbed_mesh(int level, double amount, std::uint64_t seed) {
  const Mesh base = refine_uniform(unit_square_macro(), level);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> shift(-amount, amount);
  const double spacing = 1.0 / (1 << level);
  auto verts = base.vertices();
  std::vector<bool> on_boundary(verts.size(), false);
  for (const auto& f : base.boundary_faces())
    for (Index v : base.edge(f.edge).v) on_boundary[v] = true;
  for (std::size_t i = 0; i < verts.size(); ++i) {
    if (on_boundary[i]) continue;
    verts[i].x += shift(rng) * spacing;
    verts[i].y += shift(rng) * spacing;
  }
  return Mesh(std::move(verts), base.cells(), base.boundary_markers());
}

/// Meshes exercised by the property suites: uniform levels, adaptive meshes
/// under both closure rules and a perturbed non-Delaunay mesh.
inline std::vector<Mesh> property_meshes(std::uint64_t seed = 7) {
  std::vector<Mesh> out;
  for (int level = 1; level <= 3; ++level) out.push_back(refine_uniform(unit_square_macro(), level));
  for (ClosureRule rule : {ClosureRule::LongestEdge, ClosureRule::AnyEdge}) {
    Mesh m = refine_uniform(unit_square_macro(), 2);
    for (int step = 0; step < 3; ++step) {
      std::vector<Index> marked;
      for (Index c = 0; c < static_cast<Index>(m.num_cells()); ++c) {
        const auto& t = m.cell(c);
        const Point g = (1.0 / 3.0) * (m.vertex(t[0]) + m.vertex(t[1]) + m.vertex(t[2]));
        if (g.x > 0.75 && g.y < 0.4) marked.push_back(c);
      }
      m = refine_adaptive(m, marked, rule);
    }
    out.push_back(std::move(m));
  }
  out.push_back(perturbed_mesh(3, 0.3, seed));
  return out;
}

/// dh_point against dh_edge for random P1 pairs and random symmetric limiter
/// states; relative tolerance `tol`.
inline CheckResult check_dh_equivalence(int draws = 100, std::uint64_t seed = 1, double tol = 1e-12) {
  CheckResult r{"d_h point form equals edge form", true, {}};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> val(-1.0, 1.0), unit(0.0, 1.0);
  const auto meshes = property_meshes(seed);
  double worst = 0.0;
  for (int k = 0; k < draws; ++k) {
    const Mesh& mesh = meshes[static_cast<std::size_t>(k) % meshes.size()];
    const DiscreteSystem sys = assemble_system(mesh, example_boundary_layer(1e-3));
    const auto transpose = sys.D.transpose_positions();
    LimiterState s;
    s.alpha.assign(sys.D.nnz(), 1.0);
    for (Index i = 0; i < sys.D.rows(); ++i)
      for (Index q = sys.D.row_begin(i); q < sys.D.row_end(i); ++q)
        if (sys.D.col(q) > i) s.alpha[q] = s.alpha[transpose[q]] = unit(rng);
    std::vector<double> u(mesh.num_vertices()), v(mesh.num_vertices());
    for (auto& x : u) x = val(rng);
    for (auto& x : v) x = val(rng);
    const double p = dh_point(s, sys.D, u, v);
    const double e = dh_edge(s, sys.D, mesh, u, v);
    const double scale = std::max({std::abs(p), std::abs(e), 1e-300});
    worst = std::max(worst, std::abs(p - e) / scale);
  }
  r.passed = worst <= tol;
  r.detail = "max relative difference " + detail::fmt(worst) + " over " + std::to_string(draws) + " draws";
  return r;
}

/// Symmetry, nonpositive off-diagonals and zero row sums of D on every system
/// in `systems`.
inline CheckResult check_diffusion_invariants(const std::vector<const DiscreteSystem*>& systems, double tol = 1e-13) {
  CheckResult r{"artificial diffusion invariants", true, {}};
  std::size_t bad = 0;
  for (const DiscreteSystem* sys : systems) {
    const CsrMatrix& d = sys->D;
    const auto transpose = d.transpose_positions();
    const double scale = std::max(d.norm_inf(), 1e-300);
    for (Index i = 0; i < d.rows(); ++i) {
      double row = 0.0;
      for (Index k = d.row_begin(i); k < d.row_end(i); ++k) {
        row += d.value(k);
        if (d.col(k) == i) continue;
        if (d.value(k) > 0.0 || d.value(k) != d.value(transpose[k])) ++bad;
      }
      if (std::abs(row) > tol * scale) ++bad;
    }
  }
  r.passed = bad == 0;
  r.detail = std::to_string(systems.size()) + " systems, " + std::to_string(bad) + " violations";
  return r;
}

/// Assembles the boundary-layer, hmm86 and two constant-coefficient problems on
/// every property mesh and checks the D invariants; pure diffusion on the
/// Delaunay meshes must give D = 0.
inline std::vector<CheckResult> check_artificial_diffusion(std::uint64_t seed = 2) {
  std::vector<DiscreteSystem> systems;
  std::vector<ProblemSpec> problems{example_boundary_layer(1e-3), example_hmm86(1e-4),
                                    constant_problem({.epsilon = 1.0, .c = 0.0, .f = 1.0}),
                                    constant_problem({.epsilon = 1e-2, .bx = 1.0, .by = -0.3, .c = 2.0, .f = 1.0})};
  const auto meshes = property_meshes(seed);
  for (const auto& mesh : meshes)
    for (const auto& p : problems) systems.push_back(assemble_system(mesh, p));
  std::vector<const DiscreteSystem*> ptrs;
  for (const auto& s : systems) ptrs.push_back(&s);
  std::vector<CheckResult> out{check_diffusion_invariants(ptrs)};

  CheckResult zero{"pure diffusion on Delaunay meshes gives D = 0", true, {}};
  int delaunay_meshes = 0;
  double max_d = 0.0;
  const ProblemSpec laplace = constant_problem({.epsilon = 1.0, .f = 1.0});
  for (const auto& mesh : meshes) {
    if (!is_delaunay(mesh).delaunay) continue;
    ++delaunay_meshes;
    max_d = std::max(max_d, assemble_system(mesh, laplace).D.norm_inf());
  }
  zero.passed = delaunay_meshes > 0 && max_d == 0.0;
  zero.detail = std::to_string(delaunay_meshes) + " Delaunay meshes, max |D| = " + detail::fmt(max_d);
  out.push_back(zero);
  return out;
}

/// 0 <= alpha <= 1 and pair symmetry for random states, alpha = 1 for
/// constant states, and constant-solution reproduction for both limiters.
inline std::vector<CheckResult> check_limiters(int draws = 200, std::uint64_t seed = 3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> val(-1.0, 2.0);
  const auto meshes = property_meshes(seed);
  std::vector<ProblemSpec> problems{example_boundary_layer(1e-3), example_hmm86(1e-4)};

  CheckResult bounds{"limiter bounds and symmetry", true, {}};
  CheckResult flat{"alpha = 1 without antidiffusive fluxes", true, {}};
  std::size_t bad_bounds = 0, bad_flat = 0;
  for (int k = 0; k < draws; ++k) {
    const Mesh& mesh = meshes[static_cast<std::size_t>(k) % meshes.size()];
    const ProblemSpec& prob = problems[static_cast<std::size_t>(k) % problems.size()];
    const DiscreteSystem sys = assemble_system(mesh, prob);
    const auto transpose = sys.D.transpose_positions();
    std::vector<double> u(mesh.num_vertices());
    for (auto& x : u) x = val(rng);
    std::vector<double> gamma(mesh.num_vertices(), 1.0 + 3.0 * std::abs(val(rng)));
    for (LimiterKind kind : {LimiterKind::Kuzmin, LimiterKind::Bjk}) {
      const LimiterState s = compute_limiter(kind, sys, u, gamma);
      for (Index q = 0; q < static_cast<Index>(sys.D.nnz()); ++q)
        if (!(s.alpha[q] >= 0.0 && s.alpha[q] <= 1.0) || s.alpha[q] != s.alpha[transpose[q]]) ++bad_bounds;
      const std::vector<double> c(mesh.num_vertices(), val(rng));
      for (double a : compute_limiter(kind, sys, c, gamma).alpha)
        if (a != 1.0) ++bad_flat;
    }
  }
  bounds.passed = bad_bounds == 0;
  bounds.detail = std::to_string(draws) + " draws per limiter, " + std::to_string(bad_bounds) + " violations";
  flat.passed = bad_flat == 0;
  flat.detail = std::to_string(bad_flat) + " entries differ from 1";

  CheckResult constant{"constant solutions are reproduced", true, {}};
  double worst = 0.0;
  const double value = 0.7;
  for (const auto& cfg : {ConstantCoefficients{.epsilon = 1e-3, .bx = 2.0, .by = 1.0, .c = 1.0},
                          ConstantCoefficients{.epsilon = 1e-6, .bx = -0.4, .by = 0.9, .c = 0.5},
                          ConstantCoefficients{.epsilon = 1.0, .c = 0.0}}) {
    ConstantCoefficients k = cfg;
    k.f = k.c * value;
    k.u_dirichlet = value;
    const ProblemSpec prob = constant_problem(k);
    for (std::size_t m = 0; m < meshes.size(); m += 2) {
      for (LimiterKind kind : {LimiterKind::Kuzmin, LimiterKind::Bjk}) {
        // From the zero guess the iteration has to find the constant state;
        // the tight tolerance keeps the iteration error below the check.
        SolverOptions opts;
        opts.init = InitialGuess::Zero;
        opts.tol = 1e-13;
        const AfcSolution sol = solve_afc(meshes[m], prob, kind, opts);
        for (double x : sol.u.values) worst = std::max(worst, std::abs(x - value));
        if (!sol.stats.converged) worst = std::max(worst, 1.0);
      }
    }
  }
  constant.passed = worst <= 1e-10;
  constant.detail = "max |u_h - const| = " + detail::fmt(worst);
  return {bounds, flat, constant};
}

/// sum_E ||grad phi . t_E||^2_E <= c_edge / h_K ||grad phi||^2_K for random
/// linear phi on every cell of every mesh, and the h-weighted version with
/// the scaled constant.
inline CheckResult check_trace_inequality(const std::vector<Mesh>& meshes, int draws = 1000, std::uint64_t seed = 4) {
  CheckResult r{"edge trace inequality", true, {}};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> val(0.0, 1.0);
  double worst = 0.0, worst_scaled = 0.0;
  std::size_t cells = 0;
  for (const auto& mesh : meshes) {
    for (Index c = 0; c < static_cast<Index>(mesh.num_cells()); ++c, ++cells) {
      const auto& t = mesh.cell(c);
      const std::array<Point, 3> p{mesh.vertex(t[0]), mesh.vertex(t[1]), mesh.vertex(t[2])};
      const CellGeometry g = triangle_geometry(p[0], p[1], p[2]);
      for (int k = 0; k < draws; ++k) {
        const Point grad{val(rng), val(rng)};
        double lhs = 0.0, lhs_scaled = 0.0;
        for (int e = 0; e < 3; ++e) {
          const Point d = p[(e + 1) % 3] - p[e];
          const double len = norm(d);
          const double tangential = dot(grad, (1.0 / len) * d);
          lhs += tangential * tangential * len;
          lhs_scaled += tangential * tangential * len * len;
        }
        const double vol = dot(grad, grad) * g.area;
        worst = std::max(worst, lhs / (g.c_edge / g.h * vol));
        worst_scaled = std::max(worst_scaled, lhs_scaled / (g.c_edge_scaled * vol));
      }
    }
  }
  r.passed = worst <= 1.0 && worst_scaled <= 1.0;
  r.detail = std::to_string(cells) + " cells x " + std::to_string(draws) + " draws, max lhs/rhs " + detail::fmt(worst) +
             " (scaled " + detail::fmt(worst_scaled) + ")";
  return r;
}

/// Independent residual check of a nonlinear solution: the limiter is
/// recomputed from u and the residual compared with tol times the reference
/// norm stored in the statistics.
inline bool residual_within(const DiscreteSystem& sys, LimiterKind kind, const AfcSolution& sol,
                            std::span<const double> gamma, double tol, double* ratio = nullptr) {
  std::vector<double> g(gamma.begin(), gamma.end());
  if (g.empty()) g.assign(sys.size(), 1.0);
  const LimiterState s = compute_limiter(kind, sys, sol.u.values, g);
  const double res = norm2(afc_residual(sys, s, sol.u.values));
  if (ratio) *ratio = res / sol.stats.reference;
  return res <= tol * sol.stats.reference;
}

/// Pure diffusion converges in one step from the zero guess; randomized
/// convection-dominated problems meet the residual tolerance.
inline std::vector<CheckResult> check_solver(std::uint64_t seed = 5) {
  CheckResult one{"pure diffusion converges in one iteration", true, {}};
  int worst_iters = 0;
  bool all_converged = true;
  const ProblemSpec laplace = constant_problem({.epsilon = 1.0, .f = 1.0});
  for (int level = 1; level <= 4; ++level) {
    const Mesh mesh = refine_uniform(unit_square_macro(), level);
    for (LimiterKind kind : {LimiterKind::Kuzmin, LimiterKind::Bjk}) {
      SolverOptions opts;
      opts.init = InitialGuess::Zero;
      const AfcSolution sol = solve_afc(mesh, laplace, kind, opts);
      worst_iters = std::max(worst_iters, sol.stats.iterations);
      all_converged = all_converged && sol.stats.converged;
    }
  }
  one.passed = all_converged && worst_iters == 1;
  one.detail = "max iterations " + std::to_string(worst_iters);

  CheckResult res{"converged solutions meet the residual tolerance", true, {}};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dir(-1.0, 1.0);
  double worst = 0.0;
  int runs = 0;
  for (int k = 0; k < 6; ++k) {
    ConstantCoefficients c{.epsilon = std::pow(10.0, -2.0 - k % 4), .bx = dir(rng), .by = dir(rng), .c = 0.5, .f = 1.0};
    const ProblemSpec prob = constant_problem(c);
    const Mesh mesh = refine_uniform(unit_square_macro(), 3 + k % 2);
    const DiscreteSystem sys = assemble_system(mesh, prob);
    for (LimiterKind kind : {LimiterKind::Kuzmin, LimiterKind::Bjk}) {
      const AfcSolution sol = solve_afc(sys, mesh, prob, kind, SolverOptions{});
      if (!sol.stats.converged) continue;
      double ratio = 0.0;
      residual_within(sys, kind, sol, {}, 1e-10, &ratio);
      worst = std::max(worst, ratio);
      ++runs;
    }
  }
  res.passed = runs > 0 && worst <= 1e-10;
  res.detail = std::to_string(runs) + " converged runs, max residual/reference " + detail::fmt(worst);
  return {one, res};
}

/// eta^2 = eta1^2 + eta2^2 + eta3^2 and sum_K eta_K^2 = eta^2 to `tol`.
inline bool estimator_identities_hold(const EstimatorReport& r, double tol = 1e-12) {
  double cells = 0.0;
  for (double v : r.cell_sq) cells += v;
  const double eta2 = r.eta * r.eta;
  const double scale = std::max(eta2, 1e-300);
  if (std::abs(cells - eta2) > tol * scale) return false;
  if (r.technique == Technique::AfcEnergy)
    return std::abs(r.eta1 * r.eta1 + r.eta2 * r.eta2 + r.eta3 * r.eta3 - eta2) <= tol * scale;
  const double parts = 2.0 * (r.eta_supg * r.eta_supg + r.eta_afc_supg * r.eta_afc_supg);
  return std::abs(parts - eta2) <= tol * scale;
}

/// Runs every property suite.
inline std::vector<CheckResult> run_property_checks(std::uint64_t seed = 11) {
  std::vector<CheckResult> out;
  out.push_back(check_dh_equivalence(100, seed));
  for (auto& r : check_artificial_diffusion(seed + 1)) out.push_back(std::move(r));
  for (auto& r : check_limiters(200, seed + 2)) out.push_back(std::move(r));
  out.push_back(check_trace_inequality(property_meshes(seed + 3), 1000, seed + 3));
  for (auto& r : check_solver(seed + 4)) out.push_back(std::move(r));
  return out;
}

}  // namespace afcest

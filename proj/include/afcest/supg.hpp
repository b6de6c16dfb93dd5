#pragma once

// Streamline-upwind Petrov-Galerkin discretization and the SUPG norm.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "afcest/assembly.hpp"
#include "afcest/linalg.hpp"
#include "afcest/mesh.hpp"
#include "afcest/problems.hpp"

namespace afcest {

enum class TauFormula { Classical, ConstantH };

struct TauOptions {
  TauFormula formula = TauFormula::Classical;
  double scale = 1.0;
};

inline TauFormula tau_formula_from_string(const std::string& s) {
  if (s == "classical") return TauFormula::Classical;
  if (s == "constant") return TauFormula::ConstantH;
  throw std::invalid_argument("unknown tau formula '" + s + "'");
}

/// coth(x) - 1/x for x > 0, with a series near zero.
inline double langevin(double x) {
  if (x < 1e-2) {
    const double x2 = x * x;
    return x / 3.0 - x * x2 / 45.0 + 2.0 * x * x2 * x2 / 945.0;
  }
  return 1.0 / std::tanh(x) - 1.0 / x;
}

/// Per-cell stabilization parameters tau_K.
struct SupgParameters {
  std::vector<double> tau;
};

/// Classical: tau_K = h_K / (2 |b|) (coth Pe_K - 1/Pe_K), Pe_K = |b| h_K / (2 eps),
/// with |b| the largest velocity magnitude at the vertices and barycenter.
/// ConstantH: tau_K = h_K when b does not vanish on K. Both are multiplied by
/// the scale factor.
inline SupgParameters compute_tau(const Mesh& mesh, const ProblemSpec& prob, const TauOptions& opts = {}) {
  if (!(opts.scale >= 0.0)) throw std::invalid_argument("tau scale must be nonnegative");
  SupgParameters out;
  out.tau.assign(mesh.num_cells(), 0.0);
  for (Index c = 0; c < static_cast<Index>(mesh.num_cells()); ++c) {
    const auto& t = mesh.cell(c);
    const Point p0 = mesh.vertex(t[0]), p1 = mesh.vertex(t[1]), p2 = mesh.vertex(t[2]);
    const double h = std::max({norm(p1 - p0), norm(p2 - p1), norm(p0 - p2)});
    const Point centroid{(p0.x + p1.x + p2.x) / 3.0, (p0.y + p1.y + p2.y) / 3.0};
    double bnorm = 0.0;
    for (Point x : {p0, p1, p2, centroid}) bnorm = std::max(bnorm, norm(prob.b(x)));
    if (bnorm == 0.0) continue;
    double tau = 0.0;
    if (opts.formula == TauFormula::Classical) {
      const double pe = bnorm * h / (2.0 * prob.epsilon);
      tau = h / (2.0 * bnorm) * langevin(pe);
    } else {
      tau = h;
    }
    out.tau[c] = opts.scale * tau;
  }
  return out;
}

/// Galerkin matrix plus sum_K tau_K (b.grad phi_j + c phi_j, b.grad phi_i)_K and
/// the matching load sum_K tau_K (f, b.grad phi_i)_K. The diffusion part of
/// the strong residual vanishes for P1.
inline LinearSystem assemble_supg(const Mesh& mesh, const ProblemSpec& prob, const SupgParameters& params) {
  DiscreteSystem sys = assemble_galerkin(mesh, prob);
  CsrMatrix m = sys.A;
  std::vector<double> rhs = sys.F;
  assemble_cells(mesh, m, rhs, [&](Index c, const P1Cell& k, LocalMatrix& ae, LocalVector& fe) {
    const double tau = params.tau[c];
    if (tau == 0.0) return;
    for (const auto& q : cell_rule()) {
      const Point x = k.map(q.bary);
      const double w = tau * q.weight * k.area;
      const Point b = prob.b(x);
      const double cx = prob.c(x);
      const double f = prob.f(x);
      for (int i = 0; i < 3; ++i) {
        const double test = dot(b, k.grad[i]);
        for (int j = 0; j < 3; ++j) ae[i][j] += w * (dot(b, k.grad[j]) + cx * q.bary[j]) * test;
        fe[i] += w * f * test;
      }
    }
  });
  return apply_dirichlet(std::move(m), std::move(rhs), sys.dirichlet, sys.dirichlet_values);
}

inline DofVector solve_supg(const Mesh& mesh, const ProblemSpec& prob, const SupgParameters& params) {
  if (params.tau.size() != mesh.num_cells()) throw std::invalid_argument("solve_supg: tau size mismatch");
  LinearSystem ls = assemble_supg(mesh, prob, params);
  return DofVector(sparse_solve(ls.M, ls.rhs), mesh.dirichlet_vertices());
}

inline DofVector solve_supg(const Mesh& mesh, const ProblemSpec& prob, const TauOptions& opts = {}) {
  return solve_supg(mesh, prob, compute_tau(mesh, prob, opts));
}

/// (||u - u_h||_a^2 + sum_K tau_K ||b.grad(u - u_h)||_{0,K}^2)^{1/2}.
inline double supg_norm_error(std::span<const double> uh, const ProblemSpec& prob, const Mesh& mesh,
                              const SupgParameters& params, const ErrorQuadrature& quad = {}) {
  if (!prob.exact) throw std::logic_error(prob.name + ": SUPG error needs an exact solution");
  const auto& ex = *prob.exact;
  double s = 0.0;
  for (double v : energy_norm_error_cells(uh, prob, mesh, quad)) s += v;
  detail::CompositeRuleCache cache;
  for (Index c = 0; c < static_cast<Index>(mesh.num_cells()); ++c) {
    const double tau = params.tau[c];
    if (tau == 0.0) continue;
    const P1Cell k = p1_cell(mesh, c);
    const Point gh = k.gradient(uh);
    const double h = std::max({norm(k.p[1] - k.p[0]), norm(k.p[2] - k.p[1]), norm(k.p[0] - k.p[2])});
    double cell = 0.0;
    for (const auto& q : cache.get(quad.splits(h, prob.epsilon))) {
      const Point x = k.map(q.bary);
      const double st = dot(prob.b(x), ex.grad(x) - gh);
      cell += q.weight * st * st;
    }
    s += tau * cell * k.area;
  }
  return std::sqrt(s);
}

}  // namespace afcest

#pragma once

// P1 assembly of the Galerkin form, artificial diffusion, Dirichlet
// elimination and quadrature-based norms.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "afcest/linalg.hpp"
#include "afcest/mesh.hpp"
#include "afcest/problems.hpp"

namespace afcest {

/// Barycentric quadrature point; weights sum to 1 and are scaled by |K|.
struct CellQuadPoint {
  std::array<double, 3> bary;
  double weight;
};

/// Symmetric 7-point rule, exact for polynomials of degree 5.
inline const std::array<CellQuadPoint, 7>& cell_rule() {
  static const std::array<CellQuadPoint, 7> rule = [] {
    const double s15 = std::sqrt(15.0);
    const double a1 = (6.0 - s15) / 21.0, w1 = (155.0 - s15) / 1200.0;
    const double a2 = (6.0 + s15) / 21.0, w2 = (155.0 + s15) / 1200.0;
    const double b1 = 1.0 - 2.0 * a1, b2 = 1.0 - 2.0 * a2;
    return std::array<CellQuadPoint, 7>{{{{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}, 0.225},
                                         {{a1, a1, b1}, w1},
                                         {{a1, b1, a1}, w1},
                                         {{b1, a1, a1}, w1},
                                         {{a2, a2, b2}, w2},
                                         {{a2, b2, a2}, w2},
                                         {{b2, a2, a2}, w2}}};
  }();
  return rule;
}

/// 3-point Gauss rule on [0,1]; weights sum to 1.
struct EdgeQuadPoint {
  double s;
  double weight;
};

inline const std::array<EdgeQuadPoint, 3>& edge_rule() {
  static const std::array<EdgeQuadPoint, 3> rule = [] {
    const double d = 0.5 * std::sqrt(0.6);
    return std::array<EdgeQuadPoint, 3>{{{0.5 - d, 5.0 / 18.0}, {0.5, 8.0 / 18.0}, {0.5 + d, 5.0 / 18.0}}};
  }();
  return rule;
}

/// Geometry of one P1 cell: vertex coordinates, gradients of the nodal basis
/// functions (constant on the cell) and area.
struct P1Cell {
  Triangle dofs{};
  std::array<Point, 3> p{};
  std::array<Point, 3> grad{};
  double area = 0.0;

  Point map(const std::array<double, 3>& l) const {
    return {l[0] * p[0].x + l[1] * p[1].x + l[2] * p[2].x, l[0] * p[0].y + l[1] * p[1].y + l[2] * p[2].y};
  }
  Point gradient(std::span<const double> u) const {
    return u[dofs[0]] * grad[0] + u[dofs[1]] * grad[1] + u[dofs[2]] * grad[2];
  }
  double value(std::span<const double> u, const std::array<double, 3>& l) const {
    return l[0] * u[dofs[0]] + l[1] * u[dofs[1]] + l[2] * u[dofs[2]];
  }
};

inline P1Cell p1_cell(const Mesh& mesh, Index c) {
  P1Cell k;
  k.dofs = mesh.cell(c);
  for (int i = 0; i < 3; ++i) k.p[i] = mesh.vertex(k.dofs[i]);
  const double twice = cross(k.p[1] - k.p[0], k.p[2] - k.p[0]);
  if (!(twice > 0.0)) throw MeshError("degenerate or clockwise cell " + std::to_string(c));
  k.area = 0.5 * twice;
  for (int i = 0; i < 3; ++i) {
    const Point e = k.p[(i + 2) % 3] - k.p[(i + 1) % 3];
    k.grad[i] = {-e.y / twice, e.x / twice};
  }
  return k;
}

/// Diagonal plus both directions of every mesh edge, all values zero.
inline CsrMatrix p1_pattern(const Mesh& mesh) {
  const auto n = static_cast<Index>(mesh.num_vertices());
  std::vector<Triplet> t;
  t.reserve(mesh.num_vertices() + 2 * mesh.num_edges());
  for (Index i = 0; i < n; ++i) t.push_back({i, i, 0.0});
  for (const auto& e : mesh.edges()) {
    t.push_back({e.v[0], e.v[1], 0.0});
    t.push_back({e.v[1], e.v[0], 0.0});
  }
  return CsrMatrix::from_triplets(n, n, std::move(t));
}

using LocalMatrix = std::array<std::array<double, 3>, 3>;
using LocalVector = std::array<double, 3>;

/// Adds per-cell contributions into a matrix with the P1 pattern. The kernel
/// fills (row i, column j) of the local matrix for local dofs i, j.
template <class Kernel>
void assemble_cells(const Mesh& mesh, CsrMatrix& m, std::vector<double>& rhs, Kernel&& kernel) {
  for (Index c = 0; c < static_cast<Index>(mesh.num_cells()); ++c) {
    const P1Cell k = p1_cell(mesh, c);
    LocalMatrix ae{};
    LocalVector fe{};
    kernel(c, k, ae, fe);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) m.value(m.find(k.dofs[i], k.dofs[j])) += ae[i][j];
      rhs[k.dofs[i]] += fe[i];
    }
  }
}

/// Assembled operators of the scalar problem. A and D are kept without
/// Dirichlet elimination; the limiters read their raw entries.
struct DiscreteSystem {
  CsrMatrix A;
  CsrMatrix D;
  std::vector<double> F;
  std::vector<bool> dirichlet;
  std::vector<double> dirichlet_values;  // u_D at Dirichlet vertices, 0 elsewhere

  std::size_t size() const { return F.size(); }
};

/// Neumann contributions <g, phi_i> over all Neumann faces.
inline void add_neumann(const Mesh& mesh, const ProblemSpec& prob, std::vector<double>& rhs) {
  for (const auto& f : mesh.boundary_faces()) {
    if (f.marker != BoundaryMarker::Neumann) continue;
    const Edge& e = mesh.edge(f.edge);
    const Point a = mesh.vertex(e.v[0]), b = mesh.vertex(e.v[1]);
    for (const auto& q : edge_rule()) {
      const double g = prob.g(a + q.s * (b - a)) * q.weight * e.length;
      rhs[e.v[0]] += g * (1.0 - q.s);
      rhs[e.v[1]] += g * q.s;
    }
  }
}

/// A_ij = eps (grad phi_j, grad phi_i) + (b.grad phi_j, phi_i) + (c phi_j, phi_i),
/// F_i = (f, phi_i) + <g, phi_i> on the Neumann boundary. D is left empty.
inline DiscreteSystem assemble_galerkin(const Mesh& mesh, const ProblemSpec& prob) {
  prob.validate();
  DiscreteSystem sys;
  sys.A = p1_pattern(mesh);
  sys.F.assign(mesh.num_vertices(), 0.0);
  const double eps = prob.epsilon;
  assemble_cells(mesh, sys.A, sys.F, [&](Index, const P1Cell& k, LocalMatrix& ae, LocalVector& fe) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) ae[i][j] = eps * dot(k.grad[j], k.grad[i]) * k.area;
    for (const auto& q : cell_rule()) {
      const Point x = k.map(q.bary);
      const double w = q.weight * k.area;
      const Point b = prob.b(x);
      const double c = prob.c(x);
      const double f = prob.f(x);
      for (int i = 0; i < 3; ++i) {
        const double phi_i = q.bary[i];
        for (int j = 0; j < 3; ++j) ae[i][j] += w * (dot(b, k.grad[j]) + c * q.bary[j]) * phi_i;
        fe[i] += w * f * phi_i;
      }
    }
  });
  add_neumann(mesh, prob, sys.F);
  sys.dirichlet = mesh.dirichlet_vertices();
  sys.dirichlet_values.assign(mesh.num_vertices(), 0.0);
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i)
    if (sys.dirichlet[i]) sys.dirichlet_values[i] = prob.u_dirichlet(mesh.vertex(static_cast<Index>(i)));
  return sys;
}

/// d_ij = -max{a_ij, 0, a_ji} off the diagonal, d_ii = -sum_{j != i} d_ij.
inline CsrMatrix artificial_diffusion(const CsrMatrix& a) {
  const auto transpose = a.transpose_positions();
  CsrMatrix d = CsrMatrix::zeros_like(a);
  for (Index i = 0; i < a.rows(); ++i) {
    double diag = 0.0;
    Index kd = kNone;
    for (Index k = a.row_begin(i); k < a.row_end(i); ++k) {
      if (a.col(k) == i) {
        kd = k;
        continue;
      }
      const double dij = -std::max({a.value(k), 0.0, a.value(transpose[k])});
      d.value(k) = dij;
      diag -= dij;
    }
    if (kd == kNone) throw std::logic_error("artificial_diffusion: missing diagonal entry");
    d.value(kd) = diag;
  }
  return d;
}

/// Galerkin operators plus the artificial diffusion matrix.
inline DiscreteSystem assemble_system(const Mesh& mesh, const ProblemSpec& prob) {
  DiscreteSystem sys = assemble_galerkin(mesh, prob);
  sys.D = artificial_diffusion(sys.A);
  return sys;
}

struct LinearSystem {
  CsrMatrix M;
  std::vector<double> rhs;
};

/// Dirichlet rows become identity rows with the prescribed value on the
/// right-hand side; Dirichlet columns of the remaining rows move to the
/// right-hand side. The pattern of M is kept.
inline LinearSystem apply_dirichlet(CsrMatrix m, std::vector<double> rhs, const std::vector<bool>& dirichlet,
                                    std::span<const double> values) {
  for (Index i = 0; i < m.rows(); ++i) {
    if (dirichlet[i]) {
      for (Index k = m.row_begin(i); k < m.row_end(i); ++k) m.value(k) = m.col(k) == i ? 1.0 : 0.0;
      rhs[i] = values[i];
      continue;
    }
    for (Index k = m.row_begin(i); k < m.row_end(i); ++k) {
      const Index j = m.col(k);
      if (!dirichlet[j]) continue;
      rhs[i] -= m.value(k) * values[j];
      m.value(k) = 0.0;
    }
  }
  return {std::move(m), std::move(rhs)};
}

inline LinearSystem apply_dirichlet(const DiscreteSystem& sys, const CsrMatrix& m, std::vector<double> rhs) {
  return apply_dirichlet(m, std::move(rhs), sys.dirichlet, sys.dirichlet_values);
}

/// Nodal interpolant.
inline std::vector<double> interpolate(const Mesh& mesh, const ScalarField& u) {
  std::vector<double> v(mesh.num_vertices());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = u(mesh.vertex(static_cast<Index>(i)));
  return v;
}

inline DofVector make_dof_vector(const DiscreteSystem& sys, std::vector<double> values) {
  return DofVector(std::move(values), sys.dirichlet);
}

/// The cell rule applied on each of the n^2 congruent subtriangles of the
/// reference triangle. Weights sum to one.
inline std::vector<CellQuadPoint> composite_cell_rule(int n) {
  if (n < 1) throw std::invalid_argument("composite_cell_rule: n must be positive");
  std::vector<CellQuadPoint> out;
  out.reserve(static_cast<std::size_t>(n) * n * cell_rule().size());
  const double inv = 1.0 / n;
  const double w = inv * inv;
  auto add = [&](std::array<double, 2> a, std::array<double, 2> b, std::array<double, 2> c) {
    for (const auto& q : cell_rule()) {
      const double l1 = (q.bary[0] * a[0] + q.bary[1] * b[0] + q.bary[2] * c[0]) * inv;
      const double l2 = (q.bary[0] * a[1] + q.bary[1] * b[1] + q.bary[2] * c[1]) * inv;
      out.push_back({{1.0 - l1 - l2, l1, l2}, q.weight * w});
    }
  };
  for (int i = 0; i < n; ++i) {
    for (int j = 0; i + j < n; ++j) {
      const double x = i, y = j;
      add({x, y}, {x + 1, y}, {x, y + 1});
      if (i + j + 1 < n) add({x + 1, y}, {x + 1, y + 1}, {x, y + 1});
    }
  }
  return out;
}

/// Quadrature used when comparing against a smooth exact solution. Each cell
/// is split into n^2 subtriangles with n = ceil(h_K / resolution), capped at
/// max_split; resolution <= 0 selects 2 eps so that layers of width eps are
/// resolved.
struct ErrorQuadrature {
  double resolution = 0.0;
  int max_split = 512;

  int splits(double h, double eps) const {
    const double r = resolution > 0.0 ? resolution : 2.0 * eps;
    if (!(r > 0.0)) return 1;
    return std::clamp(static_cast<int>(std::ceil(h / r)), 1, std::max(1, max_split));
  }
};

namespace detail {

/// Caches composite rules by split count.
class CompositeRuleCache {
 public:
  const std::vector<CellQuadPoint>& get(int n) {
    auto it = rules_.find(n);
    if (it == rules_.end()) it = rules_.emplace(n, composite_cell_rule(n)).first;
    return it->second;
  }

 private:
  std::map<int, std::vector<CellQuadPoint>> rules_;
};

}  // namespace detail

/// Per-cell squared energy norm eps|u - u_h|_1^2 + sigma0 ||u - u_h||_0^2.
inline std::vector<double> energy_norm_error_cells(std::span<const double> uh, const ProblemSpec& prob,
                                                   const Mesh& mesh, const ErrorQuadrature& quad = {}) {
  if (!prob.exact) throw std::logic_error(prob.name + ": energy error needs an exact solution");
  const auto& ex = *prob.exact;
  detail::CompositeRuleCache cache;
  std::vector<double> out(mesh.num_cells(), 0.0);
  for (Index c = 0; c < static_cast<Index>(mesh.num_cells()); ++c) {
    const P1Cell k = p1_cell(mesh, c);
    const Point gh = k.gradient(uh);
    const double h = std::max({norm(k.p[1] - k.p[0]), norm(k.p[2] - k.p[1]), norm(k.p[0] - k.p[2])});
    double s = 0.0;
    for (const auto& q : cache.get(quad.splits(h, prob.epsilon))) {
      const Point x = k.map(q.bary);
      const Point de = ex.grad(x) - gh;
      const double e = ex.u(x) - k.value(uh, q.bary);
      s += q.weight * (prob.epsilon * dot(de, de) + prob.sigma0 * e * e);
    }
    out[c] = s * k.area;
  }
  return out;
}

/// (eps |u - u_h|_1^2 + sigma0 ||u - u_h||_0^2)^{1/2}.
inline double energy_norm_error(std::span<const double> uh, const ProblemSpec& prob, const Mesh& mesh,
                                const ErrorQuadrature& quad = {}) {
  double s = 0.0;
  for (double v : energy_norm_error_cells(uh, prob, mesh, quad)) s += v;
  return std::sqrt(s);
}

/// Per-cell squared energy norm of a P1 function; exact for P1.
inline std::vector<double> energy_norm_cells(std::span<const double> w, const ProblemSpec& prob, const Mesh& mesh) {
  std::vector<double> out(mesh.num_cells(), 0.0);
  for (Index c = 0; c < static_cast<Index>(mesh.num_cells()); ++c) {
    const P1Cell k = p1_cell(mesh, c);
    const Point g = k.gradient(w);
    const double a = w[k.dofs[0]], b = w[k.dofs[1]], d = w[k.dofs[2]];
    const double l2 = k.area / 6.0 * (a * a + b * b + d * d + a * b + b * d + d * a);
    out[c] = prob.epsilon * dot(g, g) * k.area + prob.sigma0 * l2;
  }
  return out;
}

inline double energy_norm(std::span<const double> w, const ProblemSpec& prob, const Mesh& mesh) {
  double s = 0.0;
  for (double v : energy_norm_cells(w, prob, mesh)) s += v;
  return std::sqrt(s);
}

/// Value of a P1 function at x, located by a linear search over the cells.
inline std::optional<double> evaluate_at(const Mesh& mesh, std::span<const double> u, Point x, double tol = 1e-12) {
  for (Index c = 0; c < static_cast<Index>(mesh.num_cells()); ++c) {
    const P1Cell k = p1_cell(mesh, c);
    std::array<double, 3> l{};
    bool inside = true;
    for (int i = 0; i < 3; ++i) {
      l[i] = 1.0 + dot(k.grad[i], x - k.p[i]);
      if (l[i] < -tol) inside = false;
    }
    if (inside) return k.value(u, l);
  }
  return std::nullopt;
}

}  // namespace afcest

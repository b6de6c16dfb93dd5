#pragma once

// Residual a posteriori estimators for AFC solutions in the energy norm:
// the AFC-energy estimator (eta1, eta2, eta3 with per-cell split), the
// AFC-SUPG-energy estimator, effectivity indices and the layer width smear_int.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "afcest/afc.hpp"
#include "afcest/assembly.hpp"
#include "afcest/mesh.hpp"
#include "afcest/problems.hpp"
#include "afcest/supg.hpp"

namespace afcest {

/// Which edge-trace constant enters kappa1 and kappa2. Scaled is the
/// dimensionless h_K-weighted constant; Raw is the per-cell constant that
/// grows like 1/h under refinement.
enum class EdgeConstant { Scaled, Raw };

inline EdgeConstant edge_constant_from_string(const std::string& s) {
  if (s == "scaled") return EdgeConstant::Scaled;
  if (s == "raw") return EdgeConstant::Raw;
  throw std::invalid_argument("unknown edge constant '" + s + "'");
}

inline const char* to_string(EdgeConstant e) { return e == EdgeConstant::Scaled ? "scaled" : "raw"; }

struct EstimatorConstants {
  double c_i = 1.0;
  double c_f = 1.0;
  double c_inv = 1.0;
  double c_y = 4.0;
  double c_edge_max = 0.0;
  double kappa1 = 0.0;
  double kappa2 = 0.0;
};

/// kappa1 = C_edge,max (1 + (1 + C_I)^2), kappa2 = C_inv^2 kappa1.
inline EstimatorConstants estimator_constants(const MeshGeometry& geom, double c_inv = 1.0,
                                              EdgeConstant edge = EdgeConstant::Scaled) {
  if (!(c_inv > 0.0)) throw std::invalid_argument("C_inv must be positive");
  EstimatorConstants k;
  k.c_inv = c_inv;
  k.c_edge_max = edge == EdgeConstant::Scaled ? geom.c_edge_scaled_max : geom.c_edge_max;
  k.kappa1 = k.c_edge_max * (1.0 + (1.0 + k.c_i) * (1.0 + k.c_i));
  k.kappa2 = c_inv * c_inv * k.kappa1;
  return k;
}

inline EstimatorConstants estimator_constants(const Mesh& mesh, double c_inv = 1.0,
                                              EdgeConstant edge = EdgeConstant::Scaled) {
  return estimator_constants(compute_cell_geometry(mesh), c_inv, edge);
}

enum class Technique { AfcEnergy, AfcSupgEnergy };

inline Technique technique_from_string(const std::string& s) {
  if (s == "afc_energy") return Technique::AfcEnergy;
  if (s == "afc_supg_energy") return Technique::AfcSupgEnergy;
  throw std::invalid_argument("unknown technique '" + s + "'");
}

inline std::string to_string(Technique t) { return t == Technique::AfcEnergy ? "afc_energy" : "afc_supg_energy"; }

/// Global estimator with per-cell squared contributions. Interior faces and
/// edges are shared equally between their two cells, so the per-cell parts
/// sum to the global squared components.
struct EstimatorReport {
  Technique technique = Technique::AfcEnergy;
  double eta = 0.0;
  double eta1 = 0.0;
  double eta2 = 0.0;
  double eta3 = 0.0;
  double eta_supg = 0.0;
  double eta_afc_supg = 0.0;
  std::vector<double> int_sq;   // eta_Int,K^2
  std::vector<double> face_sq;  // face residual share
  std::vector<double> dh_sq;    // eta_dh share
  std::vector<double> diff_sq;  // ||u_AFC - u_SUPG||_{a,K}^2
  std::vector<double> cell_sq;  // eta_K^2
  std::optional<double> effectivity;

  std::vector<double> cell_eta() const {
    std::vector<double> out(cell_sq.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(cell_sq[i]);
    return out;
  }
};

/// min{a, b / sigma0}, reducing to a when sigma0 = 0.
inline double min_sigma(double eps_branch, double numerator, double sigma) {
  if (sigma <= 0.0) return eps_branch;
  return std::min(eps_branch, numerator / sigma);
}

namespace detail {

inline double cell_diameter(const P1Cell& k) {
  return std::max({norm(k.p[1] - k.p[0]), norm(k.p[2] - k.p[1]), norm(k.p[0] - k.p[2])});
}

/// Squared L2 norms of R_K = f - b.grad u_h - c u_h over every cell.
inline std::vector<double> cell_residual_sq(const Mesh& mesh, const ProblemSpec& prob, std::span<const double> u) {
  std::vector<double> out(mesh.num_cells());
  for (Index c = 0; c < static_cast<Index>(mesh.num_cells()); ++c) {
    const P1Cell k = p1_cell(mesh, c);
    const Point g = k.gradient(u);
    double s = 0.0;
    for (const auto& q : cell_rule()) {
      const Point x = k.map(q.bary);
      const double r = prob.f(x) - dot(prob.b(x), g) - prob.c(x) * k.value(u, q.bary);
      s += q.weight * r * r;
    }
    out[c] = s * k.area;
  }
  return out;
}

/// Squared L2 norms of the face residual on every edge: the normal flux jump
/// -eps [grad u_h . n] inside, g - eps grad u_h . n on Neumann faces, 0 on
/// Dirichlet faces.
inline std::vector<double> face_residual_sq(const Mesh& mesh, const ProblemSpec& prob, std::span<const double> u) {
  std::vector<Point> grads(mesh.num_cells());
  for (Index c = 0; c < static_cast<Index>(mesh.num_cells()); ++c) grads[c] = p1_cell(mesh, c).gradient(u);
  std::vector<double> out(mesh.num_edges(), 0.0);
  for (Index e = 0; e < static_cast<Index>(mesh.num_edges()); ++e) {
    const Edge& ed = mesh.edge(e);
    if (!ed.is_boundary()) {
      const Point n{ed.tangent.y, -ed.tangent.x};
      const double jump = prob.epsilon * dot(grads[ed.cells[0]] - grads[ed.cells[1]], n);
      out[e] = jump * jump * ed.length;
      continue;
    }
    if (mesh.edge_marker(e) != BoundaryMarker::Neumann) continue;
    // Outward normal: the cell lies to the left of its counterclockwise edges.
    const Triangle& t = mesh.cell(ed.cells[0]);
    Point n{ed.tangent.y, -ed.tangent.x};
    for (int l = 0; l < 3; ++l) {
      if (t[l] == ed.v[1] && t[(l + 1) % 3] == ed.v[0]) n = -1.0 * n;
    }
    const double flux = prob.epsilon * dot(grads[ed.cells[0]], n);
    const Point a = mesh.vertex(ed.v[0]), b = mesh.vertex(ed.v[1]);
    double s = 0.0;
    for (const auto& q : edge_rule()) {
      const double r = prob.g(a + q.s * (b - a)) - flux;
      s += q.weight * r * r;
    }
    out[e] = s * ed.length;
  }
  return out;
}

/// Per-cell interior and face parts with the given weights (4 for the
/// AFC-energy estimator, 1 for the SUPG surrogate).
inline void residual_parts(const Mesh& mesh, const ProblemSpec& prob, std::span<const double> u, double factor,
                           const EstimatorConstants& k, std::vector<double>& int_sq, std::vector<double>& face_sq,
                           double& total_int, double& total_face) {
  const double eps = prob.epsilon, s0 = prob.sigma0;
  const auto rk = cell_residual_sq(mesh, prob, u);
  const auto rf = face_residual_sq(mesh, prob, u);
  int_sq.assign(mesh.num_cells(), 0.0);
  face_sq.assign(mesh.num_cells(), 0.0);
  total_int = 0.0;
  total_face = 0.0;
  const double ci2 = factor * k.c_i * k.c_i, cf2 = factor * k.c_f * k.c_f;
  for (Index c = 0; c < static_cast<Index>(mesh.num_cells()); ++c) {
    const double h = cell_diameter(p1_cell(mesh, c));
    int_sq[c] = min_sigma(ci2 * h * h / eps, ci2, s0) * rk[c];
    total_int += int_sq[c];
  }
  const double sqrt_s0 = std::sqrt(s0);
  for (Index e = 0; e < static_cast<Index>(mesh.num_edges()); ++e) {
    if (rf[e] == 0.0) continue;
    const Edge& ed = mesh.edge(e);
    const double eps_branch = cf2 * ed.length / eps;
    const double w = s0 > 0.0 ? std::min(eps_branch, cf2 / (sqrt_s0 * std::sqrt(eps))) : eps_branch;
    const double val = w * rf[e];
    total_face += val;
    if (ed.is_boundary()) {
      face_sq[ed.cells[0]] += val;
    } else {
      face_sq[ed.cells[0]] += 0.5 * val;
      face_sq[ed.cells[1]] += 0.5 * val;
    }
  }
}

}  // namespace detail

/// eta_dh,E^2 = min{4 kappa1 h_E^2 / eps, 4 kappa2 / sigma0} (1 - alpha_E)^2 |d_E|^2
/// h_E^{-1} ||grad u_h . t_E||_{0,E}^2 per edge, with ||grad u_h . t_E||^2 = (du)^2 / h_E.
inline std::vector<double> eta_dh_edges(const Mesh& mesh, const ProblemSpec& prob, const CsrMatrix& d,
                                        const LimiterState& state, std::span<const double> u,
                                        const EstimatorConstants& k) {
  const auto w = edge_stabilization_weights(state, d, mesh);
  std::vector<double> out(mesh.num_edges(), 0.0);
  for (Index e = 0; e < static_cast<Index>(mesh.num_edges()); ++e) {
    const Edge& ed = mesh.edge(e);
    if (w[e] == 0.0) continue;
    const double h = ed.length;
    const double du = u[ed.v[1]] - u[ed.v[0]];
    const double tangential_sq = du * du / h;
    const double weight = min_sigma(4.0 * k.kappa1 * h * h / prob.epsilon, 4.0 * k.kappa2, prob.sigma0);
    out[e] = weight * w[e] * w[e] / h * tangential_sq;
  }
  return out;
}

/// AFC-energy estimator eta^2 = eta1^2 + eta2^2 + eta3^2 with per-cell parts.
inline EstimatorReport afc_energy_estimate(const Mesh& mesh, const ProblemSpec& prob, const DiscreteSystem& sys,
                                           std::span<const double> u, const LimiterState& state,
                                           const EstimatorConstants& k) {
  if (state.alpha.size() != sys.D.nnz()) throw std::invalid_argument("afc_energy_estimate: missing limiter state");
  EstimatorReport r;
  r.technique = Technique::AfcEnergy;
  double s1 = 0.0, s2 = 0.0;
  detail::residual_parts(mesh, prob, u, k.c_y, k, r.int_sq, r.face_sq, s1, s2);
  const auto dh = eta_dh_edges(mesh, prob, sys.D, state, u, k);
  r.dh_sq.assign(mesh.num_cells(), 0.0);
  double s3 = 0.0;
  for (Index e = 0; e < static_cast<Index>(mesh.num_edges()); ++e) {
    if (dh[e] == 0.0) continue;
    const Edge& ed = mesh.edge(e);
    s3 += dh[e];
    if (ed.is_boundary()) {
      r.dh_sq[ed.cells[0]] += dh[e];
    } else {
      r.dh_sq[ed.cells[0]] += 0.5 * dh[e];
      r.dh_sq[ed.cells[1]] += 0.5 * dh[e];
    }
  }
  r.diff_sq.assign(mesh.num_cells(), 0.0);
  r.cell_sq.resize(mesh.num_cells());
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) r.cell_sq[c] = r.int_sq[c] + r.face_sq[c] + r.dh_sq[c];
  r.eta1 = std::sqrt(s1);
  r.eta2 = std::sqrt(s2);
  r.eta3 = std::sqrt(s3);
  r.eta = std::sqrt(s1 + s2 + s3);
  return r;
}

/// Residual surrogate for the SUPG estimator: the interior and face
/// residuals of u_SUPG with unit Young constants.
inline EstimatorReport supg_residual_estimate(const Mesh& mesh, const ProblemSpec& prob, std::span<const double> u_supg,
                                              const EstimatorConstants& k) {
  EstimatorReport r;
  r.technique = Technique::AfcSupgEnergy;
  double s1 = 0.0, s2 = 0.0;
  detail::residual_parts(mesh, prob, u_supg, 1.0, k, r.int_sq, r.face_sq, s1, s2);
  r.eta1 = std::sqrt(s1);
  r.eta2 = std::sqrt(s2);
  r.eta_supg = std::sqrt(s1 + s2);
  return r;
}

/// AFC-SUPG-energy estimator eta^2 = 2 (eta_SUPG^2 + ||u_AFC - u_SUPG||_a^2).
inline EstimatorReport afc_supg_energy_estimate(const Mesh& mesh, const ProblemSpec& prob,
                                                std::span<const double> u_afc, std::span<const double> u_supg,
                                                const EstimatorConstants& k) {
  if (u_afc.size() != mesh.num_vertices() || u_supg.size() != mesh.num_vertices())
    throw std::invalid_argument("afc_supg_energy_estimate: solutions do not match the mesh");
  EstimatorReport r = supg_residual_estimate(mesh, prob, u_supg, k);
  std::vector<double> diff(u_afc.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = u_afc[i] - u_supg[i];
  r.diff_sq = energy_norm_cells(diff, prob, mesh);
  r.dh_sq.assign(mesh.num_cells(), 0.0);
  double sd = 0.0;
  r.cell_sq.resize(mesh.num_cells());
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    sd += r.diff_sq[c];
    r.cell_sq[c] = 2.0 * (r.int_sq[c] + r.face_sq[c] + r.diff_sq[c]);
  }
  r.eta_afc_supg = std::sqrt(sd);
  r.eta = std::sqrt(2.0 * (r.eta_supg * r.eta_supg + sd));
  return r;
}

/// eta / error, absent for a vanishing error.
inline std::optional<double> effectivity_index(double eta, double error) {
  if (!(error > 0.0)) return std::nullopt;
  return eta / error;
}

/// Width x2 - x1 of the interior layer along y = y_cut, where x1 and x2 are
/// the first abscissae with u_h >= lo and u_h >= hi. u_h is sampled at the
/// crossings of the cut line with mesh edges and at n_samples uniform points;
/// between consecutive crossings u_h is linear, so thresholds are located
/// exactly.
inline std::optional<double> smear_int(const Mesh& mesh, std::span<const double> u, double y_cut = 0.25,
                                       double lo = 0.1, double hi = 0.9, int n_samples = 1000) {
  struct Sample {
    double x;
    double u;
  };
  std::vector<Sample> pts;
  // Cells whose closure meets the line contribute the endpoints of their
  // intersection segment, plus the uniform samples falling inside.
  for (Index c = 0; c < static_cast<Index>(mesh.num_cells()); ++c) {
    const P1Cell k = p1_cell(mesh, c);
    double ymin = std::min({k.p[0].y, k.p[1].y, k.p[2].y});
    double ymax = std::max({k.p[0].y, k.p[1].y, k.p[2].y});
    if (y_cut < ymin || y_cut > ymax) continue;
    double xa = std::numeric_limits<double>::infinity(), xb = -xa;
    for (int i = 0; i < 3; ++i) {
      const Point p = k.p[i], q = k.p[(i + 1) % 3];
      if (p.y == y_cut) {
        xa = std::min(xa, p.x);
        xb = std::max(xb, p.x);
      }
      if ((p.y - y_cut) * (q.y - y_cut) < 0.0) {
        const double x = p.x + (y_cut - p.y) / (q.y - p.y) * (q.x - p.x);
        xa = std::min(xa, x);
        xb = std::max(xb, x);
      }
    }
    if (!(xa <= xb)) continue;
    auto value = [&](double x) {
      const Point z{x, y_cut};
      std::array<double, 3> l{};
      for (int i = 0; i < 3; ++i) l[i] = 1.0 + dot(k.grad[i], z - k.p[i]);
      return k.value(u, l);
    };
    pts.push_back({xa, value(xa)});
    pts.push_back({xb, value(xb)});
    if (n_samples > 1 && xb > xa) {
      const auto first = static_cast<int>(std::ceil(xa * (n_samples - 1)));
      for (int s = std::max(first, 0); s < n_samples; ++s) {
        const double x = static_cast<double>(s) / (n_samples - 1);
        if (x > xb) break;
        if (x >= xa) pts.push_back({x, value(x)});
      }
    }
  }
  if (pts.empty()) return std::nullopt;
  std::sort(pts.begin(), pts.end(), [](const Sample& a, const Sample& b) { return a.x < b.x || (a.x == b.x && a.u < b.u); });
  auto crossing = [&](double thr) -> std::optional<double> {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (pts[i].u < thr) continue;
      if (i == 0 || pts[i].x == pts[i - 1].x) return pts[i].x;
      const Sample& a = pts[i - 1];
      const Sample& b = pts[i];
      return a.x + (thr - a.u) / (b.u - a.u) * (b.x - a.x);
    }
    return std::nullopt;
  };
  const auto x1 = crossing(lo);
  const auto x2 = crossing(hi);
  if (!x1 || !x2) return std::nullopt;
  return *x2 - *x1;
}

}  // namespace afcest

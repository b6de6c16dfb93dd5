#pragma once

// Conforming triangulations of polygonal 2d domains: storage, geometry
// metrics, Delaunay diagnostics, ASCII I/O and red-green refinement.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace afcest {

using Index = std::int32_t;
inline constexpr Index kNone = -1;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point a) { return std::hypot(a.x, a.y); }
inline Point midpoint(Point a, Point b) { return {0.5 * (a.x + b.x), 0.5 * (a.y + b.y)}; }

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BoundaryMarker : std::uint8_t { Dirichlet, Neumann };

struct Edge {
  std::array<Index, 2> v{kNone, kNone};  // v[0] < v[1]
  std::array<Index, 2> cells{kNone, kNone};
  double length = 0.0;
  Point tangent;  // unit vector from v[0] to v[1]

  bool is_boundary() const { return cells[1] == kNone; }
};

struct BoundaryFace {
  Index edge = kNone;
  BoundaryMarker marker = BoundaryMarker::Dirichlet;
};

enum class CellKind : std::uint8_t { Regular, Green };

// The regular triangle a set of closure cells was cut from. midpoints[k] is
// the midpoint of the local edge vertices[k] -> vertices[k + 1] or kNone. One
// midpoint gives a green pair (cut to the opposite vertex), two give a blue
// triple (cut across the longest edge first, then across the second edge).
struct GreenParent {
  std::array<Index, 3> vertices{};
  std::array<Index, 3> midpoints{kNone, kNone, kNone};
};

struct CellLineage {
  CellKind kind = CellKind::Regular;
  Index parent = kNone;  // index into Mesh::green_parents() for green cells
};

using Triangle = std::array<Index, 3>;

inline std::uint64_t edge_key(Index a, Index b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

using BoundaryMarkerMap = std::unordered_map<std::uint64_t, BoundaryMarker>;

/// Immutable admissible triangulation. Cells are counterclockwise; local edge
/// k of a cell joins its vertices k and k+1 (mod 3).
class Mesh {
 public:
  Mesh() = default;

  Mesh(std::vector<Point> vertices, std::vector<Triangle> cells, const BoundaryMarkerMap& markers,
       std::vector<CellLineage> lineage = {}, std::vector<GreenParent> green_parents = {})
      : vertices_(std::move(vertices)),
        cells_(std::move(cells)),
        lineage_(std::move(lineage)),
        green_parents_(std::move(green_parents)) {
    if (lineage_.empty()) lineage_.assign(cells_.size(), CellLineage{});
    if (lineage_.size() != cells_.size()) throw MeshError("lineage size does not match cell count");
    build(markers);
  }

  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_cells() const { return cells_.size(); }
  std::size_t num_edges() const { return edges_.size(); }

  const std::vector<Point>& vertices() const { return vertices_; }
  const Point& vertex(Index i) const { return vertices_[i]; }
  const std::vector<Triangle>& cells() const { return cells_; }
  const Triangle& cell(Index c) const { return cells_[c]; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(Index e) const { return edges_[e]; }
  const std::array<Index, 3>& cell_edges(Index c) const { return cell_edges_[c]; }
  const std::array<Index, 3>& cell_neighbors(Index c) const { return cell_neighbors_[c]; }
  const std::vector<BoundaryFace>& boundary_faces() const { return boundary_faces_; }
  const std::vector<CellLineage>& lineage() const { return lineage_; }
  const std::vector<GreenParent>& green_parents() const { return green_parents_; }

  std::optional<BoundaryMarker> edge_marker(Index e) const {
    if (edge_face_[e] == kNone) return std::nullopt;
    return boundary_faces_[edge_face_[e]].marker;
  }

  std::optional<Index> find_edge(Index a, Index b) const {
    auto it = edge_lookup_.find(edge_key(a, b));
    if (it == edge_lookup_.end()) return std::nullopt;
    return it->second;
  }

  BoundaryMarkerMap boundary_markers() const {
    BoundaryMarkerMap m;
    for (const auto& f : boundary_faces_) m.emplace(edge_key(edges_[f.edge].v[0], edges_[f.edge].v[1]), f.marker);
    return m;
  }

  /// Vertices touching a Dirichlet face.
  std::vector<bool> dirichlet_vertices() const {
    std::vector<bool> mask(vertices_.size(), false);
    for (const auto& f : boundary_faces_) {
      if (f.marker != BoundaryMarker::Dirichlet) continue;
      mask[edges_[f.edge].v[0]] = true;
      mask[edges_[f.edge].v[1]] = true;
    }
    return mask;
  }

  double cell_area(Index c) const {
    const auto& t = cells_[c];
    return 0.5 * cross(vertices_[t[1]] - vertices_[t[0]], vertices_[t[2]] - vertices_[t[0]]);
  }

 private:
  void build(const BoundaryMarkerMap& markers) {
    const auto nv = static_cast<Index>(vertices_.size());
    cell_edges_.resize(cells_.size());
    cell_neighbors_.assign(cells_.size(), {kNone, kNone, kNone});
    edge_lookup_.reserve(3 * cells_.size());
    for (std::size_t c = 0; c < cells_.size(); ++c) {
      const auto& t = cells_[c];
      for (Index v : t)
        if (v < 0 || v >= nv) throw MeshError("cell " + std::to_string(c) + " references missing vertex");
      if (!(cell_area(static_cast<Index>(c)) > 0.0))
        throw MeshError("cell " + std::to_string(c) + " is degenerate or clockwise");
      for (int k = 0; k < 3; ++k) {
        Index a = t[k], b = t[(k + 1) % 3];
        auto [it, inserted] = edge_lookup_.try_emplace(edge_key(a, b), static_cast<Index>(edges_.size()));
        if (inserted) {
          Edge e;
          e.v = {std::min(a, b), std::max(a, b)};
          e.cells[0] = static_cast<Index>(c);
          Point d = vertices_[e.v[1]] - vertices_[e.v[0]];
          e.length = norm(d);
          e.tangent = (1.0 / e.length) * d;
          edges_.push_back(e);
        } else {
          Edge& e = edges_[it->second];
          if (e.cells[1] != kNone) throw MeshError("edge shared by more than two cells");
          e.cells[1] = static_cast<Index>(c);
        }
        cell_edges_[c][k] = it->second;
      }
    }
    for (std::size_t c = 0; c < cells_.size(); ++c) {
      for (int k = 0; k < 3; ++k) {
        const Edge& e = edges_[cell_edges_[c][k]];
        cell_neighbors_[c][k] = e.cells[0] == static_cast<Index>(c) ? e.cells[1] : e.cells[0];
      }
    }
    edge_face_.assign(edges_.size(), kNone);
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      const Edge& e = edges_[i];
      auto it = markers.find(edge_key(e.v[0], e.v[1]));
      if (e.is_boundary()) {
        if (it == markers.end())
          throw MeshError("boundary edge (" + std::to_string(e.v[0]) + "," + std::to_string(e.v[1]) +
                          ") has no marker (hanging node or missing boundary data)");
        edge_face_[i] = static_cast<Index>(boundary_faces_.size());
        boundary_faces_.push_back({static_cast<Index>(i), it->second});
      } else if (it != markers.end()) {
        throw MeshError("interior edge carries a boundary marker");
      }
    }
    for (std::size_t c = 0; c < cells_.size(); ++c) {
      const auto& l = lineage_[c];
      if (l.kind == CellKind::Green && (l.parent < 0 || l.parent >= static_cast<Index>(green_parents_.size())))
        throw MeshError("green cell without a valid parent record");
    }
  }

  std::vector<Point> vertices_;
  std::vector<Triangle> cells_;
  std::vector<CellLineage> lineage_;
  std::vector<GreenParent> green_parents_;
  std::vector<Edge> edges_;
  std::vector<std::array<Index, 3>> cell_edges_;
  std::vector<std::array<Index, 3>> cell_neighbors_;
  std::vector<BoundaryFace> boundary_faces_;
  std::vector<Index> edge_face_;
  std::unordered_map<std::uint64_t, Index> edge_lookup_;
};

/// Unit square split along the diagonal (0,0)-(1,1); all faces Dirichlet.
inline Mesh unit_square_macro() {
  std::vector<Point> v{{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}};
  std::vector<Triangle> c{{0, 1, 2}, {0, 2, 3}};
  BoundaryMarkerMap m;
  for (auto [a, b] : {std::pair{0, 1}, {1, 2}, {2, 3}, {3, 0}}) m[edge_key(a, b)] = BoundaryMarker::Dirichlet;
  return Mesh(std::move(v), std::move(c), m);
}

/// Copy of `mesh` with every boundary face re-marked by `rule(face midpoint)`.
template <class Rule>
Mesh remark_boundary(const Mesh& mesh, Rule&& rule) {
  BoundaryMarkerMap m;
  for (const auto& f : mesh.boundary_faces()) {
    const Edge& e = mesh.edge(f.edge);
    m[edge_key(e.v[0], e.v[1])] = rule(midpoint(mesh.vertex(e.v[0]), mesh.vertex(e.v[1])));
  }
  return Mesh(mesh.vertices(), mesh.cells(), m, mesh.lineage(), mesh.green_parents());
}

// ---------------------------------------------------------------------------
// Geometry metrics

struct CellGeometry {
  double h = 0.0;        // diameter (longest edge)
  double rho = 0.0;      // inscribed circle diameter, 2|K| / perimeter
  double area = 0.0;
  double max_cos = 0.0;  // largest cosine of the interior angles
  double c_edge = 0.0;   // edge trace constant, scales like 1/h
  // h_K times the same constant with the incircle diameter 2 rho in place of
  // rho; invariant under scaling of K.
  double c_edge_scaled = 0.0;
};

struct MeshGeometry {
  std::vector<CellGeometry> cells;
  double c_edge_max = 0.0;
  double c_edge_scaled_max = 0.0;
  double max_cos = -1.0;       // C_cos of the mesh
  double min_rho_over_h = 0.0;  // C_shrg of the mesh
};

inline CellGeometry triangle_geometry(Point p0, Point p1, Point p2) {
  CellGeometry g;
  g.area = 0.5 * cross(p1 - p0, p2 - p0);
  if (!(g.area > 0.0)) throw MeshError("degenerate cell (area <= 0)");
  const std::array<Point, 3> p{p0, p1, p2};
  std::array<double, 3> len{};
  for (int k = 0; k < 3; ++k) len[k] = norm(p[(k + 1) % 3] - p[k]);
  g.h = std::max({len[0], len[1], len[2]});
  g.rho = 2.0 * g.area / (len[0] + len[1] + len[2]);
  g.max_cos = -1.0;
  for (int k = 0; k < 3; ++k) {
    Point a = p[(k + 1) % 3] - p[k];
    Point b = p[(k + 2) % 3] - p[k];
    g.max_cos = std::max(g.max_cos, dot(a, b) / (norm(a) * norm(b)));
  }
  g.c_edge = 4.0 * std::numbers::sqrt2 * (1.0 + std::numbers::sqrt2) * g.area /
             ((1.0 - g.max_cos) * g.rho * g.rho * g.rho);
  g.c_edge_scaled = g.h * g.c_edge / 8.0;
  return g;
}

inline MeshGeometry compute_cell_geometry(const Mesh& mesh) {
  MeshGeometry out;
  out.cells.reserve(mesh.num_cells());
  out.min_rho_over_h = std::numeric_limits<double>::infinity();
  for (const auto& t : mesh.cells()) {
    CellGeometry g = triangle_geometry(mesh.vertex(t[0]), mesh.vertex(t[1]), mesh.vertex(t[2]));
    out.c_edge_max = std::max(out.c_edge_max, g.c_edge);
    out.c_edge_scaled_max = std::max(out.c_edge_scaled_max, g.c_edge_scaled);
    out.max_cos = std::max(out.max_cos, g.max_cos);
    out.min_rho_over_h = std::min(out.min_rho_over_h, g.rho / g.h);
    out.cells.push_back(g);
  }
  return out;
}

inline double min_angle(const Mesh& mesh) {
  double result = std::numbers::pi;
  for (const auto& t : mesh.cells()) {
    for (int k = 0; k < 3; ++k) {
      Point a = mesh.vertex(t[(k + 1) % 3]) - mesh.vertex(t[k]);
      Point b = mesh.vertex(t[(k + 2) % 3]) - mesh.vertex(t[k]);
      result = std::min(result, std::acos(std::clamp(dot(a, b) / (norm(a) * norm(b)), -1.0, 1.0)));
    }
  }
  return result;
}

struct DelaunayReport {
  bool delaunay = true;
  std::vector<Index> violating_edges;
};

/// Non-strict angle test: the two angles opposite an interior edge may sum
/// to pi (plus `tol` radians).
inline DelaunayReport is_delaunay(const Mesh& mesh, double tol = 1e-12) {
  DelaunayReport rep;
  auto opposite_angle = [&](Index c, const Edge& e) {
    const auto& t = mesh.cell(c);
    Index o = kNone;
    for (Index v : t)
      if (v != e.v[0] && v != e.v[1]) o = v;
    Point a = mesh.vertex(e.v[0]) - mesh.vertex(o);
    Point b = mesh.vertex(e.v[1]) - mesh.vertex(o);
    return std::atan2(std::abs(cross(a, b)), dot(a, b));
  };
  for (std::size_t i = 0; i < mesh.num_edges(); ++i) {
    const Edge& e = mesh.edge(static_cast<Index>(i));
    if (e.is_boundary()) continue;
    if (opposite_angle(e.cells[0], e) + opposite_angle(e.cells[1], e) > std::numbers::pi + tol) {
      rep.delaunay = false;
      rep.violating_edges.push_back(static_cast<Index>(i));
    }
  }
  return rep;
}

/// Structural audit beyond what construction enforces: no vertex lies in the
/// interior of a boundary edge and cell areas add up to `domain_area` (when
/// given). Returns an empty string when the mesh passes.
inline std::string audit_admissible(const Mesh& mesh, std::optional<double> domain_area = std::nullopt) {
  double total = 0.0;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    double a = mesh.cell_area(static_cast<Index>(c));
    if (!(a > 0.0)) return "cell " + std::to_string(c) + " has nonpositive area";
    total += a;
  }
  if (domain_area && std::abs(total - *domain_area) > 1e-12 * std::max(1.0, *domain_area))
    return "cell areas do not sum to the domain area";
  for (const auto& e : mesh.edges()) {
    if (!e.is_boundary() && (e.cells[0] == kNone || e.cells[1] == kNone)) return "interior edge without two cells";
  }
  std::vector<bool> on_boundary(mesh.num_vertices(), false);
  for (const auto& f : mesh.boundary_faces()) {
    on_boundary[mesh.edge(f.edge).v[0]] = true;
    on_boundary[mesh.edge(f.edge).v[1]] = true;
  }
  for (const auto& f : mesh.boundary_faces()) {
    const Edge& e = mesh.edge(f.edge);
    Point a = mesh.vertex(e.v[0]), b = mesh.vertex(e.v[1]);
    for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
      if (!on_boundary[v] || static_cast<Index>(v) == e.v[0] || static_cast<Index>(v) == e.v[1]) continue;
      Point p = mesh.vertex(static_cast<Index>(v));
      double t = dot(p - a, b - a) / dot(b - a, b - a);
      if (t > 0.0 && t < 1.0 && std::abs(cross(b - a, p - a)) <= 1e-12 * e.length * e.length)
        return "hanging vertex " + std::to_string(v) + " on boundary edge";
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// Red-green refinement
//
// The conforming mesh is viewed as the leaves of a red-refinement forest:
// regular cells are leaves, and each green pair stands for its regular parent
// leaf, which carries one hanging node. Refinement red-refines marked leaves,
// closes the forest (leaves with two or more hanging edges, or with an edge
// split twice, are red-refined too) and finally bisects every leaf with a
// single hanging edge into a fresh green pair.
//
// With ClosureRule::LongestEdge a leaf whose hanging edge is not one of its
// longest edges is red-refined as well, so green cells are always halves cut
// across the longest edge. On meshes of right isosceles triangles this keeps
// every cell similar to the macro cells and the mesh Delaunay.
// ClosureRule::AnyEdge bisects whichever edge hangs.

enum class ClosureRule { LongestEdge, AnyEdge };

inline ClosureRule closure_rule_from_string(const std::string& s) {
  if (s == "longest_edge") return ClosureRule::LongestEdge;
  if (s == "any_edge") return ClosureRule::AnyEdge;
  throw std::invalid_argument("unknown closure rule '" + s + "'");
}

inline const char* to_string(ClosureRule r) { return r == ClosureRule::LongestEdge ? "longest_edge" : "any_edge"; }

namespace detail {

class RedGreenRefiner {
 public:
  explicit RedGreenRefiner(const Mesh& mesh, ClosureRule rule = ClosureRule::LongestEdge)
      : rule_(rule), vertices_(mesh.vertices()), markers_(mesh.boundary_markers()) {
    leaf_of_cell_.assign(mesh.num_cells(), kNone);
    std::vector<Index> leaf_of_parent(mesh.green_parents().size(), kNone);
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
      const auto& l = mesh.lineage()[c];
      if (l.kind == CellKind::Regular) {
        leaf_of_cell_[c] = add_leaf(mesh.cell(static_cast<Index>(c)));
        continue;
      }
      if (leaf_of_parent[l.parent] == kNone) {
        const GreenParent& gp = mesh.green_parents()[l.parent];
        leaf_of_parent[l.parent] = add_leaf(gp.vertices);
        for (int k = 0; k < 3; ++k)
          if (gp.midpoints[k] != kNone) midpoints_[edge_key(gp.vertices[k], gp.vertices[(k + 1) % 3])] = gp.midpoints[k];
      }
      leaf_of_cell_[c] = leaf_of_parent[l.parent];
    }
    roots_ = static_cast<Index>(leaves_.size());
  }

  Mesh refine(std::span<const Index> marked_cells) {
    for (Index c : marked_cells) {
      if (c < 0 || c >= static_cast<Index>(leaf_of_cell_.size()))
        throw MeshError("marked cell " + std::to_string(c) + " is not in the mesh");
      leaves_[leaf_of_cell_[c]].flagged = true;
    }
    bool changed = true;
    while (changed) {
      for (Index l = 0; l < static_cast<Index>(leaves_.size()); ++l)
        if (leaves_[l].flagged && leaves_[l].children[0] == kNone) red_refine(l);
      changed = false;
      for (Index l = 0; l < static_cast<Index>(leaves_.size()); ++l) {
        if (leaves_[l].children[0] != kNone || leaves_[l].flagged) continue;
        int hanging = 0;
        bool irregular = false;
        bool off_longest = false;
        const auto& t = leaves_[l].v;
        const int longest = longest_edge(t);
        for (int k = 0; k < 3; ++k) {
          Index a = t[k], b = t[(k + 1) % 3];
          auto it = midpoints_.find(edge_key(a, b));
          if (it == midpoints_.end()) continue;
          ++hanging;
          if (midpoints_.contains(edge_key(a, it->second)) || midpoints_.contains(edge_key(it->second, b)))
            irregular = true;
          if (!is_longest_edge(t, k)) off_longest = true;
        }
        if (hanging == 0) continue;
        const bool blue_ok = rule_ == ClosureRule::LongestEdge && hanging == 2 && !off_longest_only(t);
        if (irregular || hanging == 3 || (hanging == 2 && !blue_ok)) {
          leaves_[l].flagged = true;
          changed = true;
        } else if (rule_ == ClosureRule::LongestEdge && off_longest &&
                   !midpoints_.contains(edge_key(t[longest], t[(longest + 1) % 3]))) {
          midpoint_of(t[longest], t[(longest + 1) % 3]);
          changed = true;
        }
      }
    }
    return emit();
  }

 private:
  struct Leaf {
    Triangle v;
    std::array<Index, 4> children{kNone, kNone, kNone, kNone};
    bool flagged = false;
  };

  int longest_edge(const Triangle& t) const {
    for (int k = 0; k < 3; ++k)
      if (is_longest_edge(t, k)) return k;
    return 0;
  }

  // True when no hanging edge of t is one of its longest edges.
  bool off_longest_only(const Triangle& t) const {
    for (int k = 0; k < 3; ++k)
      if (is_longest_edge(t, k) && midpoints_.contains(edge_key(t[k], t[(k + 1) % 3]))) return false;
    return true;
  }

  bool is_longest_edge(const Triangle& t, int k) const {
    std::array<double, 3> len{};
    for (int i = 0; i < 3; ++i) len[i] = norm(vertices_[t[(i + 1) % 3]] - vertices_[t[i]]);
    return len[k] >= (1.0 - 1e-12) * std::max({len[0], len[1], len[2]});
  }

  Index add_leaf(const Triangle& t) {
    leaves_.push_back({t});
    return static_cast<Index>(leaves_.size() - 1);
  }

  Index midpoint_of(Index a, Index b) {
    auto [it, inserted] = midpoints_.try_emplace(edge_key(a, b), kNone);
    if (inserted) {
      it->second = static_cast<Index>(vertices_.size());
      vertices_.push_back(midpoint(vertices_[a], vertices_[b]));
      auto mk = markers_.find(edge_key(a, b));
      if (mk != markers_.end()) {
        BoundaryMarker marker = mk->second;
        markers_.erase(mk);
        markers_[edge_key(a, it->second)] = marker;
        markers_[edge_key(it->second, b)] = marker;
      }
    }
    return it->second;
  }

  void red_refine(Index l) {
    const Triangle t = leaves_[l].v;
    Index m01 = midpoint_of(t[0], t[1]);
    Index m12 = midpoint_of(t[1], t[2]);
    Index m20 = midpoint_of(t[2], t[0]);
    std::array<Triangle, 4> kids{Triangle{t[0], m01, m20}, Triangle{m01, t[1], m12}, Triangle{m20, m12, t[2]},
                                 Triangle{m01, m12, m20}};
    for (int k = 0; k < 4; ++k) {
      Index child = add_leaf(kids[k]);
      leaves_[l].children[k] = child;
    }
  }

  void emit_leaf(Index l, std::vector<Triangle>& cells, std::vector<CellLineage>& lineage,
                 std::vector<GreenParent>& parents) const {
    const Leaf& leaf = leaves_[l];
    if (leaf.children[0] != kNone) {
      for (Index c : leaf.children) emit_leaf(c, cells, lineage, parents);
      return;
    }
    const auto& t = leaf.v;
    GreenParent gp{t};
    int hanging = 0;
    for (int k = 0; k < 3; ++k) {
      auto it = midpoints_.find(edge_key(t[k], t[(k + 1) % 3]));
      if (it == midpoints_.end()) continue;
      gp.midpoints[k] = it->second;
      ++hanging;
    }
    if (hanging == 0) {
      cells.push_back(t);
      lineage.push_back({});
      return;
    }
    auto parent = static_cast<Index>(parents.size());
    auto push = [&](Triangle c) {
      cells.push_back(c);
      lineage.push_back({CellKind::Green, parent});
    };
    // First cut: the only hanging edge, or the hanging longest edge.
    int k = 0;
    for (int i = 0; i < 3; ++i)
      if (gp.midpoints[i] != kNone && (hanging == 1 || is_longest_edge(t, i))) {
        k = i;
        break;
      }
    const Index a = t[k], b = t[(k + 1) % 3], o = t[(k + 2) % 3], m = gp.midpoints[k];
    const Index q_bo = gp.midpoints[(k + 1) % 3], q_oa = gp.midpoints[(k + 2) % 3];
    if (q_oa != kNone) {
      push({o, q_oa, m});
      push({q_oa, a, m});
    } else {
      push({a, m, o});
    }
    if (q_bo != kNone) {
      push({b, q_bo, m});
      push({q_bo, o, m});
    } else {
      push({m, b, o});
    }
    parents.push_back(gp);
  }

  Mesh emit() const {
    std::vector<Triangle> cells;
    std::vector<CellLineage> lineage;
    std::vector<GreenParent> parents;
    for (Index l = 0; l < roots_; ++l) emit_leaf(l, cells, lineage, parents);
    return Mesh(vertices_, std::move(cells), markers_, std::move(lineage), std::move(parents));
  }

  ClosureRule rule_;
  std::vector<Point> vertices_;
  BoundaryMarkerMap markers_;
  std::unordered_map<std::uint64_t, Index> midpoints_;
  std::vector<Leaf> leaves_;
  std::vector<Index> leaf_of_cell_;
  Index roots_ = 0;
};

}  // namespace detail

/// Red-refines the marked cells and closes the mesh with green bisections.
/// Marked green cells (and green cells receiving a new hanging node) are
/// replaced by their regular parent, which is red-refined instead.
inline Mesh refine_adaptive(const Mesh& mesh, std::span<const Index> marked,
                            ClosureRule rule = ClosureRule::LongestEdge) {
  if (marked.empty()) throw MeshError("refine_adaptive: no cells marked");
  return detail::RedGreenRefiner(mesh, rule).refine(marked);
}

inline Mesh refine_uniform(const Mesh& mesh) {
  std::vector<Index> all(mesh.num_cells());
  for (std::size_t c = 0; c < all.size(); ++c) all[c] = static_cast<Index>(c);
  return detail::RedGreenRefiner(mesh).refine(all);
}

inline Mesh refine_uniform(const Mesh& mesh, int levels) {
  Mesh m = mesh;
  for (int i = 0; i < levels; ++i) m = refine_uniform(m);
  return m;
}

// ---------------------------------------------------------------------------
// ASCII format:
//   $Nodes <n> then "id x y"; $Cells <n> then "id v0 v1 v2";
//   $Boundary <n> then "id v0 v1 D|N". Indices are 0-based.

inline void write_mesh(std::ostream& os, const Mesh& mesh) {
  std::ostringstream buf;
  buf.precision(17);
  buf << "$Nodes\n" << mesh.num_vertices() << '\n';
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i)
    buf << i << ' ' << mesh.vertices()[i].x << ' ' << mesh.vertices()[i].y << '\n';
  buf << "$Cells\n" << mesh.num_cells() << '\n';
  for (std::size_t i = 0; i < mesh.num_cells(); ++i) {
    const auto& t = mesh.cells()[i];
    buf << i << ' ' << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  }
  buf << "$Boundary\n" << mesh.boundary_faces().size() << '\n';
  for (std::size_t i = 0; i < mesh.boundary_faces().size(); ++i) {
    const auto& f = mesh.boundary_faces()[i];
    const Edge& e = mesh.edge(f.edge);
    buf << i << ' ' << e.v[0] << ' ' << e.v[1] << ' ' << (f.marker == BoundaryMarker::Dirichlet ? 'D' : 'N') << '\n';
  }
  os << buf.str();
}

inline Mesh read_mesh(std::istream& is) {
  auto expect = [&](const std::string& tag) {
    std::string word;
    if (!(is >> word) || word != tag) throw MeshError("mesh file: expected " + tag);
    std::size_t n = 0;
    if (!(is >> n)) throw MeshError("mesh file: missing count after " + tag);
    return n;
  };
  auto check_id = [](std::size_t got, std::size_t want, const char* what) {
    if (got != want) throw MeshError(std::string("mesh file: non-consecutive ") + what + " id");
  };
  std::size_t n = expect("$Nodes");
  std::vector<Point> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t id = 0;
    if (!(is >> id >> v[i].x >> v[i].y)) throw MeshError("mesh file: bad node line");
    check_id(id, i, "node");
  }
  n = expect("$Cells");
  std::vector<Triangle> c(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t id = 0;
    if (!(is >> id >> c[i][0] >> c[i][1] >> c[i][2])) throw MeshError("mesh file: bad cell line");
    check_id(id, i, "cell");
  }
  n = expect("$Boundary");
  BoundaryMarkerMap m;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t id = 0;
    Index a = 0, b = 0;
    std::string mk;
    if (!(is >> id >> a >> b >> mk)) throw MeshError("mesh file: bad boundary line");
    check_id(id, i, "boundary");
    if (mk == "D")
      m[edge_key(a, b)] = BoundaryMarker::Dirichlet;
    else if (mk == "N")
      m[edge_key(a, b)] = BoundaryMarker::Neumann;
    else
      throw MeshError("mesh file: boundary marker must be D or N");
  }
  return Mesh(std::move(v), std::move(c), m);
}

inline void write_mesh(const std::string& path, const Mesh& mesh) {
  std::ofstream os(path);
  if (!os) throw MeshError("cannot open " + path);
  write_mesh(os, mesh);
}

inline Mesh read_mesh(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw MeshError("cannot open " + path);
  return read_mesh(is);
}

}  // namespace afcest

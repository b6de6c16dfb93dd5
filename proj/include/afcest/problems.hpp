#pragma once

// Steady convection-diffusion-reaction problems
//   -eps Lap u + b.grad u + c u = f in Omega, u = u_D on Gamma_D,
//   eps du/dn = g on Gamma_N,
// including the two unit-square benchmarks used by the driver.

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "afcest/mesh.hpp"

namespace afcest {

using ScalarField = std::function<double(Point)>;
using VectorField = std::function<Point(Point)>;

struct ExactSolution {
  ScalarField u;
  VectorField grad;
  ScalarField laplacian;
};

struct ProblemSpec {
  std::string name;
  double epsilon = 1.0;
  VectorField b = [](Point) { return Point{}; };
  ScalarField c = [](Point) { return 0.0; };
  ScalarField f = [](Point) { return 0.0; };
  ScalarField g = [](Point) { return 0.0; };
  ScalarField u_dirichlet = [](Point) { return 0.0; };
  double sigma0 = 0.0;  // lower bound of c - div(b)/2
  std::optional<ExactSolution> exact;
  std::optional<std::pair<double, double>> solution_bounds;  // a priori range of u
  std::function<BoundaryMarker(Point)> boundary_marker = [](Point) { return BoundaryMarker::Dirichlet; };

  void validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument(name + ": epsilon must be positive");
    if (!(sigma0 >= 0.0)) throw std::invalid_argument(name + ": sigma0 must be nonnegative");
  }
};

/// Macro mesh of the unit square with boundary faces marked by the problem.
inline Mesh macro_mesh_for(const ProblemSpec& prob) { return remark_boundary(unit_square_macro(), prob.boundary_marker); }

/// Known solution with an exponential layer at x = 1:
///   u = y(1-y) (x - (e^{(x-1)/eps} - e^{-1/eps}) / (1 - e^{-1/eps})),
/// b = (2,1), c = 1, homogeneous Dirichlet data.
inline ProblemSpec example_boundary_layer(double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("boundary_layer: epsilon must be positive");
  ProblemSpec p;
  p.name = "boundary_layer";
  p.epsilon = epsilon;
  p.b = [](Point) { return Point{2.0, 1.0}; };
  p.c = [](Point) { return 1.0; };
  p.sigma0 = 1.0;
  p.solution_bounds = std::nullopt;

  // e^{(x-1)/eps} <= 1 on the closed square; exp(-1/eps) underflows to 0
  // harmlessly for small eps.
  const double tail = std::exp(-1.0 / epsilon);
  const double denom = -std::expm1(-1.0 / epsilon);
  auto layer = [=](double x) { return std::exp((x - 1.0) / epsilon); };
  auto w = [=](double x) { return x - (layer(x) - tail) / denom; };
  auto dw = [=](double x) { return 1.0 - layer(x) / (epsilon * denom); };
  auto d2w = [=](double x) { return -layer(x) / (epsilon * epsilon * denom); };

  ExactSolution ex;
  ex.u = [=](Point q) { return q.y * (1.0 - q.y) * w(q.x); };
  ex.grad = [=](Point q) { return Point{q.y * (1.0 - q.y) * dw(q.x), (1.0 - 2.0 * q.y) * w(q.x)}; };
  ex.laplacian = [=](Point q) { return q.y * (1.0 - q.y) * d2w(q.x) - 2.0 * w(q.x); };
  p.exact = ex;

  // f = -eps Lap u + 2 u_x + u_y + u, with -eps y(1-y) w'' written as
  // y(1-y) e^{(x-1)/eps} / (eps (1 - e^{-1/eps})).
  p.f = [=](Point q) {
    const double py = q.y * (1.0 - q.y);
    const double wx = w(q.x);
    return py * layer(q.x) / (epsilon * denom) + 2.0 * epsilon * wx + 2.0 * py * dw(q.x) +
           (1.0 - 2.0 * q.y) * wx + py * wx;
  };
  return p;
}

/// Interior and boundary layers: b = (cos(-pi/3), sin(-pi/3)), c = f = 0,
/// u_D = 1 on {y = 1, x > 0} and {x = 0, y > 0.7}, 0 elsewhere.
inline ProblemSpec example_hmm86(double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("hmm86: epsilon must be positive");
  ProblemSpec p;
  p.name = "hmm86";
  p.epsilon = epsilon;
  const Point b{std::cos(-std::numbers::pi / 3.0), std::sin(-std::numbers::pi / 3.0)};
  p.b = [b](Point) { return b; };
  p.sigma0 = 0.0;
  p.u_dirichlet = [](Point q) {
    const bool top = q.y == 1.0 && q.x > 0.0;
    const bool left = q.x == 0.0 && q.y > 0.7;
    return (top || left) ? 1.0 : 0.0;
  };
  p.solution_bounds = std::pair{0.0, 1.0};
  return p;
}

struct ConstantCoefficients {
  double epsilon = 1.0;
  double bx = 0.0;
  double by = 0.0;
  double c = 0.0;
  double f = 0.0;
  double g = 0.0;
  double u_dirichlet = 0.0;
};

/// Constant-data problem on the unit square; sigma0 = c since div b = 0.
inline ProblemSpec constant_problem(const ConstantCoefficients& k, std::string name = "custom") {
  ProblemSpec p;
  p.name = std::move(name);
  p.epsilon = k.epsilon;
  p.b = [k](Point) { return Point{k.bx, k.by}; };
  p.c = [k](Point) { return k.c; };
  p.f = [k](Point) { return k.f; };
  p.g = [k](Point) { return k.g; };
  p.u_dirichlet = [k](Point) { return k.u_dirichlet; };
  p.sigma0 = std::max(0.0, k.c);
  p.validate();
  return p;
}

/// Strong-form residual -eps Lap u + b.grad u + c u - f of the exact solution.
inline double strong_residual(const ProblemSpec& p, Point q) {
  if (!p.exact) throw std::logic_error(p.name + ": no exact solution");
  const auto& ex = *p.exact;
  return -p.epsilon * ex.laplacian(q) + dot(p.b(q), ex.grad(q)) + p.c(q) * ex.u(q) - p.f(q);
}

/// Central-difference divergence of b at q.
inline double divergence_b(const ProblemSpec& p, Point q, double h = 1e-5) {
  Point bxp = p.b({q.x + h, q.y}), bxm = p.b({q.x - h, q.y});
  Point byp = p.b({q.x, q.y + h}), bym = p.b({q.x, q.y - h});
  return (bxp.x - bxm.x) / (2.0 * h) + (byp.y - bym.y) / (2.0 * h);
}

inline ProblemSpec problem_by_name(const std::string& name, double epsilon) {
  if (name == "boundary_layer") return example_boundary_layer(epsilon);
  if (name == "hmm86") return example_hmm86(epsilon);
  throw std::invalid_argument("unknown problem '" + name + "'");
}

}  // namespace afcest

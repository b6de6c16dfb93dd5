#pragma once

// Algebraic flux correction: Kuzmin and BJK limiters, the stabilization
// form d_h in point and edge representation, and the fixed-point solver
//   (A + D) u~ = F + sum_j alpha_ij d_ij (u_j - u_i).

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "afcest/assembly.hpp"
#include "afcest/linalg.hpp"
#include "afcest/mesh.hpp"
#include "afcest/problems.hpp"
#include "afcest/supg.hpp"

namespace afcest {

enum class LimiterKind { Kuzmin, Bjk };

inline LimiterKind limiter_from_string(const std::string& s) {
  if (s == "kuzmin") return LimiterKind::Kuzmin;
  if (s == "bjk") return LimiterKind::Bjk;
  throw std::invalid_argument("unknown limiter '" + s + "'");
}

inline std::string to_string(LimiterKind k) { return k == LimiterKind::Kuzmin ? "kuzmin" : "bjk"; }

/// Limiter values aligned with the storage of D (one per stored entry;
/// diagonal entries are 1 and never used).
struct LimiterState {
  std::vector<double> alpha;
  LimiterKind kind = LimiterKind::Kuzmin;
  std::vector<double> gamma;  // BJK only
};

namespace detail {

inline double ratio_or_one(double q, double p) { return p == 0.0 ? 1.0 : std::min(1.0, q / p); }

inline double select_alpha(double flux, double r_plus, double r_minus) {
  if (flux > 0.0) return r_plus;
  if (flux < 0.0) return r_minus;
  return 1.0;
}

}  // namespace detail

/// Kuzmin limiter. Row-wise values are computed with the upwind restriction
/// a_ji <= a_ij in P_i^+/-, then each pair takes the value of its upwind row
/// (ties: lower index).
inline LimiterState kuzmin_alpha(const CsrMatrix& a, const CsrMatrix& d, std::span<const double> u,
                                 const std::vector<bool>& dirichlet) {
  if (!a.same_pattern(d)) throw std::invalid_argument("kuzmin_alpha: A and D patterns differ");
  const auto transpose = d.transpose_positions();
  const Index n = d.rows();
  std::vector<double> row_alpha(d.nnz(), 1.0);
  for (Index i = 0; i < n; ++i) {
    double rp = 1.0, rm = 1.0;
    if (!dirichlet[i]) {
      double pp = 0.0, pm = 0.0, qp = 0.0, qm = 0.0;
      for (Index k = d.row_begin(i); k < d.row_end(i); ++k) {
        const Index j = d.col(k);
        if (j == i) continue;
        const double f = d.value(k) * (u[j] - u[i]);
        if (a.value(transpose[k]) <= a.value(k)) {
          pp += std::max(f, 0.0);
          pm += std::min(f, 0.0);
        }
        qp -= std::min(f, 0.0);
        qm -= std::max(f, 0.0);
      }
      rp = detail::ratio_or_one(qp, pp);
      rm = detail::ratio_or_one(qm, pm);
    }
    for (Index k = d.row_begin(i); k < d.row_end(i); ++k) {
      const Index j = d.col(k);
      if (j != i) row_alpha[k] = detail::select_alpha(d.value(k) * (u[j] - u[i]), rp, rm);
    }
  }
  LimiterState s;
  s.kind = LimiterKind::Kuzmin;
  s.alpha.assign(d.nnz(), 1.0);
  for (Index i = 0; i < n; ++i)
    for (Index k = d.row_begin(i); k < d.row_end(i); ++k) {
      const Index j = d.col(k);
      if (j <= i) continue;
      const Index t = transpose[k];
      const bool i_upwind = a.value(t) <= a.value(k);  // a_ji <= a_ij, ties included
      const double v = i_upwind ? row_alpha[k] : row_alpha[t];
      s.alpha[k] = v;
      s.alpha[t] = v;
    }
  return s;
}

/// BJK limiter with per-dof gamma (ignored at Dirichlet dofs).
inline LimiterState bjk_alpha(const CsrMatrix& d, std::span<const double> u, const std::vector<bool>& dirichlet,
                              std::span<const double> gamma) {
  const Index n = d.rows();
  if (static_cast<Index>(gamma.size()) != n) throw std::invalid_argument("bjk_alpha: gamma size mismatch");
  for (Index i = 0; i < n; ++i)
    if (!dirichlet[i] && !(gamma[i] > 0.0))
      throw std::invalid_argument("bjk_alpha: gamma must be positive at dof " + std::to_string(i));
  const auto transpose = d.transpose_positions();
  std::vector<double> bar(d.nnz(), 1.0);
  for (Index i = 0; i < n; ++i) {
    double rp = 1.0, rm = 1.0;
    if (!dirichlet[i]) {
      double pp = 0.0, pm = 0.0, dsum = 0.0;
      double umax = u[i], umin = u[i];
      for (Index k = d.row_begin(i); k < d.row_end(i); ++k) {
        const Index j = d.col(k);
        if (j == i) continue;
        const double f = d.value(k) * (u[j] - u[i]);
        pp += std::max(f, 0.0);
        pm += std::min(f, 0.0);
        umax = std::max(umax, u[j]);
        umin = std::min(umin, u[j]);
        dsum += d.value(k);
      }
      const double q = gamma[i] * dsum;
      rp = detail::ratio_or_one(q * (u[i] - umax), pp);
      rm = detail::ratio_or_one(q * (u[i] - umin), pm);
    }
    for (Index k = d.row_begin(i); k < d.row_end(i); ++k) {
      const Index j = d.col(k);
      if (j != i) bar[k] = detail::select_alpha(d.value(k) * (u[j] - u[i]), rp, rm);
    }
  }
  LimiterState s;
  s.kind = LimiterKind::Bjk;
  s.gamma.assign(gamma.begin(), gamma.end());
  s.alpha.assign(d.nnz(), 1.0);
  for (Index i = 0; i < n; ++i)
    for (Index k = d.row_begin(i); k < d.row_end(i); ++k) {
      const Index j = d.col(k);
      if (j == i) continue;
      const Index t = transpose[k];
      if (!dirichlet[i] && !dirichlet[j])
        s.alpha[k] = std::min(bar[k], bar[t]);
      else if (!dirichlet[i])
        s.alpha[k] = bar[k];
      else if (!dirichlet[j])
        s.alpha[k] = bar[t];
      else
        s.alpha[k] = 1.0;
    }
  return s;
}

inline LimiterState compute_limiter(LimiterKind kind, const DiscreteSystem& sys, std::span<const double> u,
                                    std::span<const double> gamma) {
  if (kind == LimiterKind::Kuzmin) return kuzmin_alpha(sys.A, sys.D, u, sys.dirichlet);
  return bjk_alpha(sys.D, u, sys.dirichlet, gamma);
}

/// sum_{i,j} (1 - alpha_ij) d_ij (u_j - u_i) v_i.
inline double dh_point(const LimiterState& s, const CsrMatrix& d, std::span<const double> u,
                       std::span<const double> v) {
  double sum = 0.0;
  for (Index i = 0; i < d.rows(); ++i)
    for (Index k = d.row_begin(i); k < d.row_end(i); ++k) {
      const Index j = d.col(k);
      if (j != i) sum += (1.0 - s.alpha[k]) * d.value(k) * (u[j] - u[i]) * v[i];
    }
  return sum;
}

/// (1 - alpha_E) |d_E| for every mesh edge, read from the entry (v0, v1).
inline std::vector<double> edge_stabilization_weights(const LimiterState& s, const CsrMatrix& d, const Mesh& mesh) {
  std::vector<double> w(mesh.num_edges());
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
    const Edge& ed = mesh.edge(static_cast<Index>(e));
    const Index k = d.find(ed.v[0], ed.v[1]);
    if (k == kNone)
      throw std::logic_error("edge " + std::to_string(e) + " has no matrix entry");
    w[e] = (1.0 - s.alpha[k]) * std::abs(d.value(k));
  }
  return w;
}

/// sum_E (1 - alpha_E) |d_E| h_E (grad u . t_E, grad v . t_E)_E. The tangential
/// derivative of a P1 function is constant along E.
inline double dh_edge(const LimiterState& s, const CsrMatrix& d, const Mesh& mesh, std::span<const double> u,
                      std::span<const double> v) {
  const auto w = edge_stabilization_weights(s, d, mesh);
  double sum = 0.0;
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
    const Edge& ed = mesh.edge(static_cast<Index>(e));
    const double h = ed.length;
    const double du = (u[ed.v[1]] - u[ed.v[0]]) / h;
    const double dv = (v[ed.v[1]] - v[ed.v[0]]) / h;
    sum += w[e] * h * du * dv * h;
  }
  return sum;
}

/// Limiter-weighted flux sum_j alpha_ij d_ij (u_j - u_i) per row.
inline std::vector<double> limited_flux(const LimiterState& s, const CsrMatrix& d, std::span<const double> u) {
  std::vector<double> out(d.rows(), 0.0);
  for (Index i = 0; i < d.rows(); ++i)
    for (Index k = d.row_begin(i); k < d.row_end(i); ++k) {
      const Index j = d.col(k);
      if (j != i) out[i] += s.alpha[k] * d.value(k) * (u[j] - u[i]);
    }
  return out;
}

/// Residual A u + sum_j (1 - alpha_ij(u)) d_ij (u_j - u_i) - F on non-Dirichlet
/// rows, 0 on Dirichlet rows.
inline std::vector<double> afc_residual(const DiscreteSystem& sys, const LimiterState& s, std::span<const double> u) {
  std::vector<double> r = sys.A.multiply(u);
  const auto du = sys.D.multiply(u);
  const auto lf = limited_flux(s, sys.D, u);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = sys.dirichlet[i] ? 0.0 : r[i] + du[i] - lf[i] - sys.F[i];
  return r;
}

enum class InitialGuess { Supg, Zero, Upwind };

inline InitialGuess initial_guess_from_string(const std::string& s) {
  if (s == "supg") return InitialGuess::Supg;
  if (s == "zero") return InitialGuess::Zero;
  if (s == "upwind") return InitialGuess::Upwind;
  throw std::invalid_argument("unknown initial guess '" + s + "'");
}

struct SolverOptions {
  double omega = 1.0;
  double tol = 1e-10;
  int max_iter = 25000;
  InitialGuess init = InitialGuess::Supg;
  TauOptions tau;  // for the SUPG initial guess
};

struct SolveStats {
  int iterations = 0;       // accepted fixed-point steps
  double residual = 0.0;    // final ||r||_2
  double reference = 1.0;   // ||F||_2 after Dirichlet elimination
  bool converged = false;
  int forced_steps = 0;     // steps accepted at the smallest omega despite a residual increase
  std::vector<double> history;  // residual of the initial guess and of every accepted step
};

struct AfcSolution {
  DofVector u;
  LimiterState state;
  SolveStats stats;
};

inline constexpr double kMinOmega = 1.0 / 64.0;

/// Fixed-point iteration with the matrix A + D factored once. Each step
/// solves for u~ and sets u <- u + omega (u~ - u); omega is halved while the
/// residual would grow (down to 1/64) and reset after every accepted step.
/// A nonempty `initial` replaces the guess selected by opts.init.
inline AfcSolution solve_afc(const DiscreteSystem& sys, const Mesh& mesh, const ProblemSpec& prob, LimiterKind kind,
                             const SolverOptions& opts, std::span<const double> gamma = {},
                             std::span<const double> initial = {}) {
  if (!(opts.omega > 0.0 && opts.omega <= 1.0)) throw std::invalid_argument("omega must lie in (0, 1]");
  if (!(opts.tol > 0.0)) throw std::invalid_argument("tol must be positive");
  if (opts.max_iter < 0) throw std::invalid_argument("max_iter must be nonnegative");
  const std::size_t n = sys.size();
  std::vector<double> gamma_v(gamma.begin(), gamma.end());
  if (kind == LimiterKind::Bjk && gamma_v.empty()) gamma_v.assign(n, 1.0);

  const LinearSystem base = apply_dirichlet(sys, sys.A + sys.D, sys.F);
  const SparseLu lu(base.M);

  SolveStats stats;
  {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (!sys.dirichlet[i]) s += base.rhs[i] * base.rhs[i];
    stats.reference = s > 0.0 ? std::sqrt(s) : 1.0;
  }

  std::vector<double> u(initial.begin(), initial.end());
  if (!u.empty() && u.size() != n) throw std::invalid_argument("solve_afc: initial guess size mismatch");
  if (u.empty()) {
    switch (opts.init) {
      case InitialGuess::Supg:
        u = solve_supg(mesh, prob, opts.tau).values;
        break;
      case InitialGuess::Upwind:
        u = lu.solve(base.rhs);
        break;
      case InitialGuess::Zero:
        u.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
          if (sys.dirichlet[i]) u[i] = sys.dirichlet_values[i];
        break;
    }
  }

  LimiterState state = compute_limiter(kind, sys, u, gamma_v);
  double res = norm2(afc_residual(sys, state, u));
  stats.history.push_back(res);
  std::vector<double> trial(n);
  while (true) {
    if (res <= opts.tol * stats.reference) {
      stats.converged = true;
      break;
    }
    if (stats.iterations >= opts.max_iter) break;
    std::vector<double> rhs = base.rhs;
    const auto lf = limited_flux(state, sys.D, u);
    for (std::size_t i = 0; i < n; ++i)
      if (!sys.dirichlet[i]) rhs[i] += lf[i];
    const std::vector<double> target = lu.solve(rhs);

    double omega = opts.omega;
    while (true) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = u[i] + omega * (target[i] - u[i]);
      LimiterState trial_state = compute_limiter(kind, sys, trial, gamma_v);
      const double trial_res = norm2(afc_residual(sys, trial_state, trial));
      const bool last_try = omega * 0.5 < kMinOmega;
      if (trial_res <= res || last_try) {
        if (trial_res > res) ++stats.forced_steps;
        u.swap(trial);
        state = std::move(trial_state);
        res = trial_res;
        stats.history.push_back(res);
        break;
      }
      omega *= 0.5;
    }
    ++stats.iterations;
  }
  stats.residual = res;
  return {DofVector(std::move(u), sys.dirichlet), std::move(state), stats};
}

inline AfcSolution solve_afc(const Mesh& mesh, const ProblemSpec& prob, LimiterKind kind, const SolverOptions& opts,
                             std::span<const double> gamma = {}) {
  return solve_afc(assemble_system(mesh, prob), mesh, prob, kind, opts, gamma);
}

/// Matrix of the scheme with the limiter frozen:
/// a_ij + (1 - alpha_ij) d_ij off the diagonal, a_ii - sum_{j != i} (1 - alpha_ij) d_ij.
inline CsrMatrix frozen_operator(const DiscreteSystem& sys, const LimiterState& frozen) {
  CsrMatrix m = sys.A;
  for (Index i = 0; i < m.rows(); ++i) {
    double diag = 0.0;
    Index kd = kNone;
    for (Index k = m.row_begin(i); k < m.row_end(i); ++k) {
      if (m.col(k) == i) {
        kd = k;
        continue;
      }
      const double w = (1.0 - frozen.alpha[k]) * sys.D.value(k);
      m.value(k) += w;
      diag -= w;
    }
    m.value(kd) += diag;
  }
  return m;
}

/// Solution of the linear system obtained by freezing the limiter.
inline std::vector<double> solve_frozen(const DiscreteSystem& sys, const LimiterState& frozen) {
  const LinearSystem ls = apply_dirichlet(sys, frozen_operator(sys, frozen), sys.F);
  return sparse_solve(ls.M, ls.rhs);
}

}  // namespace afcest

#pragma once

// Maximum marking and the SOLVE -> ESTIMATE -> MARK -> REFINE driver.

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "afcest/afc.hpp"
#include "afcest/assembly.hpp"
#include "afcest/estimators.hpp"
#include "afcest/mesh.hpp"
#include "afcest/problems.hpp"
#include "afcest/supg.hpp"

namespace afcest {

inline constexpr double kMinTheta = 1e-3;

/// Marks every cell with eta_K >= theta max eta_K. While fewer than
/// min_fraction of the cells are marked, theta is halved, down to 1e-3.
inline std::vector<Index> mark_cells(std::span<const double> eta, double theta = 0.5, double min_fraction = 0.1) {
  if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("theta must lie in (0, 1]");
  if (!(min_fraction >= 0.0 && min_fraction <= 1.0)) throw std::invalid_argument("min_fraction must lie in [0, 1]");
  double max_eta = 0.0;
  for (double v : eta) {
    if (!(v >= 0.0)) throw std::invalid_argument("indicators must be nonnegative");
    max_eta = std::max(max_eta, v);
  }
  if (max_eta == 0.0) throw std::invalid_argument("all indicators vanish; nothing to refine");
  std::vector<Index> marked;
  while (true) {
    marked.clear();
    const double threshold = theta * max_eta;
    for (std::size_t c = 0; c < eta.size(); ++c)
      if (eta[c] >= threshold) marked.push_back(static_cast<Index>(c));
    const double fraction = static_cast<double>(marked.size()) / static_cast<double>(eta.size());
    if (fraction >= min_fraction || theta * 0.5 < kMinTheta) break;
    theta *= 0.5;
  }
  return marked;
}

struct AdaptiveOptions {
  Technique technique = Technique::AfcEnergy;
  LimiterKind limiter = LimiterKind::Kuzmin;
  bool adaptive = true;
  double theta = 0.5;
  double min_fraction = 0.1;
  ClosureRule closure = ClosureRule::LongestEdge;
  std::size_t max_dofs = 100000;
  double eta_tol = 1e-3;
  int start_level = 2;
  int uniform_until = 4;
  int max_levels = 200;
  SolverOptions solver;
  double c_inv = 1.0;
  EdgeConstant edge_constant = EdgeConstant::Scaled;
  ErrorQuadrature error_quadrature;
  double gamma = 1.0;  // BJK gamma for every dof
  bool timing = false;
};

struct LevelRecord {
  int level = 0;
  std::size_t dofs = 0;
  std::size_t cells = 0;
  std::optional<double> error_energy;
  double eta = 0.0;
  std::optional<double> eta1, eta2, eta3;
  std::optional<double> eta_supg, eta_afc_supg;
  std::optional<double> eta_dh_total;
  std::optional<double> effectivity;
  std::optional<double> smear_int;
  int nl_iters = 0;
  bool converged = false;
  int forced_steps = 0;
  double residual = 0.0;
  double residual_reference = 1.0;
  double u_min = 0.0;
  double u_max = 0.0;
  std::optional<double> seconds;
};

struct AdaptiveRunRecord {
  std::vector<LevelRecord> levels;
  std::string stop_reason;
};

/// Everything produced on one level, handed to the optional observer.
struct LevelData {
  const Mesh& mesh;
  const DiscreteSystem& system;
  const AfcSolution& afc;
  std::span<const double> u_supg;
  const EstimatorReport& report;
  const LevelRecord& record;
};

using LevelObserver = std::function<void(const LevelData&)>;

/// Solves, estimates and records one mesh.
inline LevelRecord solve_level(const Mesh& mesh, const ProblemSpec& prob, const AdaptiveOptions& opts, int level,
                               EstimatorReport& report, const LevelObserver& observer = {}) {
  const auto start = std::chrono::steady_clock::now();
  const DiscreteSystem sys = assemble_system(mesh, prob);
  const SupgParameters tau = compute_tau(mesh, prob, opts.solver.tau);
  std::vector<double> u_supg;
  const bool need_supg = opts.technique == Technique::AfcSupgEnergy || opts.solver.init == InitialGuess::Supg;
  if (need_supg) u_supg = solve_supg(mesh, prob, tau).values;
  const std::vector<double> gamma(mesh.num_vertices(), opts.gamma);
  const std::span<const double> init =
      opts.solver.init == InitialGuess::Supg ? std::span<const double>(u_supg) : std::span<const double>();
  const AfcSolution afc = solve_afc(sys, mesh, prob, opts.limiter, opts.solver, gamma, init);

  const EstimatorConstants consts = estimator_constants(mesh, opts.c_inv, opts.edge_constant);
  LevelRecord rec;
  rec.level = level;
  rec.dofs = mesh.num_vertices();
  rec.cells = mesh.num_cells();
  if (opts.technique == Technique::AfcEnergy) {
    report = afc_energy_estimate(mesh, prob, sys, afc.u.values, afc.state, consts);
    rec.eta1 = report.eta1;
    rec.eta2 = report.eta2;
    rec.eta3 = report.eta3;
    rec.eta_dh_total = report.eta3;
  } else {
    report = afc_supg_energy_estimate(mesh, prob, afc.u.values, u_supg, consts);
    rec.eta_supg = report.eta_supg;
    rec.eta_afc_supg = report.eta_afc_supg;
  }
  rec.eta = report.eta;
  if (prob.exact) {
    rec.error_energy = energy_norm_error(afc.u.values, prob, mesh, opts.error_quadrature);
    rec.effectivity = effectivity_index(rec.eta, *rec.error_energy);
    report.effectivity = rec.effectivity;
  } else {
    rec.smear_int = smear_int(mesh, afc.u.values);
  }
  rec.nl_iters = afc.stats.iterations;
  rec.converged = afc.stats.converged;
  rec.forced_steps = afc.stats.forced_steps;
  rec.residual = afc.stats.residual;
  rec.residual_reference = afc.stats.reference;
  const auto [lo, hi] = std::minmax_element(afc.u.values.begin(), afc.u.values.end());
  rec.u_min = *lo;
  rec.u_max = *hi;
  if (opts.timing) rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (observer) observer(LevelData{mesh, sys, afc, u_supg, report, rec});
  return rec;
}

/// Starts on the uniform level start_level, refines uniformly through
/// uniform_until and adaptively afterwards (uniformly throughout when
/// opts.adaptive is false). A mesh with more than max_dofs vertices is never
/// solved; the loop also stops once a solved level reaches max_dofs or
/// eta < eta_tol.
inline AdaptiveRunRecord adaptive_loop(const ProblemSpec& prob, const AdaptiveOptions& opts,
                                       const LevelObserver& observer = {}) {
  if (opts.start_level < 0 || opts.uniform_until < opts.start_level)
    throw std::invalid_argument("invalid start/uniform levels");
  AdaptiveRunRecord run;
  Mesh mesh = refine_uniform(macro_mesh_for(prob), opts.start_level);
  int level = opts.start_level;
  while (true) {
    if (mesh.num_vertices() > opts.max_dofs) {
      run.stop_reason = "max_dofs";
      break;
    }
    EstimatorReport report;
    run.levels.push_back(solve_level(mesh, prob, opts, level, report, observer));
    const LevelRecord& rec = run.levels.back();
    if (rec.dofs >= opts.max_dofs) {
      run.stop_reason = "max_dofs";
      break;
    }
    if (rec.eta < opts.eta_tol) {
      run.stop_reason = "eta_tol";
      break;
    }
    if (static_cast<int>(run.levels.size()) >= opts.max_levels) {
      run.stop_reason = "max_levels";
      break;
    }
    if (!opts.adaptive || level < opts.uniform_until) {
      mesh = refine_uniform(mesh);
    } else {
      const auto eta = report.cell_eta();
      if (std::all_of(eta.begin(), eta.end(), [](double v) { return v == 0.0; })) {
        run.stop_reason = "zero_indicators";
        break;
      }
      mesh = refine_adaptive(mesh, mark_cells(eta, opts.theta, opts.min_fraction), opts.closure);
    }
    ++level;
  }
  return run;
}

inline const char* kRunCsvHeader =
    "level,dofs,cells,error_energy,eta,eta1,eta2,eta3,eta_supg,eta_afc_supg,eta_dh_total,effectivity,smear_int,"
    "nl_iters,converged,seconds";

/// One CSV line per level; absent values are empty fields.
inline void write_run_csv(std::ostream& os, const AdaptiveRunRecord& run) {
  auto num = [](std::ostringstream& s, std::optional<double> v) {
    if (v) s << *v;
    s << ',';
  };
  os << kRunCsvHeader << '\n';
  for (const auto& r : run.levels) {
    std::ostringstream s;
    s << std::setprecision(12);
    s << r.level << ',' << r.dofs << ',' << r.cells << ',';
    num(s, r.error_energy);
    num(s, r.eta);
    num(s, r.eta1);
    num(s, r.eta2);
    num(s, r.eta3);
    num(s, r.eta_supg);
    num(s, r.eta_afc_supg);
    num(s, r.eta_dh_total);
    num(s, r.effectivity);
    num(s, r.smear_int);
    s << r.nl_iters << ',' << (r.converged ? 1 : 0) << ',';
    if (r.seconds) s << *r.seconds;
    os << s.str() << '\n';
  }
}

}  // namespace afcest

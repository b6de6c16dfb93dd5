#pragma once

// Run configuration, orchestration and on-disk artifacts.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "afcest/adaptivity.hpp"
#include "afcest/checks.hpp"
#include "afcest/mesh.hpp"
#include "afcest/problems.hpp"

namespace afcest {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string problem = "boundary_layer";
  std::optional<double> epsilon;  // problem default when absent
  ConstantCoefficients custom;    // used when problem == "custom"
  LimiterKind limiter = LimiterKind::Kuzmin;
  Technique technique = Technique::AfcEnergy;
  bool adaptive = true;
  double theta = 0.5;
  double min_fraction = 0.1;
  std::size_t max_dofs = 100000;
  double eta_tol = 1e-3;
  int start_level = 2;
  int uniform_until = 4;
  int max_levels = 200;
  SolverOptions solver;
  double c_inv = 1.0;
  double gamma = 1.0;
  ClosureRule closure = ClosureRule::LongestEdge;
  EdgeConstant edge_constant = EdgeConstant::Scaled;
  std::string output_dir = "out";
  bool write_meshes = false;
  bool write_solutions = false;
  bool timing = false;
};

/// Every accepted config key; CLI flags use the same names.
inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "problem", "epsilon",       "b_x",        "b_y",         "c",           "f",
      "g",       "u_dirichlet",   "limiter",    "technique",   "refinement",  "theta",
      "min_fraction", "max_dofs", "eta_tol",    "start_level", "uniform_until", "max_levels",
      "omega",   "tol",           "max_iter",   "init",        "tau_formula", "tau_scale",
      "c_inv",   "gamma",         "closure",    "edge_constant", "output_dir", "write_meshes",
      "write_solutions", "timing"};
  return keys;
}

inline double default_epsilon(const std::string& problem) {
  if (problem == "boundary_layer") return 1e-3;
  if (problem == "hmm86") return 1e-4;
  return 1.0;
}

namespace detail {

template <class T>
T config_value(const nlohmann::json& j, const std::string& key) {
  bool ok = false;
  if constexpr (std::is_same_v<T, bool>)
    ok = j.is_boolean();
  else if constexpr (std::is_integral_v<T>)
    ok = j.is_number_integer();
  else if constexpr (std::is_floating_point_v<T>)
    ok = j.is_number();
  else
    ok = j.is_string();
  if (!ok) throw ConfigError("config key '" + key + "' has the wrong type");
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

template <class F>
auto named(const std::string& key, const std::string& value, F parse) {
  try {
    return parse(value);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

}  // namespace detail

/// Applies the keys of a flat JSON object on top of `cfg`. Unknown keys and
/// values of the wrong type are rejected.
inline void apply_config(RunConfig& cfg, const nlohmann::json& j) {
  using detail::config_value;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "problem") {
      cfg.problem = config_value<std::string>(v, key);
    } else if (key == "epsilon") {
      cfg.epsilon = config_value<double>(v, key);
    } else if (key == "b_x") {
      cfg.custom.bx = config_value<double>(v, key);
    } else if (key == "b_y") {
      cfg.custom.by = config_value<double>(v, key);
    } else if (key == "c") {
      cfg.custom.c = config_value<double>(v, key);
    } else if (key == "f") {
      cfg.custom.f = config_value<double>(v, key);
    } else if (key == "g") {
      cfg.custom.g = config_value<double>(v, key);
    } else if (key == "u_dirichlet") {
      cfg.custom.u_dirichlet = config_value<double>(v, key);
    } else if (key == "limiter") {
      cfg.limiter = detail::named(key, config_value<std::string>(v, key), limiter_from_string);
    } else if (key == "technique") {
      cfg.technique = detail::named(key, config_value<std::string>(v, key), technique_from_string);
    } else if (key == "refinement") {
      const auto s = config_value<std::string>(v, key);
      detail::require(s == "uniform" || s == "adaptive", "refinement must be 'uniform' or 'adaptive'");
      cfg.adaptive = s == "adaptive";
    } else if (key == "theta") {
      cfg.theta = config_value<double>(v, key);
    } else if (key == "min_fraction") {
      cfg.min_fraction = config_value<double>(v, key);
    } else if (key == "max_dofs") {
      detail::require(v.is_number_integer() && v.get<long long>() > 0, "max_dofs must be a positive integer");
      cfg.max_dofs = v.get<std::size_t>();
    } else if (key == "eta_tol") {
      cfg.eta_tol = config_value<double>(v, key);
    } else if (key == "start_level") {
      cfg.start_level = config_value<int>(v, key);
    } else if (key == "uniform_until") {
      cfg.uniform_until = config_value<int>(v, key);
    } else if (key == "max_levels") {
      cfg.max_levels = config_value<int>(v, key);
    } else if (key == "omega") {
      cfg.solver.omega = config_value<double>(v, key);
    } else if (key == "tol") {
      cfg.solver.tol = config_value<double>(v, key);
    } else if (key == "max_iter") {
      cfg.solver.max_iter = config_value<int>(v, key);
    } else if (key == "init") {
      cfg.solver.init = detail::named(key, config_value<std::string>(v, key), initial_guess_from_string);
    } else if (key == "tau_formula") {
      cfg.solver.tau.formula = detail::named(key, config_value<std::string>(v, key), tau_formula_from_string);
    } else if (key == "tau_scale") {
      cfg.solver.tau.scale = config_value<double>(v, key);
    } else if (key == "c_inv") {
      cfg.c_inv = config_value<double>(v, key);
    } else if (key == "gamma") {
      cfg.gamma = config_value<double>(v, key);
    } else if (key == "closure") {
      cfg.closure = detail::named(key, config_value<std::string>(v, key), closure_rule_from_string);
    } else if (key == "edge_constant") {
      cfg.edge_constant = detail::named(key, config_value<std::string>(v, key), edge_constant_from_string);
    } else if (key == "output_dir") {
      cfg.output_dir = config_value<std::string>(v, key);
    } else if (key == "write_meshes") {
      cfg.write_meshes = config_value<bool>(v, key);
    } else if (key == "write_solutions") {
      cfg.write_solutions = config_value<bool>(v, key);
    } else if (key == "timing") {
      cfg.timing = config_value<bool>(v, key);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

/// Converts a command-line value to JSON: numbers, booleans and quoted
/// strings are parsed, anything else is taken as a bare string.
inline nlohmann::json flag_value(const std::string& text) {
  const auto parsed = nlohmann::json::parse(text, nullptr, false);
  if (parsed.is_discarded() || parsed.is_object() || parsed.is_array() || parsed.is_null()) return text;
  return parsed;
}

/// Checks the numeric ranges and that the problem can be built.
inline void validate(const RunConfig& cfg) {
  using detail::require;
  require(cfg.problem == "boundary_layer" || cfg.problem == "hmm86" || cfg.problem == "custom",
          "unknown problem '" + cfg.problem + "'");
  require(!cfg.epsilon || *cfg.epsilon > 0.0, "epsilon must be positive");
  require(cfg.theta > 0.0 && cfg.theta <= 1.0, "theta must lie in (0, 1]");
  require(cfg.min_fraction >= 0.0 && cfg.min_fraction <= 1.0, "min_fraction must lie in [0, 1]");
  require(cfg.eta_tol >= 0.0, "eta_tol must be nonnegative");
  require(cfg.start_level >= 0 && cfg.start_level <= cfg.uniform_until, "need 0 <= start_level <= uniform_until");
  require(cfg.max_levels > 0, "max_levels must be positive");
  require(cfg.solver.omega > 0.0 && cfg.solver.omega <= 1.0, "omega must lie in (0, 1]");
  require(cfg.solver.tol > 0.0, "tol must be positive");
  require(cfg.solver.max_iter >= 0, "max_iter must be nonnegative");
  require(cfg.solver.tau.scale >= 0.0, "tau_scale must be nonnegative");
  require(cfg.c_inv > 0.0, "c_inv must be positive");
  require(cfg.gamma >= 1.0, "gamma must be at least 1");
  require(!cfg.output_dir.empty(), "output_dir must not be empty");
}

inline RunConfig parse_config(const nlohmann::json& j) {
  RunConfig cfg;
  apply_config(cfg, j);
  validate(cfg);
  return cfg;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path);
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("malformed config " + path + ": " + e.what());
  }
}

inline ProblemSpec make_problem(const RunConfig& cfg) {
  const double eps = cfg.epsilon.value_or(default_epsilon(cfg.problem));
  if (cfg.problem == "custom") {
    ConstantCoefficients k = cfg.custom;
    k.epsilon = eps;
    try {
      return constant_problem(k);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("custom problem: ") + e.what());
    }
  }
  return problem_by_name(cfg.problem, eps);
}

inline AdaptiveOptions adaptive_options(const RunConfig& cfg) {
  AdaptiveOptions o;
  o.technique = cfg.technique;
  o.limiter = cfg.limiter;
  o.adaptive = cfg.adaptive;
  o.theta = cfg.theta;
  o.min_fraction = cfg.min_fraction;
  o.closure = cfg.closure;
  o.max_dofs = cfg.max_dofs;
  o.eta_tol = cfg.eta_tol;
  o.start_level = cfg.start_level;
  o.uniform_until = cfg.uniform_until;
  o.max_levels = cfg.max_levels;
  o.solver = cfg.solver;
  o.c_inv = cfg.c_inv;
  o.edge_constant = cfg.edge_constant;
  o.gamma = cfg.gamma;
  o.timing = cfg.timing;
  return o;
}

/// The fully resolved configuration, written next to the results.
inline nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["problem"] = cfg.problem;
  j["epsilon"] = cfg.epsilon.value_or(default_epsilon(cfg.problem));
  if (cfg.problem == "custom") {
    j["b_x"] = cfg.custom.bx;
    j["b_y"] = cfg.custom.by;
    j["c"] = cfg.custom.c;
    j["f"] = cfg.custom.f;
    j["g"] = cfg.custom.g;
    j["u_dirichlet"] = cfg.custom.u_dirichlet;
  }
  j["limiter"] = to_string(cfg.limiter);
  j["technique"] = to_string(cfg.technique);
  j["refinement"] = cfg.adaptive ? "adaptive" : "uniform";
  j["theta"] = cfg.theta;
  j["min_fraction"] = cfg.min_fraction;
  j["max_dofs"] = cfg.max_dofs;
  j["eta_tol"] = cfg.eta_tol;
  j["start_level"] = cfg.start_level;
  j["uniform_until"] = cfg.uniform_until;
  j["max_levels"] = cfg.max_levels;
  j["omega"] = cfg.solver.omega;
  j["tol"] = cfg.solver.tol;
  j["max_iter"] = cfg.solver.max_iter;
  j["init"] = cfg.solver.init == InitialGuess::Supg ? "supg" : cfg.solver.init == InitialGuess::Zero ? "zero" : "upwind";
  j["tau_formula"] = cfg.solver.tau.formula == TauFormula::Classical ? "classical" : "constant";
  j["tau_scale"] = cfg.solver.tau.scale;
  j["c_inv"] = cfg.c_inv;
  j["gamma"] = cfg.gamma;
  j["closure"] = to_string(cfg.closure);
  j["edge_constant"] = to_string(cfg.edge_constant);
  j["output_dir"] = cfg.output_dir;
  j["write_meshes"] = cfg.write_meshes;
  j["write_solutions"] = cfg.write_solutions;
  j["timing"] = cfg.timing;
  return j;
}

/// Writes `content` to `path` through a temporary file and a rename, so
/// readers never observe a partial file.
inline void write_atomically(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << content;
    if (!os.flush()) throw std::runtime_error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string solution_text(const Mesh& mesh, std::span<const double> u) {
  std::ostringstream s;
  s << std::setprecision(17);
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i)
    s << mesh.vertex(static_cast<Index>(i)).x << ' ' << mesh.vertex(static_cast<Index>(i)).y << ' ' << u[i] << '\n';
  return s.str();
}

struct RunResult {
  AdaptiveRunRecord record;
  std::filesystem::path csv;
};

/// Executes one configuration. run.csv and config.json are only written
/// once every level has been solved.
inline RunResult run(const RunConfig& cfg, std::ostream* log = nullptr) {
  validate(cfg);
  const ProblemSpec prob = make_problem(cfg);
  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  std::map<std::filesystem::path, std::string> pending;
  LevelObserver observer = [&](const LevelData& d) {
    const std::string tag = "level_" + std::to_string(d.record.level);
    if (cfg.write_meshes) {
      std::ostringstream m;
      write_mesh(m, d.mesh);
      pending[dir / (tag + ".mesh")] = m.str();
    }
    if (cfg.write_solutions) pending[dir / (tag + ".sol")] = solution_text(d.mesh, d.afc.u.values);
    if (log) {
      *log << "level " << d.record.level << ": dofs " << d.record.dofs << ", eta " << d.record.eta;
      if (d.record.error_energy) *log << ", error " << *d.record.error_energy;
      if (d.record.smear_int) *log << ", smear_int " << *d.record.smear_int;
      *log << ", nl_iters " << d.record.nl_iters << (d.record.converged ? "" : " (not converged)") << '\n';
    }
  };
  RunResult out;
  out.record = adaptive_loop(prob, adaptive_options(cfg), observer);
  for (const auto& [path, text] : pending) write_atomically(path, text);
  std::ostringstream csv;
  write_run_csv(csv, out.record);
  out.csv = dir / "run.csv";
  write_atomically(dir / "config.json", to_json(cfg).dump(2) + "\n");
  write_atomically(out.csv, csv.str());
  return out;
}

/// Geometry metrics of a mesh as printable key/value lines.
inline std::string mesh_info(const Mesh& mesh) {
  const MeshGeometry g = compute_cell_geometry(mesh);
  double h_min = std::numeric_limits<double>::infinity(), h_max = 0.0;
  for (const auto& c : g.cells) {
    h_min = std::min(h_min, c.h);
    h_max = std::max(h_max, c.h);
  }
  std::size_t green = 0;
  for (const auto& l : mesh.lineage()) green += l.kind == CellKind::Green ? 1 : 0;
  const DelaunayReport del = is_delaunay(mesh);
  const std::string audit = audit_admissible(mesh);
  std::ostringstream s;
  s << std::setprecision(10);
  s << "vertices " << mesh.num_vertices() << '\n'
    << "cells " << mesh.num_cells() << '\n'
    << "closure_cells " << green << '\n'
    << "edges " << mesh.num_edges() << '\n'
    << "h_min " << h_min << '\n'
    << "h_max " << h_max << '\n'
    << "min_angle_deg " << min_angle(mesh) * 180.0 / std::numbers::pi << '\n'
    << "max_cos " << g.max_cos << '\n'
    << "min_rho_over_h " << g.min_rho_over_h << '\n'
    << "c_edge_max " << g.c_edge_max << '\n'
    << "c_edge_scaled_max " << g.c_edge_scaled_max << '\n'
    << "delaunay " << (del.delaunay ? "yes" : "no") << '\n'
    << "non_delaunay_edges " << del.violating_edges.size() << '\n'
    << "admissible " << (audit.empty() ? "yes" : "no: " + audit) << '\n';
  return s.str();
}

/// gnuplot script plotting error and estimator (or smear_int) against the
/// number of degrees of freedom on log-log axes.
inline std::string gnuplot_script(const std::string& csv_path, const std::string& output = "run.png") {
  std::ostringstream s;
  s << "set datafile separator ','\n"
    << "set key autotitle columnhead\n"
    << "set logscale xy\n"
    << "set format x '10^{%L}'\n"
    << "set format y '10^{%L}'\n"
    << "set xlabel 'degrees of freedom'\n"
    << "set grid\n"
    << "set terminal pngcairo size 900,650\n"
    << "set output '" << output << "'\n"
    << "plot '" << csv_path << "' using 2:4 with linespoints title 'error (energy norm)', \\\n"
    << "     '' using 2:5 with linespoints title 'eta', \\\n"
    << "     '' using 2:12 with linespoints title 'effectivity', \\\n"
    << "     '' using 2:13 with linespoints title 'smear_int'\n";
  return s.str();
}

}  // namespace afcest

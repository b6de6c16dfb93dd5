// Command-line front end: run, sweep, mesh-info, check and plot-script.

#include <CLI11.hpp>

#include <atomic>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

#include "afcest/afcest.hpp"

namespace {

enum ExitCode { kOk = 0, kChecksFailed = 1, kConfigError = 2, kRuntimeError = 3 };

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const afcest::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

/// Config files may hold one object or an array of objects.
std::vector<nlohmann::json> load_configs(const std::vector<std::string>& files) {
  std::vector<nlohmann::json> out;
  for (const auto& f : files) {
    const auto j = afcest::read_json_file(f);
    if (j.is_array()) {
      for (const auto& item : j) out.push_back(item);
    } else {
      out.push_back(j);
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive AFC finite element solver with a posteriori error estimation"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "Solve one configuration and write run.csv");
  std::string config_file;
  bool quiet = false;
  std::map<std::string, std::string> overrides;
  run_cmd->add_option("--config", config_file, "JSON config file")->check(CLI::ExistingFile);
  run_cmd->add_flag("--quiet", quiet, "Suppress per-level progress");
  for (const auto& key : afcest::config_keys())
    run_cmd->add_option_function<std::string>(
        "--" + key, [&overrides, key](const std::string& v) { overrides[key] = v; }, "Overrides config key " + key);

  auto* sweep_cmd = app.add_subcommand("sweep", "Run several configurations, each into its own output_dir");
  std::vector<std::string> sweep_files;
  unsigned jobs = 1;
  sweep_cmd->add_option("configs", sweep_files, "JSON files holding a config object or an array of them")
      ->required()
      ->check(CLI::ExistingFile);
  sweep_cmd->add_option("--jobs", jobs, "Concurrent runs")->check(CLI::Range(1u, 64u));

  auto* info_cmd = app.add_subcommand("mesh-info", "Print geometry metrics of a mesh");
  int level = 0;
  std::string mesh_file;
  auto* level_opt = info_cmd->add_option("--level", level, "Uniform refinement level of the unit square")
                        ->check(CLI::Range(0, 12));
  info_cmd->add_option("--mesh", mesh_file, "Mesh file written by run")->check(CLI::ExistingFile)->excludes(level_opt);

  auto* check_cmd = app.add_subcommand("check", "Run the randomized property suites");
  std::uint64_t seed = 11;
  check_cmd->add_option("--seed", seed, "Random seed");

  auto* plot_cmd = app.add_subcommand("plot-script", "Emit a gnuplot script for a run.csv");
  std::string csv_path, png = "run.png", script_path;
  plot_cmd->add_option("csv", csv_path, "run.csv to plot")->required();
  plot_cmd->add_option("--png", png, "Image written by the script");
  plot_cmd->add_option("--output", script_path, "Script file (stdout when absent)");

  CLI11_PARSE(app, argc, argv);

  if (*run_cmd) {
    return guarded([&] {
      afcest::RunConfig cfg;
      if (!config_file.empty()) afcest::apply_config(cfg, afcest::read_json_file(config_file));
      nlohmann::json flags = nlohmann::json::object();
      for (const auto& [k, v] : overrides) flags[k] = afcest::flag_value(v);
      afcest::apply_config(cfg, flags);
      afcest::validate(cfg);
      const auto result = afcest::run(cfg, quiet ? nullptr : &std::cout);
      std::cout << "wrote " << result.csv.string() << " (" << result.record.levels.size() << " levels, stop: "
                << result.record.stop_reason << ")\n";
      return static_cast<int>(kOk);
    });
  }

  if (*sweep_cmd) {
    return guarded([&] {
      std::vector<afcest::RunConfig> configs;
      std::map<std::string, std::size_t> dirs;
      for (const auto& j : load_configs(sweep_files)) {
        configs.push_back(afcest::parse_config(j));
        if (dirs[configs.back().output_dir]++ > 0)
          throw afcest::ConfigError("sweep: output_dir '" + configs.back().output_dir + "' used twice");
      }
      std::atomic<std::size_t> next{0};
      std::atomic<int> status{kOk};
      std::mutex io;
      auto worker = [&] {
        for (std::size_t i = next++; i < configs.size(); i = next++) {
          const int rc = guarded([&] {
            const auto r = afcest::run(configs[i]);
            std::lock_guard lock(io);
            std::cout << r.csv.string() << ": " << r.record.levels.size() << " levels, stop " << r.record.stop_reason
                      << '\n';
            return static_cast<int>(kOk);
          });
          if (rc != kOk) status = rc;
        }
      };
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < std::min<std::size_t>(jobs, configs.size()); ++t) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
      return status.load();
    });
  }

  if (*info_cmd) {
    return guarded([&] {
      const afcest::Mesh mesh = mesh_file.empty() ? afcest::refine_uniform(afcest::unit_square_macro(), level)
                                                  : afcest::read_mesh(mesh_file);
      std::cout << afcest::mesh_info(mesh);
      return static_cast<int>(kOk);
    });
  }

  if (*check_cmd) {
    return guarded([&] {
      bool ok = true;
      for (const auto& r : afcest::run_property_checks(seed)) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
        ok = ok && r.passed;
      }
      return static_cast<int>(ok ? kOk : kChecksFailed);
    });
  }

  if (*plot_cmd) {
    return guarded([&] {
      const std::string script = afcest::gnuplot_script(csv_path, png);
      if (script_path.empty()) {
        std::cout << script;
      } else {
        afcest::write_atomically(script_path, script);
      }
      return static_cast<int>(kOk);
    });
  }
  return kOk;
}

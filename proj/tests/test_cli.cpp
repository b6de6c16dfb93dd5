#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "afcest/cli.hpp"

using namespace afcest;
using nlohmann::json;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("afcest_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p);
  std::ostringstream s;
  s << is.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    std::vector<std::string> fields;
    std::string f;
    std::istringstream ls(line);
    while (std::getline(ls, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    rows.push_back(fields);
  }
  return rows;
}

}  // namespace

TEST(Config, Defaults) {
  const RunConfig cfg = parse_config(json::object());
  EXPECT_EQ(cfg.problem, "boundary_layer");
  EXPECT_EQ(cfg.limiter, LimiterKind::Kuzmin);
  EXPECT_TRUE(cfg.adaptive);
  EXPECT_EQ(cfg.max_dofs, 100000u);
  EXPECT_EQ(default_epsilon("boundary_layer"), 1e-3);
  EXPECT_EQ(default_epsilon("hmm86"), 1e-4);
  EXPECT_EQ(default_epsilon("custom"), 1.0);
}

TEST(Config, RejectsUnknownKeysAndWrongTypes) {
  EXPECT_THROW(parse_config(json{{"limiter_kind", "bjk"}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"theta", "half"}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"theta", true}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"max_iter", 2.5}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"write_meshes", 1}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"max_dofs", -5}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"limiter", "minmod"}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"refinement", "red"}}), ConfigError);
  EXPECT_THROW(parse_config(json::array()), ConfigError);
}

TEST(Config, RejectsInvalidRanges) {
  EXPECT_THROW(parse_config(json{{"theta", 0.0}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"theta", 1.5}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"epsilon", -1.0}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"omega", 0.0}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"gamma", 0.5}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"start_level", 5}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"problem", "lshape"}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"output_dir", ""}}), ConfigError);
}

TEST(Config, FlagValues) {
  EXPECT_EQ(flag_value("0.25"), json(0.25));
  EXPECT_EQ(flag_value("7"), json(7));
  EXPECT_EQ(flag_value("true"), json(true));
  EXPECT_EQ(flag_value("bjk"), json("bjk"));
  EXPECT_EQ(flag_value("\"x y\""), json("x y"));
  EXPECT_EQ(flag_value("[1]"), json("[1]"));
}

TEST(Config, JsonRoundTrip) {
  const RunConfig cfg = parse_config(json{{"problem", "custom"}, {"b_x", 2.0}, {"f", 1.0}, {"limiter", "bjk"},
                                          {"refinement", "uniform"}, {"closure", "any_edge"}, {"init", "zero"},
                                          {"edge_constant", "raw"}, {"gamma", 2.0}});
  const json j = to_json(cfg);
  EXPECT_EQ(to_json(parse_config(j)), j);
  for (const auto& [key, v] : j.items())
    EXPECT_NE(std::find(config_keys().begin(), config_keys().end(), key), config_keys().end()) << key;
}

TEST(Config, MalformedFile) {
  const auto dir = scratch("malformed");
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "bad.json") << "{\"problem\": ";
  EXPECT_THROW(read_json_file((dir / "bad.json").string()), ConfigError);
  EXPECT_THROW(read_json_file((dir / "missing.json").string()), ConfigError);
}

TEST(Run, InvalidConfigWritesNothing) {
  const auto dir = scratch("invalid");
  RunConfig cfg;
  cfg.output_dir = dir.string();
  cfg.theta = 2.0;
  EXPECT_THROW(run(cfg), ConfigError);
  EXPECT_FALSE(std::filesystem::exists(dir));
}

TEST(Run, OutputsAreByteIdentical) {
  const auto a = scratch("det_a"), b = scratch("det_b");
  RunConfig cfg = parse_config(json{{"max_dofs", 3000}, {"write_meshes", true}, {"write_solutions", true}});
  cfg.output_dir = a.string();
  run(cfg);
  cfg.output_dir = b.string();
  run(cfg);
  for (const auto& entry : std::filesystem::directory_iterator(a)) {
    const auto name = entry.path().filename();
    if (name == "config.json") continue;
    EXPECT_EQ(slurp(entry.path()), slurp(b / name)) << name;
  }
  EXPECT_TRUE(std::filesystem::exists(a / "level_2.mesh"));
  EXPECT_TRUE(std::filesystem::exists(a / "level_2.sol"));
  EXPECT_EQ(slurp(a / "run.csv").substr(0, std::string(kRunCsvHeader).size()), kRunCsvHeader);
  const Mesh m = read_mesh((a / "level_2.mesh").string());
  EXPECT_EQ(m.num_vertices(), 25u);
}

// Uniform BJK errors at 25, 289, 4225 and 66049 dofs, 5% each.
TEST(Run, UniformBjkErrors) {
  const auto dir = scratch("uniform_bjk");
  RunConfig cfg = parse_config(json{{"limiter", "bjk"}, {"refinement", "uniform"}, {"max_dofs", 70000}});
  cfg.output_dir = dir.string();
  run(cfg);
  const auto rows = csv_rows(slurp(dir / "run.csv"));
  ASSERT_EQ(rows.size(), 7u);
  const std::map<std::string, double> reference{
      {"25", 0.078589}, {"289", 0.141635}, {"4225", 0.122404}, {"66049", 0.092191}};
  for (const auto& row : rows) {
    const auto it = reference.find(row[1]);
    if (it == reference.end()) continue;
    EXPECT_NEAR(std::stod(row[3]), it->second, 0.05 * it->second) << row[1] << " dofs";
  }
}

TEST(Run, Hmm86SmearingShrinks) {
  const auto dir = scratch("hmm86");
  RunConfig cfg = parse_config(json{{"problem", "hmm86"}, {"max_dofs", 40000}});
  cfg.output_dir = dir.string();
  run(cfg);
  const auto rows = csv_rows(slurp(dir / "run.csv"));
  ASSERT_GT(rows.size(), 3u);
  EXPECT_TRUE(rows.front()[3].empty());
  const double first = std::stod(rows[1][12]), last = std::stod(rows.back()[12]);
  EXPECT_LT(last, first);
  EXPECT_LE(last, 0.045);
}

TEST(MeshInfo, UniformMesh) {
  const std::string info = mesh_info(refine_uniform(unit_square_macro(), 2));
  EXPECT_NE(info.find("vertices 25\n"), std::string::npos);
  EXPECT_NE(info.find("cells 32\n"), std::string::npos);
  EXPECT_NE(info.find("delaunay yes\n"), std::string::npos);
  EXPECT_NE(info.find("admissible yes\n"), std::string::npos);
  EXPECT_NE(info.find("min_angle_deg 45\n"), std::string::npos);
}

TEST(PlotScript, LogLogAxes) {
  const std::string s = gnuplot_script("out/run.csv", "fig.png");
  EXPECT_NE(s.find("set logscale xy"), std::string::npos);
  EXPECT_NE(s.find("'out/run.csv'"), std::string::npos);
  EXPECT_NE(s.find("set output 'fig.png'"), std::string::npos);
}

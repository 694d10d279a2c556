#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "udot/cli.hpp"
#include "udot/error.hpp"
#include "udot/io.hpp"

using namespace udot;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("udot_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string& args) {
  const std::string cmd = std::string(UDOT_TOOL_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p);
  os << text;
}

}  // namespace

TEST(Config, DefaultsAndOverrides) {
  const RunConfig c = config_from_json(Json{{"preset", "strip"}, {"cells", 64}, {"seed", 9}});
  EXPECT_EQ(c.preset, "strip");
  EXPECT_EQ(c.cells, 64);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.ode_steps, 256);
  const RunConfig back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(config_from_json(Json{{"bogus", 1}}), Error);
  EXPECT_THROW(config_from_json(Json{{"cells", "many"}}), Error);
  EXPECT_THROW(config_from_json(Json::array()), Error);
  RunConfig c;
  c.cells = 0;
  EXPECT_THROW(c.validate(), Error);
  c = RunConfig{};
  c.bc = "sideways";
  EXPECT_THROW(c.validate(), Error);
  EXPECT_THROW(load_config("/nonexistent/udot.json"), Error);
}

TEST(Cli, MissingConfigExits2) {
  EXPECT_EQ(run("solve --config /nonexistent/config.json"), 2);
  EXPECT_EQ(run("solve --preset nope --out " + scratch("nope").string()), 2);
  EXPECT_EQ(run("frobnicate"), 2);
}

TEST(Cli, BoundaryModeMustMatchPreset) {
  EXPECT_EQ(run("solve --preset annulus --bc nested --cells 64 --ode-steps 16 --out " +
                scratch("bcmismatch").string()),
            2);
}

TEST(Cli, SolveStripWritesOutputs) {
  const fs::path out = scratch("strip");
  const fs::path cfg = out / "config.json";
  write_text(cfg, R"({"preset": "strip", "cells": 128, "ode_steps": 64, "levelset_count": 4})");
  ASSERT_EQ(run("solve --config " + cfg.string() + " --out " + out.string()), 0);
  for (const char* f : {"solution.csv", "levelsets.csv", "report.json"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  const Json report = read_json(out / "report.json");
  EXPECT_LE(report["exact"]["max_k_error"].get<double>(), 1e-4);
  EXPECT_LE(report["mass_residual"].get<double>(), 5e-3);
  EXPECT_EQ(report["config"]["ode_steps"], 64);
  EXPECT_TRUE(report["solution"].contains("per_point"));
  const CsvTable sol = read_csv(out / "solution.csv");
  EXPECT_EQ(sol.header, (std::vector<std::string>{"y", "k", "v", "q_used", "residual"}));
  std::ifstream ls(out / "levelsets.csv");
  std::string header;
  std::getline(ls, header);
  EXPECT_EQ(header, "y,set,component,chain,x1,x2");
}

TEST(Cli, SolveReportIsReproducible) {
  const fs::path a = scratch("repro_a"), b = scratch("repro_b");
  const std::string args = "solve --preset tilted --cells 64 --ode-steps 16 --seed 3 --convexify 0.5";
  ASSERT_EQ(run(args + " --out " + a.string()), 0);
  ASSERT_EQ(run(args + " --out " + b.string()), 0);
  Json ra = read_json(a / "report.json"), rb = read_json(b / "report.json");
  // The output directory is part of the recorded config; everything else must match.
  ra["config"].erase("out");
  rb["config"].erase("out");
  EXPECT_EQ(ra.dump(), rb.dump());
  EXPECT_EQ(slurp(a / "solution.csv"), slurp(b / "solution.csv"));
  EXPECT_EQ(slurp(a / "levelsets.csv"), slurp(b / "levelsets.csv"));
}

TEST(Cli, SolveAbortExits3WithPartialOutput) {
  const fs::path out = scratch("abort");
  EXPECT_EQ(run("solve --preset strip --bc initial --initial-k 0.5 --cells 64 --ode-steps 32 --out " +
                out.string()),
            3);
  const Json report = read_json(out / "report.json");
  EXPECT_EQ(report["status"], "aborted");
  EXPECT_EQ(report["error"]["code"], "EmptyLevelSet");
  EXPECT_TRUE(fs::exists(out / "solution.csv"));
}

TEST(Cli, DiagnoseStripRecordsZeroMargin) {
  const fs::path out = scratch("diag_strip");
  ASSERT_EQ(run("diagnose --preset strip --cells 64 --out " + out.string()), 0);
  const Json report = read_json(out / "report.json");
  EXPECT_FALSE(report["margins"]["enhanced_twist"]["ok"].get<bool>());
  EXPECT_TRUE(report["margins"]["nondegeneracy"]["ok"].get<bool>());
  bool found = false;
  for (const auto& w : report["warnings"]) {
    if (w["kind"] == "enhanced_twist") {
      found = true;
      EXPECT_TRUE(w.contains("x"));
      EXPECT_TRUE(w.contains("y"));
    }
  }
  EXPECT_TRUE(found);
  const auto& line = report["components"]["solution_line_summary"];
  EXPECT_EQ(line["x1_min"], 1);
  EXPECT_EQ(line["x1_max"], 1);
  EXPECT_EQ(line["x2_min"], 1);
  EXPECT_EQ(line["x2_max"], 1);
}

TEST(Cli, DiagnoseAnnulusComponents) {
  const fs::path out = scratch("diag_annulus");
  ASSERT_EQ(run("diagnose --preset annulus --cells 128 --out " + out.string()), 0);
  const Json report = read_json(out / "report.json");
  const auto& line = report["components"]["solution_line_summary"];
  EXPECT_EQ(line["x1_min"], 2);
  EXPECT_EQ(line["x1_max"], 2);
  EXPECT_EQ(line["x2_min"], 1);
  EXPECT_EQ(line["x2_max"], 1);
  EXPECT_GT(report["components"]["lattice"].size(), 0u);
}

TEST(Cli, VerifyAnnulus) {
  const fs::path out = scratch("verify_annulus");
  ASSERT_EQ(run("solve --preset annulus --ode-steps 128 --out " + out.string()), 0);
  ASSERT_EQ(run("verify --preset annulus --ode-steps 128 --out " + out.string()), 0);
  const Json report = read_json(out / "report.json");
  ASSERT_TRUE(report.contains("verification"));
  const Json& v = report["verification"];
  EXPECT_TRUE(v["pass"].get<bool>());
  EXPECT_LE(v["checks"]["duality_gap"]["value"].get<double>(), 0.01);
  EXPECT_LE(v["checks"]["pushforward_tv"]["value"].get<double>(), 0.02);
  EXPECT_TRUE(report.contains("solution"));  // solve block kept
}

TEST(Cli, VerifyCorruptedVFails) {
  const fs::path out = scratch("verify_corrupt");
  ASSERT_EQ(run("solve --preset strip --cells 128 --ode-steps 64 --out " + out.string()), 0);
  CsvTable t = read_csv(out / "solution.csv");
  const std::size_t vc = t.column("v");
  for (std::size_t i = 0; i < t.rows.size(); ++i) t.rows[i][vc] += (i % 2 ? 0.3 : -0.3);
  write_csv(out / "solution.csv", t);
  EXPECT_EQ(run("verify --preset strip --cells 128 --ode-steps 64 --samples 20000 --out " +
                out.string()),
            4);
  const Json v = read_json(out / "report.json")["verification"];
  EXPECT_FALSE(v["pass"].get<bool>());
  EXPECT_GT(v["checks"]["duality_gap"]["value"].get<double>(), 0.01);
}

TEST(Cli, VerifyMissingSolutionExits2) {
  EXPECT_EQ(run("verify --preset strip --out " + scratch("verify_missing").string()), 2);
}

TEST(Cli, Oracle) {
  const fs::path out = scratch("oracle");
  ASSERT_EQ(run("oracle --preset annulus --nx 15 --ny 32 --cells 64 --out " + out.string()), 0);
  const Json r = read_json(out / "oracle.json");
  EXPECT_LE(r["strong_duality_residual"].get<double>(), 1e-9);
  EXPECT_GE(r["exact_potential_gap"]["gap"].get<double>(), -1e-9);
  EXPECT_LE(r["exact_potential_gap"]["gap"].get<double>(), 0.01);
  EXPECT_TRUE(r.contains("instance"));
  EXPECT_TRUE(r.contains("solution"));
}

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "hlg/app/config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string & name)
{
  const fs::path dir = fs::path(::testing::TempDir()) / ("hlg_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path & p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_json(const fs::path & p, const json & j) { std::ofstream(p) << j.dump(2); }

/// Runs the CLI with stdout/stderr captured to files in `dir`; returns the exit status.
int run(const std::string & args, const fs::path & dir)
{
  const std::string cmd = std::string(HLG_CLI_PATH) + " " + args + " > " + (dir / "stdout.txt").string() + " 2> " +
                          (dir / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, CurvatureRunWritesAllOutputs)
{
  const auto dir = scratch("curvature");
  const auto out = dir / "out";
  ASSERT_EQ(run("curvature --out " + out.string(), dir), 0);
  for (const char * f : {"records.csv", "summary.json", "manifest.json"}) { EXPECT_TRUE(fs::exists(out / f)) << f; }
  const auto summary = json::parse(read_file(out / "summary.json"));
  EXPECT_TRUE(summary["all_pass"].get<bool>());
  EXPECT_EQ(summary["preset"], "heisenberg(1)");
  const std::string csv = read_file(out / "records.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "record_id,preset,rank,T,p_or_q,x,y,lhs,rhs,stderr_lhs,stderr_rhs,margin,pass,tolerance");
}

TEST(Cli, ConfigErrorsExitTwoAndWriteNothing)
{
  const auto dir = scratch("config_errors");
  const auto out = dir / "out";
  write_json(dir / "typo.json", {{"experiment", "curvature"}, {"seeed", 3}});
  EXPECT_EQ(run("curvature --config " + (dir / "typo.json").string() + " --out " + out.string(), dir), 2);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_NE(read_file(dir / "stderr.txt").find("seeed"), std::string::npos);

  write_json(dir / "mismatch.json", {{"experiment", "distance"}});
  EXPECT_EQ(run("curvature --config " + (dir / "mismatch.json").string() + " --out " + out.string(), dir), 2);
  EXPECT_FALSE(fs::exists(out));

  write_json(dir / "param.json", {{"params", {{"sampled_vectorz", 5}}}});
  EXPECT_EQ(run("curvature --config " + (dir / "param.json").string() + " --out " + out.string(), dir), 2);
  EXPECT_FALSE(fs::exists(out));

  // block_sum(1 1) is not bracket generating at rank 2
  write_json(dir / "rank.json", {{"preset", {{"name", "block_sum"}, {"params", {1, 1}}}}, {"ranks", {2}}});
  EXPECT_EQ(run("distance --config " + (dir / "rank.json").string() + " --out " + out.string(), dir), 2);
  EXPECT_FALSE(fs::exists(out));

  EXPECT_EQ(run("curvature --workers 0 --out " + out.string(), dir), 2);
  EXPECT_EQ(run("no-such-command", dir), 2);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, FailingVerificationExitsOne)
{
  // the stated curvature-dimension constant is violated on heisenberg(1); the rho2/4 form is not
  const auto dir = scratch("verify_cd");
  const json params = {{"polynomials", 20}, {"points", 10}, {"identity_polynomials", 2}};
  write_json(dir / "both.json", {{"params", params}});
  EXPECT_EQ(run("verify-cd --config " + (dir / "both.json").string() + " --out " + (dir / "both").string(), dir), 1);
  const auto manifest = json::parse(read_file(dir / "both" / "manifest.json"));
  EXPECT_GT(manifest["failed"].get<int>(), 0);
  for (const auto & f : manifest["failures"]) { EXPECT_EQ(f["record_id"], "cd"); }

  json quarter = params;
  quarter["forms"] = {"quarter"};
  write_json(dir / "quarter.json", {{"params", quarter}});
  EXPECT_EQ(run("verify-cd --config " + (dir / "quarter.json").string() + " --out " + (dir / "quarter").string(), dir), 0);
}

TEST(Cli, RecordsAreIndependentOfWorkerCount)
{
  const auto dir = scratch("workers");
  write_json(dir / "sim.json", {{"experiment", "simulate"},
                                {"preset", {{"name", "block_sum"}, {"params", {1, 2}}}},
                                {"seed", 11},
                                {"params", {{"samples", 3000}, {"steps", 32}}}});
  const std::string cfg = " --config " + (dir / "sim.json").string();
  ASSERT_EQ(run("simulate" + cfg + " --workers 1 --out " + (dir / "w1").string(), dir), 0);
  ASSERT_EQ(run("simulate" + cfg + " --workers 4 --out " + (dir / "w4").string(), dir), 0);
  EXPECT_EQ(read_file(dir / "w1" / "records.csv"), read_file(dir / "w4" / "records.csv"));
  EXPECT_EQ(read_file(dir / "w1" / "summary.json"), read_file(dir / "w4" / "summary.json"));
  // a different seed changes the sample
  ASSERT_EQ(run("simulate" + cfg + " --seed 12 --out " + (dir / "s12").string(), dir), 0);
  EXPECT_NE(read_file(dir / "w1" / "records.csv"), read_file(dir / "s12" / "records.csv"));
}

TEST(Cli, ManifestEchoesAReusableConfig)
{
  const auto dir = scratch("manifest");
  write_json(dir / "cfg.json", {{"preset", {{"name", "heisenberg"}, {"params", {2}}}}, {"seed", 5}});
  ASSERT_EQ(run("curvature --config " + (dir / "cfg.json").string() + " --workers 2 --out " + (dir / "a").string(), dir), 0);
  const auto manifest = json::parse(read_file(dir / "a" / "manifest.json"));
  const auto echoed = hlg::app::parse_config(manifest["config"]);
  EXPECT_EQ(echoed.experiment, "curvature");
  EXPECT_EQ(echoed.seed, 5u);
  EXPECT_EQ(echoed.workers, 2);
  EXPECT_EQ(echoed.preset.name, "heisenberg");
  write_json(dir / "again.json", manifest["config"]);
  ASSERT_EQ(run("curvature --config " + (dir / "again.json").string() + " --out " + (dir / "b").string(), dir), 0);
  EXPECT_EQ(read_file(dir / "a" / "records.csv"), read_file(dir / "b" / "records.csv"));
  EXPECT_EQ(manifest["version"], "1.0.0");
}

TEST(Cli, ListPresetsPrintsTheCatalog)
{
  const auto dir = scratch("presets");
  ASSERT_EQ(run("list-presets --out " + dir.string(), dir), 0);
  const std::string table = read_file(dir / "stdout.txt");
  EXPECT_NE(table.find("heisenberg(1)"), std::string::npos);
  EXPECT_NE(table.find("block_sum(1 3)"), std::string::npos);
  const auto catalog = json::parse(read_file(dir / "presets.json"));
  bool found = false;
  for (const auto & p : catalog) {
    if (p["label"] == "block_sum(1 3)") {
      found = true;
      EXPECT_DOUBLE_EQ(p["hs_norm_sq"].get<double>(), 20.0);
      EXPECT_DOUBLE_EQ(p["rho2"].get<double>(), 2.0);
      EXPECT_DOUBLE_EQ(p["harnack_coeff"].get<double>(), 21.0);
    }
  }
  EXPECT_TRUE(found);
}

TEST(ConfigSchema, ShippedConfigsParse)
{
  int count = 0;
  for (const auto & entry : fs::directory_iterator(fs::path(HLG_SOURCE_DIR) / "configs")) {
    if (entry.path().extension() != ".json") { continue; }
    const auto cfg = hlg::app::parse_config(hlg::app::load_json_file(entry.path().string()));
    EXPECT_FALSE(cfg.experiment.empty()) << entry.path();
    ++count;
  }
  EXPECT_EQ(count, 11);
}

TEST(ConfigSchema, TypesAreChecked)
{
  using hlg::app::parse_config;
  EXPECT_THROW(parse_config(json{{"seed", -1}}), hlg::ConfigError);
  EXPECT_THROW(parse_config(json{{"seed", 1.5}}), hlg::ConfigError);
  EXPECT_THROW(parse_config(json{{"workers", "4"}}), hlg::ConfigError);
  EXPECT_THROW(parse_config(json{{"experiment", "nope"}}), hlg::ConfigError);
  EXPECT_THROW(parse_config(json{{"params", 3}}), hlg::ConfigError);
  EXPECT_THROW(parse_config(json::array()), hlg::ConfigError);
  const auto cfg = parse_config(json{{"seed", 7.0}, {"ranks", {2, 4}}});
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.ranks.size(), 2u);
}

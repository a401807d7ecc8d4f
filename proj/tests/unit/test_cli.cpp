#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "spatpomp/cli.hpp"
#include "spatpomp/csv.hpp"
#include "spatpomp/errors.hpp"

namespace fs = std::filesystem;
using namespace spatpomp;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("spatpomp_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write_config(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

  int run(std::vector<std::string> args) {
    std::vector<const char*> argv = {"spatpomp"};
    for (const auto& a : args) argv.push_back(a.c_str());
    out_.str("");
    err_.str("");
    return cli::run(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

const char* kFilterConfig = R"({
  // small bm filtering run
  "model": {"name": "bm", "units": 4, "times": 6},
  "method": "pfilter",
  "options": {"Np": 100},
  "replicates": 10,
  "seed": 7
})";

}  // namespace

TEST_F(CliTest, FilterWritesRowsAndAggregate) {
  const auto cfg = write_config("f.json", kFilterConfig);
  ASSERT_EQ(run({"filter", "--config", cfg, "--out", (dir_ / "a").string()}), 0) << err_.str();
  const auto table = csv::read((dir_ / "a" / "results.csv").string());
  EXPECT_EQ(table.rows.size(), 11u);
  EXPECT_EQ(table.header.front(), "run_id");
  const auto wall = table.column("wall_time");
  EXPECT_EQ(table.rows[0][wall], "NA");
  const auto se = table.column("loglik.se");
  EXPECT_NE(table.rows.back()[se], "NA");
}

TEST_F(CliTest, OutputIsByteReproducibleAcrossThreadCounts) {
  const auto cfg = write_config("f.json", kFilterConfig);
  ASSERT_EQ(run({"filter", "--config", cfg, "--out", (dir_ / "a").string()}), 0);
  ASSERT_EQ(run({"filter", "--config", cfg, "--out", (dir_ / "b").string(), "--threads", "3"}), 0);
  EXPECT_EQ(slurp(dir_ / "a" / "results.csv"), slurp(dir_ / "b" / "results.csv"));
  ASSERT_EQ(run({"filter", "--config", cfg, "--out", (dir_ / "c").string(), "--seed", "8"}), 0);
  EXPECT_NE(slurp(dir_ / "a" / "results.csv"), slurp(dir_ / "c" / "results.csv"));
}

TEST_F(CliTest, SimulateWritesOneFilePairPerSimulation) {
  const auto cfg = write_config("s.json", R"({"model": {"name": "bm", "units": 3, "times": 5}, "nsim": 3})");
  ASSERT_EQ(run({"simulate", "--config", cfg, "--out", dir_.string()}), 0) << err_.str();
  for (int i = 1; i <= 3; ++i) {
    const auto obs = csv::read((dir_ / ("obs_" + std::to_string(i) + ".csv")).string());
    EXPECT_EQ(obs.rows.size(), 15u);
    EXPECT_TRUE(fs::exists(dir_ / ("states_" + std::to_string(i) + ".csv")));
  }
  EXPECT_NE(slurp(dir_ / "obs_1.csv"), slurp(dir_ / "obs_2.csv"));
}

TEST_F(CliTest, MeaslesSimulationCoversAllBiweeks) {
  const auto cfg = write_config("m.json", R"({"model": {"name": "measles", "units": 2}, "seed": 3})");
  ASSERT_EQ(run({"simulate", "--config", cfg, "--out", dir_.string()}), 0) << err_.str();
  const auto obs = csv::read((dir_ / "obs.csv").string());
  EXPECT_EQ(obs.rows.size(), 2u * 391u);
}

TEST_F(CliTest, SearchWritesTraceAndFinalParameters) {
  const auto cfg = write_config("g.json", R"({
    "model": {"name": "bm", "units": 2, "times": 4},
    "method": "ienkf",
    "options": {"Nenkf": 3, "Np": 30, "rw_sd": {"rho": 0.02, "sigma": 0.02, "tau": 0.02, "*": 0}}
  })");
  ASSERT_EQ(run({"search", "--config", cfg, "--out", dir_.string()}), 0) << err_.str();
  EXPECT_EQ(csv::read((dir_ / "trace.csv").string()).rows.size(), 3u);
  EXPECT_TRUE(fs::exists(dir_ / "final_params.csv"));
}

TEST_F(CliTest, ValidationErrorsExitWithTwo) {
  const auto missing = write_config("g.json", R"({
    "model": {"name": "bm", "units": 2, "times": 4},
    "method": "girf",
    "options": {"Np": 10, "Ninter": 2, "Nguide": 5}
  })");
  EXPECT_EQ(run({"filter", "--config", missing, "--out", dir_.string()}), 2);
  EXPECT_NE(err_.str().find("Lookahead"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "results.csv"));

  const auto unknown = write_config("u.json", R"({"model": {"name": "bm"}, "method": "pfilter",
    "options": {"Np": 10}, "bogus": 1})");
  EXPECT_EQ(run({"filter", "--config", unknown}), 2);
  EXPECT_NE(err_.str().find("bogus"), std::string::npos);

  const auto bad_param = write_config("p.json", R"({"model": {"name": "bm"}, "method": "pfilter",
    "options": {"Np": 10}, "params": {"nope": 1}})");
  EXPECT_EQ(run({"filter", "--config", bad_param, "--out", dir_.string()}), 2);

  const auto bad_json = write_config("j.json", "{ not json");
  EXPECT_EQ(run({"filter", "--config", bad_json}), 2);

  EXPECT_EQ(run({"filter", "--config", (dir_ / "absent.json").string()}), 2);
  EXPECT_EQ(run({"filter"}), 2);
  EXPECT_EQ(run({"frobnicate"}), 2);
  EXPECT_EQ(run({"filter", "--config", unknown, "--threads", "0"}), 2);
}

TEST_F(CliTest, ModelDependentOptionErrorsExitWithTwo) {
  const auto lookahead = write_config("l.json", R"({"model": {"name": "bm", "units": 2, "times": 4},
    "method": "girf", "options": {"Np": 10, "Ninter": 2, "Nguide": 5, "Lookahead": 6}})");
  EXPECT_EQ(run({"filter", "--config", lookahead, "--out", dir_.string()}), 2);
  EXPECT_FALSE(fs::exists(dir_ / "results.csv"));
  const auto rw = write_config("r.json", R"({"model": {"name": "bm", "units": 2, "times": 4},
    "method": "ienkf", "options": {"Nenkf": 2, "Np": 10, "rw_sd": {"rho": 0.02}}})");
  EXPECT_EQ(run({"search", "--config", rw, "--out", dir_.string()}), 2);
  EXPECT_NE(err_.str().find("sigma"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "trace.csv"));
}

TEST_F(CliTest, McapNeedsFivePoints) {
  std::ofstream(dir_ / "profile.csv") << "rho,loglik\n0.1,-5\n0.2,-4\n0.3,-4.5\n0.4,-6\n";
  const auto cfg = write_config("m.json", "{\"mcap\": {\"input\": \"" +
                                              (dir_ / "profile.csv").string() +
                                              "\", \"parameter\": \"rho\"}}");
  EXPECT_EQ(run({"mcap", "--config", cfg, "--out", dir_.string()}), 2);
  std::ofstream(dir_ / "profile.csv") << "rho,loglik\n0.1,-9\n0.2,-6\n0.3,-5\n0.4,-6\n0.5,-9\n";
  ASSERT_EQ(run({"mcap", "--config", cfg, "--out", dir_.string()}), 0) << err_.str();
  EXPECT_EQ(csv::read((dir_ / "mcap.csv").string()).rows.size(), 1000u);
}

TEST_F(CliTest, UnwritableOutputExitsWithOne) {
  const auto cfg = write_config("f.json", kFilterConfig);
  std::ofstream(dir_ / "plain_file") << "x";
  EXPECT_EQ(run({"filter", "--config", cfg, "--out", (dir_ / "plain_file" / "sub").string()}), 1);
}

TEST(CliConfig, ParseCollectsAllErrors) {
  try {
    cli::parse_config(R"({"model": {"name": "nope", "units": -1}, "method": "girf", "options": {}})",
                      "filter");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("model.name"), std::string::npos);
    EXPECT_NE(msg.find("model.units"), std::string::npos);
    EXPECT_NE(msg.find("Ninter"), std::string::npos);
  }
}

TEST(CliConfig, OverridesAndGrid) {
  const auto c = cli::parse_config(R"({"model": {"name": "bm"}, "method": "ienkf",
      "options": {"Nenkf": 2, "Np": 10, "rw_sd": {"*": 0.01}},
      "profile": {"parameter": "rho", "grid": {"from": 0.1, "to": 0.5, "length": 5},
                  "eval": {"method": "pfilter", "Np": 50}}})",
                                   "profile", {42, 2, std::string("x")});
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.threads, 2);
  EXPECT_EQ(c.output, "x");
  ASSERT_TRUE(c.profile.has_value());
  EXPECT_EQ(c.profile->grid.size(), 5u);
  EXPECT_NEAR(c.profile->grid[2], 0.3, 1e-12);
}

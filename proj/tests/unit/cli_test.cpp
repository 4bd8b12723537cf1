// Copyright 2026 The qotstat Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "qot/cli.hpp"

namespace qot::cli {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("qot_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int Call(std::initializer_list<std::string> args) {
    std::vector<std::string> owned{"qot"};
    owned.insert(owned.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : owned) argv.push_back(a.c_str());
    out_.str("");
    err_.str("");
    return qot::cli::Run(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }

  std::string Path(const std::string& name) const { return (dir_ / name).string(); }

  void WriteFile(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name) << text;
  }

  static std::string ReadFile(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static nlohmann::json ReadJson(const std::string& path) { return nlohmann::json::parse(ReadFile(path)); }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

TEST_F(CliTest, SolveSingleAtoms) {
  WriteFile("p.csv", "x1,w\n0,1\n");
  WriteFile("q.csv", "x1,w\n1,1\n");
  ASSERT_EQ(Call({"solve", "--p", Path("p.csv"), "--q", Path("q.csv"), "--epsilon", "1", "--out", Path("o")}), kExitOk)
      << err_.str();
  const nlohmann::json s = ReadJson(Path("o/summary.json"));
  EXPECT_NEAR(s.at("cost").get<double>(), 1.0, 1e-12);
  EXPECT_EQ(s.at("converged"), true);
  EXPECT_TRUE(fs::exists(Path("o/potentials.csv")));
  EXPECT_TRUE(fs::exists(Path("o/coupling.csv")));
}

TEST_F(CliTest, WarmStartNeedsNoSweeps) {
  WriteFile("p.csv", "x1,w\n0,0.25\n0.4,0.25\n0.7,0.5\n");
  WriteFile("q.csv", "x1,w\n0.1,0.5\n0.9,0.5\n");
  ASSERT_EQ(Call({"solve", "--p", Path("p.csv"), "--q", Path("q.csv"), "--epsilon", "0.1", "--tol", "1e-9", "--out",
                  Path("a")}),
            kExitOk);
  ASSERT_EQ(Call({"solve", "--p", Path("p.csv"), "--q", Path("q.csv"), "--epsilon", "0.1", "--tol", "1e-9",
                  "--warm-start", Path("a/potentials.csv"), "--out", Path("b")}),
            kExitOk)
      << err_.str();
  EXPECT_EQ(ReadJson(Path("b/summary.json")).at("sweeps"), 0);
}

TEST_F(CliTest, MalformedCsvLeavesNoOutput) {
  WriteFile("p.csv", "x1,w\n0,abc\n");
  WriteFile("q.csv", "x1,w\n1,1\n");
  EXPECT_EQ(Call({"solve", "--p", Path("p.csv"), "--q", Path("q.csv"), "--epsilon", "1", "--out", Path("o")}),
            kExitInputError);
  EXPECT_FALSE(fs::exists(Path("o")));
  EXPECT_FALSE(err_.str().empty());
}

TEST_F(CliTest, NotConvergedExitCode) {
  ASSERT_EQ(Call({"sample", "--n", "40", "--lower", "0", "--upper", "1", "--seed", "3", "--out", Path("s")}), kExitOk);
  EXPECT_EQ(Call({"solve", "--p", Path("s/x.csv"), "--q", Path("s/y.csv"), "--epsilon", "0.001", "--max-sweeps", "1",
                  "--out", Path("o")}),
            kExitNotConverged);
  EXPECT_EQ(ReadJson(Path("o/summary.json")).at("converged"), false);
}

TEST_F(CliTest, MissingFlagPrintsUsage) {
  EXPECT_EQ(Call({"solve", "--epsilon", "1"}), kExitInputError);
  EXPECT_NE(err_.str().find("--p"), std::string::npos);
  EXPECT_EQ(Call({"diagnose"}), kExitInputError);
  EXPECT_EQ(Call({"no-such-command"}), kExitInputError);
}

TEST_F(CliTest, CiDegenerateAndLevels) {
  WriteFile("x.csv", "x1,w\n0.5,1\n");
  ASSERT_EQ(Call({"ci", "--x", Path("x.csv"), "--y", Path("x.csv"), "--epsilon", "1", "--out", Path("d")}), kExitOk)
      << err_.str();
  const nlohmann::json d = ReadJson(Path("d/ci.json"));
  EXPECT_EQ(d.at("half_width").get<double>(), 0.0);
  EXPECT_EQ(d.at("interval")[0], d.at("interval")[1]);

  ASSERT_EQ(Call({"sample", "--n", "100", "--lower", "0", "--upper", "1", "--seed", "7", "--out", Path("s")}), kExitOk);
  ASSERT_EQ(Call({"ci", "--x", Path("s/x.csv"), "--y", Path("s/y.csv"), "--epsilon", "0.5", "--level", "0.95",
                  "--out", Path("a")}),
            kExitOk);
  ASSERT_EQ(Call({"ci", "--x", Path("s/x.csv"), "--y", Path("s/y.csv"), "--epsilon", "0.5", "--level", "0.99",
                  "--out", Path("b")}),
            kExitOk);
  EXPECT_LT(ReadJson(Path("a/ci.json")).at("half_width").get<double>(),
            ReadJson(Path("b/ci.json")).at("half_width").get<double>());
}

TEST_F(CliTest, CiFixtureIsByteIdentical) {
  ASSERT_EQ(Call({"sample", "--n", "100", "--lower", "0", "--upper", "1", "--seed", "7", "--out", Path("s")}), kExitOk);
  for (const char* run : {"r1", "r2"}) {
    ASSERT_EQ(Call({"ci", "--x", Path("s/x.csv"), "--y", Path("s/y.csv"), "--epsilon", "0.5", "--out", Path(run)}),
              kExitOk);
  }
  const std::string a = ReadFile(Path("r1/ci.json"));
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, ReadFile(Path("r2/ci.json")));
}

TEST_F(CliTest, CltSimSmoke) {
  WriteFile("smoke.json", R"({"kind": "cost_clt", "grid": 32, "epsilon": 0.5, "sample_sizes": [50],
                              "replications": 2, "master_seed": 3})");
  ASSERT_EQ(Call({"clt-sim", "--config", Path("smoke.json"), "--out", Path("o"), "--threads", "1"}), kExitOk)
      << err_.str();
  const nlohmann::json r = ReadJson(Path("o/report.json"));
  EXPECT_EQ(r.at("format_version"), 1);
  EXPECT_EQ(r.at("all_passed"), true);
  for (const char* name : {"replications.csv", "qq.csv", "rate.csv"}) EXPECT_TRUE(fs::exists(dir_ / "o" / name));
}

TEST_F(CliTest, CltSimAssertionFailure) {
  WriteFile("fail.json", R"({"kind": "cost_clt", "grid": 32, "epsilon": 0.5, "sample_sizes": [50],
                             "replications": 10, "master_seed": 3, "assertions": {"ks_max": -1}})");
  EXPECT_EQ(Call({"clt-sim", "--config", Path("fail.json"), "--out", Path("o")}), kExitAssertionFailed);
  EXPECT_TRUE(fs::exists(Path("o/report.json")));
}

TEST_F(CliTest, CltSimInvalidConfig) {
  WriteFile("bad.json", R"({"kind": "cost_clt", "unknown_key": 1})");
  EXPECT_EQ(Call({"clt-sim", "--config", Path("bad.json"), "--out", Path("o")}), kExitInputError);
  WriteFile("broken.json", "{not json");
  EXPECT_EQ(Call({"clt-sim", "--config", Path("broken.json"), "--out", Path("o")}), kExitInputError);
}

std::map<std::string, double> ParseDiagnostics(const std::string& text) {
  std::map<std::string, double> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("diagnostic,", 0) == 0) continue;
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    out[line.substr(0, a) + "|" + line.substr(a + 1, b - a - 1)] = std::stod(line.substr(b + 1));
  }
  return out;
}

TEST_F(CliTest, DiagnoseSingleAtomIsZero) {
  WriteFile("p.csv", "x1,w\n0,1\n");
  WriteFile("q.csv", "x1,w\n1,1\n");
  ASSERT_EQ(Call({"diagnose", "--p", Path("p.csv"), "--q", Path("q.csv"), "--epsilon", "1", "--out", Path("o")}),
            kExitOk)
      << err_.str();
  const auto rows = ParseDiagnostics(ReadFile(Path("o/diagnostics.csv")));
  ASSERT_FALSE(rows.empty());
  for (const auto& [key, value] : rows) {
    if (key.rfind("lipschitz", 0) == 0 || key.rfind("gradient_lipschitz", 0) == 0 || key.rfind("vc_", 0) == 0) {
      EXPECT_EQ(value, 0.0) << key;
    }
  }
}

TEST_F(CliTest, DiagnoseGridStability) {
  WriteFile("pop.json", R"({"kind": "uniform_box", "lower": [0], "upper": [1]})");
  ASSERT_EQ(Call({"diagnose", "--population", Path("pop.json"), "--grid", "512", "--compare-grid", "256", "--epsilon",
                  "0.5", "--out", Path("o")}),
            kExitOk)
      << err_.str();
  const std::string text = ReadFile(Path("o/diagnostics.csv"));
  EXPECT_NE(text.find("stability_cost_gap,m256_m512,"), std::string::npos) << text;
  EXPECT_NE(text.find("stability_potential_gap,m256_m512,"), std::string::npos);
  EXPECT_NE(text.find("stability_min_section_mass_gap,m256_m512,"), std::string::npos);
}

}  // namespace
}  // namespace qot::cli

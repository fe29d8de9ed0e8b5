#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "elastocal/chain_io.hpp"
#include "elastocal/cli.hpp"
#include "elastocal/doe.hpp"
#include "test_util.hpp"

using namespace elastocal;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Run r;
  r.code = cli_main(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("elastocal-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string tmp(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

std::string data(const std::string& name) { return testutil::data_path(name); }

}  // namespace

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run({"plan", "random", "--chain", data("kuka-iiwa.json")}).code, kExitUsage);  // no --seed
  EXPECT_EQ(run({"plan", "generate", "--pattern", "n3m3"}).code, kExitUsage);              // no --seed
  EXPECT_EQ(run({"model", "fk", data("kuka-iiwa.json"), "--q", "0,0,0"}).code, kExitUsage);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
}

TEST_F(CliTest, ModelValidateAndFk) {
  const auto v = run({"model", "validate", data("kuka-iiwa.json")});
  EXPECT_EQ(v.code, kExitOk) << v.err;
  EXPECT_NE(v.out.find("parameters: 55"), std::string::npos);
  const auto fk = run({"model", "fk", data("kuka-iiwa.json"), "--q", "0,0,0,0,0,0,0"});
  EXPECT_EQ(fk.code, kExitOk);
  EXPECT_NE(fk.out.find("point 1: (0, 0, 1270) mm"), std::string::npos) << fk.out;
}

TEST_F(CliTest, ModelReduceWritesChainAndReport) {
  const auto r = run({"model", "reduce", data("kuka-iiwa.json"), "--out", tmp("r.json"), "--report", tmp("rep.json")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const ChainSpec reduced = load_chain(tmp("r.json"));
  EXPECT_EQ(ParamVector::from_chain(reduced).size(), 37u);
  const auto rep = read_json_file(tmp("rep.json"));
  EXPECT_EQ(rep["removed_count"], 18);
  EXPECT_EQ(rep["config"]["command"], "model reduce");
}

TEST_F(CliTest, InvalidAxisIsAParseErrorNamingTheElement) {
  auto j = read_json_file(data("kuka-iiwa.json"));
  j["joints"][3]["axis"] = "w";
  write_text_file(tmp("bad.json"), j.dump());
  const auto r = run({"model", "validate", tmp("bad.json")});
  EXPECT_EQ(r.code, kExitParse);
  EXPECT_NE(r.err.find("joints[3]"), std::string::npos) << r.err;
}

TEST_F(CliTest, MissingFileIsAParseError) {
  EXPECT_EQ(run({"model", "validate", tmp("nope.json")}).code, kExitParse);
}

TEST_F(CliTest, UnknownParameterIsAModelError) {
  write_text_file(tmp("p.json"), R"({"params": [{"id": "zz9", "deviation": 1}]})");
  EXPECT_EQ(run({"model", "fk", data("kuka-iiwa.json"), "--q", "0,0,0,0,0,0,0", "--params", tmp("p.json")}).code,
            kExitModel);
}

TEST_F(CliTest, GeneratedPlanMatchesShippedFileAndPassesCheck) {
  const auto g = run({"plan", "generate", "--robot", "kuka-iiwa", "--pattern", "n4m4x2", "--out", tmp("p.csv")});
  ASSERT_EQ(g.code, kExitOk) << g.err;
  EXPECT_EQ(slurp(tmp("p.csv")), slurp(data("kuka-optimal-16.csv")));
  const auto c = run({"plan", "check", data("kuka-optimal-16.csv"), "--tol", "1e-9"});
  EXPECT_EQ(c.code, kExitOk) << c.out;
  EXPECT_NE(c.out.find("subchain 1 (1,3,5,7)"), std::string::npos);
  EXPECT_NE(c.out.find("subchain 2 (v,2,4,6)"), std::string::npos);
}

TEST_F(CliTest, PrintedTablePlanFailsTheCheck) {
  const auto c = run({"plan", "check", data("kuka-table3-plan.csv")});
  EXPECT_EQ(c.code, kExitCheckFailed);
  EXPECT_NE(c.out.find("FAIL"), std::string::npos);
}

TEST_F(CliTest, SeededPlanSearchIsDeterministic) {
  const std::vector<std::string> args = {"plan", "generate", "--robot", "kuka-iiwa", "--seed", "11"};
  const auto a = run(args), b = run(args);
  ASSERT_EQ(a.code, kExitOk) << a.err;
  EXPECT_EQ(a.out, b.out);
  write_text_file(tmp("s.csv"), a.out);
  EXPECT_EQ(run({"plan", "check", tmp("s.csv")}).code, kExitOk);
  const auto planar = run({"plan", "generate", "--pattern", "n4m4", "--seed", "5", "--out", tmp("n4.csv")});
  ASSERT_EQ(planar.code, kExitOk) << planar.err;
  EXPECT_EQ(run({"plan", "check", tmp("n4.csv")}).code, kExitOk);
}

TEST_F(CliTest, RandomPlanRespectsSeed) {
  const auto a = run({"plan", "random", "--chain", data("kuka-iiwa.json"), "--seed", "4"});
  const auto b = run({"plan", "random", "--chain", data("kuka-iiwa.json"), "--seed", "4"});
  const auto c = run({"plan", "random", "--chain", data("kuka-iiwa.json"), "--seed", "5"});
  EXPECT_EQ(a.code, kExitOk);
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out, c.out);
  EXPECT_NE(a.out.find("# seed: 4"), std::string::npos);
}

TEST_F(CliTest, StiffnessMethodsAgree) {
  const std::string q = "10,35,-20,-70,15,40,5";
  const std::vector<std::string> common = {"--chain", data("kuka-iiwa-stiffness.json"), "--springs",
                                           data("kuka-iiwa-springs.json"), "--q", q};
  auto args = std::vector<std::string>{"stiffness", "compute", "--method", "vjm", "--out", tmp("v.json")};
  args.insert(args.end(), common.begin(), common.end());
  ASSERT_EQ(run(args).code, kExitOk);
  args[3] = "msa";
  args[5] = tmp("m.json");
  ASSERT_EQ(run(args).code, kExitOk);
  auto matrix = [](const nlohmann::json& j) {
    Eigen::MatrixXd m(6, 6);
    for (int r = 0; r < 6; ++r)
      for (int c = 0; c < 6; ++c) m(r, c) = j["stiffness"][r][c].get<double>();
    return m;
  };
  const auto kv = matrix(read_json_file(tmp("v.json")));
  const auto km = matrix(read_json_file(tmp("m.json")));
  EXPECT_LT((kv - km).norm() / kv.norm(), 1e-6);
  EXPECT_EQ(read_json_file(tmp("v.json"))["config"]["q_deg"], q);
}

TEST_F(CliTest, ShippedMsaModelMatchesTheVjmChain) {
  const auto m = run({"stiffness", "compute", "--method", "msa", "--model", data("kuka-iiwa-msa.json"), "--out",
                      tmp("m.json")});
  ASSERT_EQ(m.code, kExitOk) << m.err;
  const auto cfg = read_json_file(data("kuka-iiwa-msa.json"))["config"];
  const auto v = run({"stiffness", "compute", "--method", "vjm", "--chain", data("kuka-iiwa-stiffness.json"),
                      "--springs", data("kuka-iiwa-springs.json"), "--q", cfg["q_deg"].get<std::string>(), "--out",
                      tmp("v.json")});
  ASSERT_EQ(v.code, kExitOk) << v.err;
  const auto a = read_json_file(tmp("m.json"))["stiffness"], b = read_json_file(tmp("v.json"))["stiffness"];
  double diff = 0, norm = 0;
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) {
      diff += std::pow(a[r][c].get<double>() - b[r][c].get<double>(), 2);
      norm += std::pow(b[r][c].get<double>(), 2);
    }
  EXPECT_LT(std::sqrt(diff / norm), 1e-6);
}

TEST_F(CliTest, MeasureThenCalibrateRecoversDeviations) {
  write_text_file(tmp("truth.json"),
                  R"({"params": [{"id": "pz2", "deviation": 3.8}, {"id": "dq4", "deviation": 0.004},
                                 {"id": "base_z", "deviation": 5.5}, {"id": "tool3_y", "deviation": 0.7}]})");
  const auto m = run({"simulate", "measure", "--chain", data("kuka-iiwa.json"), "--plan", data("kuka-optimal-16.csv"),
                      "--params", tmp("truth.json"), "--sigma", "0", "--seed", "1", "--out", tmp("m.csv")});
  ASSERT_EQ(m.code, kExitOk) << m.err;
  const auto c = run({"calibrate", "run", "--chain", data("kuka-iiwa.json"), "--plan", data("kuka-optimal-16.csv"),
                      "--measurements", tmp("m.csv"), "--out", tmp("cal.json")});
  ASSERT_EQ(c.code, kExitOk) << c.err;
  const auto j = read_json_file(tmp("cal.json"));
  std::map<std::string, double> got;
  for (const auto& p : j["params"]) got[p["id"]] = p["deviation"];
  EXPECT_NEAR(got["pz2"], 3.8, 1e-8);
  EXPECT_NEAR(got["dq4"], 0.004, 1e-10);
  EXPECT_NEAR(got["base_z"], 5.5, 1e-8);
  EXPECT_NEAR(got["tool3_y"], 0.7, 1e-8);
  EXPECT_NEAR(got["py3"], 0.0, 1e-8);
  EXPECT_EQ(j["config"]["measurements"], tmp("m.csv"));
  EXPECT_TRUE(j["converged"].get<bool>());
}

TEST_F(CliTest, UnreducedCalibrationNamesTheNullSpace) {
  ASSERT_EQ(run({"simulate", "measure", "--chain", data("kuka-iiwa.json"), "--plan", data("kuka-optimal-16.csv"),
                 "--seed", "1", "--out", tmp("m.csv")})
                .code,
            kExitOk);
  const auto c = run({"calibrate", "run", "--chain", data("kuka-iiwa.json"), "--plan", data("kuka-optimal-16.csv"),
                      "--measurements", tmp("m.csv"), "--no-reduce"});
  EXPECT_EQ(c.code, kExitNumeric);
  EXPECT_NE(c.err.find("dq1"), std::string::npos) << c.err;
}

TEST_F(CliTest, SimulateIsByteIdenticalAcrossRunsAndJobs) {
  const std::string scenario = data("kuka-scenario.json");
  ASSERT_EQ(run({"simulate", "run", scenario, "--trials", "6", "--out-dir", tmp("a"), "--jobs", "1"}).code, kExitOk);
  ASSERT_EQ(run({"simulate", "run", scenario, "--trials", "6", "--out-dir", tmp("b"), "--jobs", "1"}).code, kExitOk);
  ASSERT_EQ(run({"simulate", "run", scenario, "--trials", "6", "--out-dir", tmp("c"), "--jobs", "8"}).code, kExitOk);
  for (const char* f : {"report.json", "report.csv", "trajectories.csv"}) {
    const auto a = slurp(fs::path(tmp("a")) / f);
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, slurp(fs::path(tmp("b")) / f)) << f;
    EXPECT_EQ(a, slurp(fs::path(tmp("c")) / f)) << f;
  }
  const auto j = read_json_file(fs::path(tmp("a")) / "report.json");
  EXPECT_EQ(j["config"]["trials"], 6);
  EXPECT_EQ(j["config"]["seed"], 20261015);
}

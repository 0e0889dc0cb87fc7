#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "psqlab/cli.hpp"
#include "psqlab/environments.hpp"
#include "psqlab/mdp.hpp"

namespace psqlab {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("psqlab_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST_F(CliTest, ListAgents) {
  const Outcome r = invoke({"list-agents"});
  EXPECT_EQ(r.code, cli::kExitOk);
  EXPECT_NE(r.out.find("psql-star\n"), std::string::npos);
  EXPECT_NE(r.out.find("staged-randql\n"), std::string::npos);
}

TEST_F(CliTest, RunWritesCsvsAndRerunIsByteIdentical) {
  const std::vector<std::string> base{"run", "--env", "chain", "--agents", "psql,ucbql",
                                      "--episodes", "30", "--instances", "2", "--seed", "4"};
  auto with_out = [&](const fs::path& p) {
    auto args = base;
    args.push_back("--out");
    args.push_back(p.string());
    return args;
  };
  const Outcome first = invoke(with_out(dir_ / "a"));
  ASSERT_EQ(first.code, cli::kExitOk) << first.err;
  EXPECT_NE(first.out.find("psql: final mean cumulative regret"), std::string::npos);
  const Outcome second = invoke(with_out(dir_ / "b"));
  ASSERT_EQ(second.code, cli::kExitOk);
  for (const char* name : {"runs.csv", "aggregate.csv"}) {
    const std::string a = slurp(dir_ / "a" / name);
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(dir_ / "b" / name)) << name;
  }
}

TEST_F(CliTest, ConfigFileAndMatchingFlagsAgree) {
  const fs::path cfg = dir_ / "exp.cfg";
  std::ofstream(cfg) << "env = grid\nagents = rlsvi\nepisodes = 10\ninstances = 1\nout = "
                     << (dir_ / "o").string() << "\n";
  EXPECT_EQ(invoke({"run", "--config", cfg.string(), "--env", "grid"}).code, cli::kExitOk);
  const Outcome clash = invoke({"run", "--config", cfg.string(), "--env", "chain"});
  EXPECT_EQ(clash.code, cli::kExitConfig);
  EXPECT_NE(clash.err.find("conflicts"), std::string::npos);
}

TEST_F(CliTest, UnknownAgentIsAConfigError) {
  const Outcome r = invoke({"run", "--agents", "psql,psql-plus", "--episodes", "5", "--out",
                            (dir_ / "x").string()});
  EXPECT_EQ(r.code, cli::kExitConfig);
  EXPECT_NE(r.err.find("psql-plus"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "x"));
}

TEST_F(CliTest, BadFlagsAreConfigErrors) {
  EXPECT_EQ(invoke({}).code, cli::kExitConfig);
  EXPECT_EQ(invoke({"frobnicate"}).code, cli::kExitConfig);
  EXPECT_EQ(invoke({"run", "--episodes", "many"}).code, cli::kExitConfig);
  EXPECT_EQ(invoke({"run", "--config", (dir_ / "missing.cfg").string()}).code, cli::kExitConfig);
}

TEST_F(CliTest, BadThreadEnvironmentIsAConfigError) {
  ::setenv("PSQLAB_THREADS", "lots", 1);
  const Outcome r = invoke({"run", "--agents", "psql", "--episodes", "2", "--instances", "1",
                            "--out", (dir_ / "t").string()});
  ::unsetenv("PSQLAB_THREADS");
  EXPECT_EQ(r.code, cli::kExitConfig);
}

TEST_F(CliTest, SolveMatchesInProcessSolver) {
  const fs::path file = dir_ / "grid.env";
  ASSERT_EQ(invoke({"dump-env", "--env", "grid", "--seed", "3", "--instance", "1", "--out",
                    file.string()})
                .code,
            cli::kExitOk);
  std::ifstream in(file);
  const EnvironmentInstance inst = read_instance(in);
  const double v = solve_optimal(inst.mdp).v(1, inst.mdp.start_state());

  const Outcome r = invoke({"solve", "--env-file", file.string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  double printed = -1.0;
  ASSERT_EQ(std::sscanf(r.out.c_str(), "v_star(1, 0) = %lf", &printed), 1) << r.out;
  EXPECT_NEAR(printed, v, 1e-9);
  EXPECT_NE(r.out.find("h=32:"), std::string::npos);
}

TEST_F(CliTest, SolveDeterministicChainMatchesEnumeration) {
  EnvironmentInstance inst{EnvFamily::kChain, ChainSpec{1.0, 2, 4}, build_chain({1.0, 2, 4})};
  const fs::path file = dir_ / "chain.env";
  {
    std::ofstream out(file);
    write_instance(out, inst);
  }
  const Outcome r = invoke({"solve", "--env-file", file.string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  double printed = -1.0;
  ASSERT_EQ(std::sscanf(r.out.c_str(), "v_star(1, 0) = %lf", &printed), 1) << r.out;
  // Goal at index 2 reached at step 3 pays (4 - 3) / 4.
  EXPECT_NEAR(printed, oracle::enumerate_v(inst.mdp, 1, 0), 1e-10);
  EXPECT_NEAR(printed, 0.25, 1e-10);
}

TEST_F(CliTest, SolveZeroRewardInstancePrintsZero) {
  // H = 1, one state, one action, zero reward.
  const fs::path file = dir_ / "zero.env";
  std::ofstream(file) << "format = psqlab-mdp-v1\nfamily = chain\nchain.p = 1\nchain.length = 0\n"
                         "horizon = 1\nnum_states = 1\nnum_actions = 1\nstart_state = 0\n"
                         "reward.1.0.0 = 0\ntransition.1.0.0 = 1\n";
  const Outcome r = invoke({"solve", "--env-file", file.string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "v_star(1, 0) = 0");
}

TEST_F(CliTest, SolveRejectsMalformedFile) {
  const fs::path file = dir_ / "bad.env";
  std::ofstream(file) << "format = psqlab-mdp-v1\nhorizon = banana\n";
  const Outcome r = invoke({"solve", "--env-file", file.string()});
  EXPECT_EQ(r.code, cli::kExitConfig);
  EXPECT_NE(r.err.find("bad.env"), std::string::npos);
  EXPECT_EQ(invoke({"solve", "--env-file", (dir_ / "absent.env").string()}).code, cli::kExitConfig);
}

TEST_F(CliTest, DumpEnvIsDeterministic) {
  const Outcome a = invoke({"dump-env", "--env", "chain", "--seed", "11"});
  const Outcome b = invoke({"dump-env", "--env", "chain", "--seed", "11"});
  ASSERT_EQ(a.code, cli::kExitOk);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out.rfind("format = psqlab-mdp-v1", 0), 0u);
  EXPECT_EQ(invoke({"dump-env", "--env", "maze"}).code, cli::kExitConfig);
}

}  // namespace
}  // namespace psqlab

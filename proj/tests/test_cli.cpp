#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>

#include "json.hpp"

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Run run(const std::string& args) {
  static int counter = 0;
  auto dir = std::filesystem::temp_directory_path();
  auto out = dir / ("linopen_cli_out_" + std::to_string(::getpid()) + "_" + std::to_string(counter));
  auto err = dir / ("linopen_cli_err_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::string cmd = std::string("\"") + LINOPEN_CLI + "\" " + args + " >" + out.string() + " 2>" + err.string();
  int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  std::filesystem::remove(out);
  std::filesystem::remove(err);
  return r;
}

std::string sys(const std::string& name) { return std::string(LINOPEN_SYSTEMS_DIR) + "/" + name; }

TEST(Cli, AnalyzeText) {
  auto r = run("analyze " + sys("three_state.stab"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("decision: EXP_STABILIZABLE_CONT_FEEDBACK via R1"), std::string::npos);
}

TEST(Cli, AnalyzeJson) {
  auto r = run("analyze --json " + sys("planar_cubic.stab"));
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["verdict"]["deciding_rule"], "R2");
  EXPECT_EQ(j["openness"]["jacobian_rank"], 2);
}

TEST(Cli, AnalyzeIsDeterministic) {
  auto a = run("--seed 4 analyze --json " + sys("unicycle.stab"));
  auto b = run("--seed 4 analyze --json " + sys("unicycle.stab"));
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
}

TEST(Cli, GlobalOptionsAfterSubcommand) {
  auto r = run("analyze " + sys("three_state.stab") + " --margin 0.5");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("decision: INCONCLUSIVE"), std::string::npos);
}

TEST(Cli, InputErrors) {
  EXPECT_EQ(run("analyze /nonexistent/file.stab").code, 2);
  EXPECT_EQ(run("analyze").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  auto dir = std::filesystem::temp_directory_path() / "linopen_cli_bad.stab";
  std::ofstream(dir) << "mode continuous\nstates 1\ncontrols 1\nf1 = x1 +* u1\n";
  auto r = run("analyze " + dir.string());
  std::filesystem::remove(dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 4"), std::string::npos) << r.err;
}

TEST(Cli, SynthesizeWithPoles) {
  auto r = run("synthesize --json --poles=-1,-2 " + sys("planar_cubic.stab"));
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j["gain"]["K"][0][0].get<double>(), -2.0, 1e-9);
  EXPECT_NEAR(j["gain"]["K"][0][1].get<double>(), -3.0, 1e-9);
  EXPECT_EQ(j["gain"]["convention"], "u = u* + K (x - x*)");
}

TEST(Cli, SynthesizeComplexPoles) {
  auto r = run("synthesize --poles=-1+1i,-1-1i " + sys("planar_cubic.stab"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("gain K"), std::string::npos);
}

TEST(Cli, SynthesizeRefusesUnstabilizable) {
  auto r = run("synthesize " + sys("hidden_unstable.stab"));
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("uncontrollable unstable mode at λ=1"), std::string::npos) << r.err;
  EXPECT_EQ(run("synthesize --force " + sys("hidden_unstable.stab")).code, 3);
}

TEST(Cli, SynthesizeNeedsPositiveVerdict) {
  // Stabilizable linearization with a nonreal unstable pair: no rule decides.
  auto file = std::filesystem::temp_directory_path() / "linopen_cli_spiral.stab";
  std::ofstream(file) << "mode continuous\nstates 2\ncontrols 1\nf1 = 0.5*x1 - x2\nf2 = x1 + 0.5*x2 + u1\n";
  auto r = run("synthesize " + file.string());
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("--force"), std::string::npos) << r.err;
  EXPECT_EQ(run("synthesize --force " + file.string()).code, 0);
  std::filesystem::remove(file);
}

TEST(Cli, SynthesizeBadPoleCount) {
  EXPECT_EQ(run("synthesize --poles=-1 " + sys("planar_cubic.stab")).code, 3);
  EXPECT_EQ(run("synthesize --poles=abc " + sys("planar_cubic.stab")).code, 2);
}

TEST(Cli, SynthesizeValidate) {
  auto r = run("synthesize --validate --samples 6 --json " + sys("discrete15.stab"));
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j["validation"]["pass"].get<bool>());
  EXPECT_EQ(j["validation"]["status"], "empirically certified");
}

TEST(Cli, CoveringSweep) {
  auto r = run("covering " + sys("cubic.stab"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("linear openness suspect"), std::string::npos);
  EXPECT_EQ(run("covering " + sys("three_state.stab")).code, 2);
}

TEST(Cli, SimulateCsv) {
  auto r = run("simulate " + sys("planar_cubic.stab") + " --feedback \"u1 = -x1 - x2\" --x0=0.1,0 -T 10");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("t,x1,x2\n", 0), 0u);
  EXPECT_NE(r.err.find("summary:"), std::string::npos);
}

TEST(Cli, SimulateFromReport) {
  auto report = std::filesystem::temp_directory_path() / "linopen_cli_report.json";
  auto csv = std::filesystem::temp_directory_path() / "linopen_cli_traj.csv";
  auto s = run("synthesize --json " + sys("discrete15.stab"));
  ASSERT_EQ(s.code, 0);
  std::ofstream(report) << s.out;
  auto r = run("simulate " + sys("discrete15.stab") + " --gain " + report.string() + " --x0 0.1 --steps 50 -o " +
               csv.string());
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("certified = true"), std::string::npos) << r.out;
  EXPECT_EQ(slurp(csv).rfind("t,x1\n", 0), 0u);
  std::filesystem::remove(report);
  std::filesystem::remove(csv);
}

TEST(Cli, SimulateArgumentErrors) {
  EXPECT_EQ(run("simulate " + sys("planar_cubic.stab") + " --x0=0.1,0").code, 2);
  EXPECT_EQ(run("simulate " + sys("planar_cubic.stab") + " --gain \"1 2\" --x0 0.1").code, 2);
  EXPECT_EQ(run("simulate " + sys("planar_cubic.stab") + " --gain \"1 2 3\" --x0=0.1,0").code, 2);
}

TEST(Cli, SimulateWarnsOnNonSmoothLaw) {
  auto r = run("simulate " + sys("identity.stab") + " --feedback \"u1 = -x1/(1 + x1^2)\" --x0 0.1 -T 1 --dt 0.01");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("not recognized as C1"), std::string::npos);
}

TEST(Cli, Version) {
  auto r = run("--version");
  EXPECT_EQ(r.code, 0);
  EXPECT_FALSE(r.out.empty());
}

}  // namespace

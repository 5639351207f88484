#include <gtest/gtest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "pot/color_transfer.hpp"
#include "pot/io.hpp"
#include "pot/oracle.hpp"
#include "pot/solvers.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pot;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream stream(path);
  std::ostringstream body;
  body << stream.rdbuf();
  return body.str();
}

RunResult run_cli(const std::string& args, const fs::path& scratch) {
  const fs::path out_file = scratch / "stdout.txt";
  const fs::path err_file = scratch / "stderr.txt";
  const std::string cmd = std::string(POT_CLI_PATH) + " " + args + " > " +
                          out_file.string() + " 2> " + err_file.string();
  const int raw = std::system(cmd.c_str());
  RunResult res;
  res.code = WEXITSTATUS(raw);
  res.out = slurp(out_file);
  res.err = slurp(err_file);
  return res;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    scratch_ = fs::path("cli_scratch") / ::testing::UnitTest::GetInstance()
                                             ->current_test_info()
                                             ->name();
    fs::remove_all(scratch_);
    fs::create_directories(scratch_);
  }

  fs::path scratch_;
};

// Strips the trailing elapsed_s column from every CSV line.
std::string strip_wall_time(const std::string& csv) {
  std::string out;
  std::istringstream lines(csv);
  std::string line;
  while (std::getline(lines, line)) {
    const auto pos = line.rfind(',');
    out += line.substr(0, pos);
    out += '\n';
  }
  return out;
}

}  // namespace

TEST_F(CliTest, SolveWritesArtifactsWithinEpsilonOfOracle) {
  std::mt19937_64 rng(81);
  const Instance in = pot_test::random_instance(rng, 5);
  const fs::path instance = scratch_ / "instance.json";
  write_instance_json(instance.string(), in);
  const OracleSolution oracle = solve_exact(in);

  const fs::path out_dir = scratch_ / "run";
  const RunResult res = run_cli("solve " + instance.string() +
                                    " --solver aspot --epsilon 0.1 --out-dir " +
                                    out_dir.string(),
                                scratch_);
  ASSERT_EQ(res.code, 0) << res.err;
  ASSERT_TRUE(fs::exists(out_dir / "plan.json"));
  ASSERT_TRUE(fs::exists(out_dir / "trace.csv"));
  ASSERT_TRUE(fs::exists(out_dir / "summary.json"));
  const json summary = json::parse(slurp(out_dir / "summary.json"));
  EXPECT_EQ(summary.at("status"), "converged");
  EXPECT_LE(summary.at("cost").get<double>(), oracle.value + 0.1 + 1e-9);
  EXPECT_LE(summary.at("feasibility_gap").get<double>(), 1e-9);
  EXPECT_TRUE(summary.contains("theory_bounds"));
  const std::string trace = slurp(out_dir / "trace.csv");
  EXPECT_EQ(trace.substr(0, trace.find('\n')), "t,E,phi,rounded_cost,elapsed_s");
}

TEST_F(CliTest, TunedSummaryRecordsPrescribedGamma) {
  std::mt19937_64 rng(82);
  const Instance in = pot_test::random_instance(rng, 5);
  const fs::path instance = scratch_ / "instance.json";
  write_instance_json(instance.string(), in);

  const fs::path out_dir = scratch_ / "run";
  const RunResult res = run_cli("solve " + instance.string() +
                                    " --solver tuned-sinkhorn --epsilon 0.1 --p 4"
                                    " --out-dir " + out_dir.string(),
                                scratch_);
  ASSERT_EQ(res.code, 0) << res.err;
  const json summary = json::parse(slurp(out_dir / "summary.json"));
  const double h_min = std::min(entropy(in.r), entropy(in.c));
  const double expected = std::pow(2.0 * 0.1 / (49.0 * h_min), 1.0 / 4.0);
  EXPECT_NEAR(summary.at("gamma").get<double>(), expected, 1e-12);
}

TEST_F(CliTest, UnknownSolverExitsWithUsageError) {
  std::mt19937_64 rng(83);
  const Instance in = pot_test::random_instance(rng, 3);
  const fs::path instance = scratch_ / "instance.json";
  write_instance_json(instance.string(), in);
  const RunResult res =
      run_cli("solve " + instance.string() + " --solver newton", scratch_);
  EXPECT_EQ(res.code, 2);
}

TEST_F(CliTest, MissingInstanceFails) {
  const RunResult res = run_cli("solve does_not_exist.json", scratch_);
  EXPECT_EQ(res.code, 1);
  EXPECT_NE(res.err.find("does_not_exist.json"), std::string::npos);
}

TEST_F(CliTest, DeterministicRunsProduceIdenticalTraces) {
  std::mt19937_64 rng(84);
  const Instance in = pot_test::random_instance(rng, 6);
  const fs::path instance = scratch_ / "instance.json";
  write_instance_json(instance.string(), in);
  const std::string flags =
      " --solver aspot --epsilon 0.05 --seed 3 --deterministic --out-dir ";
  const RunResult a =
      run_cli("solve " + instance.string() + flags + (scratch_ / "a").string(),
              scratch_);
  const RunResult b =
      run_cli("solve " + instance.string() + flags + (scratch_ / "b").string(),
              scratch_);
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  const std::string trace_a = strip_wall_time(slurp(scratch_ / "a" / "trace.csv"));
  const std::string trace_b = strip_wall_time(slurp(scratch_ / "b" / "trace.csv"));
  EXPECT_EQ(trace_a, trace_b);
  EXPECT_FALSE(trace_a.empty());
}

TEST_F(CliTest, OracleCommandPrintsValue) {
  std::mt19937_64 rng(85);
  const Instance in = pot_test::random_instance(rng, 4);
  const fs::path instance = scratch_ / "instance.json";
  write_instance_json(instance.string(), in);
  const fs::path out_dir = scratch_ / "run";
  const RunResult res = run_cli(
      "oracle " + instance.string() + " --out-dir " + out_dir.string(), scratch_);
  ASSERT_EQ(res.code, 0) << res.err;
  const json doc = json::parse(slurp(out_dir / "oracle.json"));
  EXPECT_NEAR(doc.at("value").get<double>(), solve_exact(in).value, 1e-9);
}

TEST_F(CliTest, CompareEmitsSideBySideTraces) {
  std::mt19937_64 rng(86);
  const Instance in = pot_test::random_instance(rng, 5);
  const fs::path instance = scratch_ / "instance.json";
  write_instance_json(instance.string(), in);
  const fs::path out_dir = scratch_ / "run";
  const RunResult res = run_cli("compare " + instance.string() +
                                    " --solvers aspot,sinkhorn --epsilon 0.1" +
                                    " --out-dir " + out_dir.string(),
                                scratch_);
  ASSERT_EQ(res.code, 0) << res.err;
  EXPECT_TRUE(fs::exists(out_dir / "trace_aspot.csv"));
  EXPECT_TRUE(fs::exists(out_dir / "trace_sinkhorn.csv"));
  const json summary = json::parse(slurp(out_dir / "summary.json"));
  ASSERT_EQ(summary.size(), 2u);
  EXPECT_EQ(summary[0].at("solver"), "aspot");
  EXPECT_EQ(summary[1].at("solver"), "sinkhorn");
}

TEST_F(CliTest, BenchScalingRejectsSingleSize) {
  const RunResult res =
      run_cli("bench-scaling --sizes 50,50 --out-dir " + (scratch_ / "b").string(),
              scratch_);
  EXPECT_EQ(res.code, 1);
  EXPECT_NE(res.err.find("distinct"), std::string::npos);
}

TEST_F(CliTest, ColorTransferIdenticalImagesRoundTrip) {
  // 16x16 image with 8 distinct colors
  Image img;
  img.width = 16;
  img.height = 16;
  img.rgb.resize(16 * 16 * 3);
  const unsigned char palette[8][3] = {{10, 20, 30},   {200, 40, 60},
                                       {90, 140, 220}, {35, 220, 120},
                                       {250, 250, 10}, {120, 60, 200},
                                       {5, 90, 160},   {180, 180, 180}};
  for (int i = 0; i < 256; ++i) {
    const auto& color = palette[i % 8];
    for (int ch = 0; ch < 3; ++ch) img.rgb[3 * i + ch] = color[ch];
  }
  const fs::path src = scratch_ / "src.ppm";
  write_ppm(src.string(), img);
  const fs::path out_dir = scratch_ / "run";
  const RunResult res = run_cli("color-transfer " + src.string() + " " +
                                    src.string() +
                                    " --k 8 --s-frac 0.5 --epsilon 0.001" +
                                    " --max-iter 20000 --out-dir " +
                                    out_dir.string(),
                                scratch_);
  ASSERT_EQ(res.code, 0) << res.err;
  const Image recolored = read_ppm((out_dir / "recolored.ppm").string());
  ASSERT_EQ(recolored.rgb.size(), img.rgb.size());
  int max_diff = 0;
  for (std::size_t i = 0; i < img.rgb.size(); ++i) {
    max_diff = std::max(max_diff,
                        std::abs(static_cast<int>(recolored.rgb[i]) -
                                 static_cast<int>(img.rgb[i])));
  }
  EXPECT_LE(max_diff, 2);  // quantization round-trip only
}

TEST_F(CliTest, RegisterPreAlignedCloudsStopsAfterOneRound) {
  std::mt19937_64 rng(87);
  Matrix pts(30, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 30; ++i) {
    for (int d = 0; d < 3; ++d) pts(i, d) = unit(rng);
  }
  const fs::path cloud = scratch_ / "cloud.xyz";
  write_xyz(cloud.string(), pts);
  const fs::path out_dir = scratch_ / "run";
  const RunResult res = run_cli("register " + cloud.string() + " " +
                                    cloud.string() + " --alpha 1.0 --out-dir " +
                                    out_dir.string(),
                                scratch_);
  ASSERT_EQ(res.code, 0) << res.err;
  const json summary = json::parse(slurp(out_dir / "summary.json"));
  EXPECT_TRUE(summary.at("converged").get<bool>());
  EXPECT_LE(summary.at("registrations").get<int>(), 1);
  EXPECT_TRUE(fs::exists(out_dir / "registered.xyz"));
  EXPECT_TRUE(fs::exists(out_dir / "registrations.csv"));
}

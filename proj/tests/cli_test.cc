#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "cautious/basis.h"
#include "cautious/bounds.h"
#include "cautious/data.h"
#include "cautious/error.h"
#include "cautious/qmi.h"
#include "cli/commands.h"
#include "cli/io.h"

namespace cautious::cli {
namespace {

namespace fs = std::filesystem;

fs::path Scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cautious_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string Slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Outcome {
  int code;
  std::string log;
  std::string err;
};

Outcome Invoke(const std::string& command, Flags flags) {
  std::ostringstream log, err;
  const int code = Dispatch(command, flags, log, err);
  return {code, log.str(), err.str()};
}

Flags With(const fs::path& config, const fs::path& out) {
  Flags f;
  f.config = config.string();
  f.out = out.string();
  return f;
}

void WriteFile(const fs::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

// The small regression example written as config + CSV files.
fs::path LinearConfig(const fs::path& dir, const std::string& grid) {
  WriteFile(dir / "points.csv", "z1,z2\n0,0\n1,0\n0,1\n");
  WriteFile(dir / "values.csv", "y1,y2\n1,1\n0,1\n1,0\n");
  const fs::path config = dir / "config.json";
  WriteFile(config, R"({"task": "bound", "basis": {"family": "affine", "n": 2},
    "data": {"points": "points.csv", "values": "values.csv"},
    "noise": {"type": "energy", "Q": [[1, 0], [0, 1]]},
    "c": [[1, 1], [1, -1]], "soundness_samples": 500, "z_grid": )" + grid + "}");
  return config;
}

TEST(CliIoTest, CsvHeaderCommentsAndRoundTrip) {
  const fs::path dir = Scratch("csv");
  WriteFile(dir / "a.csv", "# comment\nx,y\n1, 2.5\n\n-3,4e-3\n");
  const MatrixXd a = ReadCsv(dir / "a.csv");
  ASSERT_EQ(a.rows(), 2);
  ASSERT_EQ(a.cols(), 2);
  EXPECT_EQ(a(0, 1), 2.5);
  EXPECT_EQ(a(1, 1), 4e-3);

  MatrixXd r(2, 3);
  r << 0.1, 1.0 / 3.0, -2e-300, std::nextafter(1.0, 2.0), 12345.678, 7;
  WriteCsv(dir / "r.csv", r, {"a", "b", "c"});
  EXPECT_EQ(ReadCsv(dir / "r.csv"), r);  // bit-exact

  WriteFile(dir / "bad.csv", "1,2\n3,x\n");
  EXPECT_THROW(ReadCsv(dir / "bad.csv"), Error);
  WriteFile(dir / "ragged.csv", "1,2\n3\n");
  EXPECT_THROW(ReadCsv(dir / "ragged.csv"), Error);
}

TEST(CliIoTest, NoiseAndBasisDescriptors) {
  const PartitionedSymmetric e = ReadNoise(Json::parse(R"({"type": "energy", "Q": 2})"), 2, 3);
  EXPECT_EQ(e.u(), 2);
  EXPECT_EQ(e.full(), EnergyNoiseModel(2.0 * MatrixXd::Identity(2, 2), 3).full());
  const PartitionedSymmetric d =
      ReadNoise(Json::parse(R"({"type": "dense", "Pi": [[1, 0], [0, -1]]})"), 1, 1);
  EXPECT_EQ(d.full(), EnergyNoiseModel(MatrixXd::Ones(1, 1), 1).full());
  EXPECT_THROW(ReadNoise(Json::parse(R"({"type": "energy", "Q": 1, "x": 0})"), 1, 1), Error);
  EXPECT_THROW(ReadNoise(Json::parse(R"({"type": "gauss"})"), 1, 1), Error);

  EXPECT_EQ(ReadBasis(Json::parse(R"({"family": "polynomial", "n": 2, "degree": 2})")).size(), 6);
  EXPECT_EQ(ReadBasis(Json::parse(R"({"family": "trig2d"})")).size(), 6);
  EXPECT_EQ(ReadBasis(Json::parse(R"({"family": "composite", "parts": [
      {"family": "affine", "n": 1}, {"family": "separable_quadratic", "n": 1}]})")).size(), 5);
  EXPECT_THROW(ReadBasis(Json::parse(R"({"family": "rbf", "n": 1})")), Error);
  EXPECT_THROW(ReadBasis(Json::parse(R"({"family": "affine", "n": 1, "degree": 3})")), Error);
}

TEST(CliBoundTest, RegressionExampleRowAtTheOrigin) {
  const fs::path dir = Scratch("bound_origin");
  const Outcome run = Invoke("bound", With(LinearConfig(dir, "[[0, 0]]"), dir / "out"));
  ASSERT_EQ(run.code, kExitOk) << run.err;
  const MatrixXd t = ReadCsv(dir / "out" / "bound.csv");
  ASSERT_EQ(t.rows(), 1);
  // z1, z2, g, g_upper, g_c1, g_c2, U, U_c1, U_c2
  ASSERT_EQ(t.cols(), 9);
  EXPECT_NEAR(t(0, 4), 2.0 + std::sqrt(2.0), 1e-9);
  EXPECT_NEAR(t(0, 7), std::sqrt(2.0), 1e-9);
  // theta_lse^T b(0) = (1, 1) and N | N22 = I: g = sqrt(2) + 1.
  EXPECT_NEAR(t(0, 2), 1.0 + std::sqrt(2.0), 1e-6);
  EXPECT_GE(t(0, 3), t(0, 2) - 1e-9);
  EXPECT_TRUE(fs::exists(dir / "out" / "plot_bound.py"));
  const std::string header = Slurp(dir / "out" / "bound.csv").substr(0, 40);
  EXPECT_EQ(header.rfind("z1,z2,g,g_upper,g_c1,g_c2,U,U_c1,U_c2\n", 0), 0u);
}

TEST(CliBoundTest, EmptyGridGivesAnEmptyTable) {
  const fs::path dir = Scratch("bound_empty");
  const Outcome run = Invoke("bound", With(LinearConfig(dir, "[]"), dir / "out"));
  ASSERT_EQ(run.code, kExitOk) << run.err;
  EXPECT_EQ(Slurp(dir / "out" / "bound.csv"), "z1,z2,g,g_upper,g_c1,g_c2,U,U_c1,U_c2\n");
}

// 10^3 grid points: every row passed the sampled re-check (the command
// refuses to write otherwise) and agrees with an independent evaluation.
TEST(CliBoundTest, ThousandPointGridIsRecheckedAndDeterministic) {
  const fs::path dir = Scratch("bound_grid");
  const fs::path config =
      LinearConfig(dir, R"({"lower": [-2, -1], "upper": [2, 3], "count": [40, 25]})");
  const Outcome a = Invoke("bound", With(config, dir / "a"));
  ASSERT_EQ(a.code, kExitOk) << a.err;
  EXPECT_NE(a.log.find("soundness re-check passed"), std::string::npos);
  const MatrixXd t = ReadCsv(dir / "a" / "bound.csv");
  ASSERT_EQ(t.rows(), 1000);

  for (Eigen::Index i = 0; i < t.rows(); i += 37) {
    const double z1 = t(i, 0), z2 = t(i, 1);
    const double w = std::sqrt((1 - z1 - z2) * (1 - z1 - z2) + z1 * z1 + z2 * z2);
    EXPECT_NEAR(t(i, 4), (1 - z1) + (1 - z2) + std::sqrt(2.0) * w, 1e-9);
    EXPECT_NEAR(t(i, 5), (1 - z1) - (1 - z2) + std::sqrt(2.0) * w, 1e-9);
    EXPECT_NEAR(t(i, 6), w, 1e-9);
  }
  const Outcome b = Invoke("bound", With(config, dir / "b"));
  ASSERT_EQ(b.code, kExitOk);
  EXPECT_EQ(Slurp(dir / "a" / "bound.csv"), Slurp(dir / "b" / "bound.csv"));
}

TEST(CliBoundTest, ExitCodes) {
  const fs::path dir = Scratch("bound_errors");
  const fs::path good = LinearConfig(dir, "[[0, 0]]");

  WriteFile(dir / "unknown.json", R"({"task": "bound", "extra": 1})");
  EXPECT_EQ(Invoke("bound", With(dir / "unknown.json", dir / "o")).code, kExitConfig);
  EXPECT_EQ(Invoke("bound", With(dir / "missing.json", dir / "o")).code, kExitConfig);
  WriteFile(dir / "broken.json", "{\"task\": ");
  EXPECT_EQ(Invoke("bound", With(dir / "broken.json", dir / "o")).code, kExitConfig);
  EXPECT_EQ(Invoke("online", With(good, dir / "o")).code, kExitConfig);
  Flags no_config;
  EXPECT_EQ(Invoke("bound", no_config).code, kExitConfig);
  Flags negative = With(good, dir / "o");
  negative.tol = -1.0;
  EXPECT_EQ(Invoke("bound", negative).code, kExitConfig);

  // Non-finite measurements are a numerical failure.
  WriteFile(dir / "values.csv", "y1,y2\n1,nan\n0,1\n1,0\n");
  const Outcome bad = Invoke("bound", With(good, dir / "nan"));
  EXPECT_EQ(bad.code, kExitNumeric) << bad.err;
  EXPECT_FALSE(fs::exists(dir / "nan" / "bound.csv"));
}

TEST(CliReproduceTest, LinearReportAndFilesFeedTheBoundCommand) {
  const fs::path dir = Scratch("repro_linear");
  Flags f;
  f.out = dir.string();
  f.example = "linear";
  const Outcome run = Invoke("reproduce", f);
  ASSERT_EQ(run.code, kExitOk) << run.err;
  EXPECT_NE(run.log.find("2 + sqrt(2) = 3.41421356237309"), std::string::npos);
  EXPECT_NE(run.log.find("PASS"), std::string::npos);
  EXPECT_EQ(Slurp(dir / "reproduce_linear.txt"), run.log);

  const Outcome bound = Invoke("bound", With(dir / "linear" / "bound_config.json", dir / "b"));
  ASSERT_EQ(bound.code, kExitOk) << bound.err;
  const MatrixXd t = ReadCsv(dir / "b" / "bound.csv");
  EXPECT_NEAR(t(0, 4), 2.0 + std::sqrt(2.0), 1e-9);
  EXPECT_NEAR(t(0, 6), std::sqrt(2.0), 1e-9);
}

TEST(CliReproduceTest, ContractionReportAndContractRoundTrip) {
  const fs::path dir = Scratch("repro_contraction");
  Flags f;
  f.out = dir.string();
  f.example = "contraction";
  const Outcome run = Invoke("reproduce", f);
  ASSERT_EQ(run.code, kExitOk) << run.err;
  EXPECT_NE(run.log.find("sqrt(2): -1.8693"), std::string::npos);
  EXPECT_NE(run.log.find("certified"), std::string::npos);

  const Outcome ct = Invoke("contract", With(dir / "contraction" / "contract_config.json", dir / "c"));
  ASSERT_EQ(ct.code, kExitOk) << ct.err;
  const Json report = Json::parse(Slurp(dir / "c" / "contract.json"));
  EXPECT_TRUE(report["certified"].get<bool>());
  EXPECT_LT(report["osl_estimate"].get<double>(), report["threshold"].get<double>());
  EXPECT_GE(report["threshold"].get<double>(), -2.2);

  // The nonlinear basis has no affine discrete-time route and its global
  // Lipschitz constant is far above 1: no certificate, exit 4.
  Json dt = Json::parse(Slurp(dir / "contraction" / "contract_config.json"));
  dt["mode"] = "discrete";
  WriteFile(dir / "contraction" / "dt.json", dt.dump());
  EXPECT_EQ(Invoke("contract", With(dir / "contraction" / "dt.json", dir / "d")).code,
            kExitNoCertificate);
}

TEST(CliReproduceTest, UavReportMatchesTheRegulateCommandFromFiles) {
  const fs::path dir = Scratch("repro_uav");
  Flags f;
  f.out = dir.string();
  f.example = "uav";
  const Outcome run = Invoke("reproduce", f);
  ASSERT_EQ(run.code, kExitOk) << run.err;
  EXPECT_NE(run.log.find("stability certificate: found"), std::string::npos);
  EXPECT_NE(run.log.find("reference 2.3347"), std::string::npos);

  const Outcome reg = Invoke("regulate", With(dir / "uav" / "regulate_config.json", dir / "r"));
  ASSERT_EQ(reg.code, kExitOk) << reg.err;
  const Json report = Json::parse(Slurp(dir / "r" / "regulate.json"));
  const double bound = report["bound"].get<double>();
  EXPECT_GE(bound, 1.5);
  EXPECT_LE(bound, 3.5);
  // CSV output is round-trip exact, so the numbers agree to the last digit.
  EXPECT_NE(run.log.find("bound g(x*) + L eps-(x*): " + FormatNumber(bound)), std::string::npos);
  EXPECT_NEAR(report["bound"].get<double>(),
              report["delta"].get<double>() +
                  report["lipschitz"].get<double>() * report["epsilon_minus"].get<double>(),
              1e-9 * bound);
}

TEST(CliReproduceTest, UncertifiedSeedExitsWithFour) {
  // Seed 3 draws a realization for which no common Lyapunov matrix exists.
  const fs::path dir = Scratch("repro_uav3");
  Flags f;
  f.out = dir.string();
  f.example = "uav";
  f.seed = 3;
  const Outcome run = Invoke("reproduce", f);
  EXPECT_EQ(run.code, kExitNoCertificate);
  EXPECT_NE(run.log.find("NOT found"), std::string::npos);
}

TEST(CliReproduceTest, UnknownExample) {
  Flags f;
  f.out = Scratch("repro_unknown").string();
  f.example = "pendulum";
  EXPECT_EQ(Invoke("reproduce", f).code, kExitConfig);
}

TEST(CliCertifyTest, AffineRegressionIsConvexWithKnownMinimum) {
  const fs::path dir = Scratch("certify");
  LinearConfig(dir, "[]");
  WriteFile(dir / "certify.json", R"({"task": "certify", "basis": {"family": "affine", "n": 2},
    "data": {"points": "points.csv", "values": "values.csv"},
    "noise": {"type": "energy", "Q": 1}, "c": [[1, 1]],
    "domain": {"lower": [-1, -1], "upper": [1, 1]}})");
  const Outcome run = Invoke("certify", With(dir / "certify.json", dir / "o"));
  ASSERT_EQ(run.code, kExitOk) << run.err;
  const Json r = Json::parse(Slurp(dir / "o" / "certify.json"));
  const Json& item = r["certificates"][0];
  EXPECT_TRUE(item["gc_convex"].get<bool>());
  // 2 (1 - s) + sqrt(2) sqrt((1 - 2 s)^2 + 2 s^2) on the diagonal z = (s, s)
  // is minimal at s = 1/2 with value 2.
  EXPECT_NEAR(item["minimum"]["g_c"].get<double>(), 2.0, 1e-6);
  EXPECT_NEAR(item["minimum"]["z"][0].get<double>(), 0.5, 1e-4);
}

fs::path ZeroNoiseOnline(const fs::path& dir, int rounds) {
  const fs::path config = dir / "online.json";
  WriteFile(config, R"({"task": "online", "problem": {
      "basis": {"family": "separable_quadratic", "n": 1},
      "theta_hat": [[1], [-1], [2]], "noise": {"type": "energy", "Q": 0},
      "domain": {"lower": [-2], "upper": [2]}, "pattern": [[-0.5], [0.5], [0]],
      "z0": [-1.5], "jacobian_bound": 4.123105625617661, "true_minimum": 0.875},
    "noise_mode": "zero", "gap_every": 1, "target_relative": null, "rounds": )" +
                        std::to_string(rounds) + "}");
  return config;
}

TEST(CliOnlineTest, ZeroNoiseClosesTheGapAfterTheFirstRound) {
  const fs::path dir = Scratch("online_zero");
  const Outcome run = Invoke("online", With(ZeroNoiseOnline(dir, 1), dir / "o"));
  ASSERT_EQ(run.code, kExitOk) << run.err;
  const MatrixXd t = ReadCsv(dir / "o" / "trace_001.csv");
  ASSERT_EQ(t.rows(), 2);
  // Noiseless data pin the function down; only the grid slack remains.
  EXPECT_LE(t(1, 3), 2e-4);
  EXPECT_EQ(t(1, 4), 0.0);
  const Json s = Json::parse(Slurp(dir / "o" / "online_summary.json"));
  EXPECT_EQ(s["containment_fraction"].get<double>(), 1.0);
}

TEST(CliOnlineTest, BenchmarkTracesAreMonotoneAndBitIdentical) {
  const fs::path dir = Scratch("online_bench");
  WriteFile(dir / "online.json", R"({"task": "online", "benchmark": true, "trials": 3,
    "rounds": 40, "gap_every": 20, "target_relative": null, "seed": 11})");
  const Outcome a = Invoke("online", With(dir / "online.json", dir / "a"));
  ASSERT_EQ(a.code, kExitOk) << a.err;
  const Outcome b = Invoke("online", With(dir / "online.json", dir / "b"));
  ASSERT_EQ(b.code, kExitOk);
  for (const char* name : {"trace_001.csv", "trace_002.csv", "trace_003.csv",
                           "online_summary.json", "plot_online.py"}) {
    EXPECT_EQ(Slurp(dir / "a" / name), Slurp(dir / "b" / name)) << name;
  }
  const Json s = Json::parse(Slurp(dir / "a" / "online_summary.json"));
  EXPECT_EQ(s["monotone_fraction"].get<double>(), 1.0);
  EXPECT_EQ(s["probe_monotone_fraction"].get<double>(), 1.0);
  EXPECT_EQ(s["containment_fraction"].get<double>(), 1.0);
  EXPECT_EQ(s["per_trial"][2]["seed"].get<int>(), 13);

  const MatrixXd t = ReadCsv(dir / "a" / "trace_002.csv");
  ASSERT_EQ(t.rows(), 41);
  for (Eigen::Index i = 1; i < t.rows(); ++i) {
    EXPECT_LE(t(i, 2), t(i - 1, 2));  // bound
    EXPECT_LE(t(i, 4), t(i - 1, 4));  // certified probe uncertainty
    EXPECT_LE(t(i, 6), t(i, 2) + 1e-12);  // truth below the certified bound
  }

  // A different seed changes the traces.
  Flags other = With(dir / "online.json", dir / "c");
  other.seed = 12;
  ASSERT_EQ(Invoke("online", other).code, kExitOk);
  EXPECT_NE(Slurp(dir / "a" / "trace_001.csv"), Slurp(dir / "c" / "trace_001.csv"));
  EXPECT_EQ(Slurp(dir / "a" / "trace_002.csv"), Slurp(dir / "c" / "trace_001.csv"));
}

TEST(CliOnlineTest, ConfigErrors) {
  const fs::path dir = Scratch("online_errors");
  WriteFile(dir / "both.json", R"({"benchmark": true, "problem": {}})");
  EXPECT_EQ(Invoke("online", With(dir / "both.json", dir / "o")).code, kExitConfig);
  WriteFile(dir / "mode.json", R"({"benchmark": true, "noise_mode": "gaussian"})");
  EXPECT_EQ(Invoke("online", With(dir / "mode.json", dir / "o")).code, kExitConfig);
  // A pattern without the origin in its interior is rejected by the library.
  Json bad = Json::parse(Slurp(ZeroNoiseOnline(dir, 1)));
  bad["problem"]["pattern"] = Json::parse("[[0.5], [1.0], [1.5]]");
  WriteFile(dir / "pattern.json", bad.dump());
  EXPECT_EQ(Invoke("online", With(dir / "pattern.json", dir / "o")).code, kExitConfig);
}

}  // namespace
}  // namespace cautious::cli

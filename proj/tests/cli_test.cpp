// End-to-end checks of the command-line binary, driven through subprocesses.
// The binary path comes in through the NSDF_BIN compile definition.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args, std::string* output = nullptr) {
  const std::string cmd = std::string(NSDF_BIN) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return -1;
  std::string text;
  char buf[512];
  while (std::fgets(buf, sizeof buf, pipe) != nullptr) text += buf;
  const int status = pclose(pipe);
  if (output != nullptr) *output = text;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const std::string& scratch() {
  static const std::string dir = [] {
    const fs::path d = fs::temp_directory_path() / "nsdf_cli_test";
    fs::create_directories(d);
    return d.string();
  }();
  return dir;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (const char c : text) n += c == '\n';
  return n;
}

// a unit icosahedron: the smallest closed manifold mesh worth probing
void write_icosahedron(const std::string& path) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  const double s = 1.0 / std::sqrt(1.0 + phi * phi);
  const double a = s, b = phi * s;
  const double v[12][3] = {{-a, b, 0},  {a, b, 0},  {-a, -b, 0}, {a, -b, 0},
                           {0, -a, b},  {0, a, b},  {0, -a, -b}, {0, a, -b},
                           {b, 0, -a},  {b, 0, a},  {-b, 0, -a}, {-b, 0, a}};
  const int f[20][3] = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10},
                        {0, 10, 11}, {1, 5, 9},  {5, 11, 4},  {11, 10, 2},
                        {10, 7, 6},  {7, 1, 8},  {3, 9, 4},   {3, 4, 2},
                        {3, 2, 6},   {3, 6, 8},  {3, 8, 9},   {4, 9, 5},
                        {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  std::ofstream out(path);
  out.precision(15);
  for (const auto& p : v) out << "v " << p[0] << ' ' << p[1] << ' ' << p[2] << '\n';
  for (const auto& t : f) {
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
}

// one small sphere run shared by every test that needs a trained model
const std::string& shared_checkpoint() {
  static const std::string path = [] {
    const std::string p = scratch() + "/shared_sphere.json";
    const int code = run_cli("train --surface sphere --out " + p +
                             " --epochs 2 --dataset-size 200 --batch-size 50"
                             " --seed 7");
    EXPECT_EQ(code, 0);
    return p;
  }();
  return path;
}

TEST(CliTest, TrainWritesCheckpointAndLog) {
  const std::string ckpt = scratch() + "/train_out.json";
  const std::string csv = scratch() + "/train_log.csv";
  std::string out;
  const int code = run_cli("train --surface sphere --out " + ckpt + " --csv " +
                               csv +
                               " --epochs 2 --dataset-size 150 --batch-size 50"
                               " --seed 3",
                           &out);
  ASSERT_EQ(code, 0) << out;

  const nlohmann::json j = nlohmann::json::parse(slurp(ckpt));
  EXPECT_TRUE(j.contains("layer_dims"));
  EXPECT_TRUE(j.contains("parameters"));
  EXPECT_EQ(j.at("metadata").at("source"), "sphere");

  const std::string log = slurp(csv);
  EXPECT_EQ(log.rfind("epoch,", 0), 0u);
  EXPECT_EQ(count_lines(log), 3u);  // header plus one row per epoch
}

TEST(CliTest, TrainingIsDeterministicUnderSeed) {
  const std::string a = scratch() + "/det_a.json";
  const std::string b = scratch() + "/det_b.json";
  const std::string args = " --epochs 1 --dataset-size 150 --batch-size 50"
                           " --seed 13";
  ASSERT_EQ(run_cli("train --surface sphere --out " + a + args), 0);
  ASSERT_EQ(run_cli("train --surface sphere --out " + b + args), 0);
  EXPECT_EQ(slurp(a), slurp(b));
}

TEST(CliTest, FlagOverridesConfigFile) {
  const std::string cfg = scratch() + "/override.json";
  {
    std::ofstream out(cfg);
    out << R"({"train": {"epochs": 1, "dataset_size": 150,
               "batch": {"m": 50}}})";
  }
  const std::string ckpt = scratch() + "/override_out.json";
  ASSERT_EQ(run_cli("train --surface sphere --out " + ckpt + " --config " +
                    cfg + " --epochs 2 --seed 5"),
            0);
  const nlohmann::json j = nlohmann::json::parse(slurp(ckpt));
  EXPECT_EQ(j.at("metadata").at("trained_epochs"), "2");
}

TEST(CliTest, MissingMeshExitsWithIoCode) {
  std::string out;
  const int code = run_cli("curvature --mesh " + scratch() +
                               "/does_not_exist.obj --method discrete --out " +
                               scratch() + "/never.csv",
                           &out);
  EXPECT_EQ(code, 3) << out;
}

TEST(CliTest, UnknownConfigKeyExitsWithSchemaCode) {
  const std::string cfg = scratch() + "/bad_key.json";
  {
    std::ofstream out(cfg);
    out << R"({"train": {"epochz": 3}})";
  }
  std::string out;
  const int code = run_cli("train --surface sphere --out " + scratch() +
                               "/never.json --config " + cfg,
                           &out);
  EXPECT_EQ(code, 4);
  EXPECT_NE(out.find("unknown config key: train.epochz"), std::string::npos);
}

TEST(CliTest, InvalidShadeModeIsUsageError) {
  std::string out;
  const int code = run_cli("render --surface sphere --out " + scratch() +
                               "/never.ppm --mode sepia",
                           &out);
  EXPECT_EQ(code, 2) << out;
}

TEST(CliTest, NeuralCurvatureRequiresModel) {
  const std::string obj = scratch() + "/ico_guard.obj";
  write_icosahedron(obj);
  std::string out;
  const int code = run_cli("curvature --mesh " + obj +
                               " --method neural --out " + scratch() +
                               "/never.csv",
                           &out);
  EXPECT_EQ(code, 2);
  EXPECT_NE(out.find("--model"), std::string::npos);
}

TEST(CliTest, RenderWritesBinaryPpm) {
  const std::string ppm = scratch() + "/sphere16.ppm";
  std::string out;
  const int code = run_cli("render --surface sphere --out " + ppm +
                               " --width 16 --height 16",
                           &out);
  ASSERT_EQ(code, 0) << out;
  const std::string bytes = slurp(ppm);
  const std::string header = "P6\n16 16\n255\n";
  ASSERT_EQ(bytes.rfind(header, 0), 0u);
  EXPECT_EQ(bytes.size(), header.size() + 16u * 16u * 3u);
  EXPECT_NE(out.find("hits"), std::string::npos);
}

TEST(CliTest, GaussianRenderIsUniformOnSphere) {
  // transfer range centered on the sphere's Gauss curvature 1/0.81, so every
  // hit pixel should come out white except for hit-threshold jitter
  const std::string ppm = scratch() + "/gauss24.ppm";
  ASSERT_EQ(run_cli("render --surface sphere --out " + ppm +
                    " --width 24 --height 24 --mode gaussian"
                    " --transfer-lo 0 --transfer-hi 2.469135802469136"),
            0);
  const std::string bytes = slurp(ppm);
  const std::string header = "P6\n24 24\n255\n";
  ASSERT_EQ(bytes.rfind(header, 0), 0u);
  int hits = 0;
  for (std::size_t i = header.size(); i + 2 < bytes.size(); i += 3) {
    const unsigned char r = bytes[i], g = bytes[i + 1], b = bytes[i + 2];
    if (r == 0 && g == 0 && b == 0) continue;  // background
    ++hits;
    EXPECT_GE(static_cast<int>(r), 253);
    EXPECT_GE(static_cast<int>(g), 253);
    EXPECT_GE(static_cast<int>(b), 253);
  }
  EXPECT_GT(hits, 100);
}

TEST(CliTest, EvalEmitsMetricRow) {
  std::string out;
  const int code = run_cli("eval --surface sphere --model " +
                               shared_checkpoint() +
                               " --n-surface 100 --n-domain 100"
                               " --repetitions 2 --label smoke",
                           &out);
  ASSERT_EQ(code, 0) << out;
  EXPECT_NE(out.find("method,domain_mean,domain_max,"), std::string::npos);
  const std::size_t row = out.find("smoke,");
  ASSERT_NE(row, std::string::npos);
  std::size_t commas = 0;
  for (std::size_t i = row; i < out.size() && out[i] != '\n'; ++i) {
    commas += out[i] == ',';
  }
  EXPECT_EQ(commas, 9u);
}

TEST(CliTest, CurvatureMethodsCoverSameVertices) {
  const std::string obj = scratch() + "/ico.obj";
  write_icosahedron(obj);
  const std::string disc = scratch() + "/ico_disc.csv";
  const std::string neur = scratch() + "/ico_neur.csv";
  ASSERT_EQ(run_cli("curvature --mesh " + obj + " --method discrete --out " +
                    disc),
            0);
  ASSERT_EQ(run_cli("curvature --mesh " + obj + " --method neural --model " +
                    shared_checkpoint() + " --out " + neur),
            0);
  EXPECT_EQ(count_lines(slurp(disc)), 13u);  // header plus 12 vertices
  EXPECT_EQ(count_lines(slurp(neur)), 13u);
  EXPECT_EQ(slurp(neur).rfind("index,x,y,z,kappa1,kappa2,mean,gaussian", 0),
            0u);
}

TEST(CliTest, SampleStatsSumsToDatasetSize) {
  std::string out;
  const int code = run_cli(
      "sample-stats --surface torus --dataset-size 300 --seed 3", &out);
  ASSERT_EQ(code, 0) << out;
  long total = 0;
  std::istringstream lines(out);
  std::string line;
  while (std::getline(lines, line)) {
    for (const char* cls : {"low,", "medium,", "high,"}) {
      if (line.rfind(cls, 0) == 0) {
        total += std::stol(line.substr(line.find(',') + 1));
      }
    }
  }
  EXPECT_EQ(total, 300);
  EXPECT_NE(out.find("total,300,1"), std::string::npos);
}

TEST(CliTest, RbfBaselineEmitsMetricRow) {
  std::string out;
  const int code = run_cli(
      "rbf --surface sphere --n-on 120 --n-off 120 --n-surface 60"
      " --n-domain 60 --repetitions 2 --seed 5 --label rbf",
      &out);
  ASSERT_EQ(code, 0) << out;
  EXPECT_NE(out.find("fitted 240 centers"), std::string::npos);
  EXPECT_NE(out.find("rbf,"), std::string::npos);
}

}  // namespace

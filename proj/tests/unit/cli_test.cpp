#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "screenaim/camera_sim.hpp"
#include "screenaim/cli.hpp"
#include "screenaim/detection.hpp"
#include "screenaim/kv_config.hpp"
#include "screenaim/room.hpp"

using namespace screenaim;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = SCREENAIM_SOURCE_DIR;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "screenaim");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string first_line(const fs::path& p) { return lines(slurp(p)).at(0) + "\n"; }

double field(const std::string& text, const std::string& key) {
  for (const auto& l : lines(text)) {
    if (l.rfind(key + " ", 0) == 0) return std::stod(l.substr(key.size() + 1));
  }
  throw std::runtime_error("missing " + key);
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("screenaim_cli_" + std::to_string(::getpid()) + "_" +
           ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  fs::path dir;
};

}  // namespace

TEST_F(CliTest, SimulatePerpendicular) {
  const auto r = run({"simulate", "--scene", (kSource / "scenes/perpendicular.scene").string(),
                      "--out", (dir / "p").string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_LE(field(r.out, "err_naive"), 2.0 / 640);
  EXPECT_LE(field(r.out, "err_homog"), 1e-9);
  EXPECT_TRUE(fs::exists(dir / "p.ppm"));
  const auto truth = slurp(dir / "p.truth.txt");
  EXPECT_NEAR(field(truth, "dist_diag"), 1.5, 1e-9);
  EXPECT_EQ(field(truth, "visible"), 1);
  const auto frame = read_ppm(dir / "p.ppm");
  EXPECT_EQ(frame.width(), 640);
  EXPECT_EQ(frame.height(), 480);
  EXPECT_NE(slurp(dir / "p.aim.txt").find("TwoColor"), std::string::npos);
}

TEST_F(CliTest, SimulateKeystoneScene) {
  const auto r = run({"simulate", "--scene", (kSource / "scenes/yaw60.scene").string(), "--out",
                      (dir / "k").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_LE(field(r.out, "err_homog"), field(r.out, "err_naive"));
  EXPECT_NEAR(field(slurp(dir / "k.truth.txt"), "view_angle_deg"), 60, 1e-9);
}

TEST_F(CliTest, SimulateCameraBehindScreen) {
  std::ofstream(dir / "behind.scene") << "position = 0.8,0.5,1.5\n";
  const auto r = run({"simulate", "--scene", (dir / "behind.scene").string(), "--out",
                      (dir / "b").string()});
  EXPECT_EQ(r.code, cli::kExitRuntime);
  EXPECT_FALSE(r.err.empty());
}

TEST_F(CliTest, SimulateSeedIsReproducible) {
  const auto scene = (kSource / "scenes/perpendicular.scene").string();
  ASSERT_EQ(run({"simulate", "--scene", scene, "--out", (dir / "a").string(), "--seed", "1"}).code, 0);
  ASSERT_EQ(run({"simulate", "--scene", scene, "--out", (dir / "b").string(), "--seed", "1"}).code, 0);
  ASSERT_EQ(run({"simulate", "--scene", scene, "--out", (dir / "c").string(), "--seed", "2"}).code, 0);
  EXPECT_EQ(slurp(dir / "a.ppm"), slurp(dir / "b.ppm"));
  EXPECT_NE(slurp(dir / "a.ppm"), slurp(dir / "c.ppm"));
  EXPECT_EQ(slurp(dir / "a.truth.txt"), slurp(dir / "c.truth.txt"));
}

TEST_F(CliTest, SweepGrid) {
  const auto csv = dir / "grid.csv";
  const auto r = run({"sweep", "--scenes", (kSource / "scenes/grid.list").string(), "--out",
                      csv.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "rows 12\n");
  const auto rows = lines(slurp(csv));
  ASSERT_EQ(rows.size(), 13u);
  EXPECT_EQ(rows[0] + "\n", slurp(kSource / "tests/golden/sweep_header.csv"));
  std::map<std::string, double> naive;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_EQ(std::count(rows[i].begin(), rows[i].end(), ','), 4) << rows[i];
    const auto cells = split(rows[i], ',');
    naive[cells[0]] = std::stod(cells[3]);
  }
  // Accuracy degrades with distance.
  EXPECT_GT(naive.at("d5_yaw0"), naive.at("d1_yaw0"));
}

TEST_F(CliTest, SweepEmptyList) {
  std::ofstream(dir / "empty.list") << "# nothing\n";
  const auto r = run({"sweep", "--scenes", (dir / "empty.list").string(), "--out",
                      (dir / "e.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir / "e.csv"), slurp(kSource / "tests/golden/sweep_header.csv"));
}

TEST_F(CliTest, ReplayDirectory) {
  const auto frames = dir / "frames";
  fs::create_directories(frames);
  for (const char* name : {"perpendicular", "yaw60", "distractor"}) {
    const auto scene = load_scene(kSource / "scenes" / (std::string(name) + ".scene"));
    write_ppm(frames / (std::string(name) + ".ppm"), render(scene).frame);
  }
  write_ppm(frames / "zz_black.ppm", Frame(64, 48));
  std::ofstream(frames / "zz_broken.ppm") << "P6\n4 4\n255\nxx";
  std::ofstream(frames / "notes.txt") << "ignored\n";

  const auto csv = dir / "replay.csv";
  const auto r = run({"replay", "--dir", frames.string(), "--out", csv.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "rows 5\n");
  const auto rows = lines(slurp(csv));
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(first_line(csv), slurp(kSource / "tests/golden/replay_header.csv"));
  const char* names[] = {"distractor", "perpendicular", "yaw60"};
  for (int i = 0; i < 3; ++i) {
    const auto cells = split(rows[static_cast<std::size_t>(i + 1)], ',');
    ASSERT_EQ(cells.size(), 4u);
    EXPECT_EQ(cells[0], std::string(names[i]) + ".ppm");
    const auto direct = detect_aim(read_ppm(frames / cells[0]), DetectionConfig{});
    EXPECT_NEAR(std::stod(cells[1]), direct.x_sr, 1e-8);
    EXPECT_NEAR(std::stod(cells[2]), direct.y_sr, 1e-8);
    EXPECT_EQ(cells[3], to_string(direct.confidence));
  }
  EXPECT_EQ(rows[4], "zz_black.ppm,,,NoScreenDetected");
  EXPECT_EQ(rows[5], "zz_broken.ppm,,,FrameError");
}

TEST_F(CliTest, ReplayEmptyDirectory) {
  const auto r = run({"replay", "--dir", dir.string(), "--out", (dir / "r.csv").string()});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(slurp(dir / "r.csv"), slurp(kSource / "tests/golden/replay_header.csv"));
}

TEST_F(CliTest, BenchReportsThroughput) {
  const auto r = run({"bench", "--width", "320", "--height", "240", "--seconds", "0.2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(r.out).at(0), "resolution 320x240");
  EXPECT_GT(field(r.out, "frames"), 0);
  EXPECT_GT(field(r.out, "fps"), 0);
}

TEST_F(CliTest, BenchSmallerFramesAreFaster) {
  const auto small = run({"bench", "--width", "320", "--height", "240", "--seconds", "0.3"});
  const auto large = run({"bench", "--width", "640", "--height", "480", "--seconds", "0.3"});
  ASSERT_EQ(small.code, 0);
  ASSERT_EQ(large.code, 0);
  EXPECT_GE(field(small.out, "fps"), field(large.out, "fps"));
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run({}).code, cli::kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"bench", "--seconds", "0"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"simulate", "--scene", "x"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"replay", "--dir", (dir / "missing").string(), "--out", "x.csv"}).code,
            cli::kExitUsage);
  EXPECT_EQ(run({"loadtest", "--mode", "spray"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"loadtest", "--addr", "nohost"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"--help"}).code, cli::kExitOk);
}

TEST_F(CliTest, RuntimeErrors) {
  auto r = run({"simulate", "--scene", (dir / "nope.scene").string(), "--out",
                (dir / "x").string()});
  EXPECT_EQ(r.code, cli::kExitRuntime);
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u);
  std::ofstream(dir / "bad.scene") << "yaw_deg = 10\nwobble = 3\n";
  r = run({"simulate", "--scene", (dir / "bad.scene").string(), "--out", (dir / "x").string()});
  EXPECT_EQ(r.code, cli::kExitRuntime);
  EXPECT_NE(r.err.find("wobble"), std::string::npos) << r.err;
}

TEST(MetricsSchema, MatchesGolden) {
  server::Room room{server::RoomConfig{}};
  struct Null : server::ClientSink {
    bool send(server::Bytes) override { return true; }
    void close(std::string_view) override {}
  };
  room.join(protocol::Hello{}, std::make_shared<Null>(), 0);
  std::string keys;
  for (const auto& l : lines(room.metrics_snapshot(100).to_text())) {
    keys += l.substr(0, l.find(' ')) + "\n";
  }
  EXPECT_EQ(keys, slurp(kSource / "tests/golden/metrics_keys.txt"));
}

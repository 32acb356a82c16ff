#include <gtest/gtest.h>
#include <sys/wait.h>

#include <fstream>
#include <random>
#include <sstream>

#include "dragwarp/io.hpp"
#include "dragwarp/sampler.hpp"
#include "support.hpp"

namespace dragwarp {
namespace {

using testing::TempDir;

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run run_cli(const TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd = std::string("'") + DRAGWARP_CLI + "' " + args + " >'" + out.string() +
                          "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    std::mt19937_64 rng(8);
    image_ = testing::random_image(rng, 12, 16);
    write_file(dir_ / "in.png", grid_to_png(image_));
    FeatureGrid mask(12, 16, 1, 0.0);
    for (int y = 2; y < 8; ++y) {
      for (int x = 3; x < 9; ++x) mask.cell(x, y)[0] = 1.0;
    }
    write_file(dir_ / "mask.png", grid_to_png(mask));
    write_text(dir_ / "null.json", R"({"pairs": [{"handle": [5, 5], "target": [5, 5]}], "mask": "mask.png"})");
    write_text(dir_ / "drag.json", R"({"pairs": [{"handle": [5, 5], "target": [9, 6]}], "mask": "mask.png"})");
    z0_ = testing::random_grid(rng, 5, 5, 4);
    write_file(dir_ / "z0.fgrid", write_fgrid(z0_));
  }

  std::string path(const std::string& name) const { return "'" + (dir_ / name).string() + "'"; }

  TempDir dir_;
  FeatureGrid image_;
  FeatureGrid z0_;
};

TEST_F(Cli, WarpNullDragReproducesInput) {
  const auto r = run_cli(dir_, "warp --image " + path("in.png") + " --drags " + path("null.json") +
                                   " --out " + path("out.fgrid"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_file(dir_ / "out.png"), grid_to_png(image_));
  EXPECT_EQ(read_file(dir_ / "out.fgrid"), write_fgrid(image_));
  EXPECT_NE(r.out.find(R"("voids_filled":0)"), std::string::npos);
}

TEST_F(Cli, WarpWithOverridesSucceeds) {
  const auto r = run_cli(dir_, "warp --image " + path("in.png") + " --drags " + path("drag.json") +
                                   " --param beta=0.5 --param mu=auto --param d_shield=inf --out " +
                                   path("out.fgrid") + " --png " + path("p.png"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir_ / "p.png"));
  EXPECT_NE(r.out.find(R"("moved":36)"), std::string::npos);
}

TEST_F(Cli, WarpUserErrorsExitTwoWithJson) {
  auto r = run_cli(dir_, "warp --image " + path("in.png") + " --drags " + path("drag.json") +
                             " --param foo=1 --out " + path("out.fgrid"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find(R"("error":"unknown_key")"), std::string::npos);

  write_text(dir_ / "nomask.json", R"({"pairs": [{"handle": [5, 5], "target": [9, 6]}], "mask": "gone.png"})");
  r = run_cli(dir_, "warp --image " + path("in.png") + " --drags " + path("nomask.json") + " --out " +
                        path("out.fgrid"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find(R"("error":"mask_not_found")"), std::string::npos);
}

TEST_F(Cli, ArgumentErrorsExitTwo) {
  EXPECT_EQ(run_cli(dir_, "").code, 2);
  EXPECT_EQ(run_cli(dir_, "warp --image x.png").code, 2);
  EXPECT_EQ(run_cli(dir_, "frobnicate").code, 2);
  EXPECT_EQ(run_cli(dir_, "--help").code, 0);
}

TEST_F(Cli, SampleStepsZeroWritesNoisedStart) {
  write_text(dir_ / "config.json", R"({"seed": 3})");
  const auto r = run_cli(dir_, "sample --config " + path("config.json") + " --z0 " + path("z0.fgrid") +
                                   " --prompt-src 'a cat' --prompt-tgt 'a cat' --steps 0 --out " +
                                   path("s.fgrid"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_file(dir_ / "s.fgrid"), write_fgrid(forward_noise(z0_, build_schedule(15), 0.7, 3).z));
}

TEST_F(Cli, SampleRejectsBadConfigAndSteps) {
  write_text(dir_ / "bad.json", R"({"seed": 3, "temperature": 1})");
  auto r = run_cli(dir_, "sample --config " + path("bad.json") + " --z0 " + path("z0.fgrid") + " --out " +
                             path("s.fgrid"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find(R"("error":"unknown_key")"), std::string::npos);
  r = run_cli(dir_, "sample --z0 " + path("z0.fgrid") + " --steps -2 --out " + path("s.fgrid"));
  EXPECT_EQ(r.code, 2);
}

TEST_F(Cli, SampleDumpsAttention) {
  const auto r = run_cli(dir_, "sample --z0 " + path("z0.fgrid") +
                                   " --prompt-src 'a red car' --prompt-tgt 'a blue car' --steps 2"
                                   " --dump-attention " + path("attn") + " --png " + path("s.png") +
                                   " --out " + path("s.fgrid"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir_ / "attn" / "step01_ref.fgrid"));
  EXPECT_TRUE(std::filesystem::exists(dir_ / "attn" / "step02_tgt.fgrid"));
  EXPECT_FALSE(std::filesystem::exists(dir_ / "attn" / "step03_src.fgrid"));
  EXPECT_EQ(r.out, "{\"start\":10,\"steps\":2}\n");
}

TEST_F(Cli, DepthRescaleAndSchedule) {
  auto r = run_cli(dir_, "depth-rescale --in " + path("in.png") + " --height 6 --width 8 --out " +
                             path("d.fgrid"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto d = read_depth_fgrid(read_file(dir_ / "d.fgrid"));
  EXPECT_EQ(d.height, 6);
  EXPECT_EQ(d.width, 8);

  r = run_cli(dir_, "schedule");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("# alpha_bar"), std::string::npos);
  EXPECT_NE(r.out.find("\n1 10 0 0.5\n"), std::string::npos);
  EXPECT_NE(r.out.find("\n10 1 0.90000000000000002 0.90000000000000002\n"), std::string::npos);
}

}  // namespace
}  // namespace dragwarp

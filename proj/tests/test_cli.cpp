#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "mvspl/cli.hpp"
#include "mvspl/scene_io.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace mvspl;
using mvspl::testing::TempDir;

namespace {

int run(std::vector<std::string> args) {
  std::vector<const char*> argv = {"mvspl"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data());
}

bool same_file_bytes(const fs::path& a, const fs::path& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa || !fb) return false;
  std::vector<char> ba((std::istreambuf_iterator<char>(fa)),
                       std::istreambuf_iterator<char>());
  std::vector<char> bb((std::istreambuf_iterator<char>(fb)),
                       std::istreambuf_iterator<char>());
  return ba == bb;
}

// One small scene shared across the CLI cases (generation is deterministic).
struct CliFixture {
  TempDir tmp{"cli"};
  std::string scene;

  CliFixture() {
    scene = (tmp.path() / "scene").string();
    REQUIRE(run({"synth", "--out", scene, "--surface", "plane", "--texture",
                 "noise", "--views", "4", "--width", "128", "--height", "96",
                 "--focal", "480", "--ring-radius", "200",
                 "--low_res_divisor", "2"}) == 0);
  }
};

}  // namespace

TEST_CASE("dispatch: usage errors exit with code 1") {
  CHECK(run({"frobnicate"}) == 1);
  CHECK(run({}) == 1);
  CHECK(run({"infer"}) == 1);  // missing required options
}

TEST_CASE("dispatch: missing scene directory exits with code 2") {
  TempDir tmp("cli_missing");
  CHECK(run({"infer", "--scene", tmp.str() + "/nope", "--out",
             tmp.str() + "/out"}) == 2);
}

TEST_CASE("dispatch: filter with a non-positive r_max exits with code 1") {
  CliFixture fx;
  CHECK(run({"filter", "--scene", fx.scene, "--depth", fx.scene + "/gt",
             "--out", fx.tmp.str() + "/f", "--r_max", "0",
             "--low_res_divisor", "2"}) == 1);
}

TEST_CASE("CLI pipeline: stages compose exactly like iterate") {
  CliFixture fx;
  const std::string root = fx.tmp.str();
  std::vector<std::string> cfg_flags = {"--low_res_divisor", "2"};

  auto with_cfg = [&](std::vector<std::string> args) {
    args.insert(args.end(), cfg_flags.begin(), cfg_flags.end());
    return args;
  };

  // iterate, one round, keeping stage outputs
  REQUIRE(run(with_cfg({"iterate", "--scene", fx.scene, "--out", root + "/it",
                        "-T", "1", "--keep-intermediate"})) == 0);

  // the same round as chained subcommands
  REQUIRE(run(with_cfg({"infer", "--scene", fx.scene, "--gate", "--out",
                        root + "/init"})) == 0);
  REQUIRE(run(with_cfg({"infer", "--scene", fx.scene, "--prior", root + "/init",
                        "--out", root + "/d1"})) == 0);
  REQUIRE(run(with_cfg({"refine", "--scene", fx.scene, "--prior", root + "/d1",
                        "--out", root + "/d1r"})) == 0);
  REQUIRE(run(with_cfg({"filter", "--scene", fx.scene, "--depth", root + "/d1r",
                        "--out", root + "/d1f"})) == 0);
  REQUIRE(run(with_cfg({"fuse", "--scene", fx.scene, "--depth", root + "/d1f",
                        "--out", root + "/d1m"})) == 0);
  REQUIRE(run(with_cfg({"render", "--scene", fx.scene, "--mesh",
                        root + "/d1m/mesh.ply", "--out", root + "/d1l"})) == 0);

  for (int v = 0; v < 4; ++v) {
    std::string name = view_name(v) + ".pfm";
    CAPTURE(name);
    CHECK(same_file_bytes(root + "/it/iter1/infer/" + name,
                          root + "/d1/" + name));
    CHECK(same_file_bytes(root + "/it/iter1/refine/" + name,
                          root + "/d1r/" + name));
    CHECK(same_file_bytes(root + "/it/iter1/filter/" + name,
                          root + "/d1f/" + name));
    CHECK(same_file_bytes(root + "/it/labels/" + name, root + "/d1l/" + name));
  }
  CHECK(same_file_bytes(root + "/it/iter1/cloud.ply", root + "/d1m/cloud.ply"));
  CHECK(same_file_bytes(root + "/it/iter1/mesh.ply", root + "/d1m/mesh.ply"));

  SUBCASE("iterate is deterministic across runs") {
    REQUIRE(run(with_cfg({"iterate", "--scene", fx.scene, "--out",
                          root + "/it2", "-T", "1"})) == 0);
    for (int v = 0; v < 4; ++v)
      CHECK(same_file_bytes(root + "/it/labels/" + view_name(v) + ".pfm",
                            root + "/it2/labels/" + view_name(v) + ".pfm"));
  }
  SUBCASE("existing outputs need --overwrite") {
    CHECK(run(with_cfg({"infer", "--scene", fx.scene, "--gate", "--out",
                        root + "/init"})) == 2);
    CHECK(run(with_cfg({"infer", "--scene", fx.scene, "--gate", "--out",
                        root + "/init", "--overwrite"})) == 0);
  }
  SUBCASE("eval runs on the fused cloud") {
    // reference cloud from the ground-truth depths
    REQUIRE(run(with_cfg({"fuse", "--scene", fx.scene, "--depth",
                          fx.scene + "/gt", "--out", root + "/gtc"})) == 0);
    CHECK(run({"eval", "--rec", root + "/d1m/cloud.ply", "--ref",
               root + "/gtc/cloud.ply", "--tau", "0.5", "--format", "kv"}) == 0);
  }
  SUBCASE("score reports the loss breakdown") {
    CHECK(run(with_cfg({"score", "--scene", fx.scene, "--format", "kv"})) == 0);
  }
}

TEST_CASE("iterate with ground truth emits metric rows") {
  CliFixture fx;
  CHECK(run({"iterate", "--scene", fx.scene, "--out", fx.tmp.str() + "/itgt",
             "-T", "1", "--gt", fx.scene, "--low_res_divisor", "2",
             "--format", "kv"}) == 0);
  std::ifstream report(fx.tmp.str() + "/itgt/report.txt");
  REQUIRE(report.good());
  std::string line;
  int rows = 0;
  bool saw_fscore = false;
  while (std::getline(report, line)) {
    ++rows;
    if (line.find("f_score=") != std::string::npos) saw_fscore = true;
  }
  CHECK(rows == 2);
  CHECK(saw_fscore);
}

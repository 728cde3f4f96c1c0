#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "mvspl/scene_io.hpp"
#include "mvspl/synthetic.hpp"
#include "test_support.hpp"

using namespace mvspl;
using mvspl::testing::TempDir;
using mvspl::testing::random_camera;

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("load_camera: identity extrinsic example") {
  TempDir tmp("cam");
  std::string path = tmp.str() + "/cam.txt";
  write_text(path,
             "extrinsic\n"
             "1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\n\n"
             "intrinsic\n"
             "100 0 50\n0 100 50\n0 0 1\n\n"
             "2.0 0.05\n");
  Camera cam = load_camera(path);
  CHECK(cam.R.isApprox(Eigen::Matrix3d::Identity()));
  CHECK(cam.t.norm() == doctest::Approx(0.0));
  CHECK(cam.K(0, 0) == doctest::Approx(100.0));
  CHECK(cam.d_min == doctest::Approx(2.0));
  CHECK(cam.d_max == doctest::Approx(2.0 + 191 * 0.05));
}

TEST_CASE("load_camera: malformed files name the problem") {
  TempDir tmp("cam_bad");
  std::string path = tmp.str() + "/cam.txt";
  SUBCASE("3x3 extrinsic block") {
    write_text(path,
               "extrinsic\n1 0 0\n0 1 0\n0 0 1\n\n"
               "intrinsic\n100 0 50\n0 100 50\n0 0 1\n\n2.0 0.05\n");
    CHECK_THROWS_AS(load_camera(path), IoError);
  }
  SUBCASE("non-numeric token") {
    write_text(path, "extrinsic\n1 0 0 zero\n");
    CHECK_THROWS_WITH_AS(load_camera(path), doctest::Contains("line 2"),
                         IoError);
  }
  SUBCASE("non-orthonormal rotation") {
    write_text(path,
               "extrinsic\n2 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\n\n"
               "intrinsic\n100 0 50\n0 100 50\n0 0 1\n\n2.0 0.05\n");
    CHECK_THROWS_AS(load_camera(path), IoError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_camera(path + "x"), IoError); }
}

TEST_CASE("camera save/load round trip on randomized valid cameras") {
  TempDir tmp("cam_rt");
  std::mt19937_64 rng(21);
  for (int i = 0; i < 25; ++i) {
    Camera cam = random_camera(rng);
    std::string path = tmp.str() + "/cam" + std::to_string(i) + ".txt";
    save_camera(cam, path);
    Camera back = load_camera(path);
    CHECK((back.R - cam.R).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((back.t - cam.t).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((back.K - cam.K).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(std::abs(back.d_min - cam.d_min) <= 1e-9);
    CHECK(std::abs(back.d_max - cam.d_max) <= 1e-9 * cam.d_max);
  }
}

TEST_CASE("PFM depth maps") {
  TempDir tmp("pfm");
  std::string path = tmp.str() + "/d.pfm";

  SUBCASE("uniform 2x2 map is all valid") {
    DepthMap d(2, 2);
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 2; ++x) d.set(x, y, 1.0f);
    save_depth_pfm(d, path);
    DepthMap back = load_depth_pfm(path);
    REQUIRE(back.width == 2);
    REQUIRE(back.height == 2);
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 2; ++x) {
        CHECK(back.is_valid(x, y));
        CHECK(back.at(x, y) == 1.0f);
      }
  }
  SUBCASE("non-positive entries load as invalid") {
    Image g(2, 1, 1);
    g.data = {-1.0f, 3.5f};
    save_grid_pfm(g, path);
    DepthMap back = load_depth_pfm(path);
    CHECK_FALSE(back.is_valid(0, 0));
    CHECK(back.is_valid(1, 0));
    CHECK(back.at(1, 0) == 3.5f);
  }
  SUBCASE("masked pixels stay masked through a round trip") {
    DepthMap d(3, 2);
    d.set(0, 0, 2.0f);
    d.set(2, 1, 4.0f);
    save_depth_pfm(d, path);
    DepthMap back = load_depth_pfm(path);
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 3; ++x)
        CHECK(back.is_valid(x, y) == d.is_valid(x, y));
  }
  SUBCASE("round trip is bit exact for finite grids") {
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<float> u(0.001f, 900.f);
    DepthMap d(17, 9);
    for (int y = 0; y < 9; ++y)
      for (int x = 0; x < 17; ++x) d.set(x, y, u(rng));
    save_depth_pfm(d, path);
    DepthMap back = load_depth_pfm(path);
    CHECK(std::memcmp(back.depth.data(), d.depth.data(),
                      d.depth.size() * sizeof(float)) == 0);
  }
  SUBCASE("header mismatch") {
    write_text(path, "PF\n2 2\n-1.0\n");
    CHECK_THROWS_AS(load_depth_pfm(path), IoError);
  }
  SUBCASE("truncated payload") {
    std::ofstream out(path, std::ios::binary);
    out << "Pf\n4 4\n-1.0\n";
    float v = 1.f;
    out.write(reinterpret_cast<char*>(&v), 4);
    out.close();
    CHECK_THROWS_AS(load_depth_pfm(path), IoError);
  }
}

TEST_CASE("PLY point clouds and meshes") {
  TempDir tmp("ply");

  SUBCASE("empty cloud has vertex count 0") {
    PointCloud empty;
    std::string path = tmp.str() + "/empty.ply";
    save_pointcloud_ply(empty, path);
    PointCloud back = load_pointcloud_ply(path);
    CHECK(back.size() == 0);
  }
  SUBCASE("one triangle: 3 vertices, 1 face, indices 0 1 2") {
    TriangleMesh mesh;
    mesh.vertices = {{0, 0, 2}, {1, 0, 2}, {0, 1, 2}};
    mesh.triangles = {{0, 1, 2}};
    for (bool ascii : {true, false}) {
      std::string path = tmp.str() + (ascii ? "/t_a.ply" : "/t_b.ply");
      save_mesh_ply(mesh, path, ascii);
      TriangleMesh back = load_mesh_ply(path);
      REQUIRE(back.vertices.size() == 3);
      REQUIRE(back.triangles.size() == 1);
      CHECK(back.triangles[0] == std::array<int, 3>{0, 1, 2});
    }
  }
  SUBCASE("round trip preserves order and coordinates") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-800.0, 800.0);
    PointCloud cloud;
    for (int i = 0; i < 257; ++i) {
      cloud.points.emplace_back(u(rng), u(rng), u(rng));
      cloud.view_ids.push_back(i % 5);
      cloud.pixels.emplace_back(i % 31, i % 17);
    }
    for (bool ascii : {true, false}) {
      std::string path = tmp.str() + (ascii ? "/c_a.ply" : "/c_b.ply");
      save_pointcloud_ply(cloud, path, ascii);
      PointCloud back = load_pointcloud_ply(path);
      REQUIRE(back.size() == cloud.size());
      for (size_t i = 0; i < cloud.size(); ++i) {
        CHECK((back.points[i] - cloud.points[i]).norm() <= 1e-6);
        CHECK(back.view_ids[i] == cloud.view_ids[i]);
        CHECK(back.pixels[i] == cloud.pixels[i]);
      }
    }
  }
  SUBCASE("NaN coordinates are rejected") {
    PointCloud cloud;
    cloud.points.emplace_back(0.0, std::nan(""), 1.0);
    CHECK_THROWS_AS(save_pointcloud_ply(cloud, tmp.str() + "/nan.ply"),
                    std::invalid_argument);
  }
  SUBCASE("triangle index out of range is rejected") {
    TriangleMesh mesh;
    mesh.vertices = {{0, 0, 0}};
    mesh.triangles = {{0, 0, 5}};
    CHECK_THROWS_AS(save_mesh_ply(mesh, tmp.str() + "/bad.ply"),
                    std::invalid_argument);
  }
}

TEST_CASE("images: PPM round trip and PNG decoding") {
  TempDir tmp("img");
  SUBCASE("PPM round trip") {
    Image img(5, 3, 3);
    std::mt19937_64 rng(24);
    std::uniform_int_distribution<int> u(0, 255);
    for (auto& v : img.data) v = u(rng) / 255.f;
    std::string path = tmp.str() + "/img.ppm";
    save_image_ppm(img, path);
    Image back = load_image(path);
    REQUIRE(back.same_shape(img));
    for (size_t i = 0; i < img.data.size(); ++i)
      CHECK(back.data[i] == doctest::Approx(img.data[i]).epsilon(1e-6));
  }
  SUBCASE("PNG decodes to normalized RGB") {
    static const unsigned char png_bytes[] = {
        137, 80, 78, 71, 13, 10, 26, 10, 0, 0, 0, 13, 73, 72, 68, 82, 0, 0,
        0, 4, 0, 0, 0, 2, 8, 2, 0, 0, 0, 240, 202, 234, 52, 0, 0, 0, 35, 73,
        68, 65, 84, 120, 156, 99, 248, 207, 192, 192, 240, 159, 129, 129, 225,
        255, 255, 255, 255, 25, 24, 24, 24, 26, 26, 26, 184, 68, 228, 78, 164,
        24, 1, 0, 124, 24, 9, 21, 32, 245, 121, 217, 0, 0, 0, 0, 73, 69, 78,
        68, 174, 66, 96, 130};
    std::string path = tmp.str() + "/img.png";
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(png_bytes), sizeof(png_bytes));
    out.close();
    Image img = load_image(path);
    REQUIRE(img.width == 4);
    REQUIRE(img.height == 2);
    REQUIRE(img.channels == 3);
    CHECK(img.at(0, 0, 0) == doctest::Approx(1.0));
    CHECK(img.at(0, 0, 1) == doctest::Approx(0.0));
    CHECK(img.at(1, 0, 1) == doctest::Approx(1.0));
    CHECK(img.at(1, 1, 0) == doctest::Approx(128 / 255.0));
    CHECK(img.at(3, 1, 0) == doctest::Approx(200 / 255.0));
  }
  SUBCASE("unsupported extension") {
    CHECK_THROWS_AS(load_image(tmp.str() + "/x.bmp"), IoError);
  }
}

TEST_CASE("config parsing") {
  TempDir tmp("cfg");
  std::string path = tmp.str() + "/conf.txt";
  SUBCASE("defaults satisfy the invariants") {
    Config cfg;
    CHECK_NOTHROW(cfg.validate());
  }
  SUBCASE("keys override defaults; comments are ignored") {
    write_text(path,
               "# pipeline setup\n"
               "hypotheses_coarse = 32\n"
               "r_max = 0.75  # scene units\n"
               "vote_inclusive = true\n");
    Config cfg = load_config(path);
    CHECK(cfg.hypotheses_coarse == 32);
    CHECK(cfg.r_max == doctest::Approx(0.75));
    CHECK(cfg.vote_inclusive);
    CHECK(cfg.hypotheses_fine == 8);  // untouched default
  }
  SUBCASE("unknown keys are an error") {
    write_text(path, "hypothese_coarse = 32\n");
    CHECK_THROWS_WITH_AS(load_config(path), doctest::Contains("unknown key"),
                         IoError);
  }
  SUBCASE("invariant violations are rejected") {
    write_text(path, "softmax_temperature = 0\n");
    CHECK_THROWS_AS(load_config(path), std::exception);
  }
  SUBCASE("save/load round trip") {
    Config cfg;
    cfg.iterations = 5;
    cfg.r_max = 1.25;
    save_config(cfg, path);
    Config back = load_config(path);
    CHECK(back.iterations == 5);
    CHECK(back.r_max == doctest::Approx(1.25));
  }
}

TEST_CASE("pair list round trip and validation") {
  TempDir tmp("pair");
  std::string path = tmp.str() + "/pair.txt";
  std::vector<std::vector<int>> pairs = {{1, 2}, {0, 2}, {1, 0}};
  save_pair_list(pairs, path);
  CHECK(load_pair_list(path) == pairs);

  write_text(path, "2\n0\n1 5 1.0\n1\n1 0 1.0\n");
  CHECK_THROWS_AS(load_pair_list(path), IoError);  // source out of range
}

TEST_CASE("scene directory loading") {
  TempDir tmp("scene");
  SyntheticSceneSpec spec;
  spec.width = 64;
  spec.height = 32;
  spec.focal = 240.0;
  spec.views = 3;
  SyntheticScene synth = generate_synthetic_scene(spec);
  write_synthetic_scene(synth, tmp.str(), 2);

  Scene scene = load_scene(tmp.str(), 2);
  CHECK(scene.manifest.view_count() == 3);
  CHECK(scene.manifest.high_width == 64);
  CHECK(scene.manifest.low_width == 32);
  CHECK(scene.manifest.pair_list == synth.pair_list);
  CHECK(scene.images[0].channels == 3);
  CHECK(scene.cameras[1].d_min == doctest::Approx(synth.cameras[1].d_min));

  SUBCASE("missing directory fails with the path in the message") {
    CHECK_THROWS_WITH_AS(load_scene(tmp.str() + "/nope", 2),
                         doctest::Contains("nope"), IoError);
  }
  SUBCASE("indivisible low resolution fails early") {
    CHECK_THROWS_AS(load_scene(tmp.str(), 7), IoError);
  }
}

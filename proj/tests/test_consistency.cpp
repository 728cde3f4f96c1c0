#include <doctest.h>

#include <cmath>
#include <random>

#include "mvspl/consistency.hpp"
#include "mvspl/synthetic.hpp"
#include "test_support.hpp"

using namespace mvspl;
using mvspl::testing::example_camera;

namespace {

DepthMap constant_depth(int w, int h, float d) {
  DepthMap out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.set(x, y, d);
  return out;
}

const double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TEST_CASE("reprojection error: worked example, r in {0, 0.1}") {
  Camera ref = example_camera();
  Camera src = example_camera();
  src.t = Eigen::Vector3d(1, 0, 0);  // T_ij = (1,0,0)

  DepthMap d_ref(101, 101);
  d_ref.set(50, 50, 2.0f);

  SUBCASE("matching source depth gives r = 0") {
    DepthMap d_src = constant_depth(101, 101, 2.0f);
    ReprojectionErrorMap err = reprojection_error(d_ref, d_src, ref, src, kInf);
    REQUIRE(err.is_valid(50, 50));
    CHECK(err.at(50, 50) == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("source depth 2.1 gives r = 0.1") {
    DepthMap d_src = constant_depth(101, 101, 2.1f);
    ReprojectionErrorMap err = reprojection_error(d_ref, d_src, ref, src, kInf);
    REQUIRE(err.is_valid(50, 50));
    CHECK(err.at(50, 50) == doctest::Approx(0.1).epsilon(1e-5));
  }
  SUBCASE("invalid reference pixels propagate") {
    DepthMap d_src = constant_depth(101, 101, 2.0f);
    ReprojectionErrorMap err = reprojection_error(d_ref, d_src, ref, src, kInf);
    CHECK_FALSE(err.is_valid(10, 10));  // no reference depth there
  }
  SUBCASE("projections leaving the source view are masked") {
    DepthMap d_ref2(101, 101);
    d_ref2.set(100, 50, 2.0f);  // projects to u = 150, outside
    DepthMap d_src = constant_depth(101, 101, 2.0f);
    ReprojectionErrorMap err = reprojection_error(d_ref2, d_src, ref, src, kInf);
    CHECK_FALSE(err.is_valid(100, 50));
  }
}

TEST_CASE("reprojection error: ground-truth renders are self-consistent") {
  SyntheticSceneSpec spec;
  spec.surface = SyntheticSceneSpec::Surface::kPlane;
  spec.views = 3;
  spec.width = 96;
  spec.height = 64;
  spec.focal = 360.0;
  SyntheticScene scene = generate_synthetic_scene(spec);
  ReprojectionErrorMap err =
      reprojection_error(scene.gt_depth[0], scene.gt_depth[1],
                         scene.cameras[0], scene.cameras[1], kInf);
  size_t checked = 0;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 96; ++x)
      if (err.is_valid(x, y)) {
        CHECK(err.at(x, y) < 1e-5 * scene.gt_depth[0].at(x, y));
        ++checked;
      }
  REQUIRE(checked > 2000);
}

TEST_CASE("discontinuity guard masks samples blending across depth edges") {
  Camera ref = example_camera();
  Camera src = example_camera();
  src.t = Eigen::Vector3d(0.35, 0, 0);  // lands between source pixels
  DepthMap d_ref(101, 101);
  d_ref.set(50, 50, 2.0f);
  DepthMap d_src = constant_depth(101, 101, 2.0f);
  // a depth cliff right where the projection lands (u ~ 67.5)
  for (int y = 0; y < 101; ++y)
    for (int x = 68; x < 101; ++x) d_src.set(x, y, 30.0f);
  ReprojectionErrorMap guarded =
      reprojection_error(d_ref, d_src, ref, src, 0.5);
  CHECK_FALSE(guarded.is_valid(50, 50));
  ReprojectionErrorMap unguarded =
      reprojection_error(d_ref, d_src, ref, src, kInf);
  CHECK(unguarded.is_valid(50, 50));
}

TEST_CASE("consistency votes are inclusive at r_max") {
  ReprojectionErrorMap err;
  err.width = err.height = 1;
  err.error = {0.1f};
  err.valid = {1};
  CHECK(consistency_vote(err, 0, 0, 0.1) == 1);   // boundary included
  CHECK(consistency_vote(err, 0, 0, 0.0999) == 0);
  err.error = {0.05f};
  CHECK(consistency_vote(err, 0, 0, 0.1) == 1);
  err.error = {0.15f};
  CHECK(consistency_vote(err, 0, 0, 0.1) == 0);
  err.valid = {0};
  err.error = {0.0f};
  CHECK(consistency_vote(err, 0, 0, 0.1) == 0);   // invalid counts as zero
}

TEST_CASE("filter_depth: threshold semantics on a {1,1,0} vote pattern") {
  Camera ref = example_camera();
  Camera a = example_camera(), b = example_camera(), c = example_camera();
  a.t = Eigen::Vector3d(0.5, 0, 0);
  b.t = Eigen::Vector3d(-0.5, 0, 0);
  c.t = Eigen::Vector3d(0, 0.5, 0);
  DepthMap d_ref = constant_depth(101, 101, 2.0f);
  DepthMap agree = constant_depth(101, 101, 2.0f);
  DepthMap disagree = constant_depth(101, 101, 5.0f);

  std::vector<const DepthMap*> srcs = {&agree, &agree, &disagree};
  std::vector<Camera> cams = {a, b, c};

  FilterResult strict2 = filter_depth(d_ref, srcs, ref, cams, 0.05, 2, false);
  CHECK_FALSE(strict2.filtered.is_valid(50, 50));  // 2 votes, needs > 2
  CHECK(strict2.votes[50 * 101 + 50] == 2);

  FilterResult strict1 = filter_depth(d_ref, srcs, ref, cams, 0.05, 1, false);
  CHECK(strict1.filtered.is_valid(50, 50));        // 2 > 1

  FilterResult incl2 = filter_depth(d_ref, srcs, ref, cams, 0.05, 2, true);
  CHECK(incl2.filtered.is_valid(50, 50));          // 2 >= 2

  SUBCASE("kept depths pass through unchanged") {
    for (int y = 40; y < 60; ++y)
      for (int x = 40; x < 60; ++x)
        if (strict1.filtered.is_valid(x, y))
          CHECK(strict1.filtered.at(x, y) == d_ref.at(x, y));
  }
  SUBCASE("preconditions") {
    CHECK_THROWS_AS(filter_depth(d_ref, {}, ref, {}, 0.05, 1, false),
                    std::invalid_argument);
    CHECK_THROWS_AS(filter_depth(d_ref, srcs, ref, cams, 0.0, 1, false),
                    std::invalid_argument);
  }
}

TEST_CASE("filter_depth: monotone in r_max and n_min") {
  SyntheticSceneSpec spec;
  spec.surface = SyntheticSceneSpec::Surface::kPlane;
  spec.views = 4;
  spec.width = 64;
  spec.height = 48;
  spec.focal = 240.0;
  SyntheticScene scene = generate_synthetic_scene(spec);
  // jitter the reference depths so votes vary across pixels
  std::mt19937_64 rng(51);
  std::normal_distribution<float> noise(0.f, 0.8f);
  DepthMap ref_d = scene.gt_depth[0];
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 64; ++x)
      ref_d.set(x, y, ref_d.at(x, y) + noise(rng));

  std::vector<const DepthMap*> srcs = {&scene.gt_depth[1], &scene.gt_depth[2],
                                       &scene.gt_depth[3]};
  std::vector<Camera> cams = {scene.cameras[1], scene.cameras[2],
                              scene.cameras[3]};

  size_t prev = 0;
  for (double r_max : {0.2, 0.5, 1.0, 2.0}) {
    FilterResult fr =
        filter_depth(ref_d, srcs, scene.cameras[0], cams, r_max, 1, false);
    size_t kept = fr.filtered.valid_count();
    CHECK(kept >= prev);
    prev = kept;
  }
  size_t prev_n = 0;
  for (int n_min : {3, 2, 1}) {
    FilterResult fr =
        filter_depth(ref_d, srcs, scene.cameras[0], cams, 1.0, n_min, false);
    size_t kept = fr.filtered.valid_count();
    CHECK(kept >= prev_n);
    prev_n = kept;
  }
}

TEST_CASE("filter_depth: corruption oracle on a checkerboard plane") {
  SyntheticSceneSpec spec;
  spec.surface = SyntheticSceneSpec::Surface::kPlane;
  spec.texture = SyntheticSceneSpec::Texture::kChecker;
  spec.views = 5;
  spec.width = 80;
  spec.height = 64;
  spec.focal = 300.0;
  SyntheticScene scene = generate_synthetic_scene(spec);

  Config cfg;
  double interval = finest_interval(scene.cameras[0], cfg);
  double r_max = 0.5 * interval;

  DepthMap corrupted = scene.gt_depth[0];
  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<uint8_t> corrupt_mask(80 * 64, 0);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 80; ++x)
      if (u(rng) < 0.10) {
        corrupt_mask[y * 80 + x] = 1;
        corrupted.set(x, y, corrupted.at(x, y) +
                                static_cast<float>(50.0 * interval));
      }

  std::vector<const DepthMap*> srcs;
  std::vector<Camera> cams;
  for (int v = 1; v < 5; ++v) {
    srcs.push_back(&scene.gt_depth[v]);
    cams.push_back(scene.cameras[v]);
  }
  FilterResult fr =
      filter_depth(corrupted, srcs, scene.cameras[0], cams, r_max, 2, false);

  // joint visibility: the clean depth projects inside every source view
  auto visible_everywhere = [&](int x, int y) {
    Eigen::Vector3d X =
        unproject(scene.cameras[0], {double(x), double(y)},
                  scene.gt_depth[0].at(x, y));
    for (int v = 1; v < 5; ++v) {
      RelativePose rel = relative_pose(scene.cameras[0], scene.cameras[v]);
      Eigen::Vector3d Xs = rel.R * X + rel.T;
      if (!(Xs.z() > 0)) return false;
      Projection p = project(scene.cameras[v], Xs);
      if (p.pixel.x() < 1 || p.pixel.y() < 1 || p.pixel.x() > 78 ||
          p.pixel.y() > 62)
        return false;
    }
    return true;
  };

  size_t corrupt_total = 0, corrupt_kept = 0;
  size_t clean_total = 0, clean_kept = 0;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 80; ++x) {
      if (!scene.gt_depth[0].is_valid(x, y)) continue;
      if (corrupt_mask[y * 80 + x]) {
        ++corrupt_total;
        corrupt_kept += fr.filtered.is_valid(x, y);
      } else if (visible_everywhere(x, y)) {
        ++clean_total;
        clean_kept += fr.filtered.is_valid(x, y);
      }
    }
  REQUIRE(corrupt_total > 300);
  REQUIRE(clean_total > 2000);
  CHECK(static_cast<double>(corrupt_kept) / corrupt_total <= 0.01);
  CHECK(static_cast<double>(clean_kept) / clean_total >= 0.95);
}

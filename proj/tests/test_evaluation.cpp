#include <doctest.h>

#include <cmath>
#include <random>

#include "mvspl/consistency.hpp"
#include "mvspl/evaluation.hpp"
#include "mvspl/synthetic.hpp"
#include "test_support.hpp"

using namespace mvspl;

namespace {

PointCloud random_cloud(std::mt19937_64& rng, int n, double extent) {
  std::uniform_real_distribution<double> u(-extent, extent);
  PointCloud cloud;
  for (int i = 0; i < n; ++i)
    cloud.points.emplace_back(u(rng), u(rng), u(rng));
  return cloud;
}

// O(n^2) reference for the spatial index.
double brute_nearest(const Eigen::Vector3d& q,
                     const std::vector<Eigen::Vector3d>& pts, double clamp) {
  double best = clamp;
  for (const auto& p : pts) best = std::min(best, (p - q).norm());
  return best;
}

CloudMetrics brute_metrics(const PointCloud& rec, const PointCloud& ref,
                           double max_dist) {
  CloudMetrics m;
  for (const auto& p : rec.points)
    m.accuracy += brute_nearest(p, ref.points, max_dist);
  m.accuracy /= rec.size();
  for (const auto& p : ref.points)
    m.completeness += brute_nearest(p, rec.points, max_dist);
  m.completeness /= ref.size();
  m.overall = 0.5 * (m.accuracy + m.completeness);
  return m;
}

FScore brute_f(const PointCloud& rec, const PointCloud& ref, double tau) {
  FScore s;
  size_t n = 0;
  for (const auto& p : rec.points)
    n += brute_nearest(p, ref.points, 1e30) <= tau;
  s.precision = static_cast<double>(n) / rec.size();
  n = 0;
  for (const auto& p : ref.points)
    n += brute_nearest(p, rec.points, 1e30) <= tau;
  s.recall = static_cast<double>(n) / ref.size();
  s.f = s.precision + s.recall > 0
            ? 2 * s.precision * s.recall / (s.precision + s.recall)
            : 0;
  return s;
}

}  // namespace

TEST_CASE("accuracy_completeness: trivial cases") {
  std::mt19937_64 rng(71);
  PointCloud a = random_cloud(rng, 100, 5.0);
  SUBCASE("identical clouds score zero") {
    CloudMetrics m = accuracy_completeness(a, a, 20.0);
    CHECK(m.accuracy == doctest::Approx(0.0));
    CHECK(m.completeness == doctest::Approx(0.0));
    CHECK(m.overall == doctest::Approx(0.0));
  }
  SUBCASE("a uniform shift moves both scores by its magnitude") {
    Eigen::Vector3d delta(0.05, -0.02, 0.03);
    PointCloud b = a;
    for (auto& p : b.points) p += delta;
    CloudMetrics m = accuracy_completeness(b, a, 20.0);
    CHECK(m.accuracy == doctest::Approx(delta.norm()).epsilon(1e-9));
    CHECK(m.completeness == doctest::Approx(delta.norm()).epsilon(1e-9));
    CHECK(m.overall == doctest::Approx(delta.norm()).epsilon(1e-9));
  }
  SUBCASE("swapping the clouds swaps accuracy and completeness") {
    PointCloud b = random_cloud(rng, 60, 5.0);
    CloudMetrics ab = accuracy_completeness(a, b, 20.0);
    CloudMetrics ba = accuracy_completeness(b, a, 20.0);
    CHECK(ab.accuracy == doctest::Approx(ba.completeness));
    CHECK(ab.completeness == doctest::Approx(ba.accuracy));
  }
  SUBCASE("empty clouds are rejected") {
    PointCloud none;
    CHECK_THROWS_AS(accuracy_completeness(none, a, 20.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(accuracy_completeness(a, none, 20.0),
                    std::invalid_argument);
  }
}

TEST_CASE("spatial index equals brute force") {
  std::mt19937_64 rng(72);
  std::uniform_int_distribution<int> usize(3, 220);
  for (int instance = 0; instance < 25; ++instance) {
    PointCloud rec = random_cloud(rng, usize(rng), 8.0);
    PointCloud ref = random_cloud(rng, usize(rng), 8.0);
    double max_dist = instance % 2 ? 20.0 : 1.5;
    CloudMetrics fast = accuracy_completeness(rec, ref, max_dist);
    CloudMetrics slow = brute_metrics(rec, ref, max_dist);
    CHECK(fast.accuracy == doctest::Approx(slow.accuracy).epsilon(1e-12));
    CHECK(fast.completeness ==
          doctest::Approx(slow.completeness).epsilon(1e-12));

    double tau = instance % 2 ? 0.8 : 2.5;
    FScore ff = f_score(rec, ref, tau);
    FScore fb = brute_f(rec, ref, tau);
    CHECK(ff.precision == doctest::Approx(fb.precision).epsilon(1e-12));
    CHECK(ff.recall == doctest::Approx(fb.recall).epsilon(1e-12));
    CHECK(ff.f == doctest::Approx(fb.f).epsilon(1e-12));
  }
}

TEST_CASE("f_score: trivial cases") {
  std::mt19937_64 rng(73);
  PointCloud a = random_cloud(rng, 80, 5.0);
  SUBCASE("identical clouds reach (1,1,1)") {
    FScore s = f_score(a, a, 0.5);
    CHECK(s.precision == doctest::Approx(1.0));
    CHECK(s.recall == doctest::Approx(1.0));
    CHECK(s.f == doctest::Approx(1.0));
  }
  SUBCASE("precision 1 with recall 0.5 gives f = 2/3") {
    // reference = two clusters far apart; reconstruction covers only one
    PointCloud ref;
    PointCloud rec;
    for (int i = 0; i < 40; ++i) {
      Eigen::Vector3d p(0.01 * i, 0, 0);
      ref.points.push_back(p);
      ref.points.push_back(p + Eigen::Vector3d(1000, 0, 0));
      rec.points.push_back(p);
    }
    FScore s = f_score(rec, ref, 0.5);
    CHECK(s.precision == doctest::Approx(1.0));
    CHECK(s.recall == doctest::Approx(0.5));
    CHECK(s.f == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("non-positive threshold is rejected") {
    CHECK_THROWS_AS(f_score(a, a, 0.0), std::invalid_argument);
  }
}

TEST_CASE("depth_error_stats") {
  DepthMap est(6, 4), gt(6, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 6; ++x) {
      est.set(x, y, 3.0f);
      gt.set(x, y, 3.0f);
    }
  SUBCASE("identical maps have zero error") {
    DepthErrorStats s = depth_error_stats(est, gt, 0.1);
    CHECK(s.mae == doctest::Approx(0.0));
    CHECK(s.rmse == doctest::Approx(0.0));
    CHECK(s.frac_within_1 == doctest::Approx(1.0));
  }
  SUBCASE("constant offset 0.2 appears in MAE and RMSE") {
    for (auto& v : est.depth) v += 0.2f;
    DepthErrorStats s = depth_error_stats(est, gt, 0.1);
    CHECK(s.mae == doctest::Approx(0.2).epsilon(1e-6));
    CHECK(s.rmse == doctest::Approx(0.2).epsilon(1e-6));
    CHECK(s.frac_within_1 == doctest::Approx(0.0));
    CHECK(s.frac_within_2 == doctest::Approx(1.0));
  }
  SUBCASE("differences on masked pixels are ignored") {
    DepthMap poked = est;
    poked.set(2, 2, 99.f);
    gt.invalidate(2, 2);
    DepthErrorStats s = depth_error_stats(poked, gt, 0.1);
    CHECK(s.mae == doctest::Approx(0.0));
    CHECK(s.count == 23);
  }
  SUBCASE("empty intersection throws") {
    DepthMap none(6, 4);
    CHECK_THROWS_AS(depth_error_stats(est, none, 0.1), std::invalid_argument);
  }
}

TEST_CASE("synthetic scenes: analytic depth") {
  SUBCASE("axis camera sees the plane at its distance") {
    SyntheticSceneSpec spec;
    spec.surface = SyntheticSceneSpec::Surface::kPlane;
    spec.views = 2;
    spec.width = 33;
    spec.height = 17;
    spec.focal = 120.0;
    spec.ring_radius = 0.0;  // both cameras on the axis
    spec.ring_distance = 3.0;
    spec.plane_offset = 0.0;
    DepthMap d = synthetic_gt_depth(spec, 0, 33, 17);
    for (int y = 0; y < 17; ++y)
      for (int x = 0; x < 33; ++x) {
        REQUIRE(d.is_valid(x, y));
        CHECK(d.at(x, y) == doctest::Approx(3.0).epsilon(1e-6));
      }
  }
  SUBCASE("sphere center pixel depth is distance minus radius") {
    SyntheticSceneSpec spec;
    spec.surface = SyntheticSceneSpec::Surface::kSphere;
    spec.views = 2;
    spec.width = 33;
    spec.height = 17;
    spec.focal = 120.0;
    spec.ring_radius = 0.0;
    spec.ring_distance = 600.0;
    spec.sphere_center = Eigen::Vector3d(0, 0, 0);
    spec.sphere_radius = 60.0;
    DepthMap d = synthetic_gt_depth(spec, 0, 33, 17);
    REQUIRE(d.is_valid(16, 8));  // cx = (33-1)/2, cy = (17-1)/2
    CHECK(d.at(16, 8) == doctest::Approx(540.0).epsilon(1e-9));
  }
  SUBCASE("height field depths satisfy the surface equation") {
    SyntheticSceneSpec spec;
    spec.surface = SyntheticSceneSpec::Surface::kHeightField;
    spec.views = 2;
    spec.width = 48;
    spec.height = 32;
    spec.focal = 180.0;
    SyntheticScene scene = generate_synthetic_scene(spec);
    const Camera& cam = scene.cameras[0];
    for (int y = 4; y < 32; y += 5)
      for (int x = 3; x < 48; x += 7) {
        if (!scene.gt_depth[0].is_valid(x, y)) continue;
        Eigen::Vector3d X = cam_to_world(
            cam, unproject(cam, {double(x), double(y)},
                           scene.gt_depth[0].at(x, y)));
        double h = spec.field_amplitude *
                   std::sin(spec.field_frequency * X.x()) *
                   std::cos(spec.field_frequency * X.y());
        CHECK(std::abs(X.z() - h) < 1e-4);
      }
  }
  SUBCASE("cross-view ground truth is self-consistent") {
    SyntheticSceneSpec spec;
    spec.surface = SyntheticSceneSpec::Surface::kSphere;
    spec.views = 3;
    spec.width = 64;
    spec.height = 48;
    spec.focal = 240.0;
    SyntheticScene scene = generate_synthetic_scene(spec);
    ReprojectionErrorMap err = reprojection_error(
        scene.gt_depth[0], scene.gt_depth[1], scene.cameras[0],
        scene.cameras[1], 1.0 /* guard against silhouette blending */);
    size_t n = 0;
    for (int y = 0; y < 48; ++y)
      for (int x = 0; x < 64; ++x)
        if (err.is_valid(x, y)) {
          CHECK(err.at(x, y) <= 1e-5 * scene.gt_depth[0].at(x, y));
          ++n;
        }
    REQUIRE(n > 500);
  }
  SUBCASE("deterministic given a seed") {
    SyntheticSceneSpec spec;
    spec.views = 2;
    spec.width = 32;
    spec.height = 16;
    spec.focal = 120.0;
    SyntheticScene a = generate_synthetic_scene(spec);
    SyntheticScene b = generate_synthetic_scene(spec);
    CHECK(a.images[0].data == b.images[0].data);
    spec.seed = 8;
    SyntheticScene c = generate_synthetic_scene(spec);
    CHECK(a.images[0].data != c.images[0].data);
  }
  SUBCASE("surface outside the frustum is an error") {
    SyntheticSceneSpec spec;
    spec.surface = SyntheticSceneSpec::Surface::kSphere;
    spec.views = 2;
    spec.width = 32;
    spec.height = 16;
    spec.focal = 120.0;
    spec.sphere_center = Eigen::Vector3d(0, 0, 5000);  // way behind the target
    spec.sphere_radius = 1.0;
    CHECK_THROWS_AS(generate_synthetic_scene(spec), std::invalid_argument);
  }
  SUBCASE("fewer than two cameras is an error") {
    SyntheticSceneSpec spec;
    spec.views = 1;
    CHECK_THROWS_AS(generate_synthetic_scene(spec), std::invalid_argument);
  }
}

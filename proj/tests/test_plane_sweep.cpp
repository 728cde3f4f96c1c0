#include <doctest.h>

#include <cmath>
#include <random>

#include "mvspl/image_ops.hpp"
#include "mvspl/plane_sweep.hpp"
#include "mvspl/synthetic.hpp"
#include "test_support.hpp"

using namespace mvspl;
using mvspl::testing::example_camera;

namespace {

// Smooth deterministic texture for hand-built plane scenes.
double texture(double x, double y) {
  return 0.5 + 0.22 * std::sin(2.57 * x) * std::cos(1.93 * y) +
         0.18 * std::sin(0.77 * x + 0.3) + 0.08 * std::cos(3.1 * y - 1.2);
}

// Renders a fronto-parallel plane z = depth seen from a camera whose center
// sits at `center` (world frame, axes aligned with the reference).
Image render_plane_view(const Camera& cam, const Eigen::Vector3d& center,
                        double plane_depth, int width, int height) {
  Image img(width, height, 1);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      Eigen::Vector3d ray = cam.K.inverse() * Eigen::Vector3d(x, y, 1.0);
      double s = (plane_depth - center.z()) / ray.z();
      Eigen::Vector3d P = center + s * ray;
      img.at(x, y) = static_cast<float>(texture(P.x(), P.y()));
    }
  return img;
}

Camera camera_at(const Eigen::Vector3d& center) {
  Camera cam = example_camera();
  cam.t = -center;
  cam.d_min = 1.0;
  cam.d_max = 10.0;
  return cam;
}

}  // namespace

TEST_CASE("build_hypotheses_coarse is a linspace") {
  HypothesisSet h = build_hypotheses_coarse(2, 4, 3, 8, 8);
  CHECK(h.uniform);
  CHECK(h.uniform_values == std::vector<double>{2, 3, 4});
  CHECK(h.interval == doctest::Approx(1.0));

  h = build_hypotheses_coarse(2, 4, 2, 8, 8);
  CHECK(h.uniform_values == std::vector<double>{2, 4});

  CHECK_THROWS_AS(build_hypotheses_coarse(4, 2, 3, 8, 8),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_hypotheses_coarse(2, 4, 1, 8, 8),
                  std::invalid_argument);
}

TEST_CASE("build_hypotheses_refined centers candidates on the prior") {
  DepthMap prior(2, 1);
  prior.set(0, 0, 3.0f);
  // pixel (1,0) stays invalid
  HypothesisSet h = build_hypotheses_refined(prior, 0.1, 4);
  CHECK(h.at(0, 0, 0) == doctest::Approx(2.85));
  CHECK(h.at(0, 0, 1) == doctest::Approx(2.95));
  CHECK(h.at(0, 0, 2) == doctest::Approx(3.05));
  CHECK(h.at(0, 0, 3) == doctest::Approx(3.15));
  CHECK(h.valid(0, 0));
  CHECK_FALSE(h.valid(1, 0));

  SUBCASE("candidates near zero shift up to stay positive and increasing") {
    DepthMap tiny(1, 1);
    tiny.set(0, 0, 0.05f);
    HypothesisSet ht = build_hypotheses_refined(tiny, 0.1, 4);
    double prev = 0.0;
    for (int k = 0; k < 4; ++k) {
      CHECK(ht.at(0, 0, k) > 0.0);
      CHECK(ht.at(0, 0, k) > prev);
      prev = ht.at(0, 0, k);
    }
  }
  SUBCASE("preconditions") {
    CHECK_THROWS_AS(build_hypotheses_refined(prior, -0.1, 4),
                    std::invalid_argument);
    CHECK_THROWS_AS(build_hypotheses_refined(prior, 0.1, 3),
                    std::invalid_argument);
  }
}

TEST_CASE("matching_cost: identical views give exactly zero cost") {
  Camera cam = camera_at({0, 0, 0});
  Image img = render_plane_view(cam, {0, 0, 0}, 4.0, 40, 30);
  HypothesisSet hyp = build_hypotheses_coarse(2, 8, 5, 40, 30);
  CostVolume cv = matching_cost(img, cam, {img, img}, {cam, cam}, hyp);
  for (int y = 0; y < 30; ++y)
    for (int x = 0; x < 40; ++x)
      for (int k = 0; k < 5; ++k) {
        CHECK(cv.cell_valid(x, y, k));
        CHECK(cv.at(x, y, k) == 0.0f);
      }
}

TEST_CASE("matching_cost: argmin at the true plane depth") {
  const double d_true = 4.0;
  const int W = 60, H = 40;
  Camera ref = camera_at({0, 0, 0});
  Camera src1 = camera_at({1.0, 0, 0});
  Camera src2 = camera_at({0, 0.8, 0});
  Image ref_img = render_plane_view(ref, {0, 0, 0}, d_true, W, H);
  Image src1_img = render_plane_view(src1, {1.0, 0, 0}, d_true, W, H);
  Image src2_img = render_plane_view(src2, {0, 0.8, 0}, d_true, W, H);

  HypothesisSet hyp = build_hypotheses_coarse(3.0, 5.0, 11, W, H);  // step 0.2
  CostVolume cv = matching_cost(ref_img, ref, {src1_img, src2_img},
                                {src1, src2}, hyp);
  int interior = 0, correct = 0;
  for (int y = 8; y < H - 8; ++y)
    for (int x = 8; x < W - 8; ++x) {
      int best = -1;
      float best_cost = std::numeric_limits<float>::infinity();
      for (int k = 0; k < hyp.count; ++k)
        if (cv.cell_valid(x, y, k) && cv.at(x, y, k) < best_cost) {
          best_cost = cv.at(x, y, k);
          best = k;
        }
      if (best < 0) continue;
      ++interior;
      correct += best == 5;  // d = 4.0 is index 5
    }
  REQUIRE(interior > 500);
  CHECK(static_cast<double>(correct) / interior > 0.9);
}

TEST_CASE("matching_cost: fully out-of-bounds source leaves cells invalid") {
  Camera ref = camera_at({0, 0, 0});
  Camera far_cam = camera_at({500.0, 0, 0});  // warps land far outside
  Image img = render_plane_view(ref, {0, 0, 0}, 4.0, 16, 12);
  HypothesisSet hyp = build_hypotheses_coarse(3, 5, 3, 16, 12);
  CostVolume cv = matching_cost(img, ref, {img}, {far_cam}, hyp);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 16; ++x)
      for (int k = 0; k < 3; ++k) CHECK_FALSE(cv.cell_valid(x, y, k));

  CHECK_THROWS_AS(matching_cost(img, ref, {}, {}, hyp), std::invalid_argument);
}

TEST_CASE("cost_to_probability") {
  CostVolume cv;
  cv.width = 1;
  cv.height = 1;
  cv.count = 2;
  cv.cost = {0.f, 0.f};
  cv.n_views = {2, 2};

  SUBCASE("equal costs split evenly") {
    ProbabilityVolume pv = cost_to_probability(cv, 0.5);
    CHECK(pv.at(0, 0, 0) == doctest::Approx(0.5));
    CHECK(pv.at(0, 0, 1) == doctest::Approx(0.5));
  }
  SUBCASE("vanishing temperature concentrates on the argmin") {
    cv.cost = {0.f, 0.3f};
    ProbabilityVolume pv = cost_to_probability(cv, 1e-12);
    CHECK(pv.at(0, 0, 0) == doctest::Approx(1.0));
    CHECK(pv.at(0, 0, 1) == doctest::Approx(0.0));
  }
  SUBCASE("closed-form softmax: costs {0, tau ln 3} -> {0.75, 0.25}") {
    const double tau = 0.05;
    cv.cost = {0.f, static_cast<float>(tau * std::log(3.0))};
    ProbabilityVolume pv = cost_to_probability(cv, tau);
    CHECK(pv.at(0, 0, 0) == doctest::Approx(0.75).epsilon(1e-5));
    CHECK(pv.at(0, 0, 1) == doctest::Approx(0.25).epsilon(1e-5));
  }
  SUBCASE("pixel with no valid cell is invalid") {
    cv.n_views = {1, 0};
    ProbabilityVolume pv = cost_to_probability(cv, 0.5);
    CHECK_FALSE(pv.valid(0, 0));
  }
  SUBCASE("temperature must be positive") {
    CHECK_THROWS_AS(cost_to_probability(cv, 0.0), std::invalid_argument);
  }
}

TEST_CASE("cost_to_probability sums to one over valid cells") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<float> uc(0.f, 0.2f);
  std::uniform_int_distribution<int> uv(0, 4);
  CostVolume cv;
  cv.width = 9;
  cv.height = 7;
  cv.count = 6;
  cv.cost.resize(9 * 7 * 6);
  cv.n_views.resize(9 * 7 * 6);
  for (size_t i = 0; i < cv.cost.size(); ++i) {
    cv.cost[i] = uc(rng);
    cv.n_views[i] = static_cast<uint8_t>(uv(rng));
  }
  ProbabilityVolume pv = cost_to_probability(cv, 0.01);
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 9; ++x) {
      if (!pv.valid(x, y)) continue;
      double sum = 0.0;
      for (int k = 0; k < 6; ++k) {
        sum += pv.at(x, y, k);
        if (!cv.cell_valid(x, y, k)) CHECK(pv.at(x, y, k) == 0.f);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
    }
}

TEST_CASE("regress_depth") {
  HypothesisSet hyp = build_hypotheses_coarse(2, 4, 2, 1, 1);
  ProbabilityVolume pv;
  pv.width = 1;
  pv.height = 1;
  pv.count = 2;
  pv.pixel_valid = {1};

  SUBCASE("delta probability returns that hypothesis") {
    HypothesisSet h3 = build_hypotheses_coarse(2, 4, 3, 1, 1);
    ProbabilityVolume p3 = pv;
    p3.count = 3;
    p3.p = {0.f, 1.f, 0.f};
    RegressedDepth r = regress_depth(p3, h3);
    CHECK(r.depth.at(0, 0) == doctest::Approx(3.0));
    CHECK(r.confidence.at(0, 0) == doctest::Approx(1.0));
  }
  SUBCASE("even split over {2,4} gives 3") {
    pv.p = {0.5f, 0.5f};
    RegressedDepth r = regress_depth(pv, hyp);
    CHECK(r.depth.at(0, 0) == doctest::Approx(3.0));
  }
  SUBCASE("moving mass to a larger hypothesis never lowers the depth") {
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    HypothesisSet h8 = build_hypotheses_coarse(1, 9, 8, 1, 1);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> p(8);
      double sum = 0;
      for (double& v : p) sum += (v = u(rng));
      for (double& v : p) v /= sum;
      ProbabilityVolume a;
      a.width = a.height = 1;
      a.count = 8;
      a.pixel_valid = {1};
      for (double v : p) a.p.push_back(static_cast<float>(v));
      // shift some mass from a lower to a higher index
      int lo = std::min<int>(6, static_cast<int>(u(rng) * 7));
      int hi = lo + 1 + static_cast<int>(u(rng) * (7 - lo - 1e-9));
      double move = p[lo] * u(rng);
      ProbabilityVolume b = a;
      b.p[lo] -= static_cast<float>(move);
      b.p[hi] += static_cast<float>(move);
      double da = regress_depth(a, h8).depth.at(0, 0);
      double db = regress_depth(b, h8).depth.at(0, 0);
      CHECK(db >= da - 1e-6);
      CHECK(da >= 1.0);
      CHECK(da <= 9.0);  // stays within the hypothesis range
    }
  }
}

TEST_CASE("infer_depth_view: one level equals a single coarse sweep") {
  const int W = 48, H = 32;
  Camera ref = camera_at({0, 0, 0});
  Camera src = camera_at({1.0, 0, 0});
  std::vector<Image> imgs = {render_plane_view(ref, {0, 0, 0}, 4.0, W, H),
                             render_plane_view(src, {1.0, 0, 0}, 4.0, W, H)};
  std::vector<Camera> cams = {ref, src};
  Config cfg;
  cfg.hypotheses_coarse = 16;
  ViewInference vi = infer_depth_view(imgs, cams, 0, {1}, 1, cfg);

  HypothesisSet hyp =
      build_hypotheses_coarse(ref.d_min, ref.d_max, 16, W, H);
  CostVolume cv = matching_cost(imgs[0], ref, {imgs[1]}, {src}, hyp);
  ProbabilityVolume pv = cost_to_probability(cv, cfg.softmax_temperature);
  RegressedDepth reg = regress_depth(pv, hyp);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      CHECK(vi.depth.is_valid(x, y) == reg.depth.is_valid(x, y));
      if (vi.depth.is_valid(x, y))
        CHECK(vi.depth.at(x, y) == reg.depth.at(x, y));
    }
}

TEST_CASE("infer_depth_pyramid: textured plane reaches sub-interval accuracy") {
  SyntheticSceneSpec spec;
  spec.surface = SyntheticSceneSpec::Surface::kPlane;
  spec.texture = SyntheticSceneSpec::Texture::kNoise;
  spec.views = 3;
  spec.width = 128;
  spec.height = 96;
  spec.focal = 480.0;
  spec.ring_radius = 200.0;
  SyntheticScene scene = generate_synthetic_scene(spec);

  Config cfg;
  std::vector<ViewInference> result = infer_depth_pyramid(
      scene.images, scene.cameras, scene.pair_list, 2, cfg);

  double finest = finest_low_interval(scene.cameras[0], cfg);
  DepthMap gt = scene.gt_depth[0];
  std::vector<double> errors;
  for (int y = 0; y < 96; ++y)
    for (int x = 0; x < 128; ++x)
      if (result[0].depth.is_valid(x, y) && gt.is_valid(x, y))
        errors.push_back(
            std::abs(result[0].depth.at(x, y) - gt.at(x, y)));
  REQUIRE(errors.size() > 5000);
  std::nth_element(errors.begin(), errors.begin() + errors.size() / 2,
                   errors.end());
  CHECK(errors[errors.size() / 2] < finest);

  SUBCASE("indivisible resolution is rejected before processing") {
    CHECK_THROWS_AS(
        infer_depth_view(std::vector<Image>{scene.images[0], scene.images[1]},
                         {scene.cameras[0], scene.cameras[1]}, 0, {1}, 8, cfg),
        std::invalid_argument);
  }
}

TEST_CASE("infer_depth_pyramid: textureless scenes have flat probabilities") {
  SyntheticSceneSpec spec;
  spec.surface = SyntheticSceneSpec::Surface::kPlane;
  spec.texture = SyntheticSceneSpec::Texture::kUniform;
  spec.views = 3;
  spec.width = 64;
  spec.height = 48;
  spec.focal = 240.0;
  SyntheticScene scene = generate_synthetic_scene(spec);
  Config cfg;
  std::vector<ViewInference> result = infer_depth_pyramid(
      scene.images, scene.cameras, scene.pair_list, 2, cfg);
  // Peak probability stays near uniform (1/M) for almost every pixel.
  size_t flat = 0, total = 0;
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 64; ++x)
      if (result[0].depth.is_valid(x, y)) {
        ++total;
        flat += result[0].confidence.at(x, y) < 2.0 / cfg.hypotheses_fine;
      }
  REQUIRE(total > 1000);
  CHECK(static_cast<double>(flat) / total > 0.9);
}

TEST_CASE("refine_high_resolution") {
  SyntheticSceneSpec spec;
  spec.surface = SyntheticSceneSpec::Surface::kPlane;
  spec.texture = SyntheticSceneSpec::Texture::kNoise;
  spec.views = 3;
  spec.width = 128;
  spec.height = 96;
  spec.focal = 480.0;
  spec.ring_radius = 200.0;
  SyntheticScene scene = generate_synthetic_scene(spec);
  Config cfg;
  cfg.low_res_divisor = 2;

  std::vector<Image> gray;
  std::vector<Image> low;
  std::vector<Camera> cams_low;
  for (int v = 0; v < 3; ++v) {
    gray.push_back(to_grayscale(scene.images[v]));
    low.push_back(downsample(scene.images[v], 2));
    cams_low.push_back(scale_camera(scene.cameras[v], 2));
  }
  std::vector<ViewInference> coarse =
      infer_depth_pyramid(low, cams_low, scene.pair_list, 2, cfg);

  SUBCASE("identity when resolutions match") {
    DepthMap same = refine_high_resolution(
        std::vector<Image>{to_grayscale(low[0]), to_grayscale(low[1]),
                           to_grayscale(low[2])},
        cams_low, 0, scene.pair_list[0], coarse[0].depth, cfg);
    CHECK(same.depth == coarse[0].depth.depth);
    CHECK(same.valid == coarse[0].depth.valid);
  }

  SUBCASE("refinement beats plain upsampling; invalid priors stay invalid") {
    DepthMap prior = coarse[0].depth;
    // poke holes in the prior
    for (int y = 10; y < 14; ++y)
      for (int x = 20; x < 28; ++x) prior.invalidate(x, y);
    DepthMap refined = refine_high_resolution(gray, scene.cameras, 0,
                                              scene.pair_list[0], prior, cfg);
    DepthMap upsampled = upsample_depth(prior, 2);
    const DepthMap& gt = scene.gt_depth[0];
    double se_ref = 0, se_up = 0;
    size_t n = 0;
    for (int y = 0; y < 96; ++y)
      for (int x = 0; x < 128; ++x) {
        if (!refined.is_valid(x, y) || !upsampled.is_valid(x, y) ||
            !gt.is_valid(x, y))
          continue;
        se_ref += std::pow(refined.at(x, y) - gt.at(x, y), 2);
        se_up += std::pow(upsampled.at(x, y) - gt.at(x, y), 2);
        ++n;
      }
    REQUIRE(n > 4000);
    CHECK(std::sqrt(se_ref / n) <= std::sqrt(se_up / n));
    // the hole upsampled to high resolution stays invalid
    CHECK_FALSE(refined.is_valid(45, 23));
  }
}

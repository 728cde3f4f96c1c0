#include "mvspl/plane_sweep.hpp"

#include <cmath>
#include <stdexcept>

#include "mvspl/image_ops.hpp"
#include "mvspl/parallel.hpp"

namespace mvspl {

HypothesisSet build_hypotheses_coarse(double d_min, double d_max, int count,
                                      int width, int height) {
  if (!(d_min > 0.0) || !(d_max > d_min))
    throw std::invalid_argument(
        "build_hypotheses_coarse: need 0 < d_min < d_max");
  if (count < 2)
    throw std::invalid_argument("build_hypotheses_coarse: count must be >= 2");
  HypothesisSet hyp;
  hyp.width = width;
  hyp.height = height;
  hyp.count = count;
  hyp.uniform = true;
  hyp.interval = (d_max - d_min) / (count - 1);
  hyp.uniform_values.resize(count);
  for (int k = 0; k < count; ++k)
    hyp.uniform_values[k] = d_min + k * hyp.interval;
  return hyp;
}

HypothesisSet build_hypotheses_refined(const DepthMap& prior, double interval,
                                       int count) {
  if (!(interval > 0.0))
    throw std::invalid_argument("build_hypotheses_refined: interval must be > 0");
  if (count < 2 || count % 2 != 0)
    throw std::invalid_argument("build_hypotheses_refined: count must be even");
  HypothesisSet hyp;
  hyp.width = prior.width;
  hyp.height = prior.height;
  hyp.count = count;
  hyp.uniform = false;
  hyp.interval = interval;
  hyp.values.assign(static_cast<size_t>(prior.width) * prior.height * count,
                    0.f);
  hyp.pixel_valid.assign(static_cast<size_t>(prior.width) * prior.height, 0);
  const double half = (count - 1) / 2.0;
  for (int y = 0; y < prior.height; ++y)
    for (int x = 0; x < prior.width; ++x) {
      if (!prior.is_valid(x, y)) continue;
      size_t base = (static_cast<size_t>(y) * prior.width + x) * count;
      double center = prior.at(x, y);
      // Shift the whole window up when it would cross zero; candidates must
      // stay positive and strictly increasing.
      double lo = center - half * interval;
      double min_lo = interval * 1e-3;
      if (lo < min_lo) lo = min_lo;
      for (int k = 0; k < count; ++k)
        hyp.values[base + k] = static_cast<float>(lo + k * interval);
      hyp.pixel_valid[static_cast<size_t>(y) * prior.width + x] = 1;
    }
  return hyp;
}

namespace {

// Warped source slice for one hypothesis index: homography path for uniform
// sets, per-pixel reprojection otherwise.
Image warp_slice(const Image& src, const Camera& ref_cam, const Camera& src_cam,
                 const HypothesisSet& hyp, int k) {
  if (hyp.uniform)
    return homography_warp(src, ref_cam, src_cam, hyp.uniform_values[k],
                           hyp.width, hyp.height);
  Image out(hyp.width, hyp.height, src.channels);
  out.mask.assign(out.pixel_count(), 0);
  RelativePose rel = relative_pose(ref_cam, src_cam);
  Eigen::Matrix3d Kinv = ref_cam.K.inverse();
  parallel_for(hyp.height, [&](size_t yy) {
    int y = static_cast<int>(yy);
    for (int x = 0; x < hyp.width; ++x) {
      if (!hyp.valid(x, y)) continue;
      double d = hyp.at(x, y, k);
      if (!(d > 0.0)) continue;
      Eigen::Vector3d X = d * (Kinv * Eigen::Vector3d(x, y, 1.0));
      Eigen::Vector3d Xs = rel.R * X + rel.T;
      if (!(Xs.z() > 0.0)) continue;
      Eigen::Vector3d h = src_cam.K * Xs;
      double sx = h.x() / h.z();
      double sy = h.y() / h.z();
      bool ok = true;
      for (int c = 0; c < src.channels; ++c) {
        auto v = bilinear_sample(src, sx, sy, c);
        if (!v) {
          ok = false;
          break;
        }
        out.at(x, y, c) = *v;
      }
      if (ok) out.set_valid(x, y, true);
    }
  });
  return out;
}

}  // namespace

CostVolume matching_cost(const Image& reference, const Camera& ref_cam,
                         const std::vector<Image>& sources,
                         const std::vector<Camera>& src_cams,
                         const HypothesisSet& hyp, const CostBias& bias) {
  if (sources.empty())
    throw std::invalid_argument("matching_cost: need at least one source view");
  if (sources.size() != src_cams.size())
    throw std::invalid_argument("matching_cost: sources/cameras mismatch");
  if (reference.channels != 1)
    throw std::invalid_argument("matching_cost: images must be grayscale");
  const int W = hyp.width, H = hyp.height, M = hyp.count;
  if (reference.width != W || reference.height != H)
    throw std::invalid_argument("matching_cost: reference/hypotheses mismatch");

  CostVolume cv;
  cv.width = W;
  cv.height = H;
  cv.count = M;
  cv.cost.assign(static_cast<size_t>(W) * H * M, 0.f);
  cv.n_views.assign(static_cast<size_t>(W) * H * M, 0);

  Image ref_smooth = box_filter(reference, 1);

  // Accumulate mean/variance of the smoothed intensities per cell.
  std::vector<double> sum(static_cast<size_t>(W) * H, 0.0);
  std::vector<double> sum2(static_cast<size_t>(W) * H, 0.0);
  std::vector<int> cnt(static_cast<size_t>(W) * H, 0);
  for (int k = 0; k < M; ++k) {
    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(sum2.begin(), sum2.end(), 0.0);
    std::fill(cnt.begin(), cnt.end(), 0);
    for (size_t s = 0; s < sources.size(); ++s) {
      Image warped = warp_slice(sources[s], ref_cam, src_cams[s], hyp,
                                static_cast<int>(k));
      Image smooth = box_filter(warped, 1);
      parallel_for(H, [&](size_t yy) {
        int y = static_cast<int>(yy);
        for (int x = 0; x < W; ++x) {
          if (!smooth.valid(x, y)) continue;
          size_t i = static_cast<size_t>(y) * W + x;
          double v = smooth.at(x, y);
          sum[i] += v;
          sum2[i] += v * v;
          cnt[i] += 1;
        }
      });
    }
    parallel_for(H, [&](size_t yy) {
      int y = static_cast<int>(yy);
      for (int x = 0; x < W; ++x) {
        if (!hyp.valid(x, y)) continue;
        size_t i = static_cast<size_t>(y) * W + x;
        double rv = ref_smooth.at(x, y);
        int n = cnt[i] + 1;  // reference always contributes
        if (n < 2) continue;
        double total = sum[i] + rv;
        double total2 = sum2[i] + rv * rv;
        double mean = total / n;
        double var = total2 / n - mean * mean;
        if (var < 0.0) var = 0.0;
        if (bias.prior && bias.weight > 0.0 && bias.prior->is_valid(x, y))
          var += bias.weight *
                 std::abs(hyp.at(x, y, k) - bias.prior->at(x, y)) /
                 bias.interval;
        size_t cell = i * M + k;
        cv.cost[cell] = static_cast<float>(var);
        cv.n_views[cell] = static_cast<uint8_t>(std::min(n, 255));
      }
    });
  }
  return cv;
}

ProbabilityVolume cost_to_probability(const CostVolume& cost,
                                      double temperature) {
  if (!(temperature > 0.0))
    throw std::invalid_argument("cost_to_probability: temperature must be > 0");
  const int W = cost.width, H = cost.height, M = cost.count;
  ProbabilityVolume pv;
  pv.width = W;
  pv.height = H;
  pv.count = M;
  pv.p.assign(cost.cost.size(), 0.f);
  pv.pixel_valid.assign(static_cast<size_t>(W) * H, 0);
  parallel_for(H, [&](size_t yy) {
    int y = static_cast<int>(yy);
    for (int x = 0; x < W; ++x) {
      size_t base = (static_cast<size_t>(y) * W + x) * M;
      double cmin = std::numeric_limits<double>::infinity();
      for (int k = 0; k < M; ++k)
        if (cost.n_views[base + k] >= 2)
          cmin = std::min<double>(cmin, cost.cost[base + k]);
      if (!std::isfinite(cmin)) continue;  // no valid cell: pixel invalid
      double sum = 0.0;
      for (int k = 0; k < M; ++k) {
        if (cost.n_views[base + k] < 2) continue;
        double e = std::exp(-(cost.cost[base + k] - cmin) / temperature);
        pv.p[base + k] = static_cast<float>(e);
        sum += e;
      }
      for (int k = 0; k < M; ++k)
        pv.p[base + k] = static_cast<float>(pv.p[base + k] / sum);
      pv.pixel_valid[static_cast<size_t>(y) * W + x] = 1;
    }
  });
  return pv;
}

RegressedDepth regress_depth(const ProbabilityVolume& prob,
                             const HypothesisSet& hyp) {
  if (prob.width != hyp.width || prob.height != hyp.height ||
      prob.count != hyp.count)
    throw std::invalid_argument("regress_depth: probability/hypotheses mismatch");
  RegressedDepth out;
  out.depth = DepthMap(prob.width, prob.height);
  out.confidence = Image(prob.width, prob.height, 1);
  parallel_for(prob.height, [&](size_t yy) {
    int y = static_cast<int>(yy);
    for (int x = 0; x < prob.width; ++x) {
      if (!prob.valid(x, y) || !hyp.valid(x, y)) continue;
      double expectation = 0.0;
      double peak = 0.0;
      for (int k = 0; k < prob.count; ++k) {
        double p = prob.at(x, y, k);
        expectation += p * hyp.at(x, y, k);
        peak = std::max(peak, p);
      }
      out.depth.set(x, y, static_cast<float>(expectation));
      out.confidence.at(x, y) = static_cast<float>(peak);
    }
  });
  return out;
}

double coarse_interval(const Camera& cam, const Config& cfg) {
  return (cam.d_max - cam.d_min) / (cfg.hypotheses_coarse - 1);
}

namespace {

int extra_levels_for_divisor(const Config& cfg) {
  int e = 0, d = cfg.low_res_divisor;
  while (d > 1 && d % 2 == 0) {
    d /= 2;
    ++e;
  }
  return std::min(e, cfg.pyramid_levels_fine - cfg.pyramid_levels_coarse);
}

}  // namespace

double finest_low_interval(const Camera& cam, const Config& cfg) {
  return coarse_interval(cam, cfg) /
         std::pow(2.0, cfg.pyramid_levels_coarse - 1);
}

double finest_interval(const Camera& cam, const Config& cfg) {
  return finest_low_interval(cam, cfg) /
         std::pow(2.0, extra_levels_for_divisor(cfg));
}

ViewInference infer_depth_view(const std::vector<Image>& gray_images,
                               const std::vector<Camera>& cameras,
                               int ref_view, const std::vector<int>& sources,
                               int levels, const Config& cfg,
                               const DepthMap* prior) {
  if (levels < 1) throw std::invalid_argument("infer_depth_view: levels >= 1");
  const Image& ref_full = gray_images[ref_view];
  int down = 1 << (levels - 1);
  if (ref_full.width % down != 0 || ref_full.height % down != 0)
    throw std::invalid_argument(
        "infer_depth_view: resolution not divisible by 2^(levels-1)");
  if (prior && (prior->width != ref_full.width || prior->height != ref_full.height))
    throw std::invalid_argument("infer_depth_view: prior resolution mismatch");

  // Image/camera pyramids, index 0 = finest.
  std::vector<std::vector<Image>> pyr(levels);
  std::vector<std::vector<Camera>> cam_pyr(levels);
  std::vector<int> all_views{ref_view};
  all_views.insert(all_views.end(), sources.begin(), sources.end());
  for (int l = 0; l < levels; ++l) {
    int f = 1 << l;
    for (int v : all_views) {
      pyr[l].push_back(downsample(gray_images[v], f));
      cam_pyr[l].push_back(scale_camera(cameras[v], f));
    }
  }
  auto level_sources = [&](int l) {
    return std::vector<Image>(pyr[l].begin() + 1, pyr[l].end());
  };
  auto level_src_cams = [&](int l) {
    return std::vector<Camera>(cam_pyr[l].begin() + 1, cam_pyr[l].end());
  };

  const Camera& ref_cam = cameras[ref_view];
  double base_interval = coarse_interval(ref_cam, cfg);

  int lc = levels - 1;  // coarsest
  HypothesisSet hyp = build_hypotheses_coarse(
      ref_cam.d_min, ref_cam.d_max, cfg.hypotheses_coarse,
      pyr[lc][0].width, pyr[lc][0].height);
  CostVolume cv = matching_cost(pyr[lc][0], cam_pyr[lc][0], level_sources(lc),
                                level_src_cams(lc), hyp);
  ProbabilityVolume pv = cost_to_probability(cv, cfg.softmax_temperature);
  RegressedDepth reg = regress_depth(pv, hyp);

  for (int l = levels - 2; l >= 0; --l) {
    DepthMap up = upsample_depth(reg.depth, 2);
    double interval = base_interval / std::pow(2.0, levels - 1 - l);
    hyp = build_hypotheses_refined(up, interval, cfg.hypotheses_fine);
    cv = matching_cost(pyr[l][0], cam_pyr[l][0], level_sources(l),
                       level_src_cams(l), hyp);
    pv = cost_to_probability(cv, cfg.softmax_temperature);
    reg = regress_depth(pv, hyp);
  }

  if (prior) {
    // Prior-guided re-sweep at the finest level: candidates center on the
    // pseudo label where it exists (photometric estimate elsewhere) and the
    // cost carries the label-distance bias.
    double interval = base_interval / std::pow(2.0, levels - 1);
    DepthMap centers = reg.depth;
    for (int y = 0; y < centers.height; ++y)
      for (int x = 0; x < centers.width; ++x)
        if (prior->is_valid(x, y)) centers.set(x, y, prior->at(x, y));
    hyp = build_hypotheses_refined(centers, interval, cfg.hypotheses_fine);
    CostBias bias{prior, cfg.prior_bias, interval};
    cv = matching_cost(pyr[0][0], cam_pyr[0][0], level_sources(0),
                       level_src_cams(0), hyp, bias);
    pv = cost_to_probability(cv, cfg.softmax_temperature);
    reg = regress_depth(pv, hyp);
  }

  ViewInference vi;
  vi.depth = std::move(reg.depth);
  vi.confidence = std::move(reg.confidence);
  vi.prob_finest = std::move(pv);
  vi.hyp_finest = std::move(hyp);
  return vi;
}

std::vector<ViewInference> infer_depth_pyramid(
    const std::vector<Image>& images, const std::vector<Camera>& cameras,
    const std::vector<std::vector<int>>& pair_list, int levels,
    const Config& cfg, const std::vector<const DepthMap*>* priors) {
  const int n = static_cast<int>(images.size());
  if (static_cast<int>(cameras.size()) != n ||
      static_cast<int>(pair_list.size()) != n)
    throw std::invalid_argument("infer_depth_pyramid: views/cameras/pairs mismatch");
  std::vector<Image> gray;
  gray.reserve(n);
  for (const Image& img : images) gray.push_back(to_grayscale(img));
  std::vector<ViewInference> out(n);
  for (int v = 0; v < n; ++v) {
    std::vector<int> sources = pair_list[v];
    if (static_cast<int>(sources.size()) > cfg.num_source_views)
      sources.resize(cfg.num_source_views);
    if (sources.empty())
      throw std::invalid_argument("infer_depth_pyramid: view " +
                                  std::to_string(v) + " has no source views");
    const DepthMap* prior = priors ? (*priors)[v] : nullptr;
    out[v] = infer_depth_view(gray, cameras, v, sources, levels, cfg, prior);
  }
  return out;
}

DepthMap refine_high_resolution(const std::vector<Image>& gray_high,
                                const std::vector<Camera>& cams_high,
                                int ref_view, const std::vector<int>& sources,
                                const DepthMap& prior_low, const Config& cfg) {
  const Image& ref = gray_high[ref_view];
  if (ref.width % prior_low.width != 0 || ref.height % prior_low.height != 0)
    throw std::invalid_argument(
        "refine_high_resolution: high resolution must be a multiple of the prior's");
  int factor = ref.width / prior_low.width;
  if (ref.height / prior_low.height != factor)
    throw std::invalid_argument(
        "refine_high_resolution: inconsistent x/y resolution ratio");
  int extra = 0;
  for (int f = factor; f > 1; f /= 2) {
    if (f % 2 != 0)
      throw std::invalid_argument(
          "refine_high_resolution: resolution ratio must be a power of two");
    ++extra;
  }
  if (extra > cfg.pyramid_levels_fine - cfg.pyramid_levels_coarse)
    throw std::invalid_argument(
        "refine_high_resolution: resolution ratio exceeds the fine pyramid "
        "level budget");
  if (extra == 0) return prior_low;

  const Camera& ref_cam_high = cams_high[ref_view];
  double base = finest_low_interval(ref_cam_high, cfg);

  DepthMap depth = prior_low;
  for (int e = 1; e <= extra; ++e) {
    int f = 1 << (extra - e);  // downsample factor from the high resolution
    std::vector<Image> srcs;
    std::vector<Camera> src_cams;
    for (int s : sources) {
      srcs.push_back(downsample(gray_high[s], f));
      src_cams.push_back(scale_camera(cams_high[s], f));
    }
    Image ref_l = downsample(ref, f);
    Camera ref_cam_l = scale_camera(ref_cam_high, f);
    DepthMap up = upsample_depth(depth, 2);
    double interval = base / std::pow(2.0, e);
    HypothesisSet hyp = build_hypotheses_refined(up, interval,
                                                 cfg.hypotheses_fine);
    CostVolume cv = matching_cost(ref_l, ref_cam_l, srcs, src_cams, hyp);
    ProbabilityVolume pv = cost_to_probability(cv, cfg.softmax_temperature);
    depth = regress_depth(pv, hyp).depth;
  }
  return depth;
}

}  // namespace mvspl

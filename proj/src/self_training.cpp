#include "mvspl/self_training.hpp"

#include <cmath>
#include <cstdio>

#include "mvspl/consistency.hpp"
#include "mvspl/image_ops.hpp"

namespace mvspl {

std::vector<std::vector<int>> capped_sources(
    const std::vector<std::vector<int>>& pair_list, int cap) {
  std::vector<std::vector<int>> out = pair_list;
  for (auto& srcs : out)
    if (static_cast<int>(srcs.size()) > cap) srcs.resize(cap);
  return out;
}

std::string view_name(int view) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08d", view);
  return buf;
}

namespace {

// Per-pixel photometric score of a synthesized view against the reference:
// box-averaged gradient L1 difference plus the SSIM deficit, weighted like
// the synthesis loss. Used by the initialization gate.
Image per_pixel_synthesis_error(const Image& synthesized, const Image& reference,
                                const Config& cfg) {
  Gradients gs = forward_gradients(synthesized);
  Gradients gr = forward_gradients(reference);
  Image grad_err(synthesized.width, synthesized.height, 1);
  grad_err.mask.assign(grad_err.pixel_count(), 0);
  for (int y = 0; y < synthesized.height; ++y)
    for (int x = 0; x < synthesized.width; ++x) {
      size_t i = static_cast<size_t>(y) * synthesized.width + x;
      double acc = 0.0;
      bool any = false;
      if (gs.du_valid[i] && gr.du_valid[i]) {
        acc += std::abs(gs.du.at(x, y) - gr.du.at(x, y));
        any = true;
      }
      if (gs.dv_valid[i] && gr.dv_valid[i]) {
        acc += std::abs(gs.dv.at(x, y) - gr.dv.at(x, y));
        any = true;
      }
      if (any) {
        grad_err.at(x, y) = static_cast<float>(acc);
        grad_err.set_valid(x, y, true);
      }
    }
  grad_err = box_filter(grad_err, 1);

  Image ssim = ssim_index(synthesized, reference, 7);
  Image err(synthesized.width, synthesized.height, 1);
  err.mask.assign(err.pixel_count(), 0);
  double wsum = cfg.alpha_gradient + cfg.alpha_ssim;
  if (wsum <= 0) wsum = 1.0;
  for (int y = 0; y < err.height; ++y)
    for (int x = 0; x < err.width; ++x) {
      if (!grad_err.valid(x, y) || !ssim.valid(x, y)) continue;
      double v = (cfg.alpha_gradient * grad_err.at(x, y) +
                  cfg.alpha_ssim * (1.0 - ssim.at(x, y))) /
                 wsum;
      err.at(x, y) = static_cast<float>(v);
      err.set_valid(x, y, true);
    }
  return err;
}

// Mean of per-view error maps over the views valid at each pixel.
Image mean_error(const std::vector<Image>& maps) {
  Image out(maps[0].width, maps[0].height, 1);
  out.mask.assign(out.pixel_count(), 0);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      double acc = 0.0;
      int n = 0;
      for (const Image& m : maps)
        if (m.valid(x, y)) {
          acc += m.at(x, y);
          ++n;
        }
      if (n > 0) {
        out.at(x, y) = static_cast<float>(acc / n);
        out.set_valid(x, y, true);
      }
    }
  return out;
}

void compute_gt_metrics(const PipelineState& state,
                        const std::vector<DepthMap>& labels,
                        const PointCloud& fused, IterationMetrics& m) {
  if (!state.gt) return;
  m.has_gt = true;
  double mae_sum = 0.0, rmse_sum = 0.0;
  int n = 0;
  for (size_t v = 0; v < labels.size(); ++v) {
    try {
      DepthErrorStats s =
          depth_error_stats(labels[v], state.gt->depth_low[v], state.finest);
      mae_sum += s.mae;
      rmse_sum += s.rmse;
      ++n;
    } catch (const std::invalid_argument&) {
      // view with no overlap; skip
    }
  }
  if (n > 0) {
    m.mae = mae_sum / n;
    m.rmse = rmse_sum / n;
  }
  if (!fused.empty() && !state.gt->cloud.empty()) {
    CloudMetrics cm = accuracy_completeness(fused, state.gt->cloud, 20.0);
    m.accuracy = cm.accuracy;
    m.completeness = cm.completeness;
    m.overall = cm.overall;
    FScore fs = f_score(fused, state.gt->cloud, 0.5);
    m.precision = fs.precision;
    m.recall = fs.recall;
    m.f_score = fs.f;
  }
}

double coverage_of(const std::vector<DepthMap>& labels) {
  size_t valid = 0, total = 0;
  for (const DepthMap& d : labels) {
    valid += d.valid_count();
    total += d.depth.size();
  }
  return total > 0 ? static_cast<double>(valid) / total : 0.0;
}

}  // namespace

PipelineState initialize(const Scene& scene, const Config& config,
                         std::optional<GroundTruthData> gt) {
  config.validate();
  if (scene.manifest.view_count() < 2)
    throw StageError("initialize", "need at least 2 views, scene has " +
                                       std::to_string(scene.manifest.view_count()));
  PipelineState state;
  state.config = config;
  state.gt = std::move(gt);

  const int n = scene.manifest.view_count();
  for (int v = 0; v < n; ++v) {
    state.cams_high.push_back(scene.cameras[v]);
    state.cams_low.push_back(scale_camera(scene.cameras[v], config.low_res_divisor));
    state.images_low.push_back(downsample(scene.images[v], config.low_res_divisor));
    state.gray_low.push_back(to_grayscale(state.images_low.back()));
    state.gray_high.push_back(to_grayscale(scene.images[v]));
  }
  state.sources = capped_sources(scene.manifest.pair_list, config.num_source_views);
  for (int v = 0; v < n; ++v)
    if (state.sources[v].empty())
      throw StageError("initialize",
                       "view " + std::to_string(v) + " has no source views");
  state.resolved_r_max =
      config.r_max > 0.0 ? config.r_max
                         : 0.5 * finest_interval(state.cams_low[0], config);
  state.finest = finest_interval(state.cams_low[0], config);

  // Plain (unguided) low-resolution inference.
  std::vector<ViewInference> inferences =
      infer_depth_pyramid(state.images_low, state.cams_low, state.sources,
                          config.pyramid_levels_coarse, config);

  // Synthesis-quality gate and initialization loss.
  double lg_sum = 0, lssim_sum = 0, lp_sum = 0, ls_sum = 0;
  size_t valid_px = 0;
  int loss_views = 0;
  FeatureExtractor extractor = default_feature_extractor();
  state.labels.resize(n);
  state.inferred.resize(n);
  for (int v = 0; v < n; ++v) {
    const ViewInference& vi = inferences[v];
    state.inferred[v] = vi.depth;
    ProbabilityVolume uniform = vi.prob_finest;
    for (int y = 0; y < uniform.height; ++y)
      for (int x = 0; x < uniform.width; ++x) {
        if (!uniform.valid(x, y)) continue;
        size_t base = (static_cast<size_t>(y) * uniform.width + x) * uniform.count;
        for (int k = 0; k < uniform.count; ++k)
          uniform.p[base + k] = 1.0f / uniform.count;
      }

    std::vector<Image> syn_est, syn_uni;
    std::vector<Image> err_est, err_uni;
    const Image& ref_gray = state.gray_low[v];
    for (int s : state.sources[v]) {
      IntensityVolume B = build_intensity_volume(
          state.gray_low[s], state.cams_low[v], state.cams_low[s], vi.hyp_finest);
      Image est = synthesize_image(B, vi.prob_finest);
      Image uni = synthesize_image(B, uniform);
      err_est.push_back(per_pixel_synthesis_error(est, ref_gray, config));
      err_uni.push_back(per_pixel_synthesis_error(uni, ref_gray, config));
      syn_est.push_back(std::move(est));
      syn_uni.push_back(std::move(uni));
    }

    Image est_err = mean_error(err_est);
    Image uni_err = mean_error(err_uni);
    DepthMap gated(vi.depth.width, vi.depth.height);
    for (int y = 0; y < gated.height; ++y)
      for (int x = 0; x < gated.width; ++x) {
        if (!vi.depth.is_valid(x, y)) continue;
        if (!est_err.valid(x, y) || !uni_err.valid(x, y)) continue;
        if (est_err.at(x, y) < uni_err.at(x, y) - config.gate_margin)
          gated.set(x, y, vi.depth.at(x, y));
      }
    state.labels[v] = std::move(gated);

    try {
      double lg = loss_gradient(syn_est, ref_gray);
      double ls = loss_ssim(syn_est, ref_gray);
      double lp = loss_perceptual(syn_est, ref_gray, extractor);
      double lsm = loss_smoothness(vi.depth, state.images_low[v]);
      lg_sum += lg;
      lssim_sum += ls;
      lp_sum += lp;
      ls_sum += lsm;
      ++loss_views;
    } catch (const std::invalid_argument&) {
      // No valid synthesized pixels in this view; it contributes no loss.
    }
    valid_px += state.labels[v].valid_count();
  }

  IterationMetrics m;
  m.iteration = 0;
  if (loss_views > 0) {
    LossWeights w{config.alpha_gradient, config.alpha_ssim,
                  config.alpha_perceptual, config.alpha_smoothness};
    m.synthesis =
        loss_synthesis(lg_sum / loss_views, lssim_sum / loss_views,
                       lp_sum / loss_views, ls_sum / loss_views, w, valid_px);
  }
  m.coverage = coverage_of(state.labels);
  if (state.gt) {
    PointCloud init_cloud;
    try {
      init_cloud = fuse_point_cloud(state.labels, state.cams_low);
    } catch (const StageError&) {
      // all labels gated out; metrics stay at zero
    }
    compute_gt_metrics(state, state.labels, init_cloud, m);
  }
  state.history.push_back(m);
  return state;
}

void run_iteration(PipelineState& state, const SurfaceReconstructor& recon,
                   const StageSink* sink) {
  const Config& cfg = state.config;
  const int n = static_cast<int>(state.images_low.size());
  const int t = state.iteration + 1;
  auto stage_error = [&](const std::string& stage, const std::string& what) {
    return StageError(stage, "iteration " + std::to_string(t) + ": " + what);
  };

  // 1. Label-guided re-inference at low resolution.
  std::vector<const DepthMap*> priors(n);
  for (int v = 0; v < n; ++v)
    priors[v] = state.labels[v].valid_count() > 0 ? &state.labels[v] : nullptr;
  std::vector<ViewInference> inferences;
  try {
    inferences = infer_depth_pyramid(state.images_low, state.cams_low,
                                     state.sources, cfg.pyramid_levels_coarse,
                                     cfg, &priors);
  } catch (const std::invalid_argument& e) {
    throw stage_error("infer", e.what());
  }
  std::vector<DepthMap> inferred(n);
  for (int v = 0; v < n; ++v) {
    inferred[v] = inferences[v].depth;
    if (sink && sink->depth) sink->depth(t, "infer", v, inferred[v]);
  }

  // 2. High-resolution refinement.
  std::vector<DepthMap> refined(n);
  for (int v = 0; v < n; ++v) {
    try {
      refined[v] = refine_high_resolution(state.gray_high, state.cams_high, v,
                                          state.sources[v], inferred[v], cfg);
    } catch (const std::invalid_argument& e) {
      throw stage_error("refine", e.what());
    }
    if (refined[v].valid_count() == 0)
      throw stage_error("refine", "view " + std::to_string(v) + " came back empty");
    if (sink && sink->depth) sink->depth(t, "refine", v, refined[v]);
  }

  // 3. Cross-view consistency filter.
  std::vector<DepthMap> filtered(n);
  size_t kept_total = 0;
  for (int v = 0; v < n; ++v) {
    std::vector<const DepthMap*> src_depths;
    std::vector<Camera> src_cams;
    for (int s : state.sources[v]) {
      src_depths.push_back(&refined[s]);
      src_cams.push_back(state.cams_high[s]);
    }
    FilterResult fr =
        filter_depth(refined[v], src_depths, state.cams_high[v], src_cams,
                     state.resolved_r_max, cfg.n_min, cfg.vote_inclusive);
    kept_total += fr.filtered.valid_count();
    filtered[v] = std::move(fr.filtered);
    if (sink && sink->depth) sink->depth(t, "filter", v, filtered[v]);
    if (sink && sink->grid) {
      Image votes(filtered[v].width, filtered[v].height, 1);
      for (size_t i = 0; i < fr.votes.size(); ++i)
        votes.data[i] = static_cast<float>(fr.votes[i]);
      sink->grid(t, "votes", v, votes);
    }
  }
  if (kept_total == 0)
    throw stage_error("filter", "no pixel survived the consistency filter");

  // 4. Fuse into the pseudo point cloud.
  PointCloud cloud;
  try {
    cloud = fuse_point_cloud(filtered, state.cams_high);
  } catch (const StageError& e) {
    throw stage_error("fuse", e.what());
  }
  if (sink && sink->cloud) sink->cloud(t, cloud);

  // 5. Surface reconstruction.
  ReconstructionParams rp;
  rp.voxel_size = cfg.voxel_size;
  TriangleMesh mesh;
  try {
    mesh = recon.reconstruct(cloud, state.cams_high, rp);
  } catch (const std::invalid_argument& e) {
    throw stage_error("reconstruct", e.what());
  }
  if (mesh.empty()) throw stage_error("reconstruct", "empty mesh");
  if (sink && sink->mesh) sink->mesh(t, mesh);

  // 6. Render complete low-resolution pseudo labels.
  std::vector<DepthMap> new_labels(n);
  for (int v = 0; v < n; ++v) {
    new_labels[v] = render_depth(mesh, state.cams_low[v],
                                 state.images_low[v].width,
                                 state.images_low[v].height);
    if (sink && sink->depth) sink->depth(t, "labels", v, new_labels[v]);
  }

  // 7. Metrics and bookkeeping.
  IterationMetrics m;
  m.iteration = t;
  m.coverage = coverage_of(new_labels);
  try {
    AgreementScore fit = pseudo_agreement(inferred, state.labels);
    m.supervision_fit_sum = fit.sum;
    m.supervision_fit_mean = fit.mean;
  } catch (const std::invalid_argument&) {
    m.supervision_fit_mean = std::numeric_limits<double>::quiet_NaN();
  }
  try {
    AgreementScore change = pseudo_agreement(new_labels, state.labels);
    m.label_change_mean = change.mean;
  } catch (const std::invalid_argument&) {
    m.label_change_mean = std::numeric_limits<double>::infinity();
  }
  compute_gt_metrics(state, new_labels, cloud, m);

  double eps = cfg.epsilon_stop_intervals * state.finest;
  if (m.label_change_mean <= eps) {
    m.converged = true;
    state.converged = true;
  }

  state.inferred = std::move(inferred);
  state.labels = std::move(new_labels);
  state.iteration = t;
  state.history.push_back(m);
}

PipelineState run_pipeline(const Scene& scene, const Config& config,
                           std::optional<GroundTruthData> gt,
                           const PipelineOptions& options) {
  PipelineState state = initialize(scene, config, std::move(gt));
  if (options.on_metrics) options.on_metrics(state.history.back());
  auto recon = make_default_reconstructor();
  int iterations = options.iterations.value_or(config.iterations);
  for (int t = 0; t < iterations; ++t) {
    run_iteration(state, *recon, options.sink);
    if (options.on_metrics) options.on_metrics(state.history.back());
    if (state.converged && !options.disable_early_stop) break;
  }
  return state;
}

}  // namespace mvspl

#include "mvspl/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mvspl/consistency.hpp"
#include "mvspl/evaluation.hpp"
#include "mvspl/fusion.hpp"
#include "mvspl/image_ops.hpp"
#include "mvspl/parallel.hpp"
#include "mvspl/photometric.hpp"
#include "mvspl/plane_sweep.hpp"
#include "mvspl/scene_io.hpp"
#include "mvspl/self_training.hpp"
#include "mvspl/synthetic.hpp"

namespace fs = std::filesystem;

namespace mvspl {

namespace {

int log_level() {
  const char* env = std::getenv("MVSPL_LOG");
  if (!env) return 1;
  return std::atoi(env);
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[mvspl] " << msg << "\n";
}

struct CommonOptions {
  std::string config_path;
  int jobs = 0;
  bool overwrite = false;
  std::string format = "text";
  std::vector<std::pair<std::string, std::string>> overrides;
};

// Every Config key becomes a flag of the same name; flags beat file values.
void add_config_flags(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "Configuration file");
  cmd->add_option("--jobs", opts.jobs, "Worker cap for parallel stages");
  cmd->add_flag("--overwrite", opts.overwrite, "Replace existing outputs");
  cmd->add_option("--format", opts.format, "Metric output format: text|kv")
      ->check(CLI::IsMember({"text", "kv"}));
  static const char* keys[] = {
      "pyramid_levels_coarse", "pyramid_levels_fine", "hypotheses_coarse",
      "hypotheses_fine",       "softmax_temperature", "alpha_gradient",
      "alpha_ssim",            "alpha_perceptual",    "alpha_smoothness",
      "r_max",                 "n_min",               "vote_inclusive",
      "voxel_size",            "iterations",          "prior_bias",
      "low_res_divisor",       "num_source_views",    "gate_margin",
      "epsilon_stop_intervals"};
  for (const char* key : keys) {
    cmd->add_option_function<std::string>(
        std::string("--") + key,
        [key, &opts](const std::string& value) {
          opts.overrides.emplace_back(key, value);
        },
        "Config override");
  }
}

Config resolve_config(const CommonOptions& opts) {
  Config cfg;
  if (!opts.config_path.empty()) cfg = load_config(opts.config_path);
  cfg = apply_config_overrides(cfg, opts.overrides);
  if (opts.jobs > 0) set_worker_count(opts.jobs);
  return cfg;
}

void prepare_out_dir(const std::string& dir, bool overwrite) {
  if (fs::exists(dir) && !fs::is_directory(dir))
    throw IoError("output path is not a directory: " + dir);
  if (fs::is_directory(dir) && !fs::is_empty(dir) && !overwrite)
    throw IoError("output directory " + dir +
                  " is not empty (pass --overwrite to replace)");
  fs::create_directories(dir);
}

std::vector<DepthMap> load_depth_dir(const std::string& dir, int views) {
  std::vector<DepthMap> out;
  for (int v = 0; v < views; ++v) {
    fs::path p = fs::path(dir) / (view_name(v) + ".pfm");
    if (!fs::exists(p)) throw IoError("missing depth map " + p.string());
    out.push_back(load_depth_pfm(p.string()));
  }
  return out;
}

double resolve_r_max(const Scene& scene, const Config& cfg) {
  return cfg.r_max > 0.0 ? cfg.r_max
                         : 0.5 * finest_interval(scene.cameras[0], cfg);
}

void print_kv(const std::vector<std::pair<std::string, std::string>>& kv,
              const std::string& format) {
  if (format == "kv") {
    for (size_t i = 0; i < kv.size(); ++i)
      std::cout << kv[i].first << "=" << kv[i].second
                << (i + 1 < kv.size() ? " " : "\n");
  } else {
    for (const auto& [k, v] : kv) std::cout << "  " << k << ": " << v << "\n";
  }
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(10);
  ss << v;
  return ss.str();
}

std::vector<std::pair<std::string, std::string>> metric_row(
    const IterationMetrics& m) {
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("iter", std::to_string(m.iteration));
  kv.emplace_back("coverage", fmt(m.coverage));
  if (m.iteration == 0) {
    kv.emplace_back("l_gradient", fmt(m.synthesis.l_gradient));
    kv.emplace_back("l_ssim", fmt(m.synthesis.l_ssim));
    kv.emplace_back("l_perceptual", fmt(m.synthesis.l_perceptual));
    kv.emplace_back("l_smoothness", fmt(m.synthesis.l_smoothness));
    kv.emplace_back("l_synthesis", fmt(m.synthesis.l_synthesis));
  } else {
    kv.emplace_back("supervision_fit_sum", fmt(m.supervision_fit_sum));
    kv.emplace_back("supervision_fit_mean", fmt(m.supervision_fit_mean));
    kv.emplace_back("label_change_mean", fmt(m.label_change_mean));
    kv.emplace_back("converged", m.converged ? "1" : "0");
  }
  if (m.has_gt) {
    kv.emplace_back("mae", fmt(m.mae));
    kv.emplace_back("rmse", fmt(m.rmse));
    kv.emplace_back("accuracy", fmt(m.accuracy));
    kv.emplace_back("completeness", fmt(m.completeness));
    kv.emplace_back("overall", fmt(m.overall));
    kv.emplace_back("precision", fmt(m.precision));
    kv.emplace_back("recall", fmt(m.recall));
    kv.emplace_back("f_score", fmt(m.f_score));
  }
  return kv;
}

std::optional<GroundTruthData> load_ground_truth(const std::string& gt_dir,
                                                 const Scene& scene) {
  if (gt_dir.empty()) return std::nullopt;
  GroundTruthData gt;
  std::vector<DepthMap> gt_high;
  for (int v = 0; v < scene.manifest.view_count(); ++v) {
    fs::path low = fs::path(gt_dir) / "gt_low" / (view_name(v) + ".pfm");
    fs::path high = fs::path(gt_dir) / "gt" / (view_name(v) + ".pfm");
    if (!fs::exists(low) || !fs::exists(high))
      throw IoError("ground truth incomplete under " + gt_dir);
    gt.depth_low.push_back(load_depth_pfm(low.string()));
    gt_high.push_back(load_depth_pfm(high.string()));
  }
  gt.cloud = fuse_point_cloud(gt_high, scene.cameras);
  return gt;
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

int run_synth(const std::string& out_dir, const std::string& surface,
              const std::string& texture, int views, int width, int height,
              double focal, double ring_radius, double ring_distance,
              uint64_t seed, const CommonOptions& opts) {
  Config cfg = resolve_config(opts);
  SyntheticSceneSpec spec;
  spec.surface = parse_surface_kind(surface);
  spec.texture = parse_texture_kind(texture);
  spec.views = views;
  spec.width = width;
  spec.height = height;
  spec.focal = focal;
  spec.ring_radius = ring_radius;
  spec.ring_distance = ring_distance;
  spec.seed = seed;
  prepare_out_dir(out_dir, opts.overwrite);
  SyntheticScene scene = generate_synthetic_scene(spec);
  write_synthetic_scene(scene, out_dir, cfg.low_res_divisor);
  log_info("wrote synthetic scene (" + surface + "/" + texture + ", " +
           std::to_string(views) + " views) to " + out_dir);
  return 0;
}

int run_infer(const std::string& scene_dir, const std::string& out_dir,
              const std::string& prior_dir, bool gate,
              const CommonOptions& opts) {
  Config cfg = resolve_config(opts);
  Scene scene = load_scene(scene_dir, cfg.low_res_divisor);
  prepare_out_dir(out_dir, opts.overwrite);
  if (gate) {
    PipelineState state = initialize(scene, cfg);
    for (int v = 0; v < scene.manifest.view_count(); ++v) {
      save_depth_pfm(state.labels[v],
                     (fs::path(out_dir) / (view_name(v) + ".pfm")).string());
    }
    print_kv(metric_row(state.history.front()), opts.format);
    return 0;
  }
  std::vector<Image> images_low;
  std::vector<Camera> cams_low;
  for (int v = 0; v < scene.manifest.view_count(); ++v) {
    images_low.push_back(downsample(scene.images[v], cfg.low_res_divisor));
    cams_low.push_back(scale_camera(scene.cameras[v], cfg.low_res_divisor));
  }
  auto sources = capped_sources(scene.manifest.pair_list, cfg.num_source_views);
  std::vector<DepthMap> prior_maps;
  std::vector<const DepthMap*> priors;
  if (!prior_dir.empty()) {
    prior_maps = load_depth_dir(prior_dir, scene.manifest.view_count());
    for (const DepthMap& d : prior_maps)
      priors.push_back(d.valid_count() > 0 ? &d : nullptr);
  }
  std::vector<ViewInference> result = infer_depth_pyramid(
      images_low, cams_low, sources, cfg.pyramid_levels_coarse, cfg,
      priors.empty() ? nullptr : &priors);
  for (int v = 0; v < scene.manifest.view_count(); ++v) {
    save_depth_pfm(result[v].depth,
                   (fs::path(out_dir) / (view_name(v) + ".pfm")).string());
    save_grid_pfm(result[v].confidence,
                  (fs::path(out_dir) / (view_name(v) + "_conf.pfm")).string());
  }
  log_info("inferred " + std::to_string(scene.manifest.view_count()) +
           " low-resolution depth maps");
  return 0;
}

int run_refine(const std::string& scene_dir, const std::string& prior_dir,
               const std::string& out_dir, const CommonOptions& opts) {
  Config cfg = resolve_config(opts);
  Scene scene = load_scene(scene_dir, cfg.low_res_divisor);
  std::vector<DepthMap> priors =
      load_depth_dir(prior_dir, scene.manifest.view_count());
  prepare_out_dir(out_dir, opts.overwrite);
  std::vector<Image> gray_high;
  for (const Image& img : scene.images) gray_high.push_back(to_grayscale(img));
  auto sources = capped_sources(scene.manifest.pair_list, cfg.num_source_views);
  for (int v = 0; v < scene.manifest.view_count(); ++v) {
    DepthMap refined = refine_high_resolution(gray_high, scene.cameras, v,
                                              sources[v], priors[v], cfg);
    save_depth_pfm(refined,
                   (fs::path(out_dir) / (view_name(v) + ".pfm")).string());
  }
  log_info("refined " + std::to_string(scene.manifest.view_count()) +
           " views to high resolution");
  return 0;
}

int run_score(const std::string& scene_dir, const CommonOptions& opts) {
  Config cfg = resolve_config(opts);
  Scene scene = load_scene(scene_dir, cfg.low_res_divisor);
  PipelineState state = initialize(scene, cfg);
  print_kv(metric_row(state.history.front()), opts.format);
  return 0;
}

int run_filter(const std::string& scene_dir, const std::string& depth_dir,
               const std::string& out_dir, const CommonOptions& opts) {
  Config cfg = resolve_config(opts);
  for (const auto& [k, v] : opts.overrides)
    if (k == "r_max" && !(std::stod(v) > 0.0))
      throw std::invalid_argument("filter: --r_max must be positive");
  Scene scene = load_scene(scene_dir, cfg.low_res_divisor);
  std::vector<DepthMap> depths =
      load_depth_dir(depth_dir, scene.manifest.view_count());
  prepare_out_dir(out_dir, opts.overwrite);
  double r_max = resolve_r_max(scene, cfg);
  // Cameras must match the depth-map resolution (usually full resolution).
  if (scene.manifest.high_width % depths[0].width != 0)
    throw IoError("depth resolution does not divide the image resolution");
  int factor = scene.manifest.high_width / depths[0].width;
  std::vector<Camera> cams;
  for (const Camera& c : scene.cameras) cams.push_back(scale_camera(c, factor));
  auto sources = capped_sources(scene.manifest.pair_list, cfg.num_source_views);
  for (int v = 0; v < scene.manifest.view_count(); ++v) {
    std::vector<const DepthMap*> src_depths;
    std::vector<Camera> src_cams;
    for (int s : sources[v]) {
      src_depths.push_back(&depths[s]);
      src_cams.push_back(cams[s]);
    }
    FilterResult fr = filter_depth(depths[v], src_depths, cams[v], src_cams,
                                   r_max, cfg.n_min, cfg.vote_inclusive);
    save_depth_pfm(fr.filtered,
                   (fs::path(out_dir) / (view_name(v) + ".pfm")).string());
    Image votes(depths[v].width, depths[v].height, 1);
    for (size_t i = 0; i < fr.votes.size(); ++i)
      votes.data[i] = static_cast<float>(fr.votes[i]);
    save_grid_pfm(votes,
                  (fs::path(out_dir) / (view_name(v) + "_votes.pfm")).string());
  }
  log_info("filtered with r_max=" + fmt(r_max) +
           " n_min=" + std::to_string(cfg.n_min));
  return 0;
}

int run_fuse(const std::string& scene_dir, const std::string& depth_dir,
             const std::string& out_dir, const CommonOptions& opts) {
  Config cfg = resolve_config(opts);
  Scene scene = load_scene(scene_dir, cfg.low_res_divisor);
  std::vector<DepthMap> depths =
      load_depth_dir(depth_dir, scene.manifest.view_count());
  prepare_out_dir(out_dir, opts.overwrite);
  if (scene.manifest.high_width % depths[0].width != 0)
    throw IoError("depth resolution does not divide the image resolution");
  int factor = scene.manifest.high_width / depths[0].width;
  std::vector<Camera> cams;
  for (const Camera& c : scene.cameras) cams.push_back(scale_camera(c, factor));
  PointCloud cloud = fuse_point_cloud(depths, cams);
  save_pointcloud_ply(cloud, (fs::path(out_dir) / "cloud.ply").string());
  ReconstructionParams rp;
  rp.voxel_size = cfg.voxel_size;
  TriangleMesh mesh = make_default_reconstructor()->reconstruct(cloud, cams, rp);
  save_mesh_ply(mesh, (fs::path(out_dir) / "mesh.ply").string());
  log_info("fused " + std::to_string(cloud.size()) + " points, mesh has " +
           std::to_string(mesh.triangles.size()) + " triangles");
  return 0;
}

int run_render(const std::string& scene_dir, const std::string& mesh_path,
               const std::string& out_dir, const CommonOptions& opts) {
  Config cfg = resolve_config(opts);
  Scene scene = load_scene(scene_dir, cfg.low_res_divisor);
  TriangleMesh mesh = load_mesh_ply(mesh_path);
  prepare_out_dir(out_dir, opts.overwrite);
  for (int v = 0; v < scene.manifest.view_count(); ++v) {
    Camera cam_low = scale_camera(scene.cameras[v], cfg.low_res_divisor);
    DepthMap rendered = render_depth(mesh, cam_low, scene.manifest.low_width,
                                     scene.manifest.low_height);
    save_depth_pfm(rendered,
                   (fs::path(out_dir) / (view_name(v) + ".pfm")).string());
  }
  log_info("rendered " + std::to_string(scene.manifest.view_count()) +
           " label maps at " + std::to_string(scene.manifest.low_width) + "x" +
           std::to_string(scene.manifest.low_height));
  return 0;
}

int run_iterate(const std::string& scene_dir, const std::string& out_dir,
                std::optional<int> iterations, const std::string& gt_dir,
                bool keep_intermediate, bool no_early_stop,
                const CommonOptions& opts) {
  Config cfg = resolve_config(opts);
  Scene scene = load_scene(scene_dir, cfg.low_res_divisor);
  prepare_out_dir(out_dir, opts.overwrite);
  std::optional<GroundTruthData> gt = load_ground_truth(gt_dir, scene);

  StageSink sink;
  if (keep_intermediate) {
    sink.depth = [&](int iter, const std::string& stage, int view,
                     const DepthMap& d) {
      fs::path dir = fs::path(out_dir) / ("iter" + std::to_string(iter)) / stage;
      fs::create_directories(dir);
      save_depth_pfm(d, (dir / (view_name(view) + ".pfm")).string());
    };
    sink.grid = [&](int iter, const std::string& stage, int view,
                    const Image& g) {
      fs::path dir = fs::path(out_dir) / ("iter" + std::to_string(iter)) / stage;
      fs::create_directories(dir);
      save_grid_pfm(g, (dir / (view_name(view) + ".pfm")).string());
    };
    sink.cloud = [&](int iter, const PointCloud& c) {
      fs::path dir = fs::path(out_dir) / ("iter" + std::to_string(iter));
      fs::create_directories(dir);
      save_pointcloud_ply(c, (dir / "cloud.ply").string());
    };
    sink.mesh = [&](int iter, const TriangleMesh& m) {
      fs::path dir = fs::path(out_dir) / ("iter" + std::to_string(iter));
      fs::create_directories(dir);
      save_mesh_ply(m, (dir / "mesh.ply").string());
    };
  }

  std::ofstream report(fs::path(out_dir) / "report.txt");
  PipelineOptions popts;
  popts.iterations = iterations;
  popts.disable_early_stop = no_early_stop;
  popts.sink = keep_intermediate ? &sink : nullptr;
  popts.on_metrics = [&](const IterationMetrics& m) {
    auto kv = metric_row(m);
    print_kv(kv, opts.format);
    for (size_t i = 0; i < kv.size(); ++i)
      report << kv[i].first << "=" << kv[i].second
             << (i + 1 < kv.size() ? " " : "\n");
    if (m.iteration > 0 && m.coverage < 0.10)
      log_info("iteration " + std::to_string(m.iteration) +
               ": pseudo-label coverage is only " + fmt(m.coverage * 100) +
               "% (texture-poor scene?)");
  };

  PipelineState state = run_pipeline(scene, cfg, std::move(gt), popts);
  fs::path labels_dir = fs::path(out_dir) / "labels";
  fs::create_directories(labels_dir);
  for (int v = 0; v < scene.manifest.view_count(); ++v)
    save_depth_pfm(state.labels[v],
                   (labels_dir / (view_name(v) + ".pfm")).string());
  log_info("pipeline finished after " + std::to_string(state.iteration) +
           " iteration(s)" + (state.converged ? " (converged)" : ""));
  return 0;
}

int run_eval(const std::string& rec_path, const std::string& ref_path,
             const std::string& rec_depth_dir, const std::string& ref_depth_dir,
             double tau, double max_dist, double interval,
             const CommonOptions& opts) {
  std::vector<std::pair<std::string, std::string>> kv;
  if (!rec_path.empty() && !ref_path.empty()) {
    PointCloud rec = load_pointcloud_ply(rec_path);
    PointCloud ref = load_pointcloud_ply(ref_path);
    CloudMetrics cm = accuracy_completeness(rec, ref, max_dist);
    FScore fs_ = f_score(rec, ref, tau);
    kv.emplace_back("accuracy", fmt(cm.accuracy));
    kv.emplace_back("completeness", fmt(cm.completeness));
    kv.emplace_back("overall", fmt(cm.overall));
    kv.emplace_back("precision", fmt(fs_.precision));
    kv.emplace_back("recall", fmt(fs_.recall));
    kv.emplace_back("f_score", fmt(fs_.f));
  } else if (!rec_depth_dir.empty() && !ref_depth_dir.empty()) {
    double mae_sum = 0, rmse_sum = 0, w1 = 0, w2 = 0, w4 = 0;
    size_t count = 0;
    int views = 0;
    for (int v = 0;; ++v) {
      fs::path rec_p = fs::path(rec_depth_dir) / (view_name(v) + ".pfm");
      fs::path ref_p = fs::path(ref_depth_dir) / (view_name(v) + ".pfm");
      if (!fs::exists(rec_p) || !fs::exists(ref_p)) break;
      DepthErrorStats s = depth_error_stats(load_depth_pfm(rec_p.string()),
                                            load_depth_pfm(ref_p.string()),
                                            interval);
      mae_sum += s.mae;
      rmse_sum += s.rmse;
      w1 += s.frac_within_1;
      w2 += s.frac_within_2;
      w4 += s.frac_within_4;
      count += s.count;
      ++views;
    }
    if (views == 0) throw IoError("no paired depth maps found");
    kv.emplace_back("views", std::to_string(views));
    kv.emplace_back("valid_pixels", std::to_string(count));
    kv.emplace_back("mae", fmt(mae_sum / views));
    kv.emplace_back("rmse", fmt(rmse_sum / views));
    kv.emplace_back("frac_within_1", fmt(w1 / views));
    kv.emplace_back("frac_within_2", fmt(w2 / views));
    kv.emplace_back("frac_within_4", fmt(w4 / views));
  } else {
    throw std::invalid_argument(
        "eval: pass --rec/--ref clouds or --rec-depth/--ref-depth directories");
  }
  print_kv(kv, opts.format);
  return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"Multi-view stereo pseudo-label pipeline"};
  app.require_subcommand(1);

  CommonOptions opts;

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene");
  std::string out_dir, surface = "plane", texture = "noise";
  int views = 5, width = 640, height = 512;
  double focal = 2400.0, ring_radius = 120.0, ring_distance = 600.0;
  uint64_t seed = 7;
  synth->add_option("--out", out_dir, "Scene directory")->required();
  synth->add_option("--surface", surface, "plane|sphere|heightfield");
  synth->add_option("--texture", texture, "checker|noise|uniform");
  synth->add_option("--views", views, "Camera ring size");
  synth->add_option("--width", width, "Full-resolution width");
  synth->add_option("--height", height, "Full-resolution height");
  synth->add_option("--focal", focal, "Focal length in pixels");
  synth->add_option("--ring-radius", ring_radius, "Camera ring radius");
  synth->add_option("--ring-distance", ring_distance, "Ring distance");
  synth->add_option("--seed", seed, "Texture seed");
  add_config_flags(synth, opts);

  // infer
  auto* infer = app.add_subcommand("infer", "Low-resolution depth inference");
  std::string scene_dir, prior_dir;
  bool gate = false;
  infer->add_option("--scene", scene_dir, "Scene directory")->required();
  infer->add_option("--out", out_dir, "Output directory")->required();
  infer->add_option("--prior", prior_dir, "Pseudo-label directory (guided)");
  infer->add_flag("--gate", gate, "Apply the synthesis-quality gate");
  add_config_flags(infer, opts);

  // refine
  auto* refine = app.add_subcommand("refine", "High-resolution refinement");
  refine->add_option("--scene", scene_dir, "Scene directory")->required();
  refine->add_option("--prior", prior_dir, "Low-resolution depth directory")
      ->required();
  refine->add_option("--out", out_dir, "Output directory")->required();
  add_config_flags(refine, opts);

  // score
  auto* score = app.add_subcommand("score", "Synthesis loss breakdown");
  score->add_option("--scene", scene_dir, "Scene directory")->required();
  add_config_flags(score, opts);

  // filter
  auto* filter = app.add_subcommand("filter", "Cross-view consistency filter");
  std::string depth_dir;
  filter->add_option("--scene", scene_dir, "Scene directory")->required();
  filter->add_option("--depth", depth_dir, "Refined depth directory")->required();
  filter->add_option("--out", out_dir, "Output directory")->required();
  add_config_flags(filter, opts);

  // fuse
  auto* fuse = app.add_subcommand("fuse", "Fuse depths and reconstruct");
  fuse->add_option("--scene", scene_dir, "Scene directory")->required();
  fuse->add_option("--depth", depth_dir, "Filtered depth directory")->required();
  fuse->add_option("--out", out_dir, "Output directory")->required();
  add_config_flags(fuse, opts);

  // render
  auto* render = app.add_subcommand("render", "Render mesh to label maps");
  std::string mesh_path;
  render->add_option("--scene", scene_dir, "Scene directory")->required();
  render->add_option("--mesh", mesh_path, "Mesh PLY")->required();
  render->add_option("--out", out_dir, "Output directory")->required();
  add_config_flags(render, opts);

  // iterate
  auto* iterate = app.add_subcommand("iterate", "Full self-training loop");
  std::string gt_dir;
  int iterations_flag = -1;
  bool keep_intermediate = false, no_early_stop = false;
  iterate->add_option("--scene", scene_dir, "Scene directory")->required();
  iterate->add_option("--out", out_dir, "Output directory")->required();
  iterate->add_option("-T,--T", iterations_flag, "Iteration count");
  iterate->add_option("--gt", gt_dir, "Scene directory holding gt/ and gt_low/");
  iterate->add_flag("--keep-intermediate", keep_intermediate,
                    "Write per-stage artifacts");
  iterate->add_flag("--no-early-stop", no_early_stop,
                    "Run all iterations even after convergence");
  add_config_flags(iterate, opts);

  // eval
  auto* eval = app.add_subcommand("eval", "Point-cloud / depth metrics");
  std::string rec_path, ref_path, rec_depth_dir, ref_depth_dir;
  double tau = 0.5, max_dist = 20.0, interval = 1.0;
  eval->add_option("--rec", rec_path, "Reconstructed cloud PLY");
  eval->add_option("--ref", ref_path, "Reference cloud PLY");
  eval->add_option("--rec-depth", rec_depth_dir, "Estimated depth directory");
  eval->add_option("--ref-depth", ref_depth_dir, "Ground-truth depth directory");
  eval->add_option("--tau", tau, "f-score distance threshold");
  eval->add_option("--max-dist", max_dist, "Accuracy/completeness clamp");
  eval->add_option("--interval", interval, "Depth interval for error fractions");
  add_config_flags(eval, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed())
      return run_synth(out_dir, surface, texture, views, width, height, focal,
                       ring_radius, ring_distance, seed, opts);
    if (infer->parsed())
      return run_infer(scene_dir, out_dir, prior_dir, gate, opts);
    if (refine->parsed()) return run_refine(scene_dir, prior_dir, out_dir, opts);
    if (score->parsed()) return run_score(scene_dir, opts);
    if (filter->parsed()) return run_filter(scene_dir, depth_dir, out_dir, opts);
    if (fuse->parsed()) return run_fuse(scene_dir, depth_dir, out_dir, opts);
    if (render->parsed()) return run_render(scene_dir, mesh_path, out_dir, opts);
    if (iterate->parsed())
      return run_iterate(scene_dir, out_dir,
                         iterations_flag >= 0 ? std::optional<int>(iterations_flag)
                                              : std::nullopt,
                         gt_dir, keep_intermediate, no_early_stop, opts);
    if (eval->parsed())
      return run_eval(rec_path, ref_path, rec_depth_dir, ref_depth_dir, tau,
                      max_dist, interval, opts);
  } catch (const StageError& e) {
    std::cerr << "error (stage " << e.stage_name << "): " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}

}  // namespace mvspl

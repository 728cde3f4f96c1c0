#pragma once

#include <string>
#include <vector>

#include "mvspl/core.hpp"
#include "mvspl/geometry.hpp"

namespace mvspl {

// ---------------------------------------------------------------------------
// Cameras (DTU text convention: 4x4 world-to-camera extrinsic, 3x3 intrinsic,
// then "d_min d_interval" where d_max = d_min + 191 * d_interval, the
// 192-plane DTU range encoding).
// ---------------------------------------------------------------------------
Camera load_camera(const std::string& path);
void save_camera(const Camera& cam, const std::string& path);

// ---------------------------------------------------------------------------
// Depth maps (PFM, grayscale "Pf", bottom-up rows, negative scale =
// little-endian). Entries <= 0 or non-finite load as invalid; invalid pixels
// save as 0.
// ---------------------------------------------------------------------------
DepthMap load_depth_pfm(const std::string& path);
void save_depth_pfm(const DepthMap& depth, const std::string& path);

// Single-channel float grids reuse the PFM codec (vote counts, confidence).
Image load_grid_pfm(const std::string& path);
void save_grid_pfm(const Image& grid, const std::string& path);

// ---------------------------------------------------------------------------
// Images. PPM/PGM (binary P6/P5 and ASCII P3/P2) are native; PNG is read
// via libpng. 8-bit values normalize to [0,1]. Writes are binary P6.
// ---------------------------------------------------------------------------
Image load_image(const std::string& path);
void save_image_ppm(const Image& img, const std::string& path);

// ---------------------------------------------------------------------------
// PLY. Positions are written as float64; view_id/px/py properties persist
// the fusion audit trail when present. ASCII and binary_little_endian are
// both readable; writes use binary unless ascii = true.
// ---------------------------------------------------------------------------
void save_pointcloud_ply(const PointCloud& cloud, const std::string& path,
                         bool ascii = false);
PointCloud load_pointcloud_ply(const std::string& path);
void save_mesh_ply(const TriangleMesh& mesh, const std::string& path,
                   bool ascii = false);
TriangleMesh load_mesh_ply(const std::string& path);

// ---------------------------------------------------------------------------
// Pipeline configuration: flat "key = value" text, '#' comments. Unknown
// keys are an error. Every field has a default; absent keys keep it.
// ---------------------------------------------------------------------------
struct Config {
  int pyramid_levels_coarse = 2;
  int pyramid_levels_fine = 5;
  int hypotheses_coarse = 48;
  int hypotheses_fine = 8;
  double softmax_temperature = 0.003;
  double alpha_gradient = 0.8;
  double alpha_ssim = 0.2;
  double alpha_perceptual = 0.05;
  double alpha_smoothness = 0.05;
  double r_max = 0.0;       // 0 = auto: 0.5 x finest hypothesis interval
  int n_min = 2;
  bool vote_inclusive = false;  // false: strict "votes > n_min"
  double voxel_size = 0.0;  // 0 = auto: 2 x median kept-pixel footprint
  int iterations = 3;
  double prior_bias = 0.1;
  int low_res_divisor = 4;
  int num_source_views = 4;
  double gate_margin = 1e-4;
  double epsilon_stop_intervals = 0.01;  // x finest interval, per valid pixel

  void validate() const;  // throws std::invalid_argument naming the field
};

Config load_config(const std::string& path);
void save_config(const Config& cfg, const std::string& path);
Config apply_config_overrides(Config cfg,
                              const std::vector<std::pair<std::string, std::string>>& kv);

// ---------------------------------------------------------------------------
// Scene directory: scene/{images/, cams/, pair.txt}. Views pair by filename
// stem: images/<stem>.(ppm|png) with cams/<stem>_cam.txt. pair.txt uses the
// MVSNet layout (count, then per view: id, then "k src score src score ...").
// ---------------------------------------------------------------------------
struct SceneManifest {
  std::string scene_id;
  std::vector<std::string> image_paths;
  std::vector<std::string> camera_paths;
  std::vector<std::vector<int>> pair_list;  // ordered source views per view
  int low_width = 0, low_height = 0;
  int high_width = 0, high_height = 0;

  int view_count() const { return static_cast<int>(image_paths.size()); }
};

struct Scene {
  SceneManifest manifest;
  std::vector<Image> images;    // at (high_width, high_height)
  std::vector<Camera> cameras;  // calibrated for the high resolution
};

std::vector<std::vector<int>> load_pair_list(const std::string& path);
void save_pair_list(const std::vector<std::vector<int>>& pairs,
                    const std::string& path);

// Loads and validates a scene directory; low resolution = high / divisor.
Scene load_scene(const std::string& dir, int low_res_divisor);

}  // namespace mvspl

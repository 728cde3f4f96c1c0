#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mvspl/core.hpp"
#include "mvspl/geometry.hpp"

namespace mvspl {

// Desk-scale synthetic scenes with analytic ground truth. Units mimic DTU
// (millimeter-ish): surfaces near the world origin, a camera ring ~600 units
// away, sub-unit pixel footprints at the full resolution.
struct SyntheticSceneSpec {
  enum class Surface { kPlane, kSphere, kHeightField };
  enum class Texture { kChecker, kNoise, kUniform };

  Surface surface = Surface::kPlane;
  Texture texture = Texture::kNoise;
  int views = 5;
  int width = 640;   // full resolution
  int height = 512;
  double focal = 2400.0;  // pixels, at the full resolution
  double ring_radius = 120.0;
  double ring_distance = 600.0;
  uint64_t seed = 7;

  // Surface parameters (world frame; cameras look along +z from z < 0).
  Eigen::Vector3d plane_normal = Eigen::Vector3d(0, 0, -1);
  double plane_offset = 0.0;  // plane is n . X = offset
  Eigen::Vector3d sphere_center = Eigen::Vector3d(0, 0, 30);
  double sphere_radius = 60.0;
  double field_amplitude = 20.0;
  double field_frequency = 0.045;  // radians per unit

  // Texture parameters.
  double checker_cell = 24.0;
  double noise_cell = 30.0;
  double uniform_albedo = 0.6;

  double range_padding = 0.15;  // depth range padding written to cam files
};

SyntheticSceneSpec::Surface parse_surface_kind(const std::string& name);
SyntheticSceneSpec::Texture parse_texture_kind(const std::string& name);

struct SyntheticScene {
  SyntheticSceneSpec spec;
  std::vector<Camera> cameras;       // full resolution
  std::vector<Image> images;         // RGB, 8-bit quantized values
  std::vector<DepthMap> gt_depth;    // full resolution, analytic
  std::vector<std::vector<int>> pair_list;
};

// Deterministic given the spec (seed included). Throws when a view sees
// (almost) none of the surface or fewer than 2 cameras are requested.
SyntheticScene generate_synthetic_scene(const SyntheticSceneSpec& spec);

// Analytic ground-truth depth for one view at any resolution that divides
// the full one.
DepthMap synthetic_gt_depth(const SyntheticSceneSpec& spec, int view,
                            int width, int height);

// Materializes scene/{images/,cams/,pair.txt} plus gt/ and gt_low/ depth
// directories (low = full resolution / low_divisor).
void write_synthetic_scene(const SyntheticScene& scene, const std::string& dir,
                           int low_divisor);

}  // namespace mvspl

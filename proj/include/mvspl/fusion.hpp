#pragma once

#include <memory>
#include <vector>

#include "mvspl/core.hpp"
#include "mvspl/geometry.hpp"

namespace mvspl {

// Unprojects every valid pixel of every view into one world point cloud:
// P = R^-1 (D(x) K^-1 x_bar - t). One point per kept pixel, views in order.
// Throws StageError("fuse", ...) when no view has a valid pixel.
PointCloud fuse_point_cloud(const std::vector<DepthMap>& depths,
                            const std::vector<Camera>& cameras);

struct ReconstructionParams {
  double voxel_size = 0.0;        // 0 = auto: 2 x median kept-pixel footprint
  double truncation_voxels = 4.0; // truncation distance, in voxels
  double splat_radius_voxels = 2.5;  // lateral support, bridges small holes
};

// Surface reconstruction role (the screened-Poisson slot). The default
// backend integrates a truncated signed distance volume from the cloud and
// extracts the zero level set with marching cubes.
class SurfaceReconstructor {
 public:
  virtual ~SurfaceReconstructor() = default;
  virtual TriangleMesh reconstruct(const PointCloud& cloud,
                                   const std::vector<Camera>& cameras,
                                   const ReconstructionParams& params) const = 0;
};

class TsdfReconstructor : public SurfaceReconstructor {
 public:
  TriangleMesh reconstruct(const PointCloud& cloud,
                           const std::vector<Camera>& cameras,
                           const ReconstructionParams& params) const override;
};

std::unique_ptr<SurfaceReconstructor> make_default_reconstructor();

// Median depth * pixel size / focal over the cloud (needs view ids).
double median_point_footprint(const PointCloud& cloud,
                              const std::vector<Camera>& cameras);

// Z-buffer rasterization with perspective-correct depth; nearest surface
// wins, uncovered pixels are invalid. An empty mesh yields an all-invalid
// map (not an error).
DepthMap render_depth(const TriangleMesh& mesh, const Camera& camera, int width,
                      int height);

}  // namespace mvspl

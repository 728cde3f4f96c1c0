#pragma once

#include <vector>

#include "mvspl/core.hpp"
#include "mvspl/geometry.hpp"

namespace mvspl {

// Per-pixel depth reprojection error of a reference depth map against one
// source view. Invalid where the reference lacks depth, the projection
// leaves the source view, or the source depth sample is unusable.
struct ReprojectionErrorMap {
  int width = 0;
  int height = 0;
  std::vector<float> error;
  std::vector<uint8_t> valid;
  int source_view = -1;

  float at(int x, int y) const {
    return error[static_cast<size_t>(y) * width + x];
  }
  bool is_valid(int x, int y) const {
    return valid[static_cast<size_t>(y) * width + x] != 0;
  }
};

// r(x) = |D_ref(x) - d_back(x)| where d_back is the depth obtained by
// unprojecting in the reference view, projecting into the source, reading the
// source depth by (guarded) bilinear interpolation, and transforming that
// point back. depth_span_guard invalidates samples whose contributing
// neighbors span more than the given depth range (blending across an edge);
// pass +inf to disable.
ReprojectionErrorMap reprojection_error(const DepthMap& ref_depth,
                                        const DepthMap& src_depth,
                                        const Camera& ref_cam,
                                        const Camera& src_cam,
                                        double depth_span_guard);

// 1 iff the error is valid and r <= r_max (inclusive); invalid counts as 0.
inline int consistency_vote(const ReprojectionErrorMap& err, int x, int y,
                            double r_max) {
  return err.is_valid(x, y) && err.at(x, y) <= r_max ? 1 : 0;
}

struct FilterResult {
  DepthMap filtered;             // kept depths pass through unchanged
  std::vector<uint16_t> votes;   // per-pixel vote counts (diagnostics)
};

// Keeps D(x) iff the vote count over source views clears n_min: strictly
// greater by default, >= with inclusive = true.
FilterResult filter_depth(const DepthMap& ref_depth,
                          const std::vector<const DepthMap*>& src_depths,
                          const Camera& ref_cam,
                          const std::vector<Camera>& src_cams, double r_max,
                          int n_min, bool inclusive = false);

}  // namespace mvspl

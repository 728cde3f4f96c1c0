#pragma once

#include <optional>

#include <Eigen/Dense>

#include "mvspl/core.hpp"

namespace mvspl {

// Pinhole camera. Extrinsics map world to camera: X_cam = R * X_world + t.
// Axes: x right, y down, z forward. Pixel (0,0) has its center at
// continuous coordinate (0.0, 0.0).
struct Camera {
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  double d_min = 0.0;
  double d_max = 0.0;

  Eigen::Vector3d center() const { return -R.transpose() * t; }
};

// Throws std::invalid_argument if K is not upper-triangular with positive
// focal lengths, R is not orthonormal (inf-norm of R^T R - I above tol), or
// the depth range is not 0 < d_min < d_max.
void validate_camera(const Camera& cam, double orthonormal_tol = 1e-5);

// X = d * K^-1 * [u v 1]^T, in the camera frame. Throws on d <= 0.
Eigen::Vector3d unproject(const Camera& cam, const Eigen::Vector2d& pixel,
                          double depth);

struct Projection {
  Eigen::Vector2d pixel;
  double depth;  // the z coordinate of the projected point
};

// Perspective projection of a camera-frame point. Throws on X.z <= 0. The
// returned pixel may be outside the image; callers do the bounds check.
Projection project(const Camera& cam, const Eigen::Vector3d& point_cam);

Eigen::Vector3d cam_to_world(const Camera& cam, const Eigen::Vector3d& X_cam);
Eigen::Vector3d world_to_cam(const Camera& cam, const Eigen::Vector3d& X_world);

// Relative pose from view i to view j: X_j = R_ij * X_i + T_ij.
struct RelativePose {
  Eigen::Matrix3d R;
  Eigen::Vector3d T;
};
RelativePose relative_pose(const Camera& from, const Camera& to);

// Camera for the same physical view after resizing the image by 1/factor
// (factor >= 1, integer). Keeps pixel centers aligned with the box-filter
// downsampling used throughout: x_old = factor * x_new + (factor-1)/2.
Camera scale_camera(const Camera& cam, int factor);
// Inverse of the above (image upsampled by `factor`).
Camera unscale_camera(const Camera& cam, int factor);

// Plane-induced homography mapping reference pixels to source pixels for the
// fronto-parallel plane z = d in the reference camera frame:
//   H = K_src (R_rel + T_rel n^T / d) K_ref^-1,  n = (0,0,1).
Eigen::Matrix3d plane_homography(const Camera& ref, const Camera& src,
                                 double depth);

// Area-weighted blend of the (up to) four neighbors around a continuous
// pixel position. Returns nullopt if any neighbor with nonzero weight is out
// of bounds or masked.
std::optional<float> bilinear_sample(const Image& img, double x, double y,
                                     int channel);
std::optional<float> bilinear_sample(const DepthMap& depth, double x, double y);

// Depth sampling with a discontinuity guard: additionally returns nullopt
// when the contributing neighbors span a depth range wider than max_span
// (foreground/background blending across an edge).
std::optional<float> bilinear_sample_guarded(const DepthMap& depth, double x,
                                             double y, double max_span);

// Resamples `src` onto the reference grid through the plane z = depth. The
// result has reference dimensions; the mask marks pixels whose source sample
// fell out of bounds. Throws on depth <= 0.
Image homography_warp(const Image& src, const Camera& ref, const Camera& src_cam,
                      double depth, int ref_width, int ref_height);

}  // namespace mvspl

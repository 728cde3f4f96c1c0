#include "mvspl/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace mvspl {

void validate_camera(const Camera& cam, double orthonormal_tol) {
  if (cam.K(0, 0) <= 0.0 || cam.K(1, 1) <= 0.0)
    throw std::invalid_argument("camera: focal lengths must be positive");
  if (cam.K(1, 0) != 0.0 || cam.K(2, 0) != 0.0 || cam.K(2, 1) != 0.0)
    throw std::invalid_argument("camera: K must be upper-triangular");
  Eigen::Matrix3d err = cam.R.transpose() * cam.R - Eigen::Matrix3d::Identity();
  if (err.cwiseAbs().maxCoeff() > orthonormal_tol)
    throw std::invalid_argument("camera: R is not orthonormal");
  if (!(cam.d_min > 0.0) || !(cam.d_max > cam.d_min))
    throw std::invalid_argument("camera: depth range must satisfy 0 < d_min < d_max");
}

Eigen::Vector3d unproject(const Camera& cam, const Eigen::Vector2d& pixel,
                          double depth) {
  if (!(depth > 0.0))
    throw std::invalid_argument("unproject: depth must be positive");
  Eigen::Vector3d ray = cam.K.inverse() * Eigen::Vector3d(pixel.x(), pixel.y(), 1.0);
  return depth * ray;
}

Projection project(const Camera& cam, const Eigen::Vector3d& point_cam) {
  if (!(point_cam.z() > 0.0))
    throw std::invalid_argument("project: point is behind the camera");
  Eigen::Vector3d h = cam.K * point_cam;
  return Projection{Eigen::Vector2d(h.x() / h.z(), h.y() / h.z()), point_cam.z()};
}

Eigen::Vector3d cam_to_world(const Camera& cam, const Eigen::Vector3d& X_cam) {
  return cam.R.transpose() * (X_cam - cam.t);
}

Eigen::Vector3d world_to_cam(const Camera& cam, const Eigen::Vector3d& X_world) {
  return cam.R * X_world + cam.t;
}

RelativePose relative_pose(const Camera& from, const Camera& to) {
  RelativePose rel;
  rel.R = to.R * from.R.transpose();
  rel.T = to.t - rel.R * from.t;
  return rel;
}

Camera scale_camera(const Camera& cam, int factor) {
  if (factor < 1) throw std::invalid_argument("scale_camera: factor must be >= 1");
  Camera out = cam;
  double f = static_cast<double>(factor);
  double off = (f - 1.0) / 2.0;
  out.K(0, 0) = cam.K(0, 0) / f;
  out.K(1, 1) = cam.K(1, 1) / f;
  out.K(0, 1) = cam.K(0, 1) / f;
  out.K(0, 2) = (cam.K(0, 2) - off) / f;
  out.K(1, 2) = (cam.K(1, 2) - off) / f;
  return out;
}

Camera unscale_camera(const Camera& cam, int factor) {
  if (factor < 1) throw std::invalid_argument("unscale_camera: factor must be >= 1");
  Camera out = cam;
  double f = static_cast<double>(factor);
  double off = (f - 1.0) / 2.0;
  out.K(0, 0) = cam.K(0, 0) * f;
  out.K(1, 1) = cam.K(1, 1) * f;
  out.K(0, 1) = cam.K(0, 1) * f;
  out.K(0, 2) = cam.K(0, 2) * f + off;
  out.K(1, 2) = cam.K(1, 2) * f + off;
  return out;
}

Eigen::Matrix3d plane_homography(const Camera& ref, const Camera& src,
                                 double depth) {
  if (!(depth > 0.0))
    throw std::invalid_argument("plane_homography: depth must be positive");
  RelativePose rel = relative_pose(ref, src);
  Eigen::Matrix3d M = rel.R;
  M.col(2) += rel.T / depth;  // + T n^T / d with n = (0,0,1)
  return src.K * M * ref.K.inverse();
}

namespace {

struct Tap {
  int x, y;
  double w;
};

// Up to 4 taps with nonzero weight; zero-weight neighbors are skipped so that
// sampling exactly on the last row/column stays valid.
int bilinear_taps(double x, double y, Tap taps[4]) {
  double fx = std::floor(x);
  double fy = std::floor(y);
  int x0 = static_cast<int>(fx);
  int y0 = static_cast<int>(fy);
  double wx = x - fx;
  double wy = y - fy;
  int n = 0;
  const double w00 = (1.0 - wx) * (1.0 - wy);
  const double w10 = wx * (1.0 - wy);
  const double w01 = (1.0 - wx) * wy;
  const double w11 = wx * wy;
  if (w00 > 0.0) taps[n++] = {x0, y0, w00};
  if (w10 > 0.0) taps[n++] = {x0 + 1, y0, w10};
  if (w01 > 0.0) taps[n++] = {x0, y0 + 1, w01};
  if (w11 > 0.0) taps[n++] = {x0 + 1, y0 + 1, w11};
  return n;
}

}  // namespace

std::optional<float> bilinear_sample(const Image& img, double x, double y,
                                     int channel) {
  Tap taps[4];
  int n = bilinear_taps(x, y, taps);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const Tap& tp = taps[i];
    if (tp.x < 0 || tp.y < 0 || tp.x >= img.width || tp.y >= img.height)
      return std::nullopt;
    if (!img.valid(tp.x, tp.y)) return std::nullopt;
    acc += tp.w * img.at(tp.x, tp.y, channel);
  }
  return static_cast<float>(acc);
}

std::optional<float> bilinear_sample(const DepthMap& depth, double x, double y) {
  Tap taps[4];
  int n = bilinear_taps(x, y, taps);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const Tap& tp = taps[i];
    if (tp.x < 0 || tp.y < 0 || tp.x >= depth.width || tp.y >= depth.height)
      return std::nullopt;
    if (!depth.is_valid(tp.x, tp.y)) return std::nullopt;
    acc += tp.w * depth.at(tp.x, tp.y);
  }
  return static_cast<float>(acc);
}

std::optional<float> bilinear_sample_guarded(const DepthMap& depth, double x,
                                             double y, double max_span) {
  Tap taps[4];
  int n = bilinear_taps(x, y, taps);
  double acc = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int i = 0; i < n; ++i) {
    const Tap& tp = taps[i];
    if (tp.x < 0 || tp.y < 0 || tp.x >= depth.width || tp.y >= depth.height)
      return std::nullopt;
    if (!depth.is_valid(tp.x, tp.y)) return std::nullopt;
    double d = depth.at(tp.x, tp.y);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
    acc += tp.w * d;
  }
  if (hi - lo > max_span) return std::nullopt;
  return static_cast<float>(acc);
}

Image homography_warp(const Image& src, const Camera& ref, const Camera& src_cam,
                      double depth, int ref_width, int ref_height) {
  if (!(depth > 0.0))
    throw std::invalid_argument("homography_warp: depth must be positive");
  Eigen::Matrix3d H = plane_homography(ref, src_cam, depth);
  Image out(ref_width, ref_height, src.channels);
  out.mask.assign(out.pixel_count(), 0);
  for (int y = 0; y < ref_height; ++y) {
    for (int x = 0; x < ref_width; ++x) {
      Eigen::Vector3d p = H * Eigen::Vector3d(x, y, 1.0);
      if (!(p.z() > 0.0)) continue;
      double sx = p.x() / p.z();
      double sy = p.y() / p.z();
      bool ok = true;
      for (int c = 0; c < src.channels && ok; ++c) {
        auto v = bilinear_sample(src, sx, sy, c);
        if (!v) {
          ok = false;
          break;
        }
        out.at(x, y, c) = *v;
      }
      if (ok) out.set_valid(x, y, true);
    }
  }
  return out;
}

}  // namespace mvspl

#include "mvspl/consistency.hpp"

#include <cmath>
#include <stdexcept>

#include "mvspl/parallel.hpp"

namespace mvspl {

ReprojectionErrorMap reprojection_error(const DepthMap& ref_depth,
                                        const DepthMap& src_depth,
                                        const Camera& ref_cam,
                                        const Camera& src_cam,
                                        double depth_span_guard) {
  ReprojectionErrorMap out;
  out.width = ref_depth.width;
  out.height = ref_depth.height;
  out.error.assign(static_cast<size_t>(out.width) * out.height, 0.f);
  out.valid.assign(static_cast<size_t>(out.width) * out.height, 0);

  RelativePose rel = relative_pose(ref_cam, src_cam);
  Eigen::Matrix3d R_back = rel.R.transpose();
  Eigen::Matrix3d Kinv_ref = ref_cam.K.inverse();
  Eigen::Matrix3d Kinv_src = src_cam.K.inverse();

  parallel_for(out.height, [&](size_t yy) {
    int y = static_cast<int>(yy);
    for (int x = 0; x < out.width; ++x) {
      if (!ref_depth.is_valid(x, y)) continue;
      double d_ref = ref_depth.at(x, y);
      if (!(d_ref > 0.0)) continue;
      Eigen::Vector3d X = d_ref * (Kinv_ref * Eigen::Vector3d(x, y, 1.0));
      Eigen::Vector3d X_src = rel.R * X + rel.T;
      if (!(X_src.z() > 0.0)) continue;
      Eigen::Vector3d h = src_cam.K * X_src;
      double sx = h.x() / h.z();
      double sy = h.y() / h.z();
      auto d_src = bilinear_sample_guarded(src_depth, sx, sy, depth_span_guard);
      if (!d_src) continue;
      // The source's own 3D point along that ray, carried back to the
      // reference frame.
      Eigen::Vector3d X_j =
          static_cast<double>(*d_src) * (Kinv_src * Eigen::Vector3d(sx, sy, 1.0));
      Eigen::Vector3d X_back = R_back * (X_j - rel.T);
      double d_back = X_back.z();
      size_t i = static_cast<size_t>(y) * out.width + x;
      out.error[i] = static_cast<float>(std::abs(d_ref - d_back));
      out.valid[i] = 1;
    }
  });
  return out;
}

FilterResult filter_depth(const DepthMap& ref_depth,
                          const std::vector<const DepthMap*>& src_depths,
                          const Camera& ref_cam,
                          const std::vector<Camera>& src_cams, double r_max,
                          int n_min, bool inclusive) {
  if (src_depths.empty())
    throw std::invalid_argument("filter_depth: need at least one source view");
  if (src_depths.size() != src_cams.size())
    throw std::invalid_argument("filter_depth: depths/cameras mismatch");
  if (!(r_max > 0.0))
    throw std::invalid_argument("filter_depth: r_max must be > 0");
  if (n_min < 1) throw std::invalid_argument("filter_depth: n_min must be >= 1");

  FilterResult res;
  res.filtered = DepthMap(ref_depth.width, ref_depth.height);
  res.votes.assign(static_cast<size_t>(ref_depth.width) * ref_depth.height, 0);

  const double span_guard = 10.0 * r_max;
  for (size_t s = 0; s < src_depths.size(); ++s) {
    ReprojectionErrorMap err = reprojection_error(
        ref_depth, *src_depths[s], ref_cam, src_cams[s], span_guard);
    err.source_view = static_cast<int>(s);
    for (int y = 0; y < err.height; ++y)
      for (int x = 0; x < err.width; ++x)
        res.votes[static_cast<size_t>(y) * err.width + x] +=
            static_cast<uint16_t>(consistency_vote(err, x, y, r_max));
  }

  for (int y = 0; y < ref_depth.height; ++y)
    for (int x = 0; x < ref_depth.width; ++x) {
      if (!ref_depth.is_valid(x, y)) continue;
      int votes = res.votes[static_cast<size_t>(y) * ref_depth.width + x];
      bool keep = inclusive ? votes >= n_min : votes > n_min;
      if (keep) res.filtered.set(x, y, ref_depth.at(x, y));
    }
  return res;
}

}  // namespace mvspl

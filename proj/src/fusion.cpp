#include "mvspl/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "mvspl/parallel.hpp"

namespace mvspl {

namespace mc {
extern const int kEdgeTable[256];
extern const int kTriTable[256][16];
}  // namespace mc

PointCloud fuse_point_cloud(const std::vector<DepthMap>& depths,
                            const std::vector<Camera>& cameras) {
  if (depths.empty() || depths.size() != cameras.size())
    throw std::invalid_argument("fuse_point_cloud: depths/cameras mismatch");
  PointCloud cloud;
  for (size_t m = 0; m < depths.size(); ++m) {
    const DepthMap& D = depths[m];
    const Camera& cam = cameras[m];
    Eigen::Matrix3d Kinv = cam.K.inverse();
    Eigen::Matrix3d Rt = cam.R.transpose();
    for (int y = 0; y < D.height; ++y)
      for (int x = 0; x < D.width; ++x) {
        if (!D.is_valid(x, y)) continue;
        double d = D.at(x, y);
        Eigen::Vector3d X_cam = d * (Kinv * Eigen::Vector3d(x, y, 1.0));
        cloud.points.push_back(Rt * (X_cam - cam.t));
        cloud.view_ids.push_back(static_cast<int32_t>(m));
        cloud.pixels.emplace_back(x, y);
      }
  }
  if (cloud.empty())
    throw StageError("fuse", "no valid pixels in any view; empty cloud");
  return cloud;
}

double median_point_footprint(const PointCloud& cloud,
                              const std::vector<Camera>& cameras) {
  if (cloud.empty() || cloud.view_ids.size() != cloud.points.size())
    throw std::invalid_argument("median_point_footprint: cloud lacks view ids");
  std::vector<double> footprints;
  footprints.reserve(cloud.size());
  for (size_t i = 0; i < cloud.size(); ++i) {
    const Camera& cam = cameras.at(cloud.view_ids[i]);
    double depth = (cam.R * cloud.points[i] + cam.t).z();
    double inv_f = 0.5 * (1.0 / cam.K(0, 0) + 1.0 / cam.K(1, 1));
    footprints.push_back(std::abs(depth) * inv_f);
  }
  size_t mid = footprints.size() / 2;
  std::nth_element(footprints.begin(), footprints.begin() + mid,
                   footprints.end());
  return footprints[mid];
}

namespace {

struct VoxelKey {
  int64_t x, y, z;
  bool operator==(const VoxelKey& o) const {
    return x == o.x && y == o.y && z == o.z;
  }
};

struct VoxelKeyHash {
  size_t operator()(const VoxelKey& k) const {
    uint64_t h = 1469598103934665603ull;
    for (int64_t v : {k.x, k.y, k.z}) {
      h ^= static_cast<uint64_t>(v);
      h *= 1099511628211ull;
    }
    return static_cast<size_t>(h);
  }
};

// One surface sample after decimation: position plus the mean viewing
// direction of the rays that observed it.
struct Sample {
  Eigen::Vector3d pos;
  Eigen::Vector3d dir;  // unit, camera toward surface
};

std::vector<Sample> decimate(const PointCloud& cloud,
                             const std::vector<Camera>& cameras,
                             double cell) {
  std::unordered_map<VoxelKey, int, VoxelKeyHash> index;
  std::vector<Eigen::Vector3d> pos_sum, dir_sum;
  std::vector<int> counts;
  bool has_views = cloud.view_ids.size() == cloud.points.size();
  std::vector<Eigen::Vector3d> centers(cameras.size());
  for (size_t m = 0; m < cameras.size(); ++m) centers[m] = cameras[m].center();
  for (size_t i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector3d& p = cloud.points[i];
    VoxelKey key{static_cast<int64_t>(std::floor(p.x() / cell)),
                 static_cast<int64_t>(std::floor(p.y() / cell)),
                 static_cast<int64_t>(std::floor(p.z() / cell))};
    auto [it, inserted] = index.try_emplace(key, static_cast<int>(pos_sum.size()));
    if (inserted) {
      pos_sum.emplace_back(Eigen::Vector3d::Zero());
      dir_sum.emplace_back(Eigen::Vector3d::Zero());
      counts.push_back(0);
    }
    int slot = it->second;
    pos_sum[slot] += p;
    Eigen::Vector3d dir;
    if (has_views) {
      dir = p - centers[cloud.view_ids[i]];
    } else {
      dir = p - centers[0];
    }
    double norm = dir.norm();
    if (norm > 0.0) dir_sum[slot] += dir / norm;
    counts[slot] += 1;
  }
  std::vector<Sample> samples;
  samples.reserve(pos_sum.size());
  for (size_t s = 0; s < pos_sum.size(); ++s) {
    Sample smp;
    smp.pos = pos_sum[s] / counts[s];
    double norm = dir_sum[s].norm();
    smp.dir = norm > 1e-12 ? Eigen::Vector3d(dir_sum[s] / norm)
                           : Eigen::Vector3d(0, 0, 1);
    samples.push_back(smp);
  }
  return samples;
}

}  // namespace

TriangleMesh TsdfReconstructor::reconstruct(
    const PointCloud& cloud, const std::vector<Camera>& cameras,
    const ReconstructionParams& params) const {
  if (cloud.empty())
    throw std::invalid_argument("reconstruct: empty point cloud");
  double voxel = params.voxel_size;
  if (voxel <= 0.0) voxel = 2.0 * median_point_footprint(cloud, cameras);
  if (!(voxel > 0.0))
    throw std::invalid_argument("reconstruct: voxel size must be positive");

  Eigen::Vector3d lo = cloud.points[0], hi = cloud.points[0];
  for (const auto& p : cloud.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  double trunc = params.truncation_voxels * voxel;
  if ((hi - lo).maxCoeff() < 1e-9 * voxel) {
    if (cloud.size() <= 1) return TriangleMesh{};  // single point: empty mesh
    throw std::invalid_argument("reconstruct: degenerate bounding box");
  }
  lo -= Eigen::Vector3d::Constant(trunc + voxel);
  hi += Eigen::Vector3d::Constant(trunc + voxel);

  int nx = static_cast<int>(std::ceil((hi.x() - lo.x()) / voxel)) + 1;
  int ny = static_cast<int>(std::ceil((hi.y() - lo.y()) / voxel)) + 1;
  int nz = static_cast<int>(std::ceil((hi.z() - lo.z()) / voxel)) + 1;
  size_t total = static_cast<size_t>(nx) * ny * nz;
  if (total > (size_t{1} << 31))
    throw std::invalid_argument("reconstruct: volume too large; raise voxel_size");

  std::vector<float> tsdf(total, 0.f);
  std::vector<float> weight(total, 0.f);
  auto vidx = [&](int x, int y, int z) {
    return (static_cast<size_t>(z) * ny + y) * nx + x;
  };

  std::vector<Sample> samples = decimate(cloud, cameras, voxel);
  const double lateral_max = params.splat_radius_voxels * voxel;
  const int reach = static_cast<int>(
      std::ceil(std::max(trunc, lateral_max) / voxel)) + 1;

  // Splat each sample into the voxels around it: signed distance along the
  // viewing ray (positive toward the camera), weighted by lateral falloff.
  // Threads own disjoint z-slabs, so each voxel accumulates in sample order
  // and the result is independent of the thread count.
  int slabs = std::min(worker_count(), nz);
  std::vector<std::pair<int, int>> slab_ranges;
  int per = (nz + slabs - 1) / slabs;
  for (int s = 0; s < slabs; ++s) {
    int z0 = s * per;
    int z1 = std::min(nz, z0 + per);
    if (z0 < z1) slab_ranges.emplace_back(z0, z1);
  }
  parallel_for(slab_ranges.size(), [&](size_t si) {
    auto [z_lo, z_hi] = slab_ranges[si];
    for (const Sample& smp : samples) {
      int cx = static_cast<int>(std::round((smp.pos.x() - lo.x()) / voxel));
      int cy = static_cast<int>(std::round((smp.pos.y() - lo.y()) / voxel));
      int cz = static_cast<int>(std::round((smp.pos.z() - lo.z()) / voxel));
      int z0 = std::max(cz - reach, z_lo);
      int z1 = std::min(cz + reach, z_hi - 1);
      if (z0 > z1) continue;
      int x0 = std::max(cx - reach, 0), x1 = std::min(cx + reach, nx - 1);
      int y0 = std::max(cy - reach, 0), y1 = std::min(cy + reach, ny - 1);
      for (int z = z0; z <= z1; ++z)
        for (int y = y0; y <= y1; ++y)
          for (int x = x0; x <= x1; ++x) {
            Eigen::Vector3d v = lo + voxel * Eigen::Vector3d(x, y, z) - smp.pos;
            double along = v.dot(smp.dir);
            if (std::abs(along) > trunc) continue;
            double lateral2 = v.squaredNorm() - along * along;
            if (lateral2 > lateral_max * lateral_max) continue;
            double w = 1.0 - std::sqrt(std::max(0.0, lateral2)) / lateral_max;
            w = std::max(w, 0.05);
            size_t i = vidx(x, y, z);
            // SDF positive on the camera side of the surface.
            tsdf[i] += static_cast<float>(w * -along);
            weight[i] += static_cast<float>(w);
          }
    }
  });
  parallel_for(total, [&](size_t i) {
    if (weight[i] > 0.f) tsdf[i] /= weight[i];
  });

  // Marching cubes over cells whose 8 corners all carry weight.
  static const int shift[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                  {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
  static const int edge_corners[12][2] = {{0, 1}, {1, 2}, {3, 2}, {0, 3},
                                          {4, 5}, {5, 6}, {7, 6}, {4, 7},
                                          {0, 4}, {1, 5}, {2, 6}, {3, 7}};
  // Edge key = owning voxel + axis (0 = x, 1 = y, 2 = z).
  static const int edge_shift[12][4] = {
      {0, 0, 0, 0}, {1, 0, 0, 1}, {0, 1, 0, 0}, {0, 0, 0, 1},
      {0, 0, 1, 0}, {1, 0, 1, 1}, {0, 1, 1, 0}, {0, 0, 1, 1},
      {0, 0, 0, 2}, {1, 0, 0, 2}, {1, 1, 0, 2}, {0, 1, 0, 2}};

  TriangleMesh mesh;
  std::unordered_map<uint64_t, int> edge_vertex;
  auto edge_key = [&](int x, int y, int z, int axis) {
    return ((static_cast<uint64_t>(z) * ny + y) * nx + x) * 4 + axis;
  };

  for (int z = 0; z + 1 < nz; ++z)
    for (int y = 0; y + 1 < ny; ++y)
      for (int x = 0; x + 1 < nx; ++x) {
        float f[8];
        int cube = 0;
        bool defined = true;
        for (int c = 0; c < 8; ++c) {
          size_t i = vidx(x + shift[c][0], y + shift[c][1], z + shift[c][2]);
          if (weight[i] <= 0.f) {
            defined = false;
            break;
          }
          f[c] = tsdf[i];
          if (f[c] < 0.f) cube |= 1 << c;
        }
        if (!defined || cube == 0 || cube == 255) continue;
        int edge_index[12];
        for (int e = 0; e < 12; ++e) {
          if (!(mc::kEdgeTable[cube] & (1 << e))) continue;
          uint64_t key = edge_key(x + edge_shift[e][0], y + edge_shift[e][1],
                                  z + edge_shift[e][2], edge_shift[e][3]);
          auto it = edge_vertex.find(key);
          if (it != edge_vertex.end()) {
            edge_index[e] = it->second;
            continue;
          }
          double f0 = std::abs(f[edge_corners[e][0]]);
          double f1 = std::abs(f[edge_corners[e][1]]);
          double tpos = f0 + f1 > 0.0 ? f0 / (f0 + f1) : 0.5;
          Eigen::Vector3d p =
              lo + voxel * Eigen::Vector3d(x + edge_shift[e][0],
                                           y + edge_shift[e][1],
                                           z + edge_shift[e][2]);
          p[edge_shift[e][3]] += tpos * voxel;
          edge_index[e] = static_cast<int>(mesh.vertices.size());
          edge_vertex.emplace(key, edge_index[e]);
          mesh.vertices.push_back(p);
        }
        for (int i = 0; mc::kTriTable[cube][i] != -1; i += 3) {
          std::array<int, 3> tri{edge_index[mc::kTriTable[cube][i]],
                                 edge_index[mc::kTriTable[cube][i + 2]],
                                 edge_index[mc::kTriTable[cube][i + 1]]};
          if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
            continue;
          const Eigen::Vector3d& a = mesh.vertices[tri[0]];
          const Eigen::Vector3d& b = mesh.vertices[tri[1]];
          const Eigen::Vector3d& c = mesh.vertices[tri[2]];
          if ((b - a).cross(c - a).squaredNorm() < 1e-24 * voxel * voxel)
            continue;  // zero-area sliver
          mesh.triangles.push_back(tri);
        }
      }
  return mesh;
}

std::unique_ptr<SurfaceReconstructor> make_default_reconstructor() {
  return std::make_unique<TsdfReconstructor>();
}

DepthMap render_depth(const TriangleMesh& mesh, const Camera& camera, int width,
                      int height) {
  if (width < 1 || height < 1)
    throw std::invalid_argument("render_depth: non-positive resolution");
  DepthMap out(width, height);
  if (mesh.empty()) return out;

  std::vector<double> zbuf(static_cast<size_t>(width) * height,
                           std::numeric_limits<double>::infinity());

  struct ScreenVertex {
    double x, y, inv_z;
  };
  std::vector<Eigen::Vector3d> cam_pts(mesh.vertices.size());
  for (size_t i = 0; i < mesh.vertices.size(); ++i)
    cam_pts[i] = camera.R * mesh.vertices[i] + camera.t;

  for (const auto& tri : mesh.triangles) {
    ScreenVertex sv[3];
    bool ok = true;
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector3d& p = cam_pts[tri[k]];
      if (!(p.z() > 1e-9)) {
        ok = false;
        break;
      }
      Eigen::Vector3d h = camera.K * p;
      sv[k] = {h.x() / h.z(), h.y() / h.z(), 1.0 / p.z()};
    }
    if (!ok) continue;
    double area = (sv[1].x - sv[0].x) * (sv[2].y - sv[0].y) -
                  (sv[2].x - sv[0].x) * (sv[1].y - sv[0].y);
    if (std::abs(area) < 1e-12) continue;
    int x0 = std::max(0, static_cast<int>(
                              std::ceil(std::min({sv[0].x, sv[1].x, sv[2].x}))));
    int x1 = std::min(width - 1,
                      static_cast<int>(std::floor(
                          std::max({sv[0].x, sv[1].x, sv[2].x}))));
    int y0 = std::max(0, static_cast<int>(
                              std::ceil(std::min({sv[0].y, sv[1].y, sv[2].y}))));
    int y1 = std::min(height - 1,
                      static_cast<int>(std::floor(
                          std::max({sv[0].y, sv[1].y, sv[2].y}))));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        double w0 = ((sv[1].x - x) * (sv[2].y - y) - (sv[2].x - x) * (sv[1].y - y)) / area;
        double w1 = ((sv[2].x - x) * (sv[0].y - y) - (sv[0].x - x) * (sv[2].y - y)) / area;
        double w2 = 1.0 - w0 - w1;
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
        // Perspective-correct: 1/z interpolates linearly in screen space.
        double inv_z = w0 * sv[0].inv_z + w1 * sv[1].inv_z + w2 * sv[2].inv_z;
        if (!(inv_z > 0.0)) continue;
        double z = 1.0 / inv_z;
        size_t i = static_cast<size_t>(y) * width + x;
        if (z < zbuf[i]) zbuf[i] = z;
      }
  }
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      size_t i = static_cast<size_t>(y) * width + x;
      if (std::isfinite(zbuf[i])) out.set(x, y, static_cast<float>(zbuf[i]));
    }
  return out;
}

}  // namespace mvspl

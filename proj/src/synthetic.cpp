#include "mvspl/synthetic.hpp"

#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "mvspl/image_ops.hpp"
#include "mvspl/parallel.hpp"
#include "mvspl/scene_io.hpp"

namespace fs = std::filesystem;

namespace mvspl {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double lattice_value(int64_t ix, int64_t iy, uint64_t seed) {
  uint64_t h = splitmix64(seed ^ splitmix64(static_cast<uint64_t>(ix) * 0x9e3779b1ull) ^
                          splitmix64(static_cast<uint64_t>(iy) + 0x7f4a7c15ull));
  return static_cast<double>(h >> 11) / static_cast<double>(1ull << 53);
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Smooth value noise on a lattice, in [0,1].
double value_noise(double x, double y, double cell, uint64_t seed) {
  double u = x / cell;
  double v = y / cell;
  int64_t ix = static_cast<int64_t>(std::floor(u));
  int64_t iy = static_cast<int64_t>(std::floor(v));
  double fu = smoothstep(u - ix);
  double fv = smoothstep(v - iy);
  double v00 = lattice_value(ix, iy, seed);
  double v10 = lattice_value(ix + 1, iy, seed);
  double v01 = lattice_value(ix, iy + 1, seed);
  double v11 = lattice_value(ix + 1, iy + 1, seed);
  return (v00 * (1 - fu) + v10 * fu) * (1 - fv) +
         (v01 * (1 - fu) + v11 * fu) * fv;
}

struct Hit {
  bool valid = false;
  double depth = 0.0;            // camera-frame z (ray parameter)
  Eigen::Vector3d point;         // world
  Eigen::Vector3d normal;        // world, facing the cameras
};

double field_height(const SyntheticSceneSpec& spec, double x, double y) {
  return spec.field_amplitude * std::sin(spec.field_frequency * x) *
         std::cos(spec.field_frequency * y);
}

Hit intersect(const SyntheticSceneSpec& spec, const Eigen::Vector3d& origin,
              const Eigen::Vector3d& dir) {
  Hit hit;
  switch (spec.surface) {
    case SyntheticSceneSpec::Surface::kPlane: {
      double denom = spec.plane_normal.dot(dir);
      if (std::abs(denom) < 1e-12) return hit;
      double s = (spec.plane_offset - spec.plane_normal.dot(origin)) / denom;
      if (!(s > 0.0)) return hit;
      hit.valid = true;
      hit.depth = s;
      hit.point = origin + s * dir;
      hit.normal = spec.plane_normal.normalized();
      if (hit.normal.z() > 0) hit.normal = -hit.normal;
      return hit;
    }
    case SyntheticSceneSpec::Surface::kSphere: {
      Eigen::Vector3d oc = origin - spec.sphere_center;
      double a = dir.squaredNorm();
      double b = 2.0 * oc.dot(dir);
      double c = oc.squaredNorm() - spec.sphere_radius * spec.sphere_radius;
      double disc = b * b - 4 * a * c;
      if (disc < 0.0) return hit;
      double sq = std::sqrt(disc);
      double s = (-b - sq) / (2 * a);
      if (!(s > 0.0)) s = (-b + sq) / (2 * a);
      if (!(s > 0.0)) return hit;
      hit.valid = true;
      hit.depth = s;
      hit.point = origin + s * dir;
      hit.normal = (hit.point - spec.sphere_center) / spec.sphere_radius;
      return hit;
    }
    case SyntheticSceneSpec::Surface::kHeightField: {
      // g(s) = ray_z(s) - h(x, y); monotone for our gentle fields, so march
      // to bracket the root then bisect.
      auto g = [&](double s) {
        Eigen::Vector3d p = origin + s * dir;
        return p.z() - field_height(spec, p.x(), p.y());
      };
      double s_lo = 0.2 * spec.ring_distance;
      double s_hi = 2.5 * spec.ring_distance;
      const int steps = 512;
      double prev_s = s_lo, prev_g = g(s_lo);
      double found_lo = -1, found_hi = -1;
      for (int i = 1; i <= steps; ++i) {
        double s = s_lo + (s_hi - s_lo) * i / steps;
        double gs = g(s);
        if (prev_g <= 0.0 && gs > 0.0) {
          found_lo = prev_s;
          found_hi = s;
          break;
        }
        if (prev_g > 0.0 && gs <= 0.0) {
          found_lo = prev_s;
          found_hi = s;
          break;
        }
        prev_s = s;
        prev_g = gs;
      }
      if (found_lo < 0) return hit;
      double a = found_lo, b2 = found_hi;
      double ga = g(a);
      for (int it = 0; it < 80; ++it) {
        double mid = 0.5 * (a + b2);
        double gm = g(mid);
        if ((ga <= 0.0) == (gm <= 0.0)) {
          a = mid;
          ga = gm;
        } else {
          b2 = mid;
        }
      }
      double s = 0.5 * (a + b2);
      hit.valid = true;
      hit.depth = s;
      hit.point = origin + s * dir;
      double k = spec.field_frequency;
      double dhdx = spec.field_amplitude * k * std::cos(k * hit.point.x()) *
                    std::cos(k * hit.point.y());
      double dhdy = -spec.field_amplitude * k * std::sin(k * hit.point.x()) *
                    std::sin(k * hit.point.y());
      hit.normal = Eigen::Vector3d(dhdx, dhdy, -1.0).normalized();
      return hit;
    }
  }
  return hit;
}

double albedo_at(const SyntheticSceneSpec& spec, const Eigen::Vector3d& p) {
  switch (spec.texture) {
    case SyntheticSceneSpec::Texture::kChecker: {
      int64_t cx = static_cast<int64_t>(std::floor(p.x() / spec.checker_cell));
      int64_t cy = static_cast<int64_t>(std::floor(p.y() / spec.checker_cell));
      return ((cx + cy) & 1) ? 0.85 : 0.25;
    }
    case SyntheticSceneSpec::Texture::kNoise: {
      double v = 0.55 * value_noise(p.x(), p.y(), spec.noise_cell, spec.seed) +
                 0.30 * value_noise(p.x(), p.y(), spec.noise_cell * 0.37,
                                    spec.seed ^ 0xabcdefull) +
                 0.15 * value_noise(p.x(), p.y(), spec.noise_cell * 0.13,
                                    spec.seed ^ 0x123456ull);
      return 0.15 + 0.8 * v;
    }
    case SyntheticSceneSpec::Texture::kUniform:
      return spec.uniform_albedo;
  }
  return spec.uniform_albedo;
}

Camera ring_camera(const SyntheticSceneSpec& spec, int view) {
  double theta = 2.0 * M_PI * view / spec.views;
  Eigen::Vector3d C(spec.ring_radius * std::cos(theta),
                    spec.ring_radius * std::sin(theta), -spec.ring_distance);
  Eigen::Vector3d forward = (-C).normalized();  // toward the world origin
  Eigen::Vector3d down(0, 1, 0);
  Eigen::Vector3d right = down.cross(forward).normalized();
  Eigen::Vector3d ydir = forward.cross(right).normalized();
  Camera cam;
  cam.R.row(0) = right;
  cam.R.row(1) = ydir;
  cam.R.row(2) = forward;
  cam.t = -cam.R * C;
  cam.K = Eigen::Matrix3d::Identity();
  cam.K(0, 0) = spec.focal;
  cam.K(1, 1) = spec.focal;
  cam.K(0, 2) = (spec.width - 1) / 2.0;
  cam.K(1, 2) = (spec.height - 1) / 2.0;
  cam.d_min = 1.0;  // placeholder until the depth range is measured
  cam.d_max = 2.0;
  return cam;
}

const double kBackground = 0.04;
const Eigen::Vector3d kLight = Eigen::Vector3d(0.3, -0.4, -0.85).normalized();

}  // namespace

SyntheticSceneSpec::Surface parse_surface_kind(const std::string& name) {
  if (name == "plane") return SyntheticSceneSpec::Surface::kPlane;
  if (name == "sphere") return SyntheticSceneSpec::Surface::kSphere;
  if (name == "heightfield" || name == "height-field")
    return SyntheticSceneSpec::Surface::kHeightField;
  throw std::invalid_argument("unknown surface kind '" + name + "'");
}

SyntheticSceneSpec::Texture parse_texture_kind(const std::string& name) {
  if (name == "checker") return SyntheticSceneSpec::Texture::kChecker;
  if (name == "noise") return SyntheticSceneSpec::Texture::kNoise;
  if (name == "uniform") return SyntheticSceneSpec::Texture::kUniform;
  throw std::invalid_argument("unknown texture kind '" + name + "'");
}

DepthMap synthetic_gt_depth(const SyntheticSceneSpec& spec, int view,
                            int width, int height) {
  if (spec.width % width != 0 || spec.height % height != 0 ||
      spec.width / width != spec.height / height)
    throw std::invalid_argument(
        "synthetic_gt_depth: resolution must divide the full one uniformly");
  Camera cam = scale_camera(ring_camera(spec, view), spec.width / width);
  Eigen::Vector3d origin = cam.center();
  Eigen::Matrix3d ray_mat = cam.R.transpose() * cam.K.inverse();
  DepthMap depth(width, height);
  parallel_for(height, [&](size_t yy) {
    int y = static_cast<int>(yy);
    for (int x = 0; x < width; ++x) {
      // Unnormalized ray with camera-frame z = 1, so the ray parameter is
      // exactly the depth.
      Eigen::Vector3d dir = ray_mat * Eigen::Vector3d(x, y, 1.0);
      Hit hit = intersect(spec, origin, dir);
      if (hit.valid) depth.set(x, y, static_cast<float>(hit.depth));
    }
  });
  return depth;
}

SyntheticScene generate_synthetic_scene(const SyntheticSceneSpec& spec) {
  if (spec.views < 2)
    throw std::invalid_argument("generate_synthetic_scene: need >= 2 cameras");
  if (spec.width < 8 || spec.height < 8)
    throw std::invalid_argument("generate_synthetic_scene: resolution too small");

  SyntheticScene scene;
  scene.spec = spec;
  for (int v = 0; v < spec.views; ++v) {
    Camera cam = ring_camera(spec, v);
    Eigen::Vector3d origin = cam.center();
    Eigen::Matrix3d ray_mat = cam.R.transpose() * cam.K.inverse();
    Image img(spec.width, spec.height, 3);
    DepthMap depth(spec.width, spec.height);
    double d_lo = std::numeric_limits<double>::infinity();
    double d_hi = 0.0;
    size_t hits = 0;
    std::vector<double> row_lo(spec.height, std::numeric_limits<double>::infinity());
    std::vector<double> row_hi(spec.height, 0.0);
    std::vector<size_t> row_hits(spec.height, 0);
    parallel_for(spec.height, [&](size_t yy) {
      int y = static_cast<int>(yy);
      for (int x = 0; x < spec.width; ++x) {
        Eigen::Vector3d dir = ray_mat * Eigen::Vector3d(x, y, 1.0);
        Hit hit = intersect(spec, origin, dir);
        double r, g, b;
        if (hit.valid) {
          depth.set(x, y, static_cast<float>(hit.depth));
          row_lo[y] = std::min(row_lo[y], hit.depth);
          row_hi[y] = std::max(row_hi[y], hit.depth);
          row_hits[y] += 1;
          double shade = 0.35 + 0.65 * std::max(0.0, hit.normal.dot(kLight));
          double a = albedo_at(spec, hit.point) * shade;
          r = a;
          g = a * 0.97;
          b = a * 0.92;
        } else {
          r = g = b = kBackground;
        }
        // Quantize to 8 bits so in-memory scenes match scenes written to
        // disk and read back.
        img.at(x, y, 0) = std::round(std::clamp(r, 0.0, 1.0) * 255.0) / 255.f;
        img.at(x, y, 1) = std::round(std::clamp(g, 0.0, 1.0) * 255.0) / 255.f;
        img.at(x, y, 2) = std::round(std::clamp(b, 0.0, 1.0) * 255.0) / 255.f;
      }
    });
    for (int y = 0; y < spec.height; ++y) {
      d_lo = std::min(d_lo, row_lo[y]);
      d_hi = std::max(d_hi, row_hi[y]);
      hits += row_hits[y];
    }
    if (hits < depth.depth.size() / 100)
      throw std::invalid_argument(
          "generate_synthetic_scene: surface outside frustum of view " +
          std::to_string(v));
    double pad = spec.range_padding * (d_hi - d_lo) + 1e-6 * d_hi;
    cam.d_min = std::max(1e-3, d_lo - pad);
    cam.d_max = d_hi + pad;
    scene.cameras.push_back(cam);
    scene.images.push_back(std::move(img));
    scene.gt_depth.push_back(std::move(depth));
  }

  // Source views ordered by angular proximity on the ring.
  scene.pair_list.resize(spec.views);
  for (int i = 0; i < spec.views; ++i) {
    std::vector<std::pair<double, int>> order;
    for (int j = 0; j < spec.views; ++j) {
      if (j == i) continue;
      int d = std::abs(i - j);
      double ang = std::min(d, spec.views - d);
      order.emplace_back(ang, j);
    }
    std::sort(order.begin(), order.end());
    for (const auto& [ang, j] : order) scene.pair_list[i].push_back(j);
  }
  return scene;
}

void write_synthetic_scene(const SyntheticScene& scene, const std::string& dir,
                           int low_divisor) {
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "cams");
  fs::create_directories(fs::path(dir) / "gt");
  fs::create_directories(fs::path(dir) / "gt_low");
  char name[32];
  for (size_t v = 0; v < scene.images.size(); ++v) {
    std::snprintf(name, sizeof(name), "%08zu", v);
    save_image_ppm(scene.images[v], (fs::path(dir) / "images" / (std::string(name) + ".ppm")).string());
    save_camera(scene.cameras[v], (fs::path(dir) / "cams" / (std::string(name) + "_cam.txt")).string());
    save_depth_pfm(scene.gt_depth[v], (fs::path(dir) / "gt" / (std::string(name) + ".pfm")).string());
    DepthMap low = synthetic_gt_depth(scene.spec, static_cast<int>(v),
                                      scene.spec.width / low_divisor,
                                      scene.spec.height / low_divisor);
    save_depth_pfm(low, (fs::path(dir) / "gt_low" / (std::string(name) + ".pfm")).string());
  }
  save_pair_list(scene.pair_list, (fs::path(dir) / "pair.txt").string());
}

}  // namespace mvspl

#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mvspl {

// Thrown on file format problems and filesystem failures (CLI exit code 2).
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a pipeline stage produces unusable output (CLI exit code 3).
struct StageError : std::runtime_error {
  StageError(const std::string& stage, const std::string& msg)
      : std::runtime_error(stage + ": " + msg), stage_name(stage) {}
  std::string stage_name;
};

// Row-major float image, 1 (gray) or 3 (RGB) channels, values in [0,1].
// An empty mask means every pixel is valid.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;
  std::vector<uint8_t> mask;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.f)
      : width(w), height(h), channels(c),
        data(static_cast<size_t>(w) * h * c, fill) {}

  float& at(int x, int y, int c = 0) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  float at(int x, int y, int c = 0) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  bool valid(int x, int y) const {
    return mask.empty() || mask[static_cast<size_t>(y) * width + x] != 0;
  }
  void set_valid(int x, int y, bool v) {
    if (mask.empty()) mask.assign(static_cast<size_t>(width) * height, 1);
    mask[static_cast<size_t>(y) * width + x] = v ? 1 : 0;
  }
  size_t pixel_count() const { return static_cast<size_t>(width) * height; }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

// Depth grid in scene units. Invalid pixels have valid[i] == 0; their depth
// value is unspecified (serialized as 0 in PFM).
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> depth;
  std::vector<uint8_t> valid;

  DepthMap() = default;
  DepthMap(int w, int h)
      : width(w), height(h),
        depth(static_cast<size_t>(w) * h, 0.f),
        valid(static_cast<size_t>(w) * h, 0) {}

  float& at(int x, int y) { return depth[static_cast<size_t>(y) * width + x]; }
  float at(int x, int y) const {
    return depth[static_cast<size_t>(y) * width + x];
  }
  bool is_valid(int x, int y) const {
    return valid[static_cast<size_t>(y) * width + x] != 0;
  }
  void set(int x, int y, float d) {
    size_t i = static_cast<size_t>(y) * width + x;
    depth[i] = d;
    valid[i] = 1;
  }
  void invalidate(int x, int y) {
    valid[static_cast<size_t>(y) * width + x] = 0;
  }
  size_t valid_count() const {
    size_t n = 0;
    for (uint8_t v : valid) n += v != 0;
    return n;
  }
};

// Fused world-space points. view_ids/pixels record which depth-map pixel
// produced each point (audit trail for the filtering stages).
struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<int32_t> view_ids;
  std::vector<Eigen::Vector2i> pixels;

  size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

struct TriangleMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> triangles;

  bool empty() const { return triangles.empty(); }
};

}  // namespace mvspl

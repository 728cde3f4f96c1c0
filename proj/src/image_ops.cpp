#include "mvspl/image_ops.hpp"

#include <stdexcept>

#include "mvspl/parallel.hpp"

namespace mvspl {

Image to_grayscale(const Image& img) {
  if (img.channels == 1) return img;
  Image out(img.width, img.height, 1);
  out.mask = img.mask;
  const double inv = 1.0 / img.channels;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double s = 0.0;
      for (int c = 0; c < img.channels; ++c) s += img.at(x, y, c);
      out.at(x, y) = static_cast<float>(s * inv);
    }
  return out;
}

Image box_filter(const Image& img, int radius) {
  Image out(img.width, img.height, img.channels);
  out.mask = img.mask;
  parallel_for(img.height, [&](size_t yy) {
    int y = static_cast<int>(yy);
    for (int x = 0; x < img.width; ++x) {
      if (!img.valid(x, y)) continue;
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        int n = 0;
        for (int dy = -radius; dy <= radius; ++dy) {
          int sy = y + dy;
          if (sy < 0 || sy >= img.height) continue;
          for (int dx = -radius; dx <= radius; ++dx) {
            int sx = x + dx;
            if (sx < 0 || sx >= img.width) continue;
            if (!img.valid(sx, sy)) continue;
            acc += img.at(sx, sy, c);
            ++n;
          }
        }
        out.at(x, y, c) = n > 0 ? static_cast<float>(acc / n) : 0.f;
      }
    }
  });
  return out;
}

Image downsample(const Image& img, int factor) {
  if (factor == 1) return img;
  if (img.width % factor != 0 || img.height % factor != 0)
    throw std::invalid_argument("downsample: dimensions not divisible by factor");
  Image out(img.width / factor, img.height / factor, img.channels);
  bool masked = !img.mask.empty();
  if (masked) out.mask.assign(out.pixel_count(), 0);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      int n = 0;
      std::array<double, 3> acc{0.0, 0.0, 0.0};
      for (int dy = 0; dy < factor; ++dy)
        for (int dx = 0; dx < factor; ++dx) {
          int sx = x * factor + dx;
          int sy = y * factor + dy;
          if (!img.valid(sx, sy)) continue;
          for (int c = 0; c < img.channels; ++c) acc[c] += img.at(sx, sy, c);
          ++n;
        }
      if (n == 0) continue;
      for (int c = 0; c < img.channels; ++c)
        out.at(x, y, c) = static_cast<float>(acc[c] / n);
      if (masked) out.set_valid(x, y, true);
    }
  return out;
}

DepthMap downsample_depth(const DepthMap& depth, int factor) {
  if (factor == 1) return depth;
  if (depth.width % factor != 0 || depth.height % factor != 0)
    throw std::invalid_argument("downsample_depth: dimensions not divisible");
  DepthMap out(depth.width / factor, depth.height / factor);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      int n = 0;
      double acc = 0.0;
      for (int dy = 0; dy < factor; ++dy)
        for (int dx = 0; dx < factor; ++dx) {
          int sx = x * factor + dx;
          int sy = y * factor + dy;
          if (!depth.is_valid(sx, sy)) continue;
          acc += depth.at(sx, sy);
          ++n;
        }
      if (n > 0) out.set(x, y, static_cast<float>(acc / n));
    }
  return out;
}

DepthMap upsample_depth(const DepthMap& depth, int factor) {
  if (factor == 1) return depth;
  DepthMap out(depth.width * factor, depth.height * factor);
  const double f = factor;
  const double off = (f - 1.0) / 2.0;
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      double sx = (x - off) / f;
      double sy = (y - off) / f;
      int nx = std::min(std::max(static_cast<int>(std::lround(sx)), 0),
                        depth.width - 1);
      int ny = std::min(std::max(static_cast<int>(std::lround(sy)), 0),
                        depth.height - 1);
      if (!depth.is_valid(nx, ny)) continue;
      int x0 = static_cast<int>(std::floor(sx));
      int y0 = static_cast<int>(std::floor(sy));
      double wx = sx - x0;
      double wy = sy - y0;
      double acc = 0.0, wsum = 0.0;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          double w = (dx ? wx : 1.0 - wx) * (dy ? wy : 1.0 - wy);
          if (w <= 0.0) continue;
          int px = std::min(std::max(x0 + dx, 0), depth.width - 1);
          int py = std::min(std::max(y0 + dy, 0), depth.height - 1);
          if (!depth.is_valid(px, py)) continue;
          acc += w * depth.at(px, py);
          wsum += w;
        }
      if (wsum > 0.0) out.set(x, y, static_cast<float>(acc / wsum));
    }
  return out;
}

Gradients forward_gradients(const Image& img) {
  Gradients g;
  g.du = Image(img.width, img.height, img.channels);
  g.dv = Image(img.width, img.height, img.channels);
  g.du_valid.assign(img.pixel_count(), 0);
  g.dv_valid.assign(img.pixel_count(), 0);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      size_t i = static_cast<size_t>(y) * img.width + x;
      if (x + 1 < img.width && img.valid(x, y) && img.valid(x + 1, y)) {
        for (int c = 0; c < img.channels; ++c)
          g.du.at(x, y, c) = img.at(x + 1, y, c) - img.at(x, y, c);
        g.du_valid[i] = 1;
      }
      if (y + 1 < img.height && img.valid(x, y) && img.valid(x, y + 1)) {
        for (int c = 0; c < img.channels; ++c)
          g.dv.at(x, y, c) = img.at(x, y + 1, c) - img.at(x, y, c);
        g.dv_valid[i] = 1;
      }
    }
  return g;
}

Image gaussian_blur(const Image& img) {
  static const double kKernel[5] = {1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0,
                                    1 / 16.0};
  Image tmp(img.width, img.height, img.channels);
  tmp.mask = img.mask;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      if (!img.valid(x, y)) continue;
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0.0, wsum = 0.0;
        for (int k = -2; k <= 2; ++k) {
          int sx = x + k;
          if (sx < 0 || sx >= img.width || !img.valid(sx, y)) continue;
          acc += kKernel[k + 2] * img.at(sx, y, c);
          wsum += kKernel[k + 2];
        }
        tmp.at(x, y, c) = wsum > 0.0 ? static_cast<float>(acc / wsum) : 0.f;
      }
    }
  Image out(img.width, img.height, img.channels);
  out.mask = img.mask;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      if (!img.valid(x, y)) continue;
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0.0, wsum = 0.0;
        for (int k = -2; k <= 2; ++k) {
          int sy = y + k;
          if (sy < 0 || sy >= img.height || !img.valid(x, sy)) continue;
          acc += kKernel[k + 2] * tmp.at(x, sy, c);
          wsum += kKernel[k + 2];
        }
        out.at(x, y, c) = wsum > 0.0 ? static_cast<float>(acc / wsum) : 0.f;
      }
    }
  return out;
}

}  // namespace mvspl

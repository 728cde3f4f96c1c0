#pragma once

#include "mvspl/core.hpp"

namespace mvspl {

// Channel mean. Mask carries over.
Image to_grayscale(const Image& img);

// Box filter over the (2r+1)^2 neighborhood, averaging valid in-bounds taps
// only. A pixel stays invalid iff it was invalid.
Image box_filter(const Image& img, int radius);

// Box-average downsampling by an integer factor; dimensions must divide.
// Output pixel is invalid iff every covered input pixel is invalid.
Image downsample(const Image& img, int factor);
DepthMap downsample_depth(const DepthMap& depth, int factor);

// Bilinear depth upsampling by an integer factor; validity mask is taken
// from the nearest source pixel, the value is the renormalized blend of the
// valid contributing neighbors.
DepthMap upsample_depth(const DepthMap& depth, int factor);

// Forward differences; the last column/row get gradient 0 and are marked
// invalid in the companion validity grid. A gradient is valid only when both
// pixels it touches are valid.
struct Gradients {
  Image du;  // same channel count as the input
  Image dv;
  std::vector<uint8_t> du_valid;
  std::vector<uint8_t> dv_valid;
};
Gradients forward_gradients(const Image& img);

// Gaussian 5-tap blur (1 4 6 4 1)/16 per axis, mask-aware.
Image gaussian_blur(const Image& img);

}  // namespace mvspl

#pragma once

#include <functional>
#include <vector>

#include "mvspl/core.hpp"
#include "mvspl/geometry.hpp"
#include "mvspl/plane_sweep.hpp"

namespace mvspl {

// Warped source intensities per depth hypothesis, aligned with the
// HypothesisSet that built it. Masks mark out-of-bounds samples.
struct IntensityVolume {
  int width = 0;
  int height = 0;
  int count = 0;
  int channels = 0;
  std::vector<float> data;       // W*H*count*channels
  std::vector<uint8_t> valid;    // W*H*count

  float at(int x, int y, int k, int c) const {
    return data[((static_cast<size_t>(y) * width + x) * count + k) * channels + c];
  }
  bool cell_valid(int x, int y, int k) const {
    return valid[(static_cast<size_t>(y) * width + x) * count + k] != 0;
  }
};

IntensityVolume build_intensity_volume(const Image& source,
                                       const Camera& ref_cam,
                                       const Camera& src_cam,
                                       const HypothesisSet& hyp);

// Expectation of warped intensity under the hypothesis probabilities:
// I(x) = sum_d B_x(d) P_x(d), renormalized over the jointly valid cells.
// Mask = pixels whose valid probability mass is >= 0.5.
Image synthesize_image(const IntensityVolume& B, const ProbabilityVolume& P);

// Mean over views and valid pixels of |grad(I_syn) - grad(I_ref)|_1
// (forward differences; gradients crossing mask boundaries are excluded).
double loss_gradient(const std::vector<Image>& synthesized,
                     const Image& reference);

// Per-pixel SSIM with uniform window, C1 = 0.01^2, C2 = 0.03^2 for [0,1]
// intensities. Windows touching invalid pixels are invalid.
Image ssim_index(const Image& a, const Image& b, int window = 7);

// Mean over views of (1 - mean valid SSIM); range [0, 2].
double loss_ssim(const std::vector<Image>& synthesized, const Image& reference,
                 int window = 7);

// Maps an image to feature grids. The default is a 3-scale Gaussian pyramid
// of gradient magnitude (a handcrafted stand-in for deep features).
using FeatureExtractor = std::function<std::vector<Image>(const Image&)>;
FeatureExtractor default_feature_extractor();

// Sum over layers of the mean L1 feature distance, averaged over views.
// Invalid synthesized pixels are composited over the reference first so only
// observed regions contribute.
double loss_perceptual(const std::vector<Image>& synthesized,
                       const Image& reference,
                       const FeatureExtractor& extractor);

// Edge-aware first-order smoothness on mean-normalized inverse depth:
// sum_x |grad_u dt| e^{-|grad_u I|} + |grad_v dt| e^{-|grad_v I|},
// dt = (1/D) / mean(1/D). Gradients over valid neighbors only.
double loss_smoothness(const DepthMap& depth, const Image& reference);

struct LossBreakdown {
  double l_gradient = 0.0;
  double l_ssim = 0.0;
  double l_perceptual = 0.0;
  double l_smoothness = 0.0;
  double l_synthesis = 0.0;
  size_t valid_pixels = 0;
};

struct LossWeights {
  double gradient = 0.8;
  double ssim = 0.2;
  double perceptual = 0.05;
  double smoothness = 0.05;
};

// l_syn = a1 l_g + a2 l_ssim + a3 l_p + a4 l_s. Negative weights rejected.
LossBreakdown loss_synthesis(double l_g, double l_ssim_v, double l_p,
                             double l_s, const LossWeights& w,
                             size_t valid_pixels);

// L1 agreement between pyramids restricted to pixels valid in both the
// pseudo label and the estimate.
struct AgreementScore {
  double sum = 0.0;
  double mean = 0.0;  // per valid pixel
  size_t valid_pixels = 0;
};
AgreementScore pseudo_agreement(const std::vector<DepthMap>& estimated,
                                const std::vector<DepthMap>& pseudo);

}  // namespace mvspl

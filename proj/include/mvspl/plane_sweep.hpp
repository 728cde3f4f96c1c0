#pragma once

#include <vector>

#include "mvspl/core.hpp"
#include "mvspl/geometry.hpp"
#include "mvspl/scene_io.hpp"

namespace mvspl {

// Ordered depth candidates per pixel. Uniform sets (coarsest sweep) share one
// candidate list; refined sets store per-pixel candidates centered on a prior.
struct HypothesisSet {
  int width = 0;
  int height = 0;
  int count = 0;
  bool uniform = false;
  std::vector<double> uniform_values;        // count entries when uniform
  std::vector<float> values;                 // W*H*count otherwise
  std::vector<uint8_t> pixel_valid;          // empty = all valid
  double interval = 0.0;                     // candidate spacing

  double at(int x, int y, int k) const {
    return uniform ? uniform_values[k]
                   : values[(static_cast<size_t>(y) * width + x) * count + k];
  }
  bool valid(int x, int y) const {
    return pixel_valid.empty() ||
           pixel_valid[static_cast<size_t>(y) * width + x] != 0;
  }
};

struct CostVolume {
  int width = 0;
  int height = 0;
  int count = 0;
  std::vector<float> cost;       // W*H*count
  std::vector<uint8_t> n_views;  // contributing views per cell (ref included)

  float at(int x, int y, int k) const {
    return cost[(static_cast<size_t>(y) * width + x) * count + k];
  }
  bool cell_valid(int x, int y, int k) const {
    return n_views[(static_cast<size_t>(y) * width + x) * count + k] >= 2;
  }
};

struct ProbabilityVolume {
  int width = 0;
  int height = 0;
  int count = 0;
  std::vector<float> p;              // 0 on invalid cells
  std::vector<uint8_t> pixel_valid;  // 0 when no cell was valid

  float at(int x, int y, int k) const {
    return p[(static_cast<size_t>(y) * width + x) * count + k];
  }
  bool valid(int x, int y) const {
    return pixel_valid[static_cast<size_t>(y) * width + x] != 0;
  }
};

// Uniform linspace over [d_min, d_max]: d_k = d_min + k (d_max-d_min)/(M-1).
HypothesisSet build_hypotheses_coarse(double d_min, double d_max, int count,
                                      int width, int height);

// Per-pixel candidates d_prior + (k - (M-1)/2) * interval, clamped to stay
// positive; M must be even. Pixels with an invalid prior have no candidates
// and are marked invalid (they inherit the prior's invalidity downstream).
HypothesisSet build_hypotheses_refined(const DepthMap& prior, double interval,
                                       int count);

// Per-hypothesis cost-bias hook used by the self-training loop:
// bias(x, k) = prior_bias * |d_k - prior(x)| / interval where the prior is
// valid. An empty prior means no bias.
struct CostBias {
  const DepthMap* prior = nullptr;
  double weight = 0.0;
  double interval = 1.0;
};

// Variance across {reference, valid warped sources} of 3x3 box-averaged
// intensity. Images must be grayscale. Cells with fewer than 2 contributing
// views are invalid. Uniform hypothesis sets warp by homography; per-pixel
// sets go through unproject/transform/project per pixel.
CostVolume matching_cost(const Image& reference, const Camera& ref_cam,
                         const std::vector<Image>& sources,
                         const std::vector<Camera>& src_cams,
                         const HypothesisSet& hyp,
                         const CostBias& bias = CostBias{});

// Per-pixel softmax of -cost/temperature over valid cells.
ProbabilityVolume cost_to_probability(const CostVolume& cost, double temperature);

// Expectation of depth under the probability volume; also reports the peak
// probability as a confidence grid.
struct RegressedDepth {
  DepthMap depth;
  Image confidence;  // max_k P, single channel
};
RegressedDepth regress_depth(const ProbabilityVolume& prob,
                             const HypothesisSet& hyp);

struct ViewInference {
  DepthMap depth;
  Image confidence;
  ProbabilityVolume prob_finest;
  HypothesisSet hyp_finest;
};

// Coarse-to-fine sweep for one reference view at the given resolution.
// levels = pyramid depth; the coarsest level sweeps build_hypotheses_coarse,
// finer levels re-sweep refined hypotheses around the upsampled estimate with
// the interval halving per level. An optional prior (same resolution) recenters
// the finest level and biases its costs (prior-guided re-inference).
ViewInference infer_depth_view(const std::vector<Image>& gray_images,
                               const std::vector<Camera>& cameras,
                               int ref_view, const std::vector<int>& sources,
                               int levels, const Config& cfg,
                               const DepthMap* prior = nullptr);

// infer_depth_view for every view in the scene, at low resolution.
std::vector<ViewInference> infer_depth_pyramid(
    const std::vector<Image>& images, const std::vector<Camera>& cameras,
    const std::vector<std::vector<int>>& pair_list, int levels,
    const Config& cfg, const std::vector<const DepthMap*>* priors = nullptr);

// Upsamples the low-resolution prior to the high-resolution grid, re-sweeping
// at each doubling with halved intervals (the coarse-to-fine extension to the
// fine pyramid). High dimensions must be low dimensions times a power of two
// within the fine pyramid's extra level budget.
DepthMap refine_high_resolution(const std::vector<Image>& gray_high,
                                const std::vector<Camera>& cams_high,
                                int ref_view, const std::vector<int>& sources,
                                const DepthMap& prior_low, const Config& cfg);

// Hypothesis spacing at the finest level of the coarse pyramid and of the
// full fine pyramid, for a camera's depth range.
double coarse_interval(const Camera& cam, const Config& cfg);
double finest_low_interval(const Camera& cam, const Config& cfg);
double finest_interval(const Camera& cam, const Config& cfg);

}  // namespace mvspl

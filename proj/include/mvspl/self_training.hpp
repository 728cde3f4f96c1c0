#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mvspl/core.hpp"
#include "mvspl/evaluation.hpp"
#include "mvspl/fusion.hpp"
#include "mvspl/photometric.hpp"
#include "mvspl/plane_sweep.hpp"
#include "mvspl/scene_io.hpp"

namespace mvspl {

struct IterationMetrics {
  int iteration = 0;
  double coverage = 0.0;          // valid fraction of the current labels
  LossBreakdown synthesis;        // recorded at initialization
  double supervision_fit_sum = 0.0;   // L1 inference-vs-label agreement
  double supervision_fit_mean = 0.0;
  double label_change_mean = 0.0;     // new labels vs previous, per pixel
  bool converged = false;
  // Present when ground truth was supplied.
  bool has_gt = false;
  double mae = 0.0, rmse = 0.0;
  double accuracy = 0.0, completeness = 0.0, overall = 0.0;
  double precision = 0.0, recall = 0.0, f_score = 0.0;
};

struct GroundTruthData {
  std::vector<DepthMap> depth_low;  // per view, at the label resolution
  PointCloud cloud;                 // reference surface samples
};

struct PipelineState {
  Config config;
  int iteration = 0;
  std::vector<Image> images_low;   // RGB at (low_width, low_height)
  std::vector<Image> gray_low;
  std::vector<Image> gray_high;
  std::vector<Camera> cams_low;
  std::vector<Camera> cams_high;
  std::vector<std::vector<int>> sources;  // pair list capped per config
  std::vector<DepthMap> labels;    // current pseudo labels, low resolution
  std::vector<DepthMap> inferred;  // last low-res inference (diagnostics)
  std::vector<IterationMetrics> history;
  double resolved_r_max = 0.0;
  double finest = 0.0;             // finest hypothesis interval
  bool converged = false;
  std::optional<GroundTruthData> gt;
};

// Per-iteration artifact sink; stage names follow the loop order:
// infer, refine, filter, votes, labels (depth grids per view) and the
// fused cloud / reconstructed mesh.
struct StageSink {
  std::function<void(int iter, const std::string& stage, int view,
                     const DepthMap&)> depth;
  std::function<void(int iter, const std::string& stage, int view,
                     const Image&)> grid;
  std::function<void(int iter, const PointCloud&)> cloud;
  std::function<void(int iter, const TriangleMesh&)> mesh;
};

// Unsupervised initialization: plain coarse-to-fine inference on the
// low-resolution images, gated per pixel by whether probability-weighted
// synthesis beats the uniform-hypothesis baseline. Records the synthesis
// loss of the initialization.
PipelineState initialize(const Scene& scene, const Config& config,
                         std::optional<GroundTruthData> gt = std::nullopt);

// One round of the refinement loop: label-guided re-inference, high
// resolution refinement, cross-view filtering, fusion, surface
// reconstruction, and re-rendering of low-resolution labels.
void run_iteration(PipelineState& state, const SurfaceReconstructor& recon,
                   const StageSink* sink = nullptr);

struct PipelineOptions {
  std::optional<int> iterations;   // overrides config
  bool disable_early_stop = false;
  const StageSink* sink = nullptr;
  std::function<void(const IterationMetrics&)> on_metrics;
};

PipelineState run_pipeline(const Scene& scene, const Config& config,
                           std::optional<GroundTruthData> gt,
                           const PipelineOptions& options);

// Shared helpers for the CLI stages (kept identical so chaining the
// subcommands reproduces `iterate` bit for bit).
std::vector<std::vector<int>> capped_sources(
    const std::vector<std::vector<int>>& pair_list, int cap);
std::string view_name(int view);

}  // namespace mvspl

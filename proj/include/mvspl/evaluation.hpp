#pragma once

#include <vector>

#include "mvspl/core.hpp"

namespace mvspl {

// DTU-style point-cloud metrics. Nearest-neighbor distances are exact (the
// spatial index is tested against brute force).
struct CloudMetrics {
  double accuracy = 0.0;      // mean rec->ref distance, clamped at max_dist
  double completeness = 0.0;  // mean ref->rec distance, clamped
  double overall = 0.0;       // (accuracy + completeness) / 2
};

CloudMetrics accuracy_completeness(const PointCloud& reconstructed,
                                   const PointCloud& reference,
                                   double max_dist);

struct FScore {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;  // harmonic mean; 0 when precision + recall == 0
};

FScore f_score(const PointCloud& reconstructed, const PointCloud& reference,
               double threshold);

struct DepthErrorStats {
  double mae = 0.0;
  double rmse = 0.0;
  size_t count = 0;             // jointly valid pixels
  double frac_within_1 = 0.0;   // |err| <= 1, 2, 4 intervals
  double frac_within_2 = 0.0;
  double frac_within_4 = 0.0;
};

// Statistics over the intersection of validity masks; throws when empty.
DepthErrorStats depth_error_stats(const DepthMap& estimated,
                                  const DepthMap& ground_truth,
                                  double interval);

}  // namespace mvspl

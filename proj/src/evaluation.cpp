#include "mvspl/evaluation.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "mvspl/parallel.hpp"

namespace mvspl {

namespace {

struct CellKey {
  int64_t x, y, z;
  bool operator==(const CellKey& o) const {
    return x == o.x && y == o.y && z == o.z;
  }
};

struct CellKeyHash {
  size_t operator()(const CellKey& k) const {
    uint64_t h = 1469598103934665603ull;
    for (int64_t v : {k.x, k.y, k.z}) {
      h ^= static_cast<uint64_t>(v);
      h *= 1099511628211ull;
    }
    return static_cast<size_t>(h);
  }
};

// Uniform-grid nearest neighbor with a distance cutoff. Shell-by-shell
// expansion terminates once the remaining shells cannot beat the best
// distance found, so results equal brute force exactly.
class NeighborGrid {
 public:
  NeighborGrid(const std::vector<Eigen::Vector3d>& points, double cutoff)
      : points_(points), cutoff_(cutoff) {
    lo_ = points.empty() ? Eigen::Vector3d::Zero() : points[0];
    hi_ = lo_;
    for (const auto& p : points) {
      lo_ = lo_.cwiseMin(p);
      hi_ = hi_.cwiseMax(p);
    }
    // Aim for a few points per cell assuming surface-like distributions,
    // bounded so the ring scan stays short.
    Eigen::Vector3d ext = hi_ - lo_;
    double area = (ext.x() * ext.y() + ext.y() * ext.z() + ext.z() * ext.x()) / 1.5;
    double cell = std::sqrt(4.0 * std::max(area, 1e-12) /
                            std::max<size_t>(points.size(), 1));
    cell_ = std::clamp(cell, std::max(cutoff / 64.0, 1e-12), std::max(cutoff, 1e-12));
    for (size_t i = 0; i < points.size(); ++i)
      cells_[key_of(points[i])].push_back(static_cast<int>(i));
  }

  // Exact distance to the nearest point if it is <= cutoff, else cutoff.
  double nearest_clamped(const Eigen::Vector3d& q) const {
    // Far outside the populated box nothing can beat the cutoff.
    Eigen::Vector3d clamped = q.cwiseMax(lo_).cwiseMin(hi_);
    if ((q - clamped).norm() >= cutoff_) return cutoff_;
    CellKey ck = key_of(q);
    double best = cutoff_;
    int max_ring = static_cast<int>(std::ceil(cutoff_ / cell_)) + 1;
    for (int r = 0; r <= max_ring; ++r) {
      if ((r - 1) * cell_ > best) break;  // shells further than best
      scan_shell(ck, r, q, best);
    }
    return best;
  }

 private:
  CellKey key_of(const Eigen::Vector3d& p) const {
    return CellKey{static_cast<int64_t>(std::floor(p.x() / cell_)),
                   static_cast<int64_t>(std::floor(p.y() / cell_)),
                   static_cast<int64_t>(std::floor(p.z() / cell_))};
  }

  void visit(const CellKey& k, const Eigen::Vector3d& q, double& best) const {
    auto it = cells_.find(k);
    if (it == cells_.end()) return;
    for (int idx : it->second) {
      double d = (points_[idx] - q).norm();
      if (d < best) best = d;
    }
  }

  void scan_shell(const CellKey& c, int r, const Eigen::Vector3d& q,
                  double& best) const {
    if (r == 0) {
      visit(c, q, best);
      return;
    }
    for (int dz = -r; dz <= r; ++dz)
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != r)
            continue;
          visit(CellKey{c.x + dx, c.y + dy, c.z + dz}, q, best);
        }
  }

  const std::vector<Eigen::Vector3d>& points_;
  double cutoff_;
  double cell_ = 1.0;
  Eigen::Vector3d lo_, hi_;
  std::unordered_map<CellKey, std::vector<int>, CellKeyHash> cells_;
};

double mean_clamped_distance(const PointCloud& from, const PointCloud& to,
                             double cutoff) {
  NeighborGrid grid(to.points, cutoff);
  std::vector<double> dist(from.size());
  parallel_for(from.size(),
               [&](size_t i) { dist[i] = grid.nearest_clamped(from.points[i]); });
  double sum = 0.0;
  for (double d : dist) sum += d;
  return sum / from.size();
}

}  // namespace

CloudMetrics accuracy_completeness(const PointCloud& reconstructed,
                                   const PointCloud& reference,
                                   double max_dist) {
  if (reconstructed.empty() || reference.empty())
    throw std::invalid_argument("accuracy_completeness: empty point cloud");
  if (!(max_dist > 0.0))
    throw std::invalid_argument("accuracy_completeness: max_dist must be > 0");
  CloudMetrics m;
  m.accuracy = mean_clamped_distance(reconstructed, reference, max_dist);
  m.completeness = mean_clamped_distance(reference, reconstructed, max_dist);
  m.overall = 0.5 * (m.accuracy + m.completeness);
  return m;
}

FScore f_score(const PointCloud& reconstructed, const PointCloud& reference,
               double threshold) {
  if (reconstructed.empty() || reference.empty())
    throw std::invalid_argument("f_score: empty point cloud");
  if (!(threshold > 0.0))
    throw std::invalid_argument("f_score: threshold must be > 0");
  FScore s;
  // "within threshold" is inclusive; nearest_clamped returns exactly the
  // threshold for anything at or beyond it, so compare with a half-ulp slack.
  NeighborGrid ref_grid(reference.points, threshold * (1.0 + 1e-12));
  std::vector<uint8_t> hit(reconstructed.size(), 0);
  parallel_for(reconstructed.size(), [&](size_t i) {
    hit[i] = ref_grid.nearest_clamped(reconstructed.points[i]) <= threshold;
  });
  size_t n = 0;
  for (uint8_t h : hit) n += h;
  s.precision = static_cast<double>(n) / reconstructed.size();

  NeighborGrid rec_grid(reconstructed.points, threshold * (1.0 + 1e-12));
  std::vector<uint8_t> hit2(reference.size(), 0);
  parallel_for(reference.size(), [&](size_t i) {
    hit2[i] = rec_grid.nearest_clamped(reference.points[i]) <= threshold;
  });
  n = 0;
  for (uint8_t h : hit2) n += h;
  s.recall = static_cast<double>(n) / reference.size();

  s.f = (s.precision + s.recall) > 0.0
            ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
            : 0.0;
  return s;
}

DepthErrorStats depth_error_stats(const DepthMap& estimated,
                                  const DepthMap& ground_truth,
                                  double interval) {
  if (estimated.width != ground_truth.width ||
      estimated.height != ground_truth.height)
    throw std::invalid_argument("depth_error_stats: resolution mismatch");
  DepthErrorStats s;
  double sum = 0.0, sum2 = 0.0;
  size_t within1 = 0, within2 = 0, within4 = 0;
  for (int y = 0; y < estimated.height; ++y)
    for (int x = 0; x < estimated.width; ++x) {
      if (!estimated.is_valid(x, y) || !ground_truth.is_valid(x, y)) continue;
      double e = std::abs(static_cast<double>(estimated.at(x, y)) -
                          ground_truth.at(x, y));
      sum += e;
      sum2 += e * e;
      within1 += e <= interval;
      within2 += e <= 2 * interval;
      within4 += e <= 4 * interval;
      ++s.count;
    }
  if (s.count == 0)
    throw std::invalid_argument("depth_error_stats: no jointly valid pixels");
  s.mae = sum / s.count;
  s.rmse = std::sqrt(sum2 / s.count);
  s.frac_within_1 = static_cast<double>(within1) / s.count;
  s.frac_within_2 = static_cast<double>(within2) / s.count;
  s.frac_within_4 = static_cast<double>(within4) / s.count;
  return s;
}

}  // namespace mvspl

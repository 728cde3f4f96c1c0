#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <Eigen/Geometry>

#include "mvspl/geometry.hpp"

namespace mvspl::testing {

// Unique scratch directory under the build tree, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("mvspl_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string str() const { return path_.string(); }
  std::filesystem::path path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

inline Camera random_camera(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uf(80.0, 500.0);
  std::uniform_real_distribution<double> uc(30.0, 70.0);
  std::uniform_real_distribution<double> ut(-2.0, 2.0);
  Camera cam;
  cam.K = Eigen::Matrix3d::Identity();
  cam.K(0, 0) = uf(rng);
  cam.K(1, 1) = uf(rng);
  cam.K(0, 2) = uc(rng);
  cam.K(1, 2) = uc(rng);
  cam.R = random_rotation(rng);
  cam.t = Eigen::Vector3d(ut(rng), ut(rng), ut(rng));
  cam.d_min = 1.0;
  cam.d_max = 10.0;
  return cam;
}

// The 100/50 pinhole used throughout the worked examples.
inline Camera example_camera() {
  Camera cam;
  cam.K = Eigen::Matrix3d::Identity();
  cam.K(0, 0) = 100.0;
  cam.K(1, 1) = 100.0;
  cam.K(0, 2) = 50.0;
  cam.K(1, 2) = 50.0;
  cam.d_min = 0.5;
  cam.d_max = 10.0;
  return cam;
}

}  // namespace mvspl::testing

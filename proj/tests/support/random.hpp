#pragma once

// Seeded generators for property tests and acceptance fixtures.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Geometry>

#include "occ/analysis.hpp"
#include "occ/geometry.hpp"
#include "occ/pooling.hpp"

namespace occ::testing {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
  bool coin(double p = 0.5) { return uniform() < p; }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

inline Eigen::Matrix3d random_rotation(Rng& rng) {
  Eigen::Quaterniond q(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  return q.normalized().toRotationMatrix();
}

// A camera near the LiDAR origin looking roughly along +z of the LiDAR frame.
inline CameraRig random_rig(Rng& rng, int width, int height) {
  CameraRig rig;
  rig.intrinsics << rng.uniform(50, 200), rng.uniform(-1, 1), rng.uniform(0, width), 0, rng.uniform(50, 200),
      rng.uniform(0, height), 0, 0, 1;
  const Eigen::Matrix3d tilt =
      Eigen::AngleAxisd(rng.uniform(-0.3, 0.3), Eigen::Vector3d::UnitX()).toRotationMatrix() *
      Eigen::AngleAxisd(rng.uniform(-0.3, 0.3), Eigen::Vector3d::UnitY()).toRotationMatrix();
  rig.lidar_to_camera_rotation = tilt;
  rig.lidar_to_camera_translation = Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  rig.lidar_to_ego.topLeftCorner<3, 3>() = random_rotation(rng);
  rig.lidar_to_ego.topRightCorner<3, 1>() = Eigen::Vector3d(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0, 2));
  rig.image_width = width;
  rig.image_height = height;
  return rig;
}

inline PointCloud random_cloud(Rng& rng, std::size_t count, double extent = 20.0) {
  PointCloud cloud;
  cloud.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    cloud.points.emplace_back(rng.uniform(-extent, extent), rng.uniform(-extent, extent), rng.uniform(-2, extent));
  }
  return cloud;
}

inline FeatureMap random_features(Rng& rng, int channels, int height, int width, double lo = -1.0, double hi = 1.0) {
  FeatureMap m = FeatureMap::zeros(channels, height, width);
  for (double& x : m.data) x = rng.uniform(lo, hi);
  return m;
}

inline Frustum random_frustum(Rng& rng, const GridSpec& spec, int width, int height, std::size_t count) {
  Frustum f;
  f.width = width;
  f.height = height;
  f.points.reserve(count);
  const int pixels = width * height;
  for (std::size_t i = 0; i < count; ++i) {
    FrustumPoint p;
    p.pixel = static_cast<std::size_t>(rng.integer(0, pixels - 1));
    p.cell = VoxelIndex{rng.integer(0, spec.nx - 1), rng.integer(0, spec.ny - 1), rng.integer(0, spec.nz - 1)};
    p.weight = rng.uniform();
    f.points.push_back(p);
  }
  return f;
}

// Bin-valued map with every pixel valid unless `invalid_rate` > 0.
inline ScalarMap random_bin_map(Rng& rng, int width, int height, int nz, double invalid_rate = 0.0) {
  ScalarMap m = ScalarMap::empty(width, height, MapChannel::kHeightBin);
  for (std::size_t i = 0; i < m.pixel_count(); ++i) {
    if (rng.coin(invalid_rate)) continue;
    m.values[i] = rng.integer(1, nz);
    m.valid[i] = 1;
  }
  return m;
}

inline ScalarMap all_valid_bin_map(int width, int height, int bin) {
  ScalarMap m = ScalarMap::empty(width, height, MapChannel::kHeightBin);
  for (std::size_t i = 0; i < m.pixel_count(); ++i) {
    m.values[i] = bin;
    m.valid[i] = 1;
  }
  return m;
}

// Each voxel is free with probability `free_rate`, otherwise a class drawn
// from a height-dependent distribution so subspaces differ in content.
inline LabeledVoxelGrid random_grid(Rng& rng, int nx, int ny, int nz, int classes, double free_rate = 0.5) {
  LabeledVoxelGrid g = LabeledVoxelGrid::empty(nx, ny, nz, static_cast<std::uint8_t>(classes),
                                               static_cast<std::uint8_t>(classes));
  std::vector<double> bias(static_cast<std::size_t>(classes));
  for (auto& b : bias) b = rng.uniform(-2, 2);
  for (int x = 0; x < nx; ++x) {
    for (int y = 0; y < ny; ++y) {
      for (int z = 0; z < nz; ++z) {
        if (rng.coin(free_rate)) continue;
        std::vector<double> w(static_cast<std::size_t>(classes));
        for (int j = 0; j < classes; ++j) {
          w[static_cast<std::size_t>(j)] = std::exp(bias[static_cast<std::size_t>(j)] * (z + 1.0) / nz * (j % 2 ? 1 : -1));
        }
        std::discrete_distribution<int> pick(w.begin(), w.end());
        g.at(x, y, z) = static_cast<std::uint8_t>(pick(rng.engine()));
      }
    }
  }
  return g;
}

// Random partition of [1, nz] into contiguous intervals.
inline DecouplingScheme random_scheme(Rng& rng, int nz, double cut_rate = 0.3) {
  std::vector<HeightInterval> iv;
  int lo = 1;
  for (int b = 1; b < nz; ++b) {
    if (rng.coin(cut_rate)) {
      iv.push_back({lo, b});
      lo = b + 1;
    }
  }
  iv.push_back({lo, nz});
  return DecouplingScheme(iv);
}

// Splits some intervals of `coarse` further.
inline DecouplingScheme random_refinement(Rng& rng, const DecouplingScheme& coarse, double cut_rate = 0.4) {
  std::vector<HeightInterval> iv;
  for (const auto& c : coarse.intervals()) {
    int lo = c.lo;
    for (int b = c.lo; b < c.hi; ++b) {
      if (rng.coin(cut_rate)) {
        iv.push_back({lo, b});
        lo = b + 1;
      }
    }
    iv.push_back({lo, c.hi});
  }
  return DecouplingScheme(iv);
}

}  // namespace occ::testing

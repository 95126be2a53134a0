#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "occ/geometry.hpp"

namespace occ {

// Axis-aligned voxel grid in the ego frame. Cells are half-open:
// [min + i * voxel_size, min + (i + 1) * voxel_size).
struct GridSpec {
  double x_min = 0.0, x_max = 0.0;
  double y_min = 0.0, y_max = 0.0;
  double z_min = 0.0, z_max = 0.0;
  double voxel_size = 0.0;
  int nx = 0, ny = 0, nz = 0;
  int num_classes = 0;

  // Derives nx, ny, nz by rounding extent / voxel_size.
  static GridSpec make(double x_min, double x_max, double y_min, double y_max, double z_min,
                       double z_max, double voxel_size, int num_classes);
  // 200 x 200 x 16 cells of 0.4 m over [-40, 40]^2 x [-1, 5.4], 17 classes.
  static GridSpec occ3d_nuscenes();

  void validate() const;
  std::size_t cell_count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
  }
};

// Zero-based voxel coordinates.
struct VoxelIndex {
  int x = 0;
  int y = 0;
  int z = 0;
  auto operator<=>(const VoxelIndex&) const = default;
};

// One-based height bin in [1, nz].
struct HeightBin {
  int index = 1;
  auto operator<=>(const HeightBin&) const = default;
};

std::optional<HeightBin> height_to_bin(double ego_height, const GridSpec& spec);
std::optional<VoxelIndex> voxel_of(const Eigen::Vector3d& ego_point, const GridSpec& spec);

// Per-pixel scores over height bins, layout bins x height x width.
struct HeightVolume {
  int width = 0;
  int height = 0;
  int bins = 0;
  std::vector<double> logits;

  static HeightVolume zeros(int width, int height, int bins);

  std::size_t index(int bin, int v, int u) const {
    return (static_cast<std::size_t>(bin) * static_cast<std::size_t>(height) + static_cast<std::size_t>(v)) *
               static_cast<std::size_t>(width) +
           static_cast<std::size_t>(u);
  }
  double& at(int bin, int v, int u) { return logits[index(bin, v, u)]; }
  double at(int bin, int v, int u) const { return logits[index(bin, v, u)]; }
};

// One-hot target from a metric height map; invalid and out-of-range pixels
// get an all-zero column.
HeightVolume one_hot_height(const ScalarMap& height_map, const GridSpec& spec);

// Bin-valued map (channel kHeightBin) holding 1 + argmax over bins. Ties go to
// the lowest bin. Every pixel is valid.
ScalarMap argmax_height(const HeightVolume& volume);

// Metric height map -> bin-valued map; pixels outside [z_min, z_max) become
// invalid.
ScalarMap bin_height_map(const ScalarMap& height_map, const GridSpec& spec);

}  // namespace occ

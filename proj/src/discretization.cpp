#include "occ/discretization.hpp"

#include <cmath>
#include <string>

#include "occ/error.hpp"

namespace occ {
namespace {

// Half-open cell index of `value` on [lo, hi) split into `n` cells.
std::optional<int> axis_cell(double value, double lo, double hi, double step, int n) {
  if (!(value >= lo && value < hi)) return std::nullopt;
  const int i = static_cast<int>(std::floor((value - lo) / step));
  // (value - lo) / step can round up to n just below hi.
  return std::min(std::max(i, 0), n - 1);
}

int cells_along(double lo, double hi, double step) {
  return static_cast<int>(std::lround((hi - lo) / step));
}

}  // namespace

GridSpec GridSpec::make(double x_min, double x_max, double y_min, double y_max, double z_min,
                        double z_max, double voxel_size, int num_classes) {
  GridSpec s;
  s.x_min = x_min;
  s.x_max = x_max;
  s.y_min = y_min;
  s.y_max = y_max;
  s.z_min = z_min;
  s.z_max = z_max;
  s.voxel_size = voxel_size;
  s.num_classes = num_classes;
  if (voxel_size > 0.0) {
    s.nx = cells_along(x_min, x_max, voxel_size);
    s.ny = cells_along(y_min, y_max, voxel_size);
    s.nz = cells_along(z_min, z_max, voxel_size);
  }
  s.validate();
  return s;
}

GridSpec GridSpec::occ3d_nuscenes() { return make(-40.0, 40.0, -40.0, 40.0, -1.0, 5.4, 0.4, 17); }

void GridSpec::validate() const {
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) throw ValidationError("voxel size must be positive");
  if (!(x_max > x_min) || !(y_max > y_min) || !(z_max > z_min)) {
    throw ValidationError("grid ranges must be non-empty");
  }
  if (nx != cells_along(x_min, x_max, voxel_size) || ny != cells_along(y_min, y_max, voxel_size) ||
      nz != cells_along(z_min, z_max, voxel_size)) {
    throw ValidationError("grid cell counts disagree with ranges and voxel size");
  }
  if (nx <= 0 || ny <= 0 || nz <= 0) throw ValidationError("grid must have at least one cell per axis");
  if (num_classes <= 0) throw ValidationError("num_classes must be positive");
}

std::optional<HeightBin> height_to_bin(double ego_height, const GridSpec& spec) {
  const auto cell = axis_cell(ego_height, spec.z_min, spec.z_max, spec.voxel_size, spec.nz);
  if (!cell) return std::nullopt;
  return HeightBin{*cell + 1};
}

std::optional<VoxelIndex> voxel_of(const Eigen::Vector3d& p, const GridSpec& spec) {
  const auto x = axis_cell(p.x(), spec.x_min, spec.x_max, spec.voxel_size, spec.nx);
  const auto y = axis_cell(p.y(), spec.y_min, spec.y_max, spec.voxel_size, spec.ny);
  const auto z = axis_cell(p.z(), spec.z_min, spec.z_max, spec.voxel_size, spec.nz);
  if (!x || !y || !z) return std::nullopt;
  return VoxelIndex{*x, *y, *z};
}

HeightVolume HeightVolume::zeros(int width, int height, int bins) {
  if (width <= 0 || height <= 0 || bins <= 0) throw ValidationError("height volume dimensions must be positive");
  HeightVolume v;
  v.width = width;
  v.height = height;
  v.bins = bins;
  v.logits.assign(static_cast<std::size_t>(width) * height * bins, 0.0);
  return v;
}

HeightVolume one_hot_height(const ScalarMap& height_map, const GridSpec& spec) {
  if (height_map.channel != MapChannel::kHeight) {
    throw ValidationError("one-hot encoding expects a metric height map");
  }
  HeightVolume out = HeightVolume::zeros(height_map.width, height_map.height, spec.nz);
  for (int v = 0; v < height_map.height; ++v) {
    for (int u = 0; u < height_map.width; ++u) {
      if (!height_map.is_valid(u, v)) continue;
      if (const auto bin = height_to_bin(height_map.value(u, v), spec)) out.at(bin->index - 1, v, u) = 1.0;
    }
  }
  return out;
}

ScalarMap argmax_height(const HeightVolume& volume) {
  for (double x : volume.logits) {
    if (!std::isfinite(x)) throw NumericError("height volume contains non-finite logits");
  }
  ScalarMap out = ScalarMap::empty(volume.width, volume.height, MapChannel::kHeightBin);
  for (int v = 0; v < volume.height; ++v) {
    for (int u = 0; u < volume.width; ++u) {
      int best = 0;
      for (int b = 1; b < volume.bins; ++b) {
        if (volume.at(b, v, u) > volume.at(best, v, u)) best = b;
      }
      const std::size_t idx = out.index(u, v);
      out.values[idx] = best + 1;
      out.valid[idx] = 1;
    }
  }
  return out;
}

ScalarMap bin_height_map(const ScalarMap& height_map, const GridSpec& spec) {
  if (height_map.channel == MapChannel::kHeightBin) return height_map;
  if (height_map.channel != MapChannel::kHeight) {
    throw ValidationError("cannot derive height bins from a depth map");
  }
  ScalarMap out = ScalarMap::empty(height_map.width, height_map.height, MapChannel::kHeightBin);
  for (std::size_t i = 0; i < height_map.pixel_count(); ++i) {
    if (!height_map.valid[i]) continue;
    if (const auto bin = height_to_bin(height_map.values[i], spec)) {
      out.values[i] = bin->index;
      out.valid[i] = 1;
    }
  }
  return out;
}

}  // namespace occ

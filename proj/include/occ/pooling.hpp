#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "occ/discretization.hpp"
#include "occ/geometry.hpp"

namespace occ {

// channels x height x width, row-major.
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  static FeatureMap zeros(int channels, int height, int width);

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  std::size_t index(int c, int v, int u) const {
    return static_cast<std::size_t>(c) * pixel_count() +
           static_cast<std::size_t>(v) * static_cast<std::size_t>(width) + static_cast<std::size_t>(u);
  }
  double& at(int c, int v, int u) { return data[index(c, v, u)]; }
  double at(int c, int v, int u) const { return data[index(c, v, u)]; }
};

// Categorical depth per pixel; bin b covers [d_min + b * d_step, d_min + (b + 1) * d_step).
// Layout bins x height x width.
struct DepthDistribution {
  int bins = 0;
  int height = 0;
  int width = 0;
  double d_min = 0.0;
  double d_step = 1.0;
  std::vector<double> weights;

  static DepthDistribution zeros(int bins, int height, int width, double d_min, double d_step);

  double bin_center(int bin) const { return d_min + (bin + 0.5) * d_step; }
  std::size_t index(int bin, int v, int u) const {
    return (static_cast<std::size_t>(bin) * static_cast<std::size_t>(height) + static_cast<std::size_t>(v)) *
               static_cast<std::size_t>(width) +
           static_cast<std::size_t>(u);
  }
  double& at(int bin, int v, int u) { return weights[index(bin, v, u)]; }
  double at(int bin, int v, int u) const { return weights[index(bin, v, u)]; }

  // Non-negative weights, per-pixel mass at most 1 + 1e-6, positive step.
  void validate() const;
};

// Closed range of 1-based height bins.
struct HeightInterval {
  int lo = 1;
  int hi = 1;

  bool contains(int bin) const { return bin >= lo && bin <= hi; }
  int size() const { return hi - lo + 1; }
  bool operator==(const HeightInterval&) const = default;
};

// Ordered, disjoint intervals exactly covering [1, nz].
class DecouplingScheme {
 public:
  DecouplingScheme() = default;
  explicit DecouplingScheme(std::vector<HeightInterval> intervals);

  // "1-4,5-8,9-16". A bare "7" is the single-bin interval [7, 7].
  static DecouplingScheme parse(std::string_view text);
  // The undecoupled scheme {[1, nz]}.
  static DecouplingScheme single(int nz);

  // Throws ValidationError unless sorted, disjoint and covering [1, nz].
  void validate(int nz) const;
  // True when every interval of *this lies inside one interval of `coarser`.
  bool refines(const DecouplingScheme& coarser) const;
  // Index of the interval holding `bin`, or -1.
  int interval_of(int bin) const;

  const std::vector<HeightInterval>& intervals() const { return intervals_; }
  std::size_t size() const { return intervals_.size(); }
  const HeightInterval& operator[](std::size_t k) const { return intervals_[k]; }
  std::string to_string() const;

 private:
  std::vector<HeightInterval> intervals_;
};

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> values;  // row-major, 0 or 1
};

struct HeightMaskSet {
  std::vector<BinaryMask> masks;  // one per interval, in scheme order
};

// channels x nz x ny x nx. `z_begin` is the 1-based height bin of local
// layer 0, so a subspace volume knows where it sits in the full grid.
struct FeatureVolume {
  int channels = 0;
  int nz = 0;
  int ny = 0;
  int nx = 0;
  int z_begin = 1;
  std::vector<double> data;

  static FeatureVolume zeros(int channels, int nz, int ny, int nx, int z_begin = 1);

  std::size_t cells() const {
    return static_cast<std::size_t>(nz) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nx);
  }
  std::size_t index(int c, int z, int y, int x) const {
    return static_cast<std::size_t>(c) * cells() +
           (static_cast<std::size_t>(z) * static_cast<std::size_t>(ny) + static_cast<std::size_t>(y)) *
               static_cast<std::size_t>(nx) +
           static_cast<std::size_t>(x);
  }
  double& at(int c, int z, int y, int x) { return data[index(c, z, y, x)]; }
  double at(int c, int z, int y, int x) const { return data[index(c, z, y, x)]; }
};

// One lifted sample: the pixel it came from, the voxel it lands in and its
// depth weight.
struct FrustumPoint {
  std::size_t pixel = 0;  // v * width + u
  VoxelIndex cell;
  double weight = 0.0;
};

struct Frustum {
  int width = 0;
  int height = 0;
  std::vector<FrustumPoint> points;
};

// Every pooling call reduces each output cell over its points in frustum
// order, so results do not depend on `threads`.
struct PoolOptions {
  int threads = 1;
};

// Lifts every (pixel, depth bin) pair to the ego point at the bin centre and
// keeps the ones inside the grid. Points are ordered pixel-major, then by bin.
Frustum gen_frustum(const FeatureMap& ctx, const DepthDistribution& depth, const CameraRig& rig,
                    const GridSpec& spec);

// Sum of weight * feature per voxel, nz layers.
FeatureVolume voxel_pool(const Frustum& frustum, const FeatureMap& ctx, const GridSpec& spec,
                         PoolOptions options = {});

// Same reduction with the height axis collapsed (one layer).
FeatureVolume bev_pool(const Frustum& frustum, const FeatureMap& ctx, const GridSpec& spec,
                       PoolOptions options = {});

// Mask k is 1 where the pixel's bin lies in interval k. `bin_map` must be
// bin-valued; invalid pixels are 0 in every mask.
HeightMaskSet decouple_masks(const ScalarMap& bin_map, const DecouplingScheme& scheme);

// Channel-broadcast product; masked-out pixels are written as exact zeros.
FeatureMap mask_features(const FeatureMap& ctx, const BinaryMask& mask);

// Pools the masked features of interval k only into the z-layers of interval
// k. Points of the frustum whose voxel falls outside the interval are
// dropped. Returns one volume per interval with nz = interval size.
std::vector<FeatureVolume> mghs_pool(const Frustum& frustum, const FeatureMap& ctx,
                                     const ScalarMap& bin_map, const DecouplingScheme& scheme,
                                     const GridSpec& spec, PoolOptions options = {});

// gen_frustum + mghs_pool.
std::vector<FeatureVolume> mghs_project(const FeatureMap& ctx, const DepthDistribution& depth,
                                        const ScalarMap& bin_map, const DecouplingScheme& scheme,
                                        const CameraRig& rig, const GridSpec& spec,
                                        PoolOptions options = {});

// Stacks subspace volumes along z in the given order.
FeatureVolume concat_z(std::span<const FeatureVolume> volumes);
// Collapses z by summation.
FeatureVolume sum_over_z(const FeatureVolume& volume);

}  // namespace occ

#include "occ/pooling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "occ/error.hpp"
#include "occ/keyvalue.hpp"
#include "parallel.hpp"

namespace occ {
namespace {

std::string shape(int a, int b, int c) {
  return std::to_string(a) + "x" + std::to_string(b) + "x" + std::to_string(c);
}

void require_finite(const std::vector<double>& values, const char* what) {
  for (double x : values) {
    if (!std::isfinite(x)) throw NumericError(std::string(what) + " contains non-finite values");
  }
}

// A frustum point and its slot within one channel of the output volume.
struct ScatterEntry {
  std::size_t cell;
  std::size_t point;
};

// Sums weight * feature into `out` for every entry. Entries are grouped by
// cell with a stable sort so each cell is reduced in frustum order no matter
// how the cells are split across threads.
void scatter_add(std::vector<ScatterEntry> entries, const Frustum& frustum, const FeatureMap& ctx,
                 FeatureVolume& out, int threads) {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const ScatterEntry& a, const ScatterEntry& b) { return a.cell < b.cell; });
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i == 0 || entries[i].cell != entries[i - 1].cell) starts.push_back(i);
  }
  starts.push_back(entries.size());
  const std::size_t cells = out.cells();
  const std::size_t plane = ctx.pixel_count();
  detail::parallel_for(starts.size() - 1, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t g = begin; g < end; ++g) {
      const std::size_t cell = entries[starts[g]].cell;
      for (int c = 0; c < out.channels; ++c) {
        const double* feature = ctx.data.data() + static_cast<std::size_t>(c) * plane;
        double acc = 0.0;
        for (std::size_t i = starts[g]; i < starts[g + 1]; ++i) {
          const FrustumPoint& p = frustum.points[entries[i].point];
          acc += p.weight * feature[p.pixel];
        }
        out.data[static_cast<std::size_t>(c) * cells + cell] = acc;
      }
    }
  });
}

void check_frustum(const Frustum& frustum, const FeatureMap& ctx, const GridSpec& spec) {
  if (frustum.width != ctx.width || frustum.height != ctx.height) {
    throw DimensionError("frustum image " + std::to_string(frustum.height) + "x" + std::to_string(frustum.width) +
                         " does not match feature map " + std::to_string(ctx.height) + "x" +
                         std::to_string(ctx.width));
  }
  if (ctx.data.size() != static_cast<std::size_t>(ctx.channels) * ctx.pixel_count()) {
    throw DimensionError("feature map buffer does not match its shape " + shape(ctx.channels, ctx.height, ctx.width));
  }
  for (const auto& p : frustum.points) {
    if (p.pixel >= ctx.pixel_count() || p.cell.x < 0 || p.cell.x >= spec.nx || p.cell.y < 0 ||
        p.cell.y >= spec.ny || p.cell.z < 0 || p.cell.z >= spec.nz) {
      throw DimensionError("frustum point outside the feature map or grid");
    }
  }
}

std::size_t plane_index(const VoxelIndex& c, const GridSpec& spec) {
  return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(spec.nx) + static_cast<std::size_t>(c.x);
}

}  // namespace

FeatureMap FeatureMap::zeros(int channels, int height, int width) {
  if (channels <= 0 || height <= 0 || width <= 0) throw ValidationError("feature map dimensions must be positive");
  FeatureMap m;
  m.channels = channels;
  m.height = height;
  m.width = width;
  m.data.assign(static_cast<std::size_t>(channels) * m.pixel_count(), 0.0);
  return m;
}

DepthDistribution DepthDistribution::zeros(int bins, int height, int width, double d_min, double d_step) {
  if (bins <= 0 || height <= 0 || width <= 0) throw ValidationError("depth distribution dimensions must be positive");
  DepthDistribution d;
  d.bins = bins;
  d.height = height;
  d.width = width;
  d.d_min = d_min;
  d.d_step = d_step;
  d.weights.assign(static_cast<std::size_t>(bins) * height * width, 0.0);
  return d;
}

void DepthDistribution::validate() const {
  if (weights.size() != static_cast<std::size_t>(bins) * height * width) {
    throw DimensionError("depth buffer does not match its shape " + shape(bins, height, width));
  }
  if (!(d_step > 0.0) || !std::isfinite(d_step) || !std::isfinite(d_min)) {
    throw ValidationError("depth bins need a finite minimum and a positive step");
  }
  require_finite(weights, "depth distribution");
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      double mass = 0.0;
      for (int b = 0; b < bins; ++b) {
        const double w = at(b, v, u);
        if (w < 0.0) throw ValidationError("depth weights must be non-negative");
        mass += w;
      }
      if (mass > 1.0 + 1e-6) {
        throw ValidationError("depth mass at pixel (" + std::to_string(u) + ", " + std::to_string(v) +
                              ") exceeds 1");
      }
    }
  }
}

DecouplingScheme::DecouplingScheme(std::vector<HeightInterval> intervals) : intervals_(std::move(intervals)) {}

DecouplingScheme DecouplingScheme::parse(std::string_view text) {
  std::vector<HeightInterval> intervals;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find(',', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view item = text.substr(pos, end - pos);
    const std::size_t dash = item.find('-');
    HeightInterval iv;
    if (dash == std::string_view::npos) {
      iv.lo = iv.hi = static_cast<int>(parse_int(item));
    } else {
      iv.lo = static_cast<int>(parse_int(item.substr(0, dash)));
      iv.hi = static_cast<int>(parse_int(item.substr(dash + 1)));
    }
    intervals.push_back(iv);
    pos = end + 1;
  }
  return DecouplingScheme(std::move(intervals));
}

DecouplingScheme DecouplingScheme::single(int nz) { return DecouplingScheme({HeightInterval{1, nz}}); }

void DecouplingScheme::validate(int nz) const {
  if (intervals_.empty()) throw ValidationError("decoupling scheme has no intervals");
  int next = 1;
  for (const auto& iv : intervals_) {
    if (iv.lo > iv.hi) throw ValidationError("interval " + to_string() + ": lo > hi");
    if (iv.lo != next) {
      throw ValidationError("scheme " + to_string() + " must be sorted, disjoint and start at 1");
    }
    next = iv.hi + 1;
  }
  if (next != nz + 1) {
    throw ValidationError("scheme " + to_string() + " does not cover [1, " + std::to_string(nz) + "]");
  }
}

bool DecouplingScheme::refines(const DecouplingScheme& coarser) const {
  return std::all_of(intervals_.begin(), intervals_.end(), [&](const HeightInterval& fine) {
    return std::any_of(coarser.intervals_.begin(), coarser.intervals_.end(),
                       [&](const HeightInterval& c) { return c.lo <= fine.lo && fine.hi <= c.hi; });
  });
}

int DecouplingScheme::interval_of(int bin) const {
  for (std::size_t k = 0; k < intervals_.size(); ++k) {
    if (intervals_[k].contains(bin)) return static_cast<int>(k);
  }
  return -1;
}

std::string DecouplingScheme::to_string() const {
  std::string out;
  for (const auto& iv : intervals_) {
    if (!out.empty()) out += ',';
    out += std::to_string(iv.lo) + "-" + std::to_string(iv.hi);
  }
  return out;
}

FeatureVolume FeatureVolume::zeros(int channels, int nz, int ny, int nx, int z_begin) {
  if (channels <= 0 || nz <= 0 || ny <= 0 || nx <= 0) throw ValidationError("feature volume dimensions must be positive");
  FeatureVolume v;
  v.channels = channels;
  v.nz = nz;
  v.ny = ny;
  v.nx = nx;
  v.z_begin = z_begin;
  v.data.assign(static_cast<std::size_t>(channels) * v.cells(), 0.0);
  return v;
}

Frustum gen_frustum(const FeatureMap& ctx, const DepthDistribution& depth, const CameraRig& rig,
                    const GridSpec& spec) {
  if (ctx.height != depth.height || ctx.width != depth.width) {
    throw DimensionError("feature map " + shape(ctx.channels, ctx.height, ctx.width) +
                         " and depth distribution " + shape(depth.bins, depth.height, depth.width) +
                         " differ in image size");
  }
  rig.validate();
  spec.validate();
  depth.validate();

  const Eigen::Matrix3d& k = rig.intrinsics;
  const Eigen::Matrix3d camera_to_lidar = rig.lidar_to_camera_rotation.transpose();
  Frustum frustum;
  frustum.width = ctx.width;
  frustum.height = ctx.height;
  for (int v = 0; v < ctx.height; ++v) {
    const double yn = (v - k(1, 2)) / k(1, 1);
    for (int u = 0; u < ctx.width; ++u) {
      const double xn = (u - k(0, 2) - k(0, 1) * yn) / k(0, 0);
      const std::size_t pixel = static_cast<std::size_t>(v) * ctx.width + u;
      for (int b = 0; b < depth.bins; ++b) {
        const double d = depth.bin_center(b);
        const Eigen::Vector3d cam(xn * d, yn * d, d);
        const Eigen::Vector3d lidar = camera_to_lidar * (cam - rig.lidar_to_camera_translation);
        const auto cell = voxel_of(transform_point(rig.lidar_to_ego, lidar), spec);
        if (!cell) continue;
        frustum.points.push_back(FrustumPoint{pixel, *cell, depth.at(b, v, u)});
      }
    }
  }
  return frustum;
}

FeatureVolume voxel_pool(const Frustum& frustum, const FeatureMap& ctx, const GridSpec& spec,
                         PoolOptions options) {
  check_frustum(frustum, ctx, spec);
  FeatureVolume out = FeatureVolume::zeros(ctx.channels, spec.nz, spec.ny, spec.nx);
  std::vector<ScatterEntry> entries;
  entries.reserve(frustum.points.size());
  const std::size_t plane = static_cast<std::size_t>(spec.nx) * spec.ny;
  for (std::size_t i = 0; i < frustum.points.size(); ++i) {
    const VoxelIndex& c = frustum.points[i].cell;
    entries.push_back({static_cast<std::size_t>(c.z) * plane + plane_index(c, spec), i});
  }
  scatter_add(std::move(entries), frustum, ctx, out, options.threads);
  return out;
}

FeatureVolume bev_pool(const Frustum& frustum, const FeatureMap& ctx, const GridSpec& spec, PoolOptions options) {
  check_frustum(frustum, ctx, spec);
  FeatureVolume out = FeatureVolume::zeros(ctx.channels, 1, spec.ny, spec.nx);
  std::vector<ScatterEntry> entries;
  entries.reserve(frustum.points.size());
  for (std::size_t i = 0; i < frustum.points.size(); ++i) {
    entries.push_back({plane_index(frustum.points[i].cell, spec), i});
  }
  scatter_add(std::move(entries), frustum, ctx, out, options.threads);
  return out;
}

HeightMaskSet decouple_masks(const ScalarMap& bin_map, const DecouplingScheme& scheme) {
  if (bin_map.channel != MapChannel::kHeightBin) {
    throw ValidationError("height masks are built from a bin-valued height map");
  }
  if (scheme.size() == 0) throw ValidationError("decoupling scheme has no intervals");
  scheme.validate(scheme.intervals().back().hi);
  HeightMaskSet set;
  for (std::size_t k = 0; k < scheme.size(); ++k) {
    set.masks.push_back(BinaryMask{bin_map.width, bin_map.height,
                                   std::vector<std::uint8_t>(bin_map.pixel_count(), 0)});
  }
  for (std::size_t i = 0; i < bin_map.pixel_count(); ++i) {
    if (!bin_map.valid[i]) continue;
    const double value = bin_map.values[i];
    if (value != std::round(value)) throw ValidationError("height bin map holds a non-integer bin");
    const int k = scheme.interval_of(static_cast<int>(value));
    if (k >= 0) set.masks[static_cast<std::size_t>(k)].values[i] = 1;
  }
  return set;
}

FeatureMap mask_features(const FeatureMap& ctx, const BinaryMask& mask) {
  if (mask.width != ctx.width || mask.height != ctx.height || mask.values.size() != ctx.pixel_count()) {
    throw DimensionError("mask " + std::to_string(mask.height) + "x" + std::to_string(mask.width) +
                         " does not match feature map " + shape(ctx.channels, ctx.height, ctx.width));
  }
  FeatureMap out = ctx;
  const std::size_t plane = ctx.pixel_count();
  for (int c = 0; c < ctx.channels; ++c) {
    for (std::size_t p = 0; p < plane; ++p) {
      if (!mask.values[p]) out.data[static_cast<std::size_t>(c) * plane + p] = 0.0;
    }
  }
  return out;
}

std::vector<FeatureVolume> mghs_pool(const Frustum& frustum, const FeatureMap& ctx, const ScalarMap& bin_map,
                                     const DecouplingScheme& scheme, const GridSpec& spec, PoolOptions options) {
  check_frustum(frustum, ctx, spec);
  scheme.validate(spec.nz);
  if (bin_map.width != ctx.width || bin_map.height != ctx.height) {
    throw DimensionError("height map " + std::to_string(bin_map.height) + "x" + std::to_string(bin_map.width) +
                         " does not match feature map " + shape(ctx.channels, ctx.height, ctx.width));
  }
  const HeightMaskSet masks = decouple_masks(bin_height_map(bin_map, spec), scheme);
  std::vector<FeatureVolume> out;
  out.reserve(scheme.size());
  const std::size_t plane = static_cast<std::size_t>(spec.nx) * spec.ny;
  for (std::size_t k = 0; k < scheme.size(); ++k) {
    const HeightInterval& iv = scheme[k];
    const FeatureMap masked = mask_features(ctx, masks.masks[k]);
    FeatureVolume volume = FeatureVolume::zeros(ctx.channels, iv.size(), spec.ny, spec.nx, iv.lo);
    std::vector<ScatterEntry> entries;
    for (std::size_t i = 0; i < frustum.points.size(); ++i) {
      const VoxelIndex& c = frustum.points[i].cell;
      if (!iv.contains(c.z + 1)) continue;
      const std::size_t local_z = static_cast<std::size_t>(c.z + 1 - iv.lo);
      entries.push_back({local_z * plane + plane_index(c, spec), i});
    }
    scatter_add(std::move(entries), frustum, masked, volume, options.threads);
    out.push_back(std::move(volume));
  }
  return out;
}

std::vector<FeatureVolume> mghs_project(const FeatureMap& ctx, const DepthDistribution& depth,
                                        const ScalarMap& bin_map, const DecouplingScheme& scheme,
                                        const CameraRig& rig, const GridSpec& spec, PoolOptions options) {
  const Frustum frustum = gen_frustum(ctx, depth, rig, spec);
  return mghs_pool(frustum, ctx, bin_map, scheme, spec, options);
}

FeatureVolume concat_z(std::span<const FeatureVolume> volumes) {
  if (volumes.empty()) throw ValidationError("nothing to concatenate");
  const FeatureVolume& first = volumes.front();
  int nz = 0;
  for (const auto& v : volumes) {
    if (v.channels != first.channels || v.ny != first.ny || v.nx != first.nx) {
      throw DimensionError("subspace volumes disagree in channels or plane size");
    }
    if (v.z_begin != first.z_begin + nz) throw DimensionError("subspace volumes are not contiguous along z");
    nz += v.nz;
  }
  FeatureVolume out = FeatureVolume::zeros(first.channels, nz, first.ny, first.nx, first.z_begin);
  const std::size_t plane = static_cast<std::size_t>(first.ny) * first.nx;
  for (int c = 0; c < first.channels; ++c) {
    std::size_t z0 = 0;
    for (const auto& v : volumes) {
      const auto src = v.data.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(c) * v.cells());
      std::copy(src, src + static_cast<std::ptrdiff_t>(v.cells()),
                out.data.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(c) * out.cells() + z0 * plane));
      z0 += static_cast<std::size_t>(v.nz);
    }
  }
  return out;
}

FeatureVolume sum_over_z(const FeatureVolume& volume) {
  FeatureVolume out = FeatureVolume::zeros(volume.channels, 1, volume.ny, volume.nx, volume.z_begin);
  for (int c = 0; c < volume.channels; ++c) {
    for (int z = 0; z < volume.nz; ++z) {
      for (int y = 0; y < volume.ny; ++y) {
        for (int x = 0; x < volume.nx; ++x) out.at(c, 0, y, x) += volume.at(c, z, y, x);
      }
    }
  }
  return out;
}

}  // namespace occ

#pragma once

// Binary containers are little-endian with a 4-byte magic:
//   OCPC point cloud      u32 count, count x (f32 x, y, z)
//   OCSM scalar map       u32 width, u32 height, u8 channel, width*height f32 (NaN = invalid)
//   OCHV height volume    u32 width, height, bins, bins*height*width f32
//   OCFM feature map      u32 channels, height, width, f32 data
//   OCDD depth dist.      u32 bins, height, width, f32 d_min, f32 d_step, f32 weights
//   OCFV feature volume   u32 channels, nz, ny, nx, f32 data
//   OCVG labelled grid    u32 nx, ny, nz, u8 free_label, u8 num_classes, nx*ny*nz u8
//   OCSP aggregation      u32 channels, u32 reduction, f32 blocks in SfaParams order
// Values are stored as f32, so a write->read->write cycle is byte-stable but
// a double-precision value round-trips only to float precision.

#include <iosfwd>
#include <string>

#include "occ/analysis.hpp"
#include "occ/discretization.hpp"
#include "occ/geometry.hpp"
#include "occ/pooling.hpp"
#include "occ/sfa.hpp"

namespace occ {

void write_point_cloud(std::ostream& out, const PointCloud& cloud);
PointCloud read_point_cloud(std::istream& in);

void write_scalar_map(std::ostream& out, const ScalarMap& map);
ScalarMap read_scalar_map(std::istream& in);

void write_height_volume(std::ostream& out, const HeightVolume& volume);
HeightVolume read_height_volume(std::istream& in);

void write_feature_map(std::ostream& out, const FeatureMap& map);
FeatureMap read_feature_map(std::istream& in);

void write_depth_distribution(std::ostream& out, const DepthDistribution& depth);
DepthDistribution read_depth_distribution(std::istream& in);

void write_feature_volume(std::ostream& out, const FeatureVolume& volume);
FeatureVolume read_feature_volume(std::istream& in);

void write_voxel_grid(std::ostream& out, const LabeledVoxelGrid& grid);
LabeledVoxelGrid read_voxel_grid(std::istream& in);

void write_sfa_params(std::ostream& out, const SfaParams& params);
SfaParams read_sfa_params(std::istream& in);

// Text rig: K (9, row-major), R_lc (9), t_lc (3), T_le (16), width, height.
CameraRig parse_camera_rig(const std::string& text);
std::string format_camera_rig(const CameraRig& rig);

// Text grid: x_min x_max y_min y_max z_min z_max voxel_size num_classes.
// Missing keys fall back to the Occ3D-nuScenes grid.
GridSpec parse_grid_spec(const std::string& text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

// Path-based wrappers; ParseError on open failure.
template <typename T>
T load(const std::string& path);
template <typename T>
void save(const std::string& path, const T& value);

}  // namespace occ

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace occ {

// Pinhole camera plus the LiDAR->camera and LiDAR->ego rigid transforms.
//
// A LiDAR point p projects as  depth * [u, v, 1]^T = K * (R * p + t),
// where K is `intrinsics`, R `lidar_to_camera_rotation` and t
// `lidar_to_camera_translation`.
struct CameraRig {
  Eigen::Matrix3d intrinsics = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d lidar_to_camera_rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d lidar_to_camera_translation = Eigen::Vector3d::Zero();
  Eigen::Matrix4d lidar_to_ego = Eigen::Matrix4d::Identity();
  int image_width = 0;
  int image_height = 0;

  // Throws ValidationError if K is not an upper-triangular pinhole matrix,
  // R is not orthonormal, the ego transform is not affine or the image size
  // is not positive.
  void validate() const;
};

struct PointCloud {
  std::vector<Eigen::Vector3d> points;

  std::size_t size() const { return points.size(); }
  // Throws ValidationError on any non-finite coordinate.
  void validate() const;
};

// A LiDAR point after projection: integer pixel, camera depth, ego height.
struct PixelAttributedPoint {
  int u = 0;
  int v = 0;
  double depth = 0.0;
  double ego_height = 0.0;
  std::size_t source_index = 0;
};

enum class MapChannel : std::uint8_t {
  kHeight = 0,     // metric ego-frame height
  kDepth = 1,      // metric camera depth
  kHeightBin = 2,  // 1-based voxel-space height bin
};

// Dense per-pixel scalar with a validity mask, row-major (v * width + u).
struct ScalarMap {
  int width = 0;
  int height = 0;
  MapChannel channel = MapChannel::kHeight;
  std::vector<double> values;
  std::vector<std::uint8_t> valid;

  static ScalarMap empty(int width, int height, MapChannel channel);

  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * static_cast<std::size_t>(width) + static_cast<std::size_t>(u);
  }
  std::size_t pixel_count() const { return values.size(); }
  bool is_valid(int u, int v) const { return valid[index(u, v)] != 0; }
  double value(int u, int v) const { return values[index(u, v)]; }
};

// Points with camera depth at or below this are dropped before division.
inline constexpr double kMinProjectionDepth = 1e-9;

Eigen::Vector3d transform_point(const Eigen::Matrix4d& transform, const Eigen::Vector3d& point);

std::vector<Eigen::Vector3d> lidar_to_ego(const PointCloud& cloud, const CameraRig& rig);

// Projects every point in front of the camera that lands inside the image.
// Pixel coordinates are floored after perspective division. Output keeps
// input order.
std::vector<PixelAttributedPoint> project_points(const PointCloud& cloud, const CameraRig& rig);

// Nearest-depth splat: each pixel keeps the candidate with the smallest depth
// (ties broken by smallest source_index) and stores its ego height or depth.
ScalarMap zbuffer_map(std::span<const PixelAttributedPoint> points, int width, int height,
                      MapChannel channel);

// project_points followed by zbuffer_map.
ScalarMap lidar_ground_truth(const PointCloud& cloud, const CameraRig& rig, MapChannel channel);

}  // namespace occ

#include "occ/geometry.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "occ/error.hpp"

namespace occ {

void CameraRig::validate() const {
  const Eigen::Matrix3d& k = intrinsics;
  if (k(2, 2) != 1.0 || !(k(0, 0) > 0.0) || !(k(1, 1) > 0.0) || k(1, 0) != 0.0 || k(2, 0) != 0.0 ||
      k(2, 1) != 0.0) {
    throw ValidationError("intrinsics must be upper triangular with positive focal lengths and K[2][2] == 1");
  }
  if (!intrinsics.allFinite() || !lidar_to_camera_rotation.allFinite() ||
      !lidar_to_camera_translation.allFinite() || !lidar_to_ego.allFinite()) {
    throw ValidationError("camera rig contains non-finite values");
  }
  const Eigen::Matrix3d gram =
      lidar_to_camera_rotation.transpose() * lidar_to_camera_rotation - Eigen::Matrix3d::Identity();
  if (gram.cwiseAbs().maxCoeff() >= 1e-6) {
    throw ValidationError("LiDAR->camera rotation is not orthonormal");
  }
  if (lidar_to_ego(3, 0) != 0.0 || lidar_to_ego(3, 1) != 0.0 || lidar_to_ego(3, 2) != 0.0 ||
      lidar_to_ego(3, 3) != 1.0) {
    throw ValidationError("LiDAR->ego transform must have bottom row (0, 0, 0, 1)");
  }
  if (image_width <= 0 || image_height <= 0) {
    throw ValidationError("image size must be positive, got " + std::to_string(image_width) + "x" +
                          std::to_string(image_height));
  }
}

void PointCloud::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].allFinite()) throw ValidationError("point " + std::to_string(i) + " is not finite");
  }
}

ScalarMap ScalarMap::empty(int width, int height, MapChannel channel) {
  if (width <= 0 || height <= 0) throw ValidationError("scalar map size must be positive");
  ScalarMap map;
  map.width = width;
  map.height = height;
  map.channel = channel;
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  map.values.assign(n, std::numeric_limits<double>::quiet_NaN());
  map.valid.assign(n, 0);
  return map;
}

Eigen::Vector3d transform_point(const Eigen::Matrix4d& transform, const Eigen::Vector3d& point) {
  return transform.topLeftCorner<3, 3>() * point + transform.topRightCorner<3, 1>();
}

std::vector<Eigen::Vector3d> lidar_to_ego(const PointCloud& cloud, const CameraRig& rig) {
  std::vector<Eigen::Vector3d> out;
  out.reserve(cloud.size());
  for (const auto& p : cloud.points) out.push_back(transform_point(rig.lidar_to_ego, p));
  return out;
}

std::vector<PixelAttributedPoint> project_points(const PointCloud& cloud, const CameraRig& rig) {
  rig.validate();
  cloud.validate();
  std::vector<PixelAttributedPoint> out;
  out.reserve(cloud.size());
  const Eigen::Matrix3d& k = rig.intrinsics;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector3d& p = cloud.points[i];
    const Eigen::Vector3d cam = rig.lidar_to_camera_rotation * p + rig.lidar_to_camera_translation;
    const double d = cam.z();
    if (!(d > kMinProjectionDepth)) continue;
    const Eigen::Vector3d pix = k * cam;
    const double uf = std::floor(pix.x() / d);
    const double vf = std::floor(pix.y() / d);
    if (!(uf >= 0.0 && uf < rig.image_width && vf >= 0.0 && vf < rig.image_height)) continue;
    PixelAttributedPoint q;
    q.u = static_cast<int>(uf);
    q.v = static_cast<int>(vf);
    q.depth = d;
    q.ego_height = transform_point(rig.lidar_to_ego, p).z();
    q.source_index = i;
    out.push_back(q);
  }
  return out;
}

ScalarMap zbuffer_map(std::span<const PixelAttributedPoint> points, int width, int height,
                      MapChannel channel) {
  if (channel == MapChannel::kHeightBin) {
    throw ValidationError("z-buffer maps carry metric height or depth");
  }
  ScalarMap map = ScalarMap::empty(width, height, channel);
  std::vector<double> best_depth(map.pixel_count(), std::numeric_limits<double>::infinity());
  std::vector<std::size_t> best_index(map.pixel_count(), std::numeric_limits<std::size_t>::max());
  for (const auto& p : points) {
    if (p.u < 0 || p.u >= width || p.v < 0 || p.v >= height) {
      throw DimensionError("point (" + std::to_string(p.u) + ", " + std::to_string(p.v) +
                           ") outside " + std::to_string(width) + "x" + std::to_string(height) + " map");
    }
    const std::size_t idx = map.index(p.u, p.v);
    const bool closer = p.depth < best_depth[idx];
    const bool tie_wins = p.depth == best_depth[idx] && p.source_index < best_index[idx];
    if (!closer && !tie_wins) continue;
    best_depth[idx] = p.depth;
    best_index[idx] = p.source_index;
    map.values[idx] = channel == MapChannel::kHeight ? p.ego_height : p.depth;
    map.valid[idx] = 1;
  }
  return map;
}

ScalarMap lidar_ground_truth(const PointCloud& cloud, const CameraRig& rig, MapChannel channel) {
  const auto points = project_points(cloud, rig);
  return zbuffer_map(points, rig.image_width, rig.image_height, channel);
}

}  // namespace occ

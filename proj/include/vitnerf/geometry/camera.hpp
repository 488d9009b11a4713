#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

namespace vitnerf::geometry {

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
};

struct Pixel {
  int row = 0;
  int col = 0;
};

/// Pinhole camera: x right, y down, z forward in camera coordinates; pose
/// maps camera coordinates to world coordinates.
class CameraModel {
 public:
  /// Throws ArgumentError if the rotation block is not a proper rotation
  /// (to 1e-6), the bounds are not 0 < near < far, or the image is empty.
  CameraModel(Intrinsics intrinsics, const Eigen::Matrix4d& world_from_camera, double t_near,
              double t_far, int width, int height);

  const Intrinsics& intrinsics() const { return intrinsics_; }
  const Eigen::Matrix4d& pose() const { return pose_; }
  Eigen::Matrix3d rotation() const { return pose_.topLeftCorner<3, 3>(); }
  Eigen::Vector3d position() const { return pose_.topRightCorner<3, 1>(); }
  double t_near() const { return t_near_; }
  double t_far() const { return t_far_; }
  int width() const { return width_; }
  int height() const { return height_; }

  Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const;
  Eigen::Vector3d direction_to_camera(const Eigen::Vector3d& world_dir) const;

 private:
  Intrinsics intrinsics_;
  Eigen::Matrix4d pose_;
  double t_near_;
  double t_far_;
  int width_;
  int height_;
};

/// Throws ArgumentError naming the defect when `pose` is not rigid.
void validate_rigid_pose(const Eigen::Matrix4d& pose, double tol = 1e-6);

struct Ray {
  Eigen::Vector3d origin;
  Eigen::Vector3d direction;  // unit length
  Pixel pixel;
};

/// One ray per pixel through its center (col + 0.5, row + 0.5).
std::vector<Ray> generate_rays(const CameraModel& camera, std::span<const Pixel> pixels);

/// Every pixel of the camera's image in row-major order.
std::vector<Pixel> all_pixels(const CameraModel& camera);

inline constexpr double kMinProjectionDepth = 1e-6;

struct Projection {
  Eigen::Vector2d uv;     // continuous pixel coordinates; sentinel (-1, -1) if invalid
  Eigen::Vector3d x_cam;  // point in camera coordinates
  double depth = 0.0;
  bool valid = false;     // depth > kMinProjectionDepth
};

Projection project(const Eigen::Vector3d& world, const CameraModel& camera);

}  // namespace vitnerf::geometry

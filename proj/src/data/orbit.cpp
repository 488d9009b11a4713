#include "vitnerf/data/orbit.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <numbers>

#include "vitnerf/core/errors.hpp"

namespace vitnerf::data {

Eigen::Matrix4d look_at(const Eigen::Vector3d& position, const Eigen::Vector3d& target,
                        const Eigen::Vector3d& down) {
  const Eigen::Vector3d to_target = target - position;
  if (to_target.norm() < 1e-12) throw ArgumentError("look_at: position coincides with target");
  const Eigen::Vector3d f = to_target.normalized();
  Eigen::Vector3d d = down - down.dot(f) * f;
  if (d.norm() < 1e-9) throw ArgumentError("look_at: viewing direction is parallel to the vertical");
  d.normalize();
  const Eigen::Vector3d r = d.cross(f);
  Eigen::Matrix4d pose = Eigen::Matrix4d::Identity();
  pose.block<3, 1>(0, 0) = r;
  pose.block<3, 1>(0, 1) = d;
  pose.block<3, 1>(0, 2) = f;
  pose.block<3, 1>(0, 3) = position;
  return pose;
}

std::vector<geometry::CameraModel> orbit_cameras(const geometry::CameraModel& base, int n,
                                                 double radius, double elevation_deg) {
  if (n < 1) throw ArgumentError("orbit needs at least one camera, got " + std::to_string(n));
  if (!(radius > 0.0)) throw ArgumentError("orbit radius must be positive");
  if (!(std::abs(elevation_deg) < 90.0)) throw ArgumentError("orbit elevation must lie in (-90, 90)");
  const Eigen::Matrix3d rot = base.rotation();
  const Eigen::Vector3d right = rot.col(0), down = rot.col(1), fwd = rot.col(2);
  const Eigen::Vector3d center = base.position() + radius * fwd;
  const double e = elevation_deg * std::numbers::pi / 180.0;
  std::vector<geometry::CameraModel> cams;
  cams.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double theta = 2.0 * std::numbers::pi * k / n;
    const Eigen::Vector3d pos =
        center + radius * (std::cos(e) * (-std::cos(theta) * fwd + std::sin(theta) * right) -
                           std::sin(e) * down);
    Eigen::Matrix4d pose = look_at(pos, center, down);
    if (k == 0 && elevation_deg == 0.0) pose = base.pose();
    cams.emplace_back(base.intrinsics(), pose, base.t_near(), base.t_far(), base.width(),
                      base.height());
  }
  return cams;
}

}  // namespace vitnerf::data

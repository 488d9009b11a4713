#pragma once

#include <vector>

#include "vitnerf/geometry/camera.hpp"

namespace vitnerf::data {

/// n cameras on a circle around the point `radius` in front of `base`,
/// spaced 360/n degrees apart in yaw about the base camera's vertical axis
/// and raised by `elevation_deg`, all looking at that point. Camera 0 equals
/// `base` when the elevation is zero.
std::vector<geometry::CameraModel> orbit_cameras(const geometry::CameraModel& base, int n,
                                                 double radius, double elevation_deg);

/// World-from-camera pose at `position` looking at `target`, with image-down
/// aligned as closely as possible to `down`.
Eigen::Matrix4d look_at(const Eigen::Vector3d& position, const Eigen::Vector3d& target,
                        const Eigen::Vector3d& down);

}  // namespace vitnerf::data

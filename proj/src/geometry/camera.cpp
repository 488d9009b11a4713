#include "vitnerf/geometry/camera.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "vitnerf/core/errors.hpp"

namespace vitnerf::geometry {

void validate_rigid_pose(const Eigen::Matrix4d& pose, double tol) {
  if (!pose.allFinite()) throw ArgumentError("pose contains non-finite values");
  const Eigen::Matrix3d r = pose.topLeftCorner<3, 3>();
  const double ortho = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho > tol) {
    std::ostringstream os;
    os << "pose rotation is not orthonormal (max |R^T R - I| = " << ortho << ")";
    throw ArgumentError(os.str());
  }
  const double det = r.determinant();
  if (std::abs(det - 1.0) > tol) {
    std::ostringstream os;
    os << "pose rotation has determinant " << det << ", expected +1";
    throw ArgumentError(os.str());
  }
  const Eigen::RowVector4d last = pose.row(3);
  if ((last - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > tol)
    throw ArgumentError("pose bottom row must be (0, 0, 0, 1)");
}

CameraModel::CameraModel(Intrinsics intrinsics, const Eigen::Matrix4d& world_from_camera,
                         double t_near, double t_far, int width, int height)
    : intrinsics_(intrinsics),
      pose_(world_from_camera),
      t_near_(t_near),
      t_far_(t_far),
      width_(width),
      height_(height) {
  validate_rigid_pose(pose_);
  if (!(t_near > 0.0 && t_near < t_far))
    throw ArgumentError("camera bounds must satisfy 0 < near < far (near " +
                        std::to_string(t_near) + ", far " + std::to_string(t_far) + ")");
  if (width <= 0 || height <= 0) throw ArgumentError("camera image size must be positive");
  if (!(intrinsics.fx > 0.0 && intrinsics.fy > 0.0))
    throw ArgumentError("focal lengths must be positive");
}

Eigen::Vector3d CameraModel::to_camera(const Eigen::Vector3d& world) const {
  return rotation().transpose() * (world - position());
}

Eigen::Vector3d CameraModel::direction_to_camera(const Eigen::Vector3d& world_dir) const {
  return rotation().transpose() * world_dir;
}

std::vector<Ray> generate_rays(const CameraModel& camera, std::span<const Pixel> pixels) {
  const Intrinsics& k = camera.intrinsics();
  const Eigen::Matrix3d r = camera.rotation();
  const Eigen::Vector3d o = camera.position();
  std::vector<Ray> rays;
  rays.reserve(pixels.size());
  for (const Pixel& p : pixels) {
    if (p.row < 0 || p.col < 0 || p.row >= camera.height() || p.col >= camera.width())
      throw RangeError("pixel (" + std::to_string(p.row) + ", " + std::to_string(p.col) +
                       ") outside " + std::to_string(camera.height()) + "x" +
                       std::to_string(camera.width()) + " image");
    const Eigen::Vector3d d_cam((p.col + 0.5 - k.cx) / k.fx, (p.row + 0.5 - k.cy) / k.fy, 1.0);
    rays.push_back({o, (r * d_cam).normalized(), p});
  }
  return rays;
}

std::vector<Pixel> all_pixels(const CameraModel& camera) {
  std::vector<Pixel> px;
  px.reserve(static_cast<std::size_t>(camera.width()) * camera.height());
  for (int r = 0; r < camera.height(); ++r)
    for (int c = 0; c < camera.width(); ++c) px.push_back({r, c});
  return px;
}

Projection project(const Eigen::Vector3d& world, const CameraModel& camera) {
  Projection out;
  out.x_cam = camera.to_camera(world);
  out.depth = out.x_cam.z();
  out.valid = out.depth > kMinProjectionDepth;
  if (!out.valid) {
    out.uv = Eigen::Vector2d(-1.0, -1.0);
    return out;
  }
  const Intrinsics& k = camera.intrinsics();
  out.uv = Eigen::Vector2d(k.fx * out.x_cam.x() / out.depth + k.cx,
                           k.fy * out.x_cam.y() / out.depth + k.cy);
  return out;
}

}  // namespace vitnerf::geometry

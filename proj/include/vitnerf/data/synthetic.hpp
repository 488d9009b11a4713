#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <vector>

#include "vitnerf/data/manifest.hpp"
#include "vitnerf/nerf/composite.hpp"

namespace vitnerf::data {

struct Sphere {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 1.0;
  nerf::Color color{1.0, 1.0, 1.0};
  double density = 10.0;
};

struct SyntheticSpec {
  std::vector<Sphere> spheres;
  nerf::Color background{0.0, 0.0, 0.0};
};

/// Ground truth for one ray: the ray's [near, far] is cut into
/// `samples_per_ray` equal bins, each bin gets its exact mean density (and
/// density-weighted color) from the analytic sphere field, and the bins are
/// composited.
nerf::RenderResult render_analytic_ray(const SyntheticSpec& spec, const Eigen::Vector3d& origin,
                                       const Eigen::Vector3d& direction, double t_near,
                                       double t_far, int samples_per_ray);

/// Throws ArgumentError if a sphere reaches outside the camera's depth range.
Image render_analytic(const SyntheticSpec& spec, const geometry::CameraModel& camera,
                      int samples_per_ray = 256);

std::vector<SceneView> generate_synthetic_scene(const SyntheticSpec& spec,
                                                const std::vector<geometry::CameraModel>& cameras,
                                                int samples_per_ray = 256);

/// The desk-scale benchmark scene: three overlapping colored spheres seen from
/// a 16-camera orbit (radius 4, elevation 20 degrees) at 64x64. Even views are
/// training views; views 1, 5, 9 and 13 are held out; view 0 is the input.
struct SyntheticSetup {
  SyntheticSpec spec;
  geometry::CameraModel base;
  int orbit_n = 16;
  double orbit_radius = 4.0;
  double orbit_elevation = 20.0;
  int input_view = 0;
  int samples_per_ray = 256;

  std::vector<geometry::CameraModel> cameras() const;
  std::string split_of(int view) const;
};

SyntheticSetup default_synthetic_setup();

/// Renders every camera of `setup`, writes view_XXX.png files and
/// manifest.json into `dir`, and returns the manifest path.
std::filesystem::path write_synthetic_scene(const std::filesystem::path& dir,
                                            const SyntheticSetup& setup);

}  // namespace vitnerf::data

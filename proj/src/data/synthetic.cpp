#include "vitnerf/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "vitnerf/core/errors.hpp"
#include "vitnerf/data/orbit.hpp"

namespace vitnerf::data {

nerf::RenderResult render_analytic_ray(const SyntheticSpec& spec, const Eigen::Vector3d& origin,
                                       const Eigen::Vector3d& direction, double t_near,
                                       double t_far, int samples_per_ray) {
  if (samples_per_ray < 1) throw ArgumentError("samples_per_ray must be positive");
  const std::size_t n = static_cast<std::size_t>(samples_per_ray);
  const double delta = (t_far - t_near) / samples_per_ray;
  std::vector<double> t(n), tau(n, 0.0), sigma(n, 0.0);
  std::vector<nerf::Color> color(n, nerf::Color{0.0, 0.0, 0.0});
  for (std::size_t i = 0; i < n; ++i) t[i] = t_near + i * delta;
  for (const Sphere& s : spec.spheres) {
    const Eigen::Vector3d oc = origin - s.center;
    const double b = oc.dot(direction);
    const double disc = b * b - (oc.squaredNorm() - s.radius * s.radius);
    if (disc <= 0.0) continue;
    const double root = std::sqrt(disc);
    const double t0 = -b - root, t1 = -b + root;
    const auto first = static_cast<std::size_t>(std::clamp((t0 - t_near) / delta, 0.0, double(n)));
    for (std::size_t i = first; i < n; ++i) {
      const double lo = t_near + i * delta, hi = lo + delta;
      if (lo >= t1) break;
      const double overlap = std::min(hi, t1) - std::max(lo, t0);
      if (overlap <= 0.0) continue;
      const double mass = s.density * overlap;
      tau[i] += mass;
      for (int c = 0; c < 3; ++c) color[i][c] += mass * s.color[c];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    sigma[i] = tau[i] / delta;
    if (tau[i] > 0.0)
      for (int c = 0; c < 3; ++c) color[i][c] /= tau[i];
  }
  return nerf::composite(t, sigma, color, t_far, spec.background);
}

Image render_analytic(const SyntheticSpec& spec, const geometry::CameraModel& camera,
                      int samples_per_ray) {
  for (std::size_t k = 0; k < spec.spheres.size(); ++k) {
    const Sphere& s = spec.spheres[k];
    const double dist = (s.center - camera.position()).norm();
    if (dist - s.radius < camera.t_near() || dist + s.radius > camera.t_far())
      throw ArgumentError("sphere " + std::to_string(k) + " reaches outside the camera's [" +
                          std::to_string(camera.t_near()) + ", " +
                          std::to_string(camera.t_far()) + "] depth range");
  }
  Image img = make_image(camera.width(), camera.height());
  const auto pixels = geometry::all_pixels(camera);
  const auto rays = geometry::generate_rays(camera, pixels);
  const std::size_t plane = pixels.size();
  for (std::size_t i = 0; i < plane; ++i) {
    const auto r = render_analytic_ray(spec, rays[i].origin, rays[i].direction, camera.t_near(),
                                       camera.t_far(), samples_per_ray);
    for (int c = 0; c < 3; ++c) img.rgb[c * plane + i] = static_cast<float>(r.color[c]);
  }
  return img;
}

std::vector<SceneView> generate_synthetic_scene(const SyntheticSpec& spec,
                                                const std::vector<geometry::CameraModel>& cameras,
                                                int samples_per_ray) {
  std::vector<SceneView> views;
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "view_%03zu", i);
    Image img = render_analytic(spec, cameras[i], samples_per_ray);
    auto mask = valid_mask(img, spec.background);
    views.push_back({id, "", std::move(img), cameras[i], std::move(mask)});
  }
  return views;
}

std::vector<geometry::CameraModel> SyntheticSetup::cameras() const {
  return orbit_cameras(base, orbit_n, orbit_radius, orbit_elevation);
}

std::string SyntheticSetup::split_of(int view) const {
  if (view % 2 == 0) return "train";
  if (view % 4 == 1) return "test";
  return "";
}

SyntheticSetup default_synthetic_setup() {
  SyntheticSpec spec;
  spec.spheres = {
      {Eigen::Vector3d(0.0, 0.0, 0.0), 0.7, {0.9, 0.2, 0.2}, 12.0},
      {Eigen::Vector3d(0.9, 0.2, 0.5), 0.45, {0.2, 0.8, 0.3}, 12.0},
      {Eigen::Vector3d(-0.6, -0.3, -0.8), 0.5, {0.25, 0.35, 0.95}, 12.0},
  };
  spec.background = {0.0, 0.0, 0.0};
  Eigen::Matrix4d pose = Eigen::Matrix4d::Identity();
  pose(2, 3) = -4.0;
  geometry::CameraModel base({70.0, 70.0, 32.0, 32.0}, pose, 2.0, 6.0, 64, 64);
  return SyntheticSetup{spec, base};
}

std::filesystem::path write_synthetic_scene(const std::filesystem::path& dir,
                                            const SyntheticSetup& setup) {
  std::filesystem::create_directories(dir);
  const auto cams = setup.cameras();
  SceneManifest m;
  m.height = setup.base.height();
  m.width = setup.base.width();
  m.intrinsics = setup.base.intrinsics();
  m.t_near = setup.base.t_near();
  m.t_far = setup.base.t_far();
  m.background = setup.spec.background;
  m.input_view = setup.input_view;
  m.base_dir = dir;
  for (std::size_t i = 0; i < cams.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "view_%03zu", i);
    write_png(dir / (std::string(name) + ".png"),
              render_analytic(setup.spec, cams[i], setup.samples_per_ray));
    m.views.push_back({std::string(name) + ".png", cams[i].pose(), name,
                       setup.split_of(static_cast<int>(i))});
  }
  const auto path = dir / "manifest.json";
  write_manifest(path, m);
  return path;
}

}  // namespace vitnerf::data

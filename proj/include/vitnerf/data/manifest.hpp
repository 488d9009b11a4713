#pragma once

// Scene manifest (JSON):
//
//   {
//     "resolution": [H, W],
//     "intrinsics": [fx, fy, cx, cy],
//     "near": 2.0, "far": 6.0,
//     "background": [r, g, b],
//     "input_view": 0,                       (optional)
//     "views": [
//       {"image": "view_000.png",            (relative to the manifest)
//        "pose": [16 numbers, row-major world-from-camera],
//        "id": "view_000",                   (optional, defaults to the stem)
//        "split": "train"}                   (optional: train, test)
//     ]
//   }

#include <Eigen/Core>
#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vitnerf/data/image_io.hpp"
#include "vitnerf/geometry/camera.hpp"

namespace vitnerf::data {

struct ManifestView {
  std::string image;
  Eigen::Matrix4d pose = Eigen::Matrix4d::Identity();
  std::string id;
  std::string split;
};

struct SceneManifest {
  int height = 0;
  int width = 0;
  geometry::Intrinsics intrinsics;
  double t_near = 0.0;
  double t_far = 0.0;
  std::array<double, 3> background{0.0, 0.0, 0.0};
  std::optional<int> input_view;
  std::vector<ManifestView> views;
  std::filesystem::path base_dir;

  geometry::CameraModel camera(std::size_t view) const;
};

struct SceneView {
  std::string id;
  std::string split;
  Image image;
  geometry::CameraModel camera;
  std::vector<unsigned char> valid_mask;
};

struct Scene {
  SceneManifest manifest;
  std::vector<SceneView> views;
};

/// Parses and validates a manifest without touching the images. Throws
/// LoadError naming the file and field.
SceneManifest load_manifest(const std::filesystem::path& path);
SceneManifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir,
                             const std::string& origin);

std::string manifest_to_json(const SceneManifest& manifest);
void write_manifest(const std::filesystem::path& path, const SceneManifest& manifest);

/// Views in manifest order with pixel values in [0, 1].
Scene load_scene(const std::filesystem::path& manifest_path);

}  // namespace vitnerf::data

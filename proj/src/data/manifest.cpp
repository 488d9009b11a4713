#include "vitnerf/data/manifest.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "vitnerf/core/errors.hpp"

namespace vitnerf::data {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& origin, const std::string& what) {
  throw LoadError(origin + ": " + what);
}

const json& field(const json& obj, const char* key, const std::string& origin,
                  const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) fail(origin, "missing field '" + where + key + "'");
  return obj.at(key);
}

std::vector<double> numbers(const json& value, std::size_t count, const std::string& origin,
                            const std::string& name) {
  if (!value.is_array() || value.size() != count)
    fail(origin, "field '" + name + "' must be an array of " + std::to_string(count) + " numbers");
  std::vector<double> out;
  for (const auto& v : value) {
    if (!v.is_number()) fail(origin, "field '" + name + "' must contain only numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

double number(const json& value, const std::string& origin, const std::string& name) {
  if (!value.is_number()) fail(origin, "field '" + name + "' must be a number");
  return value.get<double>();
}

}  // namespace

geometry::CameraModel SceneManifest::camera(std::size_t view) const {
  if (view >= views.size())
    throw RangeError("view index " + std::to_string(view) + " outside manifest with " +
                     std::to_string(views.size()) + " views");
  return geometry::CameraModel(intrinsics, views[view].pose, t_near, t_far, width, height);
}

SceneManifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir,
                             const std::string& origin) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(origin, std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) fail(origin, "top level must be an object");
  SceneManifest m;
  m.base_dir = base_dir;
  const auto res = numbers(field(root, "resolution", origin, ""), 2, origin, "resolution");
  m.height = static_cast<int>(res[0]);
  m.width = static_cast<int>(res[1]);
  if (m.height <= 0 || m.width <= 0 || res[0] != m.height || res[1] != m.width)
    fail(origin, "field 'resolution' must hold two positive integers");
  const auto k = numbers(field(root, "intrinsics", origin, ""), 4, origin, "intrinsics");
  m.intrinsics = {k[0], k[1], k[2], k[3]};
  m.t_near = number(field(root, "near", origin, ""), origin, "near");
  m.t_far = number(field(root, "far", origin, ""), origin, "far");
  if (!(m.t_near > 0.0 && m.t_near < m.t_far))
    fail(origin, "fields 'near'/'far' must satisfy 0 < near < far");
  const auto bg = numbers(field(root, "background", origin, ""), 3, origin, "background");
  m.background = {bg[0], bg[1], bg[2]};
  if (root.contains("input_view")) {
    const auto& iv = root.at("input_view");
    if (!iv.is_number_integer()) fail(origin, "field 'input_view' must be an integer");
    m.input_view = iv.get<int>();
  }
  const json& views = field(root, "views", origin, "");
  if (!views.is_array()) fail(origin, "field 'views' must be an array");
  for (std::size_t i = 0; i < views.size(); ++i) {
    const std::string where = "views[" + std::to_string(i) + "].";
    const json& v = views[i];
    ManifestView mv;
    const json& img = field(v, "image", origin, where);
    if (!img.is_string()) fail(origin, "field '" + where + "image' must be a string");
    mv.image = img.get<std::string>();
    const auto p = numbers(field(v, "pose", origin, where), 16, origin, where + "pose");
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) mv.pose(r, c) = p[r * 4 + c];
    try {
      geometry::validate_rigid_pose(mv.pose);
    } catch (const ArgumentError& e) {
      fail(origin, "field '" + where + "pose': " + e.what());
    }
    mv.id = v.contains("id") && v.at("id").is_string()
                ? v.at("id").get<std::string>()
                : std::filesystem::path(mv.image).stem().string();
    if (v.contains("split")) {
      if (!v.at("split").is_string()) fail(origin, "field '" + where + "split' must be a string");
      mv.split = v.at("split").get<std::string>();
    }
    m.views.push_back(std::move(mv));
  }
  if (m.input_view && (*m.input_view < 0 || *m.input_view >= static_cast<int>(m.views.size())))
    fail(origin, "field 'input_view' = " + std::to_string(*m.input_view) + " outside 0.." +
                     std::to_string(static_cast<int>(m.views.size()) - 1));
  return m;
}

SceneManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path(), path.string());
}

std::string manifest_to_json(const SceneManifest& m) {
  json root;
  root["resolution"] = {m.height, m.width};
  root["intrinsics"] = {m.intrinsics.fx, m.intrinsics.fy, m.intrinsics.cx, m.intrinsics.cy};
  root["near"] = m.t_near;
  root["far"] = m.t_far;
  root["background"] = {m.background[0], m.background[1], m.background[2]};
  if (m.input_view) root["input_view"] = *m.input_view;
  root["views"] = json::array();
  for (const auto& v : m.views) {
    json jv;
    jv["image"] = v.image;
    std::vector<double> pose;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) pose.push_back(v.pose(r, c));
    jv["pose"] = pose;
    if (!v.id.empty()) jv["id"] = v.id;
    if (!v.split.empty()) jv["split"] = v.split;
    root["views"].push_back(jv);
  }
  return root.dump(2) + "\n";
}

void write_manifest(const std::filesystem::path& path, const SceneManifest& manifest) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write manifest " + path.string());
  out << manifest_to_json(manifest);
}

Scene load_scene(const std::filesystem::path& manifest_path) {
  Scene scene;
  scene.manifest = load_manifest(manifest_path);
  const auto& m = scene.manifest;
  for (std::size_t i = 0; i < m.views.size(); ++i) {
    const auto& mv = m.views[i];
    const auto image_path = m.base_dir / mv.image;
    if (!std::filesystem::exists(image_path))
      throw LoadError(manifest_path.string() + ": views[" + std::to_string(i) +
                      "].image: file not found: " + image_path.string());
    Image img = read_png(image_path);
    if (img.height != m.height || img.width != m.width)
      throw LoadError(image_path.string() + ": resolution " + std::to_string(img.height) + "x" +
                      std::to_string(img.width) + " does not match manifest " +
                      std::to_string(m.height) + "x" + std::to_string(m.width));
    auto mask = valid_mask(img, m.background);
    scene.views.push_back({mv.id, mv.split, std::move(img), m.camera(i), std::move(mask)});
  }
  return scene;
}

}  // namespace vitnerf::data

#include "vitnerf/cli/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "CLI11.hpp"
#include "vitnerf/core/config.hpp"
#include "vitnerf/core/errors.hpp"
#include "vitnerf/data/orbit.hpp"
#include "vitnerf/data/synthetic.hpp"
#include "vitnerf/metrics/metrics.hpp"
#include "vitnerf/tensor/checkpoint.hpp"
#include "vitnerf/training/trainer.hpp"
#include "vitnerf/training/verification.hpp"

namespace vitnerf::cli {
namespace {

namespace fs = std::filesystem;

fs::path manifest_path(const std::string& scene) {
  if (scene.empty()) throw ArgumentError("--scene is required");
  fs::path p(scene);
  if (fs::is_directory(p)) p /= "manifest.json";
  if (!fs::exists(p)) throw LoadError("scene manifest not found: " + p.string());
  return p;
}

fs::path output_dir(const CommandOptions& opts) {
  if (opts.out.empty()) throw ArgumentError("--out is required");
  fs::create_directories(opts.out);
  return opts.out;
}

KeyValueConfig resolved_config(const CommandOptions& opts) {
  KeyValueConfig kv = opts.config.empty() ? KeyValueConfig() : KeyValueConfig::load(opts.config);
  for (const auto& o : opts.overrides) kv.apply_override(o);
  if (opts.seed) kv.set("train.seed", std::to_string(*opts.seed));
  if (opts.steps) kv.set("train.total_steps", std::to_string(*opts.steps));
  std::vector<std::string> known = model::model_config_keys();
  const auto& tk = training::train_config_keys();
  known.insert(known.end(), tk.begin(), tk.end());
  kv.require_known(known);
  return kv;
}

std::vector<double> parse_list(const Archive& a, const std::string& key, std::size_t n) {
  auto it = a.metadata.find(key);
  if (it == a.metadata.end()) throw LoadError("checkpoint metadata lacks '" + key + "'");
  KeyValueConfig kv;
  kv.set(key, it->second);
  auto v = kv.get_double_list(key, {});
  if (v.size() != n) throw LoadError("checkpoint metadata '" + key + "' is malformed");
  return v;
}

struct LoadedModel {
  model::Model<float> model;
  Archive archive;
};

LoadedModel load_model(const std::string& checkpoint) {
  if (checkpoint.empty()) throw ArgumentError("--checkpoint is required");
  Archive a = load_archive(checkpoint);
  if (a.element_bytes != sizeof(float))
    throw LoadError(checkpoint + ": expected 32-bit parameters");
  model::Model<float> m(training::model_config_from_archive(a), 0);
  training::restore_model<float>(m, nullptr, a);
  return {std::move(m), std::move(a)};
}

void check_divisible(int h, int w, const model::ModelConfig& cfg) {
  const int block = 2 * cfg.vit.patch_size;
  if (h % block != 0 || w % block != 0)
    throw ArgumentError("input image is " + std::to_string(h) + "x" + std::to_string(w) +
                        "; height and width must be multiples of 2 x patch size = " +
                        std::to_string(block));
}

Tensor<float> image_tensor(const data::Image& img) { return img.tensor(); }

std::string frame_name(int i) {
  char name[32];
  std::snprintf(name, sizeof name, "frame_%04d.png", i);
  return name;
}

}  // namespace

void train(const CommandOptions& opts, std::ostream& out) {
  const KeyValueConfig kv = resolved_config(opts);
  const auto model_cfg = model::model_config_from(kv);
  const auto train_cfg = training::train_config_from(kv);
  auto scene = data::load_scene(manifest_path(opts.scene));
  const fs::path dir = output_dir(opts);
  training::Trainer<float> trainer(model_cfg, train_cfg,
                                   training::training_data(std::move(scene), opts.input_view));
  {
    std::ofstream cfg_out(dir / "config.txt");
    for (const auto& [k, v] : model::model_config_entries(model_cfg)) cfg_out << k << " = " << v << "\n";
    for (const auto& [k, v] : training::train_config_entries(train_cfg))
      cfg_out << k << " = " << v << "\n";
  }
  std::ofstream log(dir / "loss.log");
  if (!log) throw LoadError("cannot write " + (dir / "loss.log").string());
  log << "step loss lr_mlp lr_enc\n";
  trainer.run(&log, dir / "checkpoint.bin");
  out << "trained " << trainer.step() << " steps; checkpoint " << (dir / "checkpoint.bin").string()
      << "\n";
}

void render(const CommandOptions& opts, std::ostream& out) {
  auto loaded = load_model(opts.checkpoint);
  auto& m = loaded.model;
  const Archive& a = loaded.archive;
  const fs::path dir = output_dir(opts);
  if (opts.orbit_n < 1) throw ArgumentError("--orbit-n must be at least 1");

  data::Image source_img;
  std::optional<geometry::CameraModel> source;
  nerf::Color bg{0.0, 0.0, 0.0};
  if (!opts.image.empty()) {
    source_img = data::read_png(opts.image);
    const auto k = parse_list(a, "scene.intrinsics", 4);
    const auto nf = std::vector<double>{parse_list(a, "scene.near", 1)[0],
                                        parse_list(a, "scene.far", 1)[0]};
    const auto b = parse_list(a, "scene.background", 3);
    bg = {b[0], b[1], b[2]};
    source.emplace(geometry::Intrinsics{k[0], k[1], k[2], k[3]}, Eigen::Matrix4d::Identity(), nf[0],
                   nf[1], source_img.width, source_img.height);
  } else {
    const auto manifest = data::load_manifest(manifest_path(opts.scene));
    const int view = opts.input_view.value_or(manifest.input_view.value_or(0));
    source.emplace(manifest.camera(static_cast<std::size_t>(view)));
    source_img = data::read_png(manifest.base_dir / manifest.views.at(static_cast<std::size_t>(view)).image);
    bg = manifest.background;
  }
  check_divisible(source_img.height, source_img.width, m.config());
  const double radius = opts.orbit_radius.value_or(0.5 * (source->t_near() + source->t_far()));
  const auto cams = data::orbit_cameras(*source, opts.orbit_n, radius, opts.orbit_elevation);
  const auto tensor = image_tensor(source_img);
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const auto img = training::render_image(m, tensor, *source, cams[i], bg);
    data::write_png(dir / frame_name(static_cast<int>(i)), img);
  }
  out << "wrote " << cams.size() << " frames to " << dir.string() << "\n";
}

void eval(const CommandOptions& opts, std::ostream& out) {
  const auto scene = data::load_scene(manifest_path(opts.scene));
  if (scene.views.size() < 2)
    throw ArgumentError("eval needs a manifest with at least 2 views, found " +
                        std::to_string(scene.views.size()));
  const int input = opts.input_view.value_or(scene.manifest.input_view.value_or(0));
  if (input < 0 || input >= static_cast<int>(scene.views.size()))
    throw ArgumentError("--input-view " + std::to_string(input) + " outside 0.." +
                        std::to_string(scene.views.size() - 1));
  std::optional<LoadedModel> loaded;
  if (!opts.bypass_model) loaded.emplace(load_model(opts.checkpoint));
  const auto& src = scene.views[static_cast<std::size_t>(input)];
  const auto tensor = image_tensor(src.image);
  if (loaded) check_divisible(src.image.height, src.image.width, loaded->model.config());

  metrics::MetricReport report;
  for (std::size_t i = 0; i < scene.views.size(); ++i) {
    if (static_cast<int>(i) == input) continue;
    const auto& v = scene.views[i];
    if (!opts.split.empty() && v.split != opts.split) continue;
    const data::Image pred =
        loaded ? training::render_image(loaded->model, tensor, src.camera, v.camera,
                                        scene.manifest.background)
               : v.image;
    report.add({v.id, metrics::psnr(pred, v.image), metrics::ssim(pred, v.image)});
  }
  if (report.rows.empty()) throw ArgumentError("no views selected for evaluation");
  const std::string text = report.to_text();
  out << text;
  if (!opts.out.empty()) {
    std::ofstream f(output_dir(opts) / "metrics.txt");
    f << text;
  }
}

bool gradcheck(const CommandOptions& opts, std::ostream& out) {
  const std::uint64_t seed = opts.seed.value_or(0);
  auto results = training::op_gradient_suites(seed);
  results.push_back(training::composed_model_gradcheck(seed));
  bool ok = true;
  char line[256];
  std::snprintf(line, sizeof line, "%-36s %-6s %8s %12s %10s  %s\n", "check", "result", "probes",
                "worst_error", "tolerance", "worst_parameter");
  out << line;
  for (const auto& r : results) {
    ok = ok && r.report.passed;
    std::snprintf(line, sizeof line, "%-36s %-6s %8zu %12.3e %10.1e  %s[%zu]\n", r.name.c_str(),
                  r.report.passed ? "PASS" : "FAIL", r.report.checked, r.report.error,
                  r.tolerance, r.report.worst_name.c_str(), r.report.worst_index);
    out << line;
  }
  return ok;
}

void make_synthetic(const CommandOptions& opts, std::ostream& out) {
  auto setup = data::default_synthetic_setup();
  if (opts.orbit_n != 1) setup.orbit_n = opts.orbit_n;
  if (opts.orbit_radius) setup.orbit_radius = *opts.orbit_radius;
  if (opts.orbit_elevation != 0.0) setup.orbit_elevation = opts.orbit_elevation;
  if (opts.input_view) setup.input_view = *opts.input_view;
  if (setup.input_view < 0 || setup.input_view >= setup.orbit_n)
    throw ArgumentError("--input-view outside the orbit");
  const auto path = data::write_synthetic_scene(output_dir(opts), setup);
  out << "wrote " << setup.orbit_n << " views; manifest " << path.string() << "\n";
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Single-image novel view synthesis with a ViT + CNN conditioned radiance field"};
  app.require_subcommand(1);
  CommandOptions opts;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config, "Flat key = value config file");
    sub->add_option("--scene", opts.scene, "Scene manifest or directory containing manifest.json");
    sub->add_option("--out", opts.out, "Output directory");
    sub->add_option("--seed", opts.seed, "Random seed");
    sub->add_option("--steps", opts.steps, "Total training steps");
    sub->add_option("--input-view", opts.input_view, "Manifest index of the source view");
    sub->add_option("--orbit-n", opts.orbit_n, "Number of orbit cameras");
    sub->add_option("--orbit-radius", opts.orbit_radius, "Orbit radius in scene units");
    sub->add_option("--orbit-elev", opts.orbit_elevation, "Orbit elevation in degrees");
    sub->add_option("--set", opts.overrides, "Config override key=value (repeatable)");
    sub->add_option("--checkpoint", opts.checkpoint, "Checkpoint file");
    sub->add_option("--image", opts.image, "Input PNG (identity camera pose)");
    sub->add_option("--split", opts.split, "Only evaluate views with this split");
    sub->add_flag("--bypass-model", opts.bypass_model,
                  "Evaluate ground truth against itself (pipeline check)");
  };
  for (const char* verb : {"train", "render", "eval", "gradcheck", "make-synthetic"}) {
    auto* sub = app.add_subcommand(verb);
    common(sub);
    sub->callback([&opts, verb] { opts.verb = verb; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  try {
    if (opts.verb == "train") {
      train(opts, out);
    } else if (opts.verb == "render") {
      render(opts, out);
    } else if (opts.verb == "eval") {
      eval(opts, out);
    } else if (opts.verb == "gradcheck") {
      if (!gradcheck(opts, out)) {
        err << "error: gradient check failed\n";
        return 1;
      }
    } else if (opts.verb == "make-synthetic") {
      make_synthetic(opts, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace vitnerf::cli

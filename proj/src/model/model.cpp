#include "vitnerf/model/model.hpp"

#include <sstream>

#include "vitnerf/core/errors.hpp"

namespace vitnerf::model {
namespace {

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void ModelConfig::validate() const {
  vit.validate();
  features.validate(vit.latent_dim, vit.taps().size());
  mlp.validate();
  if (n_coarse < 2) throw ArgumentError("n_coarse must be at least 2");
  if (n_fine < 0) throw ArgumentError("n_fine must be nonnegative");
}

ModelConfig toy_model_config() {
  ModelConfig c;
  c.vit = {8, 4, 64, 4, 4.0, {}, 8, 8, 1e-6};
  c.features.level_out = 16;
  c.features.fuse_mid = 32;
  c.features.global_dim = 32;
  c.features.local_dim = 16;
  c.mlp = {10, 64, 2};
  c.n_coarse = 16;
  c.n_fine = 32;
  return c;
}

ModelConfig full_model_config() {
  ModelConfig c;
  c.vit = {16, 12, 768, 12, 4.0, {}, 14, 14, 1e-6};
  c.features.level_out = 512;
  c.features.fuse_mid = 512;
  c.features.global_dim = 256;
  c.features.local_dim = 256;
  c.mlp = {10, 512, 6};
  c.n_coarse = 64;
  c.n_fine = 128;
  return c;
}

ModelConfig tiny_model_config() {
  ModelConfig c;
  c.vit = {8, 2, 16, 2, 2.0, {}, 2, 2, 1e-6};
  c.features.level_out = 4;
  c.features.fuse_mid = 4;
  c.features.global_dim = 4;
  c.features.local_dim = 4;
  c.features.local_blocks = 3;
  c.mlp = {2, 8, 1};
  c.n_coarse = 4;
  c.n_fine = 4;
  return c;
}

const std::vector<std::string>& model_config_keys() {
  static const std::vector<std::string> keys = {
      "preset",           "vit.patch_size",       "vit.depth",         "vit.latent_dim",
      "vit.heads",        "vit.mlp_ratio",        "vit.taps",          "vit.pos_grid",
      "vit.ln_eps",       "features.level_channels", "features.level_out", "features.fuse_mid",
      "features.global_dim", "features.local_dim", "features.local_blocks", "features.use_local",
      "features.bn_momentum", "features.bn_eps",  "features.bn_eval_batch_stats",
      "mlp.frequencies",  "mlp.width",            "mlp.blocks",        "render.n_coarse",
      "render.n_fine"};
  return keys;
}

ModelConfig model_config_from(const KeyValueConfig& kv) {
  const std::string preset = kv.get_string("preset", "toy");
  ModelConfig c;
  if (preset == "toy") {
    c = toy_model_config();
  } else if (preset == "full") {
    c = full_model_config();
  } else if (preset == "tiny") {
    c = tiny_model_config();
  } else {
    throw ArgumentError("config key 'preset': expected toy, full or tiny, found '" + preset + "'");
  }
  auto geti = [&](const char* key, int fallback) {
    return static_cast<int>(kv.get_int(key, fallback));
  };
  c.vit.patch_size = geti("vit.patch_size", c.vit.patch_size);
  c.vit.depth = geti("vit.depth", c.vit.depth);
  c.vit.latent_dim = geti("vit.latent_dim", c.vit.latent_dim);
  c.vit.heads = geti("vit.heads", c.vit.heads);
  c.vit.mlp_ratio = kv.get_double("vit.mlp_ratio", c.vit.mlp_ratio);
  c.vit.tap_layers = kv.get_int_list("vit.taps", c.vit.tap_layers);
  const auto grid = kv.get_int_list("vit.pos_grid", {c.vit.pos_grid_rows, c.vit.pos_grid_cols});
  if (grid.size() != 2) throw ArgumentError("config key 'vit.pos_grid': expected rows,cols");
  c.vit.pos_grid_rows = grid[0];
  c.vit.pos_grid_cols = grid[1];
  c.vit.layernorm_eps = kv.get_double("vit.ln_eps", c.vit.layernorm_eps);
  c.features.level_channels = kv.get_int_list("features.level_channels", c.features.level_channels);
  c.features.level_out = geti("features.level_out", c.features.level_out);
  c.features.fuse_mid = geti("features.fuse_mid", c.features.fuse_mid);
  c.features.global_dim = geti("features.global_dim", c.features.global_dim);
  c.features.local_dim = geti("features.local_dim", c.features.local_dim);
  c.features.local_blocks = geti("features.local_blocks", c.features.local_blocks);
  c.features.use_local = kv.get_bool("features.use_local", c.features.use_local);
  c.features.bn_momentum = kv.get_double("features.bn_momentum", c.features.bn_momentum);
  c.features.bn_eps = kv.get_double("features.bn_eps", c.features.bn_eps);
  c.bn_eval_batch_stats = kv.get_bool("features.bn_eval_batch_stats", c.bn_eval_batch_stats);
  c.mlp.frequencies = geti("mlp.frequencies", c.mlp.frequencies);
  c.mlp.width = geti("mlp.width", c.mlp.width);
  c.mlp.blocks = geti("mlp.blocks", c.mlp.blocks);
  c.n_coarse = geti("render.n_coarse", c.n_coarse);
  c.n_fine = geti("render.n_fine", c.n_fine);
  c.validate();
  return c;
}

std::map<std::string, std::string> model_config_entries(const ModelConfig& c) {
  return {
      {"preset", "toy"},
      {"vit.patch_size", std::to_string(c.vit.patch_size)},
      {"vit.depth", std::to_string(c.vit.depth)},
      {"vit.latent_dim", std::to_string(c.vit.latent_dim)},
      {"vit.heads", std::to_string(c.vit.heads)},
      {"vit.mlp_ratio", num(c.vit.mlp_ratio)},
      {"vit.taps", join(c.vit.taps())},
      {"vit.pos_grid", std::to_string(c.vit.pos_grid_rows) + "," +
                           std::to_string(c.vit.pos_grid_cols)},
      {"vit.ln_eps", num(c.vit.layernorm_eps)},
      {"features.level_channels",
       join(c.features.level_widths(c.vit.latent_dim, c.vit.taps().size()))},
      {"features.level_out", std::to_string(c.features.level_out)},
      {"features.fuse_mid", std::to_string(c.features.fuse_mid)},
      {"features.global_dim", std::to_string(c.features.global_dim)},
      {"features.local_dim", std::to_string(c.features.local_dim)},
      {"features.local_blocks", std::to_string(c.features.local_blocks)},
      {"features.use_local", c.features.use_local ? "true" : "false"},
      {"features.bn_momentum", num(c.features.bn_momentum)},
      {"features.bn_eps", num(c.features.bn_eps)},
      {"features.bn_eval_batch_stats", c.bn_eval_batch_stats ? "true" : "false"},
      {"mlp.frequencies", std::to_string(c.mlp.frequencies)},
      {"mlp.width", std::to_string(c.mlp.width)},
      {"mlp.blocks", std::to_string(c.mlp.blocks)},
      {"render.n_coarse", std::to_string(c.n_coarse)},
      {"render.n_fine", std::to_string(c.n_fine)},
  };
}

std::string lr_group(const std::string& parameter) {
  const std::string m = module_of(parameter);
  return m == "coarse" || m == "fine" ? "mlp" : "encoder";
}

std::string module_of(const std::string& parameter) {
  return parameter.substr(0, parameter.find('.'));
}

template <typename T>
Model<T>::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(seed);
  encoder::init_vit(params_, cfg_.vit, rng);
  features::init_features(params_, cfg_.vit, cfg_.features, rng);
  nerf::init_radiance_mlp(params_, "coarse", cfg_.mlp, cfg_.hybrid_channels(), rng);
  nerf::init_radiance_mlp(params_, "fine", cfg_.mlp, cfg_.hybrid_channels(), rng);
}

template <typename T>
features::FeatureSet<T> Model<T>::features(const Tensor<T>& image, bool training) {
  if (training || !cfg_.bn_eval_batch_stats)
    return features::extract_features(image, params_, cfg_.vit, cfg_.features, training);
  // Batch statistics at evaluation time must not move the running averages.
  const auto saved = params_.batchnorm_all();
  auto fs = features::extract_features(image, params_, cfg_.vit, cfg_.features, true);
  params_.batchnorm_all() = saved;
  return fs;
}

template <typename T>
nerf::SamplingConfig Model<T>::sampling(double t_near, double t_far,
                                        const nerf::Color& background, bool jitter) const {
  nerf::SamplingConfig s;
  s.n_coarse = cfg_.n_coarse;
  s.n_fine = cfg_.n_fine;
  s.jitter = jitter;
  s.background = background;
  s.t_near = t_near;
  s.t_far = t_far;
  return s;
}

template <typename T>
nerf::RenderOutput<T> Model<T>::render(const std::vector<geometry::Ray>& rays,
                                       const geometry::CameraModel& source,
                                       const features::FeatureSet<T>& fs,
                                       const nerf::SamplingConfig& sampling, Rng* rng,
                                       const std::vector<std::vector<double>>* fixed_fine_t) const {
  return nerf::render_rays(rays, source, fs.hybrid, params_, cfg_.mlp, sampling, rng,
                           fixed_fine_t);
}

template class Model<float>;
template class Model<double>;

}  // namespace vitnerf::model

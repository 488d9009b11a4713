#include "vitnerf/training/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "vitnerf/core/errors.hpp"
#include "vitnerf/training/loss.hpp"
#include "vitnerf/training/ray_sampling.hpp"

namespace vitnerf::training {
namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename T>
ArchiveEntry entry(const Shape& shape, const T* data, std::size_t n) {
  ArchiveEntry e;
  e.shape = shape;
  e.values.assign(data, data + n);
  return e;
}

const ArchiveEntry& need(const Archive& a, const std::string& name) {
  auto it = a.entries.find(name);
  if (it == a.entries.end()) throw LoadError("checkpoint is missing '" + name + "'");
  return it->second;
}

template <typename T>
void copy_into(const ArchiveEntry& e, const std::string& name, std::size_t expected, T* out) {
  if (e.values.size() != expected)
    throw LoadError("checkpoint entry '" + name + "' has " + std::to_string(e.values.size()) +
                    " values, expected " + std::to_string(expected));
  for (std::size_t i = 0; i < expected; ++i) out[i] = static_cast<T>(e.values[i]);
}

constexpr std::uint64_t kTrainerStream = 0x9E3779B97F4A7C15ull;

}  // namespace

void TrainConfig::validate() const {
  if (rays_per_instance < 1 || instances_per_batch < 1)
    throw ArgumentError("rays_per_instance and instances_per_batch must be positive");
  if (!(lr_mlp >= 0.0) || !(lr_encoder >= 0.0))
    throw ArgumentError("learning rates must be nonnegative");
  if (!(bbox_fraction >= 0.0 && bbox_fraction <= 1.0))
    throw ArgumentError("bbox_fraction must lie in [0, 1]");
  if (total_steps < 0) throw ArgumentError("total_steps must be nonnegative");
  if (schedule.warmup_steps < 0 || schedule.decay_step < schedule.warmup_steps)
    throw ArgumentError("schedule needs 0 <= warmup_steps <= decay_step");
  if (log_interval < 1) throw ArgumentError("log_interval must be positive");
  if (checkpoint_interval < 0) throw ArgumentError("checkpoint_interval must be nonnegative");
}

const std::vector<std::string>& train_config_keys() {
  static const std::vector<std::string> keys = {
      "train.rays_per_instance", "train.instances_per_batch", "train.lr_mlp",
      "train.lr_encoder",        "train.warmup_steps",        "train.decay_step",
      "train.decay_factor",      "train.bbox_fraction",       "train.total_steps",
      "train.seed",              "train.log_interval",        "train.checkpoint_interval",
      "train.adam_beta1",        "train.adam_beta2",          "train.adam_eps"};
  return keys;
}

TrainConfig train_config_from(const KeyValueConfig& kv) {
  TrainConfig c;
  c.rays_per_instance = static_cast<int>(kv.get_int("train.rays_per_instance", c.rays_per_instance));
  c.instances_per_batch =
      static_cast<int>(kv.get_int("train.instances_per_batch", c.instances_per_batch));
  c.lr_mlp = kv.get_double("train.lr_mlp", c.lr_mlp);
  c.lr_encoder = kv.get_double("train.lr_encoder", c.lr_encoder);
  c.schedule.warmup_steps = kv.get_int("train.warmup_steps", c.schedule.warmup_steps);
  c.schedule.decay_step = kv.get_int("train.decay_step", c.schedule.decay_step);
  c.schedule.decay_factor = kv.get_double("train.decay_factor", c.schedule.decay_factor);
  c.bbox_fraction = kv.get_double("train.bbox_fraction", c.bbox_fraction);
  c.total_steps = kv.get_int("train.total_steps", c.total_steps);
  const long long seed = kv.get_int("train.seed", static_cast<long long>(c.seed));
  if (seed < 0) throw ArgumentError("config key 'train.seed' must be nonnegative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.log_interval = kv.get_int("train.log_interval", c.log_interval);
  c.checkpoint_interval = kv.get_int("train.checkpoint_interval", c.checkpoint_interval);
  c.adam.beta1 = kv.get_double("train.adam_beta1", c.adam.beta1);
  c.adam.beta2 = kv.get_double("train.adam_beta2", c.adam.beta2);
  c.adam.eps = kv.get_double("train.adam_eps", c.adam.eps);
  c.validate();
  return c;
}

std::map<std::string, std::string> train_config_entries(const TrainConfig& c) {
  return {{"train.rays_per_instance", std::to_string(c.rays_per_instance)},
          {"train.instances_per_batch", std::to_string(c.instances_per_batch)},
          {"train.lr_mlp", num(c.lr_mlp)},
          {"train.lr_encoder", num(c.lr_encoder)},
          {"train.warmup_steps", std::to_string(c.schedule.warmup_steps)},
          {"train.decay_step", std::to_string(c.schedule.decay_step)},
          {"train.decay_factor", num(c.schedule.decay_factor)},
          {"train.bbox_fraction", num(c.bbox_fraction)},
          {"train.total_steps", std::to_string(c.total_steps)},
          {"train.seed", std::to_string(c.seed)},
          {"train.log_interval", std::to_string(c.log_interval)},
          {"train.checkpoint_interval", std::to_string(c.checkpoint_interval)},
          {"train.adam_beta1", num(c.adam.beta1)},
          {"train.adam_beta2", num(c.adam.beta2)},
          {"train.adam_eps", num(c.adam.eps)}};
}

TrainingData training_data(data::Scene scene, std::optional<int> input_view) {
  TrainingData d;
  const auto& m = scene.manifest;
  if (scene.views.empty()) throw ArgumentError("scene has no views");
  int input = input_view ? *input_view : m.input_view.value_or(0);
  if (input < 0 || input >= static_cast<int>(scene.views.size()))
    throw ArgumentError("input view " + std::to_string(input) + " outside 0.." +
                        std::to_string(scene.views.size() - 1));
  d.input_view = static_cast<std::size_t>(input);
  d.background = m.background;
  d.t_near = m.t_near;
  d.t_far = m.t_far;
  bool any_split = false;
  for (const auto& v : scene.views) any_split = any_split || !v.split.empty();
  for (std::size_t i = 0; i < scene.views.size(); ++i)
    if (!any_split || scene.views[i].split == "train") d.train_views.push_back(i);
  if (d.train_views.empty()) throw ArgumentError("scene has no training views");
  d.views = std::move(scene.views);
  return d;
}

template <typename T>
Trainer<T>::Trainer(model::ModelConfig model_cfg, TrainConfig train_cfg, TrainingData data)
    : model_cfg_(std::move(model_cfg)),
      cfg_(train_cfg),
      data_(std::move(data)),
      model_(model_cfg_, cfg_.seed),
      adam_(cfg_.adam),
      rng_(cfg_.seed ^ kTrainerStream) {
  cfg_.validate();
  if (data_.views.empty() || data_.train_views.empty())
    throw ArgumentError("trainer needs at least one training view");
  if (data_.input_view >= data_.views.size()) throw ArgumentError("input view out of range");
  const auto& img = data_.views[data_.input_view].image;
  std::vector<T> px(img.rgb.begin(), img.rgb.end());
  source_image_ = Tensor<T>({3, static_cast<std::size_t>(img.height),
                             static_cast<std::size_t>(img.width)},
                            std::move(px));
  const std::size_t block = 2 * static_cast<std::size_t>(model_cfg_.vit.patch_size);
  if (img.height % block != 0 || img.width % block != 0)
    throw ArgumentError("input image " + std::to_string(img.height) + "x" +
                        std::to_string(img.width) + " must be divisible by twice the patch size (" +
                        std::to_string(block) + ")");
}

template <typename T>
std::vector<RayBatch> Trainer<T>::next_batch() {
  std::vector<RayBatch> batch;
  for (int b = 0; b < cfg_.instances_per_batch; ++b) {
    RayBatch rb;
    rb.source_view = data_.input_view;
    rb.target_view = data_.train_views[rng_.index(data_.train_views.size())];
    const auto& view = data_.views[rb.target_view];
    rb.pixels = sample_ray_pixels(view.valid_mask, view.image.height, view.image.width,
                                  cfg_.rays_per_instance, cfg_.bbox_fraction, rng_);
    for (const auto& p : rb.pixels)
      rb.colors.push_back({view.image.at(0, p.row, p.col), view.image.at(1, p.row, p.col),
                           view.image.at(2, p.row, p.col)});
    batch.push_back(std::move(rb));
  }
  return batch;
}

template <typename T>
double Trainer<T>::compute_gradients(const std::vector<RayBatch>& batch) {
  model_.params().zero_grad();
  const auto& source = data_.views[data_.input_view].camera;
  std::vector<geometry::Ray> rays;
  std::vector<T> truth;
  for (const auto& rb : batch) {
    if (rb.source_view != data_.input_view)
      throw ArgumentError("ray batch conditioned on view " + std::to_string(rb.source_view) +
                          ", trainer input view is " + std::to_string(data_.input_view));
    if (rb.colors.size() != rb.pixels.size())
      throw ShapeError("ray batch has " + std::to_string(rb.pixels.size()) + " pixels and " +
                       std::to_string(rb.colors.size()) + " colors");
    const auto r = geometry::generate_rays(data_.views.at(rb.target_view).camera, rb.pixels);
    rays.insert(rays.end(), r.begin(), r.end());
    for (const auto& c : rb.colors)
      for (int k = 0; k < 3; ++k) truth.push_back(static_cast<T>(c[k]));
  }
  const Tensor<T> target({rays.size(), 3}, std::move(truth));
  const auto fs = model_.features(source_image_, true);
  const auto sampling = model_.sampling(data_.t_near, data_.t_far, data_.background, true);
  const auto out = model_.render(rays, source, fs, sampling, &rng_);
  const Tensor<T> loss = add(l2_loss(out.coarse_color, target), l2_loss(out.fine_color, target));
  const double value = static_cast<double>(loss.item());
  if (!std::isfinite(value)) {
    std::string worst = "(none)";
    double worst_abs = -1.0;
    for (const auto& [name, p] : model_.params().all())
      for (T v : p.data()) {
        const double a = std::isfinite(static_cast<double>(v)) ? std::abs(static_cast<double>(v))
                                                              : INFINITY;
        if (a > worst_abs) {
          worst_abs = a;
          worst = name;
        }
      }
    throw TrainingError("non-finite loss at step " + std::to_string(step_ + 1) +
                        "; largest parameter magnitude in '" + worst + "' (" + num(worst_abs) + ")");
  }
  loss.backward();
  return value;
}

template <typename T>
double Trainer<T>::train_step(const std::vector<RayBatch>& batch) {
  const double value = compute_gradients(batch);
  ++step_;
  const double lr_mlp = lr_at_step(step_, cfg_.lr_mlp, cfg_.schedule);
  const double lr_enc = lr_at_step(step_, cfg_.lr_encoder, cfg_.schedule);
  adam_.step(model_.params(), [&](const std::string& name) {
    return model::lr_group(name) == "mlp" ? lr_mlp : lr_enc;
  });
  model_.params().zero_grad();
  return value;
}

template <typename T>
void Trainer<T>::run(std::ostream* log, const std::filesystem::path& checkpoint_path) {
  while (step_ < cfg_.total_steps) {
    const double loss = train_step();
    if (log && step_ % cfg_.log_interval == 0) {
      char line[160];
      std::snprintf(line, sizeof line, "%lld %.9g %.9g %.9g\n", step_, loss,
                    lr_at_step(step_, cfg_.lr_mlp, cfg_.schedule),
                    lr_at_step(step_, cfg_.lr_encoder, cfg_.schedule));
      *log << line << std::flush;
    }
    if (!checkpoint_path.empty() && cfg_.checkpoint_interval > 0 &&
        step_ % cfg_.checkpoint_interval == 0 && step_ < cfg_.total_steps)
      save_checkpoint(checkpoint_path);
  }
  if (!checkpoint_path.empty()) save_checkpoint(checkpoint_path);
}

template <typename T>
Archive model_archive(const model::Model<T>& model, const Adam<T>* adam) {
  Archive a;
  a.element_bytes = sizeof(T);
  for (const auto& [name, p] : model.params().all()) {
    a.entries["param/" + name] = entry(p.shape(), p.ptr(), p.numel());
    if (!adam) continue;
    const auto& m = adam->first_moments();
    const auto& v = adam->second_moments();
    if (auto it = m.find(name); it != m.end())
      a.entries["adam.m/" + name] = entry(p.shape(), it->second.data(), it->second.size());
    if (auto it = v.find(name); it != v.end())
      a.entries["adam.v/" + name] = entry(p.shape(), it->second.data(), it->second.size());
  }
  for (const auto& [name, s] : model.params().batchnorm_all()) {
    a.entries["bn.mean/" + name] = entry({s.running_mean.size()}, s.running_mean.data(),
                                         s.running_mean.size());
    a.entries["bn.var/" + name] = entry({s.running_var.size()}, s.running_var.data(),
                                        s.running_var.size());
  }
  for (const auto& [k, v] : model::model_config_entries(model.config())) a.metadata["model." + k] = v;
  if (adam) a.metadata["adam.steps"] = std::to_string(adam->steps());
  return a;
}

template <typename T>
void restore_model(model::Model<T>& model, Adam<T>* adam, const Archive& archive) {
  auto& params = model.params();
  for (const auto& [name, e] : archive.entries) {
    const auto slash = name.find('/');
    const std::string kind = name.substr(0, slash), rest = name.substr(slash + 1);
    if (kind == "param" || kind == "adam.m" || kind == "adam.v") {
      if (!params.contains(rest))
        throw LoadError("checkpoint has parameter '" + rest + "' that the model does not define");
    } else if (kind == "bn.mean" || kind == "bn.var") {
      if (!params.batchnorm_all().count(rest))
        throw LoadError("checkpoint has batch-norm statistics '" + rest +
                        "' that the model does not define");
    } else {
      throw LoadError("checkpoint has unrecognized entry '" + name + "'");
    }
  }
  for (const auto& [name, p] : params.all()) {
    const ArchiveEntry& e = need(archive, "param/" + name);
    if (e.shape != p.shape())
      throw LoadError("checkpoint parameter '" + name + "' has shape " + shape_str(e.shape) +
                      ", model expects " + shape_str(p.shape()));
    Tensor<T> h = p;
    copy_into(e, "param/" + name, p.numel(), h.mutable_data().data());
  }
  for (auto& [name, s] : params.batchnorm_all()) {
    copy_into(need(archive, "bn.mean/" + name), "bn.mean/" + name, s.running_mean.size(),
              s.running_mean.data());
    copy_into(need(archive, "bn.var/" + name), "bn.var/" + name, s.running_var.size(),
              s.running_var.data());
  }
  if (!adam) return;
  adam->first_moments().clear();
  adam->second_moments().clear();
  for (const auto& [name, p] : params.all()) {
    for (const char* kind : {"adam.m/", "adam.v/"}) {
      auto it = archive.entries.find(kind + name);
      if (it == archive.entries.end()) continue;
      auto& dst = std::string(kind) == "adam.m/" ? adam->first_moments()[name]
                                                 : adam->second_moments()[name];
      dst.resize(p.numel());
      copy_into(it->second, kind + name, p.numel(), dst.data());
    }
  }
  auto it = archive.metadata.find("adam.steps");
  adam->set_steps(it == archive.metadata.end() ? 0 : std::stoll(it->second));
}

model::ModelConfig model_config_from_archive(const Archive& archive) {
  KeyValueConfig kv;
  for (const auto& [k, v] : archive.metadata)
    if (k.rfind("model.", 0) == 0) kv.set(k.substr(6), v);
  if (kv.entries().empty()) throw LoadError("checkpoint carries no model configuration");
  return model::model_config_from(kv);
}

template <typename T>
Archive Trainer<T>::checkpoint() const {
  Archive a = model_archive(model_, &adam_);
  a.step = static_cast<std::uint64_t>(step_);
  a.rng_state = rng_.state();
  for (const auto& [k, v] : train_config_entries(cfg_)) a.metadata[k] = v;
  const auto& cam = data_.views[data_.input_view].camera;
  const auto& k = cam.intrinsics();
  a.metadata["scene.input_view"] = std::to_string(data_.input_view);
  a.metadata["scene.resolution"] = std::to_string(cam.height()) + "," + std::to_string(cam.width());
  a.metadata["scene.intrinsics"] = num(k.fx) + "," + num(k.fy) + "," + num(k.cx) + "," + num(k.cy);
  a.metadata["scene.near"] = num(data_.t_near);
  a.metadata["scene.far"] = num(data_.t_far);
  a.metadata["scene.background"] =
      num(data_.background[0]) + "," + num(data_.background[1]) + "," + num(data_.background[2]);
  return a;
}

template <typename T>
void Trainer<T>::save_checkpoint(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  save_archive(path, checkpoint());
}

template <typename T>
void Trainer<T>::restore(const Archive& archive) {
  if (archive.element_bytes != sizeof(T))
    throw LoadError("checkpoint stores " + std::to_string(archive.element_bytes * 8) +
                    "-bit values, trainer uses " + std::to_string(sizeof(T) * 8) + "-bit");
  restore_model(model_, &adam_, archive);
  step_ = static_cast<long long>(archive.step);
  rng_.set_state(archive.rng_state);
}

template <typename T>
void Trainer<T>::load_checkpoint(const std::filesystem::path& path) {
  restore(load_archive(path));
}

template <typename T>
data::Image Trainer<T>::render_view(const geometry::CameraModel& target, std::size_t chunk) {
  return render_image(model_, source_image_, data_.views[data_.input_view].camera, target,
                      data_.background, chunk);
}

template <typename T>
data::Image render_image(model::Model<T>& model, const Tensor<T>& source_image,
                         const geometry::CameraModel& source, const geometry::CameraModel& target,
                         const nerf::Color& background, std::size_t chunk) {
  NoGradGuard guard;
  if (chunk == 0) throw ArgumentError("render_image: chunk size must be positive");
  const auto fs = model.features(source_image, false);
  const auto sampling = model.sampling(target.t_near(), target.t_far(), background, false);
  const auto pixels = geometry::all_pixels(target);
  data::Image img = data::make_image(target.width(), target.height());
  const std::size_t plane = pixels.size();
  for (std::size_t begin = 0; begin < plane; begin += chunk) {
    const std::size_t end = std::min(plane, begin + chunk);
    const std::vector<geometry::Pixel> part(pixels.begin() + begin, pixels.begin() + end);
    const auto out = model.render(geometry::generate_rays(target, part), source, fs, sampling,
                                  nullptr);
    for (std::size_t i = begin; i < end; ++i)
      for (std::size_t c = 0; c < 3; ++c)
        img.rgb[c * plane + i] = static_cast<float>(out.fine_color[(i - begin) * 3 + c]);
  }
  return img;
}

template class Trainer<float>;
template class Trainer<double>;
template Archive model_archive(const model::Model<float>&, const Adam<float>*);
template Archive model_archive(const model::Model<double>&, const Adam<double>*);
template void restore_model(model::Model<float>&, Adam<float>*, const Archive&);
template void restore_model(model::Model<double>&, Adam<double>*, const Archive&);
template data::Image render_image(model::Model<float>&, const Tensor<float>&,
                                  const geometry::CameraModel&, const geometry::CameraModel&,
                                  const nerf::Color&, std::size_t);
template data::Image render_image(model::Model<double>&, const Tensor<double>&,
                                  const geometry::CameraModel&, const geometry::CameraModel&,
                                  const nerf::Color&, std::size_t);

}  // namespace vitnerf::training

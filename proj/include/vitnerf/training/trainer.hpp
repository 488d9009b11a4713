#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vitnerf/core/config.hpp"
#include "vitnerf/data/manifest.hpp"
#include "vitnerf/model/model.hpp"
#include "vitnerf/tensor/checkpoint.hpp"
#include "vitnerf/training/optimizer.hpp"
#include "vitnerf/training/schedule.hpp"

namespace vitnerf::training {

struct TrainConfig {
  int rays_per_instance = 128;
  int instances_per_batch = 2;
  double lr_mlp = 1e-3;
  double lr_encoder = 2e-4;
  ScheduleConfig schedule;
  double bbox_fraction = 0.8;
  long long total_steps = 5000;
  std::uint64_t seed = 1;
  long long log_interval = 100;
  long long checkpoint_interval = 0;  // 0: only the final checkpoint
  AdamConfig adam;

  void validate() const;
};

/// Reads the "train.*" keys (see train_config_keys) on top of the defaults.
TrainConfig train_config_from(const KeyValueConfig& kv);
std::map<std::string, std::string> train_config_entries(const TrainConfig& cfg);
const std::vector<std::string>& train_config_keys();

/// Views used for training plus the fixed source view.
struct TrainingData {
  std::vector<data::SceneView> views;
  std::vector<std::size_t> train_views;
  std::size_t input_view = 0;
  nerf::Color background{0.0, 0.0, 0.0};
  double t_near = 2.0;
  double t_far = 6.0;
};

/// Training views are those with split "train" when any view carries a
/// split, otherwise all views. The input view comes from `input_view` when
/// set, then the manifest, then 0.
TrainingData training_data(data::Scene scene, std::optional<int> input_view = std::nullopt);

struct RayBatch {
  std::size_t source_view = 0;
  std::size_t target_view = 0;
  std::vector<geometry::Pixel> pixels;
  std::vector<nerf::Color> colors;
};

template <typename T>
class Trainer {
 public:
  Trainer(model::ModelConfig model_cfg, TrainConfig train_cfg, TrainingData data);

  model::Model<T>& model() { return model_; }
  const model::Model<T>& model() const { return model_; }
  const TrainConfig& config() const { return cfg_; }
  const TrainingData& data() const { return data_; }
  Adam<T>& optimizer() { return adam_; }
  Rng& rng() { return rng_; }
  long long step() const { return step_; }

  /// One RayBatch per instance, drawn from the trainer's generator.
  std::vector<RayBatch> next_batch();

  /// Forward, backward and optimizer update on `batch`; returns the loss.
  /// Throws TrainingError on a non-finite loss.
  double train_step(const std::vector<RayBatch>& batch);
  double train_step() { return train_step(next_batch()); }

  /// Loss and gradients without updating anything but the batch-norm
  /// statistics; gradients stay on the parameters.
  double compute_gradients(const std::vector<RayBatch>& batch);

  /// Runs until total_steps. Writes one "step loss lr_mlp lr_enc" row per
  /// log interval to `log` and checkpoints to `checkpoint_path`.
  void run(std::ostream* log, const std::filesystem::path& checkpoint_path = {});

  Archive checkpoint() const;
  void save_checkpoint(const std::filesystem::path& path) const;
  void restore(const Archive& archive);
  void load_checkpoint(const std::filesystem::path& path);

  /// Fine-network rendering of `target` from the input view, without jitter.
  data::Image render_view(const geometry::CameraModel& target, std::size_t chunk = 1024);

 private:
  model::ModelConfig model_cfg_;
  TrainConfig cfg_;
  TrainingData data_;
  model::Model<T> model_;
  Adam<T> adam_;
  Rng rng_;
  long long step_ = 0;
  Tensor<T> source_image_;
};

/// Parameters, batch-norm statistics and optimizer moments of a model as an
/// archive ("param/", "bn.mean/", "bn.var/", "adam.m/", "adam.v/").
template <typename T>
Archive model_archive(const model::Model<T>& model, const Adam<T>* adam);

/// Strict inverse of model_archive: every name must match exactly.
template <typename T>
void restore_model(model::Model<T>& model, Adam<T>* adam, const Archive& archive);

/// Model configuration stored in a checkpoint's metadata.
model::ModelConfig model_config_from_archive(const Archive& archive);

/// Fine rendering of `target` conditioned on `source_image` seen from
/// `source`. Runs without gradient recording, in chunks of rays.
template <typename T>
data::Image render_image(model::Model<T>& model, const Tensor<T>& source_image,
                         const geometry::CameraModel& source, const geometry::CameraModel& target,
                         const nerf::Color& background, std::size_t chunk = 1024);

extern template class Trainer<float>;
extern template class Trainer<double>;

}  // namespace vitnerf::training

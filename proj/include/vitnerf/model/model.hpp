#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vitnerf/core/config.hpp"
#include "vitnerf/encoder/vit.hpp"
#include "vitnerf/features/features.hpp"
#include "vitnerf/nerf/radiance_mlp.hpp"
#include "vitnerf/nerf/renderer.hpp"

namespace vitnerf::model {

struct ModelConfig {
  encoder::ViTConfig vit;
  features::FeatureConfig features;
  nerf::MlpConfig mlp;
  int n_coarse = 16;
  int n_fine = 16;
  // Evaluate batch norm with batch statistics instead of running ones.
  bool bn_eval_batch_stats = false;

  int hybrid_channels() const { return features.global_dim + features.local_dim; }
  void validate() const;
};

/// D=64, J=4, P=8 desk configuration for 64x64 scenes.
ModelConfig toy_model_config();
/// D=768, J=12, P=16, 512-wide decoder and MLP.
ModelConfig full_model_config();
/// D=16, J=2, P=8 configuration for finite-difference checks on 16x16 inputs.
ModelConfig tiny_model_config();

/// Reads "preset" (toy, full, tiny) and the model keys below from `kv`.
ModelConfig model_config_from(const KeyValueConfig& kv);
std::map<std::string, std::string> model_config_entries(const ModelConfig& cfg);
const std::vector<std::string>& model_config_keys();

/// Learning-rate group of a parameter: "mlp" for the coarse and fine
/// networks, "encoder" for everything else.
std::string lr_group(const std::string& parameter);
/// Module a parameter belongs to: vit, decoder, fuse, local, coarse or fine.
std::string module_of(const std::string& parameter);

template <typename T>
class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParameterStore<T>& params() { return params_; }
  const ParameterStore<T>& params() const { return params_; }

  features::FeatureSet<T> features(const Tensor<T>& image, bool training);

  nerf::SamplingConfig sampling(double t_near, double t_far, const nerf::Color& background,
                                bool jitter) const;

  nerf::RenderOutput<T> render(const std::vector<geometry::Ray>& rays,
                               const geometry::CameraModel& source,
                               const features::FeatureSet<T>& fs,
                               const nerf::SamplingConfig& sampling, Rng* rng,
                               const std::vector<std::vector<double>>* fixed_fine_t = nullptr) const;

 private:
  ModelConfig cfg_;
  ParameterStore<T> params_;
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace vitnerf::model

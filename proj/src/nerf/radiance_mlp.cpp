#include "vitnerf/nerf/radiance_mlp.hpp"

#include <cmath>

#include "vitnerf/core/errors.hpp"
#include "vitnerf/tensor/ops.hpp"

namespace vitnerf::nerf {
namespace {

template <typename T>
void add_linear(ParameterStore<T>& store, const std::string& name, int in, int out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  store.add(name + ".weight", uniform_tensor<T>({static_cast<std::size_t>(in),
                                                 static_cast<std::size_t>(out)},
                                                bound, rng));
  store.add(name + ".bias", uniform_tensor<T>({static_cast<std::size_t>(out)}, bound, rng));
}

template <typename T>
Tensor<T> apply_linear(const Tensor<T>& x, const ParameterStore<T>& store,
                       const std::string& name) {
  return linear(x, store.get(name + ".weight"), store.get(name + ".bias"));
}

}  // namespace

void MlpConfig::validate() const {
  if (frequencies < 1) throw ArgumentError("positional encoding needs at least one frequency");
  if (width < 1 || blocks < 0) throw ArgumentError("mlp width must be positive, blocks >= 0");
}

template <typename T>
void init_radiance_mlp(ParameterStore<T>& store, const std::string& prefix, const MlpConfig& cfg,
                       int feature_dim, Rng& rng) {
  cfg.validate();
  add_linear(store, prefix + ".linear_in", cfg.input_dim(feature_dim), cfg.width, rng);
  for (int b = 0; b < cfg.blocks; ++b) {
    const std::string pre = prefix + ".block" + std::to_string(b);
    add_linear(store, pre + ".fc1", cfg.width, cfg.width, rng);
    add_linear(store, pre + ".fc2", cfg.width, cfg.width, rng);
  }
  add_linear(store, prefix + ".sigma_head", cfg.width, 1, rng);
  add_linear(store, prefix + ".color_head", cfg.width, 3, rng);
}

template <typename T>
RadianceOutput<T> radiance_mlp(const Tensor<T>& enc_x, const Tensor<T>& d_c,
                               const Tensor<T>& feat, const ParameterStore<T>& store,
                               const std::string& prefix, const MlpConfig& cfg) {
  if (enc_x.rank() != 2 || d_c.rank() != 2 || feat.rank() != 2 || d_c.size(1) != 3 ||
      enc_x.size(0) != d_c.size(0) || enc_x.size(0) != feat.size(0))
    throw ShapeError("radiance_mlp: incompatible inputs " + shape_str(enc_x.shape()) + ", " +
                     shape_str(d_c.shape()) + ", " + shape_str(feat.shape()));
  const Tensor<T>& w_in = store.get(prefix + ".linear_in.weight");
  const std::size_t expected = enc_x.size(1) + 3 + feat.size(1);
  if (w_in.size(0) != expected)
    throw ShapeError("radiance_mlp: input width " + std::to_string(expected) + " but " + prefix +
                     ".linear_in expects " + std::to_string(w_in.size(0)));
  Tensor<T> h = apply_linear(concat_cols<T>({enc_x, d_c, feat}), store, prefix + ".linear_in");
  for (int b = 0; b < cfg.blocks; ++b) {
    const std::string pre = prefix + ".block" + std::to_string(b);
    const Tensor<T> r = apply_linear(relu(apply_linear(h, store, pre + ".fc1")), store, pre + ".fc2");
    h = relu(add(h, r));
  }
  return {softplus(apply_linear(h, store, prefix + ".sigma_head")),
          sigmoid(apply_linear(h, store, prefix + ".color_head"))};
}

template void init_radiance_mlp(ParameterStore<float>&, const std::string&, const MlpConfig&, int,
                                Rng&);
template void init_radiance_mlp(ParameterStore<double>&, const std::string&, const MlpConfig&,
                                int, Rng&);
template RadianceOutput<float> radiance_mlp(const Tensor<float>&, const Tensor<float>&,
                                            const Tensor<float>&, const ParameterStore<float>&,
                                            const std::string&, const MlpConfig&);
template RadianceOutput<double> radiance_mlp(const Tensor<double>&, const Tensor<double>&,
                                             const Tensor<double>&, const ParameterStore<double>&,
                                             const std::string&, const MlpConfig&);

}  // namespace vitnerf::nerf

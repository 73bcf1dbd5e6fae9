#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "mtae/checkpoint.hpp"
#include "mtae/layers.hpp"

namespace mtae {

enum class Task { emotion, gender, speaker };

const char* task_name(Task t);
Task task_from_name(const std::string& name);

struct ModelConfig {
  int input_h = 128;
  int input_w = 256;
  std::array<int, 3> enc_channels = {8, 16, 32};
  int enc_kernel = 3;  // odd, same padding
  std::array<std::array<int, 2>, 3> pools = {{{2, 2}, {2, 2}, {2, 4}}};
  int head_channels = 16;
  int head_hidden = 256;
  double dropout = 0.3;
  int emotion_classes = 4;
  int gender_classes = 2;
  int speaker_classes = 0;  // 0: no speaker head
  bool multi_task = true;   // false: emotion head only

  void validate() const;
  std::array<i64, 3> latent_shape() const;  // (C, H, W)
  int head_flat_features() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& json_text);
};

// Shared topology for the discriminator and the per-task classifier heads:
// conv 3x3 -> ReLU -> maxpool 2x2 -> dense -> ReLU [-> dropout] -> dense ->
// softmax. The post-ReLU hidden layer doubles as the d-vector.
template <typename T>
class Head {
 public:
  Head(const std::string& name, const ModelConfig& cfg, int classes,
       bool with_dropout, Rng* dropout_rng);

  Tensor<T> forward(const Tensor<T>& z, Mode mode);  // (B,K) probabilities
  Tensor<T> backward(const Tensor<T>& grad_probs);   // gradient w.r.t. z
  Tensor<T> hidden(const Tensor<T>& z);  // eval-mode (B, head_hidden)
  void init(Rng& rng);
  std::vector<Param<T>> params();
  int classes() const { return classes_; }
  Dropout<T>& dropout() { return dropout_; }

 private:
  int classes_;
  int conv_channels_;
  std::vector<i64> latent_shape_;
  Conv2d<T> conv_;
  ReLU<T> relu1_;
  MaxPool2d<T> pool_;
  Dense<T> fc1_;
  ReLU<T> relu2_;
  bool with_dropout_;
  Dropout<T> dropout_;
  Dense<T> fc2_;
  Softmax<T> softmax_;
};

template <typename T>
class Encoder {
 public:
  Encoder(const ModelConfig& cfg);
  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  Tensor<T> backward(const Tensor<T>& grad_z);
  void init(Rng& rng);
  std::vector<Param<T>> params();
  std::vector<Param<T>> state();  // params + batchnorm running stats

 private:
  std::vector<Conv2d<T>> convs_;
  std::vector<BatchNorm2d<T>> bns_;
  std::vector<ReLU<T>> relus_;
  std::vector<MaxPool2d<T>> pools_;
};

template <typename T>
class Decoder {
 public:
  Decoder(const ModelConfig& cfg);
  Tensor<T> forward(const Tensor<T>& z, Mode mode);
  Tensor<T> backward(const Tensor<T>& grad_x);
  void init(Rng& rng);
  std::vector<Param<T>> params();
  std::vector<Param<T>> state();

 private:
  std::vector<ConvTranspose2d<T>> tconvs_;
  std::vector<BatchNorm2d<T>> bns_;
  std::vector<ReLU<T>> relus_;
};

// The full adversarial autoencoder: encoder E, decoder D, latent-space
// discriminator, and one softmax head per enabled task. The latent gets both
// reconstructed and judged against draws from the N(0, I) prior.
template <typename T>
class AAEModel {
 public:
  AAEModel(const ModelConfig& cfg, u64 seed);

  const ModelConfig& config() const { return cfg_; }
  bool has_task(Task t) const;
  std::vector<Task> tasks() const;

  Tensor<T> encode(const Tensor<T>& x, Mode mode);
  Tensor<T> decode(const Tensor<T>& z, Mode mode);
  Tensor<T> discriminate(const Tensor<T>& z, Mode mode);
  Tensor<T> classify(Task t, const Tensor<T>& z, Mode mode);
  Tensor<T> dvector(const Tensor<T>& z);  // eval-mode speaker-branch hidden

  Tensor<T> encoder_backward(const Tensor<T>& grad_z);
  Tensor<T> decoder_backward(const Tensor<T>& grad_xhat);
  Tensor<T> discriminator_backward(const Tensor<T>& grad_probs);
  Tensor<T> head_backward(Task t, const Tensor<T>& grad_probs);

  void init_params();

  std::vector<Param<T>> encoder_params() { return enc_.params(); }
  std::vector<Param<T>> decoder_params() { return dec_.params(); }
  std::vector<Param<T>> discriminator_params() { return disc_.params(); }
  std::vector<Param<T>> head_params(Task t);
  std::vector<Param<T>> all_params();
  // Everything that defines the model numerically, in checkpoint order.
  std::vector<Param<T>> state_tensors();

  void set_dropout_frozen(bool frozen);

  std::vector<T> snapshot();
  void restore(const std::vector<T>& snap);

  std::vector<NamedTensorF32> to_groups();
  void load_groups(const std::vector<NamedTensorF32>& groups);

  Head<T>& head(Task t);

 private:
  ModelConfig cfg_;
  Rng dropout_rng_;
  u64 seed_;
  Encoder<T> enc_;
  Decoder<T> dec_;
  Head<T> disc_;
  std::optional<Head<T>> emotion_;
  std::optional<Head<T>> gender_;
  std::optional<Head<T>> speaker_;
};

// Draws standard-normal latent batches; a sampler rebuilt with the same seed
// reproduces the same sequence of batches.
template <typename T>
class PriorSampler {
 public:
  PriorSampler(u64 seed, std::array<i64, 3> latent_shape)
      : rng_(seed), shape_(latent_shape) {}

  Tensor<T> sample(i64 batch) {
    Tensor<T> z =
        Tensor<T>::uninit({batch, shape_[0], shape_[1], shape_[2]});
    for (auto& v : z.data()) v = static_cast<T>(rng_.normal());
    return z;
  }

 private:
  Rng rng_;
  std::array<i64, 3> shape_;
};

extern template class Head<float>;
extern template class Head<double>;
extern template class Encoder<float>;
extern template class Encoder<double>;
extern template class Decoder<float>;
extern template class Decoder<double>;
extern template class AAEModel<float>;
extern template class AAEModel<double>;

}  // namespace mtae

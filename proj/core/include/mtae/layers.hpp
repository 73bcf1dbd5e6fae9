#pragma once

#include <string>
#include <vector>

#include "mtae/rng.hpp"
#include "mtae/tensor.hpp"

namespace mtae {

enum class Mode { train, eval };

template <typename T>
struct Param {
  std::string name;
  Tensor<T>* tensor;
};

// Layers cache whatever backward() needs during a train-mode forward pass.
// Eval-mode forwards touch no layer state at all, so read-only evaluation on
// a snapshot is safe. backward() accumulates into parameter gradients and
// returns the gradient w.r.t. the layer input.

template <typename T>
class Conv2d {
 public:
  Conv2d(std::string name, int in_ch, int out_ch, int kh, int kw, int sh,
         int sw, int ph, int pw);

  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  Tensor<T> backward(const Tensor<T>& grad_out);
  void init(Rng& rng);
  std::vector<Param<T>> params();
  std::vector<i64> output_shape(const std::vector<i64>& input_shape) const;

  Tensor<T> weight;  // (out_ch, in_ch, kh, kw)
  Tensor<T> bias;    // (out_ch)

 private:
  std::string name_;
  int in_ch_, out_ch_, kh_, kw_, sh_, sw_, ph_, pw_;
  std::vector<i64> cached_in_shape_;
  std::vector<T> col_;  // whole-batch unfold in train mode, scratch in eval
  std::vector<T> dcol_;
};

template <typename T>
class ConvTranspose2d {
 public:
  ConvTranspose2d(std::string name, int in_ch, int out_ch, int kh, int kw,
                  int sh, int sw, int ph, int pw);

  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  Tensor<T> backward(const Tensor<T>& grad_out);
  void init(Rng& rng);
  std::vector<Param<T>> params();
  std::vector<i64> output_shape(const std::vector<i64>& input_shape) const;

  Tensor<T> weight;  // (in_ch, out_ch, kh, kw)
  Tensor<T> bias;    // (out_ch)

 private:
  std::string name_;
  int in_ch_, out_ch_, kh_, kw_, sh_, sw_, ph_, pw_;
  Tensor<T> cached_input_;
  std::vector<T> col_;
  std::vector<T> gcol_;
};

template <typename T>
class MaxPool2d {
 public:
  MaxPool2d(int kh, int kw);  // stride == kernel, no padding

  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  Tensor<T> backward(const Tensor<T>& grad_out);

 private:
  int kh_, kw_;
  std::vector<i64> cached_input_shape_;
  std::vector<i64> cached_argmax_;
};

template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d(std::string name, int channels, T momentum = T(0.1),
              T eps = T(1e-5));

  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  Tensor<T> backward(const Tensor<T>& grad_out);
  std::vector<Param<T>> params();
  std::vector<Param<T>> state_params();  // params + running statistics

  Tensor<T> gamma, beta;
  Tensor<T> running_mean, running_var;  // updated in train mode only

 private:
  std::string name_;
  int channels_;
  T momentum_, eps_;
  Tensor<T> cached_xhat_;
  std::vector<T> cached_invstd_;
};

template <typename T>
class ReLU {
 public:
  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  Tensor<T> backward(const Tensor<T>& grad_out);

 private:
  std::vector<char> cached_mask_;
};

template <typename T>
class Dropout {
 public:
  Dropout(T rate, Rng* rng) : rate_(rate), rng_(rng) {}

  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  Tensor<T> backward(const Tensor<T>& grad_out);

  // Finite-difference checks need the same mask across repeated forwards.
  void set_freeze_mask(bool freeze) { freeze_mask_ = freeze; }

 private:
  T rate_;
  Rng* rng_;
  bool freeze_mask_ = false;
  std::vector<T> mask_;  // 0 or 1/(1-rate)
};

template <typename T>
class Dense {
 public:
  Dense(std::string name, int in_features, int out_features);

  Tensor<T> forward(const Tensor<T>& x, Mode mode);  // x: (B, in_features)
  Tensor<T> backward(const Tensor<T>& grad_out);
  void init(Rng& rng);
  std::vector<Param<T>> params();

  Tensor<T> weight;  // (in_features, out_features)
  Tensor<T> bias;    // (out_features)

 private:
  std::string name_;
  int in_, out_;
  Tensor<T> cached_input_;
};

// Row-wise softmax over the last dimension of a (B, K) tensor.
template <typename T>
class Softmax {
 public:
  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  Tensor<T> backward(const Tensor<T>& grad_out);

 private:
  Tensor<T> cached_output_;
};

extern template class Conv2d<float>;
extern template class Conv2d<double>;
extern template class ConvTranspose2d<float>;
extern template class ConvTranspose2d<double>;
extern template class MaxPool2d<float>;
extern template class MaxPool2d<double>;
extern template class BatchNorm2d<float>;
extern template class BatchNorm2d<double>;
extern template class ReLU<float>;
extern template class ReLU<double>;
extern template class Dropout<float>;
extern template class Dropout<double>;
extern template class Dense<float>;
extern template class Dense<double>;
extern template class Softmax<float>;
extern template class Softmax<double>;

}  // namespace mtae

#pragma once

#include <cstdint>
#include <vector>

#include "mtae/tensor.hpp"

namespace mtae {

template <typename T>
struct LossGrad {
  double value = 0.0;
  Tensor<T> grad;       // w.r.t. the first tensor argument of the loss
  i64 counted = 0;      // rows that contributed (classification losses)
};

// Squared-error reconstruction loss, averaged over the batch dimension:
// mean_b sum_i (x_b[i] - xhat_b[i])^2. Gradient is w.r.t. xhat.
template <typename T>
LossGrad<T> reconstruction_loss(const Tensor<T>& x, const Tensor<T>& xhat);

// Negative log-likelihood on already-softmaxed probabilities (B, K), averaged
// over counted rows. Rows with target < 0, or with mask[i] == 0 when a mask
// is supplied, contribute nothing and receive zero gradient. When no row
// counts, value is 0 and the gradient is all zeros.
template <typename T>
LossGrad<T> cross_entropy(const Tensor<T>& probs,
                          const std::vector<int>& targets,
                          const std::vector<std::uint8_t>* mask = nullptr);

extern template struct LossGrad<float>;
extern template struct LossGrad<double>;
extern template LossGrad<float> reconstruction_loss(const Tensor<float>&,
                                                    const Tensor<float>&);
extern template LossGrad<double> reconstruction_loss(const Tensor<double>&,
                                                     const Tensor<double>&);
extern template LossGrad<float> cross_entropy(
    const Tensor<float>&, const std::vector<int>&,
    const std::vector<std::uint8_t>*);
extern template LossGrad<double> cross_entropy(
    const Tensor<double>&, const std::vector<int>&,
    const std::vector<std::uint8_t>*);

}  // namespace mtae

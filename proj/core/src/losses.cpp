#include "mtae/losses.hpp"

#include <cmath>

namespace mtae {

template <typename T>
LossGrad<T> reconstruction_loss(const Tensor<T>& x, const Tensor<T>& xhat) {
  if (!x.same_shape(xhat))
    throw Error("reconstruction_loss: shape mismatch " +
                shape_to_string(x.shape()) + " vs " +
                shape_to_string(xhat.shape()));
  i64 b = x.dim(0);
  i64 per = x.numel() / b;
  LossGrad<T> out;
  out.grad = Tensor<T>(x.shape());
  double total = 0;
  const T* xp = x.ptr();
  const T* rp = xhat.ptr();
  T* gp = out.grad.ptr();
  T scale = T(2) / static_cast<T>(b);
  for (i64 i = 0; i < x.numel(); ++i) {
    double d = static_cast<double>(rp[i]) - xp[i];
    total += d * d;
    gp[i] = static_cast<T>(d) * scale;
  }
  out.value = total / static_cast<double>(b);
  out.counted = b * per;
  return out;
}

template <typename T>
LossGrad<T> cross_entropy(const Tensor<T>& probs,
                          const std::vector<int>& targets,
                          const std::vector<std::uint8_t>* mask) {
  if (probs.rank() != 2) throw Error("cross_entropy: expected (B,K) probs");
  i64 b = probs.dim(0), k = probs.dim(1);
  if (static_cast<i64>(targets.size()) != b)
    throw Error("cross_entropy: target count mismatch");
  if (mask && static_cast<i64>(mask->size()) != b)
    throw Error("cross_entropy: mask size mismatch");

  i64 counted = 0;
  for (i64 i = 0; i < b; ++i)
    if (targets[static_cast<size_t>(i)] >= 0 &&
        (!mask || (*mask)[static_cast<size_t>(i)]))
      ++counted;

  LossGrad<T> out;
  out.grad = Tensor<T>(probs.shape());
  out.counted = counted;
  if (counted == 0) return out;

  constexpr double kFloor = 1e-12;
  double total = 0;
  for (i64 i = 0; i < b; ++i) {
    int t = targets[static_cast<size_t>(i)];
    if (t < 0 || (mask && !(*mask)[static_cast<size_t>(i)])) continue;
    if (t >= k) throw Error("cross_entropy: target out of range");
    double p = std::max(static_cast<double>(probs.ptr()[i * k + t]), kFloor);
    total -= std::log(p);
    out.grad.ptr()[i * k + t] =
        static_cast<T>(-1.0 / (p * static_cast<double>(counted)));
  }
  out.value = total / static_cast<double>(counted);
  return out;
}

template struct LossGrad<float>;
template struct LossGrad<double>;
template LossGrad<float> reconstruction_loss(const Tensor<float>&,
                                             const Tensor<float>&);
template LossGrad<double> reconstruction_loss(const Tensor<double>&,
                                              const Tensor<double>&);
template LossGrad<float> cross_entropy(const Tensor<float>&,
                                       const std::vector<int>&,
                                       const std::vector<std::uint8_t>*);
template LossGrad<double> cross_entropy(const Tensor<double>&,
                                        const std::vector<int>&,
                                        const std::vector<std::uint8_t>*);

}  // namespace mtae

#include "mtae/layers.hpp"

#include <algorithm>
#include <cmath>

#include "mtae/blas.hpp"

namespace mtae {

namespace {

// col has one row per filter tap (c, u, v) and one column per output grid
// position (i, j). Padding reads as zero. At stride 1 each col row is a
// shifted copy of an input row, so the inner loop collapses to one memcpy
// between zero-filled margins; the general form stays for other strides.
template <typename T>
void im2col(const T* src, int ch, int h, int w, int kh, int kw, int sh, int sw,
            int ph, int pw, int ho, int wo, T* col) {
  for (int c = 0; c < ch; ++c) {
    const T* plane = src + static_cast<i64>(c) * h * w;
    for (int u = 0; u < kh; ++u) {
      for (int v = 0; v < kw; ++v) {
        T* row = col + (static_cast<i64>(c) * kh * kw + u * kw + v) *
                           (static_cast<i64>(ho) * wo);
        for (int i = 0; i < ho; ++i) {
          int y = i * sh - ph + u;
          T* out = row + static_cast<i64>(i) * wo;
          if (y < 0 || y >= h) {
            std::fill(out, out + wo, T(0));
            continue;
          }
          const T* src_row = plane + static_cast<i64>(y) * w;
          if (sh == 1 && sw == 1) {
            int j0 = std::max(0, pw - v);
            int j1 = std::min(wo, w + pw - v);
            std::fill(out, out + j0, T(0));
            if (j1 > j0)
              std::copy(src_row + j0 - pw + v, src_row + j1 - pw + v, out + j0);
            std::fill(out + std::max(j0, j1), out + wo, T(0));
            continue;
          }
          for (int j = 0; j < wo; ++j) {
            int x = j * sw - pw + v;
            out[j] = (x < 0 || x >= w) ? T(0) : src_row[x];
          }
        }
      }
    }
  }
}

// Scatter-add transpose of im2col: dst is (ch, h, w), the col grid is ho x wo.
template <typename T>
void col2im_add(const T* col, int ch, int h, int w, int kh, int kw, int sh,
                int sw, int ph, int pw, int ho, int wo, T* dst) {
  for (int c = 0; c < ch; ++c) {
    T* plane = dst + static_cast<i64>(c) * h * w;
    for (int u = 0; u < kh; ++u) {
      for (int v = 0; v < kw; ++v) {
        const T* row = col + (static_cast<i64>(c) * kh * kw + u * kw + v) *
                                 (static_cast<i64>(ho) * wo);
        for (int i = 0; i < ho; ++i) {
          int y = i * sh - ph + u;
          if (y < 0 || y >= h) continue;
          T* dst_row = plane + static_cast<i64>(y) * w;
          const T* in = row + static_cast<i64>(i) * wo;
          if (sh == 1 && sw == 1) {
            int j0 = std::max(0, pw - v);
            int j1 = std::min(wo, w + pw - v);
            T* d = dst_row - pw + v;
            for (int j = j0; j < j1; ++j) d[j] += in[j];
            continue;
          }
          for (int j = 0; j < wo; ++j) {
            int x = j * sw - pw + v;
            if (x >= 0 && x < w) dst_row[x] += in[j];
          }
        }
      }
    }
  }
}

template <typename T>
void glorot_init(Tensor<T>& weight, i64 fan_in, i64 fan_out, Rng& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : weight.data()) v = static_cast<T>(rng.uniform(-limit, limit));
}

// Strided sums in double keep reductions deterministic while breaking the
// serial dependency that would otherwise pin the loop at FP-add latency. The
// lane count and the fixed combine order are part of the numeric contract:
// same input, same sum, every run.
constexpr int kLanes = 8;

template <typename T>
void sum_and_sumsq(const T* p, i64 n, double& sum, double& sum_sq) {
  double s[kLanes] = {0}, q[kLanes] = {0};
  i64 i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    for (int k = 0; k < kLanes; ++k) {
      double v = p[i + k];
      s[k] += v;
      q[k] += v * v;
    }
  }
  for (; i < n; ++i) {
    double v = p[i];
    s[0] += v;
    q[0] += v * v;
  }
  sum += ((s[0] + s[1]) + (s[2] + s[3])) + ((s[4] + s[5]) + (s[6] + s[7]));
  sum_sq += ((q[0] + q[1]) + (q[2] + q[3])) + ((q[4] + q[5]) + (q[6] + q[7]));
}

template <typename T>
void sum_and_dot(const T* a, const T* b, i64 n, double& sum, double& dot) {
  double s[kLanes] = {0}, d[kLanes] = {0};
  i64 i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    for (int k = 0; k < kLanes; ++k) {
      s[k] += a[i + k];
      d[k] += static_cast<double>(a[i + k]) * b[i + k];
    }
  }
  for (; i < n; ++i) {
    s[0] += a[i];
    d[0] += static_cast<double>(a[i]) * b[i];
  }
  sum += ((s[0] + s[1]) + (s[2] + s[3])) + ((s[4] + s[5]) + (s[6] + s[7]));
  dot += ((d[0] + d[1]) + (d[2] + d[3])) + ((d[4] + d[5]) + (d[6] + d[7]));
}

void require_rank4(const std::vector<i64>& s, const char* what) {
  if (s.size() != 4) throw Error(std::string(what) + ": expected NCHW input");
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d

template <typename T>
Conv2d<T>::Conv2d(std::string name, int in_ch, int out_ch, int kh, int kw,
                  int sh, int sw, int ph, int pw)
    : weight({out_ch, in_ch, kh, kw}),
      bias({out_ch}),
      name_(std::move(name)),
      in_ch_(in_ch),
      out_ch_(out_ch),
      kh_(kh),
      kw_(kw),
      sh_(sh),
      sw_(sw),
      ph_(ph),
      pw_(pw) {}

template <typename T>
std::vector<i64> Conv2d<T>::output_shape(const std::vector<i64>& s) const {
  require_rank4(s, "conv2d");
  if (s[1] != in_ch_) throw Error(name_ + ": channel mismatch");
  i64 ho = (s[2] + 2 * ph_ - kh_) / sh_ + 1;
  i64 wo = (s[3] + 2 * pw_ - kw_) / sw_ + 1;
  if (ho <= 0 || wo <= 0) throw Error(name_ + ": input too small");
  return {s[0], out_ch_, ho, wo};
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x, Mode mode) {
  auto out_shape = output_shape(x.shape());
  i64 b = x.dim(0), h = x.dim(2), w = x.dim(3);
  i64 ho = out_shape[2], wo = out_shape[3];
  i64 taps = static_cast<i64>(in_ch_) * kh_ * kw_;
  Tensor<T> y = Tensor<T>::uninit(out_shape);
  // In train mode the unfolded input is kept for the whole batch: backward
  // reads it for the weight gradient, so caching here removes both an input
  // copy and a second unfold pass.
  bool cache = mode == Mode::train;
  if (cache) {
    cached_in_shape_ = x.shape();
    col_.resize(static_cast<size_t>(b * taps * ho * wo));
  } else {
    col_.resize(static_cast<size_t>(taps * ho * wo));
  }
  for (i64 n = 0; n < b; ++n) {
    const T* xn = x.ptr() + n * in_ch_ * h * w;
    T* yn = y.ptr() + n * out_ch_ * ho * wo;
    T* coln = col_.data() + (cache ? n * taps * ho * wo : 0);
    im2col(xn, in_ch_, static_cast<int>(h), static_cast<int>(w), kh_, kw_, sh_,
           sw_, ph_, pw_, static_cast<int>(ho), static_cast<int>(wo), coln);
    gemm(false, false, out_ch_, static_cast<int>(ho * wo),
         static_cast<int>(taps), T(1), weight.ptr(), static_cast<int>(taps),
         coln, static_cast<int>(ho * wo), T(0), yn,
         static_cast<int>(ho * wo));
    for (int c = 0; c < out_ch_; ++c) {
      T bc = bias.at(c);
      T* plane = yn + static_cast<i64>(c) * ho * wo;
      for (i64 i = 0; i < ho * wo; ++i) plane[i] += bc;
    }
  }
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& grad_out) {
  i64 b = grad_out.dim(0);
  i64 ho = grad_out.dim(2), wo = grad_out.dim(3);
  i64 taps = static_cast<i64>(in_ch_) * kh_ * kw_;
  if (cached_in_shape_.empty() ||
      col_.size() != static_cast<size_t>(b * taps * ho * wo))
    throw Error(name_ + ": backward without train-mode forward");
  i64 h = cached_in_shape_[2], w = cached_in_shape_[3];
  weight.ensure_grad();
  bias.ensure_grad();
  Tensor<T> grad_in(cached_in_shape_);
  dcol_.resize(static_cast<size_t>(taps * ho * wo));
  for (i64 n = 0; n < b; ++n) {
    const T* coln = col_.data() + n * taps * ho * wo;
    const T* gn = grad_out.ptr() + n * out_ch_ * ho * wo;
    gemm(false, true, out_ch_, static_cast<int>(taps),
         static_cast<int>(ho * wo), T(1), gn, static_cast<int>(ho * wo), coln,
         static_cast<int>(ho * wo), T(1), weight.grad_ptr(),
         static_cast<int>(taps));
    for (int c = 0; c < out_ch_; ++c) {
      const T* plane = gn + static_cast<i64>(c) * ho * wo;
      T s = 0;
      for (i64 i = 0; i < ho * wo; ++i) s += plane[i];
      bias.grad_ptr()[c] += s;
    }
    gemm(true, false, static_cast<int>(taps), static_cast<int>(ho * wo),
         out_ch_, T(1), weight.ptr(), static_cast<int>(taps), gn,
         static_cast<int>(ho * wo), T(0), dcol_.data(),
         static_cast<int>(ho * wo));
    col2im_add(dcol_.data(), in_ch_, static_cast<int>(h), static_cast<int>(w),
               kh_, kw_, sh_, sw_, ph_, pw_, static_cast<int>(ho),
               static_cast<int>(wo), grad_in.ptr() + n * in_ch_ * h * w);
  }
  return grad_in;
}

template <typename T>
void Conv2d<T>::init(Rng& rng) {
  glorot_init(weight, static_cast<i64>(in_ch_) * kh_ * kw_,
              static_cast<i64>(out_ch_) * kh_ * kw_, rng);
  std::fill(bias.data().begin(), bias.data().end(), T(0));
}

template <typename T>
std::vector<Param<T>> Conv2d<T>::params() {
  return {{name_ + "/weight", &weight}, {name_ + "/bias", &bias}};
}

// ---------------------------------------------------------------------------
// ConvTranspose2d

template <typename T>
ConvTranspose2d<T>::ConvTranspose2d(std::string name, int in_ch, int out_ch,
                                    int kh, int kw, int sh, int sw, int ph,
                                    int pw)
    : weight({in_ch, out_ch, kh, kw}),
      bias({out_ch}),
      name_(std::move(name)),
      in_ch_(in_ch),
      out_ch_(out_ch),
      kh_(kh),
      kw_(kw),
      sh_(sh),
      sw_(sw),
      ph_(ph),
      pw_(pw) {}

template <typename T>
std::vector<i64> ConvTranspose2d<T>::output_shape(
    const std::vector<i64>& s) const {
  require_rank4(s, "conv_transpose2d");
  if (s[1] != in_ch_) throw Error(name_ + ": channel mismatch");
  i64 ho = (s[2] - 1) * sh_ - 2 * ph_ + kh_;
  i64 wo = (s[3] - 1) * sw_ - 2 * pw_ + kw_;
  if (ho <= 0 || wo <= 0) throw Error(name_ + ": input too small");
  return {s[0], out_ch_, ho, wo};
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::forward(const Tensor<T>& x, Mode mode) {
  auto out_shape = output_shape(x.shape());
  i64 b = x.dim(0), h = x.dim(2), w = x.dim(3);
  i64 ho = out_shape[2], wo = out_shape[3];
  i64 taps = static_cast<i64>(out_ch_) * kh_ * kw_;
  Tensor<T> y(out_shape);
  col_.resize(static_cast<size_t>(taps * h * w));
  for (i64 n = 0; n < b; ++n) {
    const T* xn = x.ptr() + n * in_ch_ * h * w;
    T* yn = y.ptr() + n * out_ch_ * ho * wo;
    // col = W^T x, then scatter back onto the upsampled grid.
    gemm(true, false, static_cast<int>(taps), static_cast<int>(h * w), in_ch_,
         T(1), weight.ptr(), static_cast<int>(taps), xn,
         static_cast<int>(h * w), T(0), col_.data(), static_cast<int>(h * w));
    col2im_add(col_.data(), out_ch_, static_cast<int>(ho), static_cast<int>(wo),
               kh_, kw_, sh_, sw_, ph_, pw_, static_cast<int>(h),
               static_cast<int>(w), yn);
    for (int c = 0; c < out_ch_; ++c) {
      T bc = bias.at(c);
      T* plane = yn + static_cast<i64>(c) * ho * wo;
      for (i64 i = 0; i < ho * wo; ++i) plane[i] += bc;
    }
  }
  if (mode == Mode::train) cached_input_ = x;
  return y;
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::backward(const Tensor<T>& grad_out) {
  if (cached_input_.numel() == 0)
    throw Error(name_ + ": backward without train-mode forward");
  const Tensor<T>& x = cached_input_;
  i64 b = x.dim(0), h = x.dim(2), w = x.dim(3);
  i64 ho = grad_out.dim(2), wo = grad_out.dim(3);
  i64 taps = static_cast<i64>(out_ch_) * kh_ * kw_;
  weight.ensure_grad();
  bias.ensure_grad();
  Tensor<T> grad_in = Tensor<T>::uninit(x.shape());
  gcol_.resize(static_cast<size_t>(taps * h * w));
  for (i64 n = 0; n < b; ++n) {
    const T* xn = x.ptr() + n * in_ch_ * h * w;
    const T* gn = grad_out.ptr() + n * out_ch_ * ho * wo;
    // The forward scatter is the adjoint of im2col on the output grid.
    im2col(gn, out_ch_, static_cast<int>(ho), static_cast<int>(wo), kh_, kw_,
           sh_, sw_, ph_, pw_, static_cast<int>(h), static_cast<int>(w),
           gcol_.data());
    gemm(false, false, in_ch_, static_cast<int>(h * w),
         static_cast<int>(taps), T(1), weight.ptr(), static_cast<int>(taps),
         gcol_.data(), static_cast<int>(h * w), T(0),
         grad_in.ptr() + n * in_ch_ * h * w, static_cast<int>(h * w));
    gemm(false, true, in_ch_, static_cast<int>(taps), static_cast<int>(h * w),
         T(1), xn, static_cast<int>(h * w), gcol_.data(),
         static_cast<int>(h * w), T(1), weight.grad_ptr(),
         static_cast<int>(taps));
    for (int c = 0; c < out_ch_; ++c) {
      const T* plane = gn + static_cast<i64>(c) * ho * wo;
      T s = 0;
      for (i64 i = 0; i < ho * wo; ++i) s += plane[i];
      bias.grad_ptr()[c] += s;
    }
  }
  return grad_in;
}

template <typename T>
void ConvTranspose2d<T>::init(Rng& rng) {
  glorot_init(weight, static_cast<i64>(in_ch_) * kh_ * kw_,
              static_cast<i64>(out_ch_) * kh_ * kw_, rng);
  std::fill(bias.data().begin(), bias.data().end(), T(0));
}

template <typename T>
std::vector<Param<T>> ConvTranspose2d<T>::params() {
  return {{name_ + "/weight", &weight}, {name_ + "/bias", &bias}};
}

// ---------------------------------------------------------------------------
// MaxPool2d

template <typename T>
MaxPool2d<T>::MaxPool2d(int kh, int kw) : kh_(kh), kw_(kw) {}

template <typename T>
Tensor<T> MaxPool2d<T>::forward(const Tensor<T>& x, Mode mode) {
  require_rank4(x.shape(), "maxpool2d");
  i64 b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % kh_ != 0 || w % kw_ != 0)
    throw Error("maxpool2d: input not divisible by pool size");
  i64 ho = h / kh_, wo = w / kw_;
  Tensor<T> y = Tensor<T>::uninit({b, c, ho, wo});
  const T* xp = x.ptr();
  T* yp = y.ptr();
  // Window values are visited in row-major order and compared with a strict >,
  // so the first maximum wins ties. The ternaries compile to conditional
  // moves, which matters: the winner is data-dependent and a branchy scan
  // stalls on every other window. Eval mode skips the argmax bookkeeping;
  // nothing consumes it.
  if (mode == Mode::train) {
    cached_input_shape_ = x.shape();
    cached_argmax_.resize(static_cast<size_t>(y.numel()));
  }
  for (i64 n = 0; n < b * c; ++n) {
    const T* plane = xp + n * h * w;
    for (i64 i = 0; i < ho; ++i) {
      T* yrow = yp + (n * ho + i) * wo;
      const T* win0 = plane + i * kh_ * w;
      if (mode == Mode::train) {
        i64* arow = cached_argmax_.data() + (n * ho + i) * wo;
        i64 base0 = n * h * w + i * kh_ * w;
        for (i64 j = 0; j < wo; ++j) {
          const T* cell = win0 + j * kw_;
          T m = cell[0];
          i64 a = base0 + j * kw_;
          for (int u = 0; u < kh_; ++u) {
            const T* row = cell + u * w;
            i64 rbase = base0 + j * kw_ + u * w;
            for (int v = (u == 0) ? 1 : 0; v < kw_; ++v) {
              bool gt = row[v] > m;
              m = gt ? row[v] : m;
              a = gt ? rbase + v : a;
            }
          }
          yrow[j] = m;
          arow[j] = a;
        }
      } else {
        for (i64 j = 0; j < wo; ++j) {
          const T* cell = win0 + j * kw_;
          T m = cell[0];
          for (int u = 0; u < kh_; ++u) {
            const T* row = cell + u * w;
            for (int v = (u == 0) ? 1 : 0; v < kw_; ++v)
              m = row[v] > m ? row[v] : m;
          }
          yrow[j] = m;
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> MaxPool2d<T>::backward(const Tensor<T>& grad_out) {
  if (cached_argmax_.empty())
    throw Error("maxpool2d: backward without train-mode forward");
  Tensor<T> grad_in(cached_input_shape_);
  const T* gp = grad_out.ptr();
  T* gi = grad_in.ptr();
  for (i64 i = 0; i < grad_out.numel(); ++i)
    gi[cached_argmax_[static_cast<size_t>(i)]] += gp[i];
  return grad_in;
}

// ---------------------------------------------------------------------------
// BatchNorm2d

template <typename T>
BatchNorm2d<T>::BatchNorm2d(std::string name, int channels, T momentum, T eps)
    : gamma(Tensor<T>::full({channels}, T(1))),
      beta({channels}),
      running_mean({channels}),
      running_var(Tensor<T>::full({channels}, T(1))),
      name_(std::move(name)),
      channels_(channels),
      momentum_(momentum),
      eps_(eps) {}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& x, Mode mode) {
  require_rank4(x.shape(), "batchnorm2d");
  if (x.dim(1) != channels_) throw Error(name_ + ": channel mismatch");
  i64 b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  i64 plane = h * w, n = b * plane;
  Tensor<T> y = Tensor<T>::uninit(x.shape());

  if (mode == Mode::eval) {
    for (i64 ch = 0; ch < c; ++ch) {
      T inv = T(1) / std::sqrt(running_var.at(ch) + eps_);
      T g = gamma.at(ch) * inv, off = beta.at(ch) - running_mean.at(ch) * g;
      for (i64 nb = 0; nb < b; ++nb) {
        const T* xp = x.ptr() + (nb * c + ch) * plane;
        T* yp = y.ptr() + (nb * c + ch) * plane;
        for (i64 i = 0; i < plane; ++i) yp[i] = g * xp[i] + off;
      }
    }
    return y;
  }

  Tensor<T> xhat = Tensor<T>::uninit(x.shape());
  cached_invstd_.assign(static_cast<size_t>(c), T(0));
  for (i64 ch = 0; ch < c; ++ch) {
    double sum = 0, sum_sq = 0;
    for (i64 nb = 0; nb < b; ++nb)
      sum_and_sumsq(x.ptr() + (nb * c + ch) * plane, plane, sum, sum_sq);
    double mean = sum / static_cast<double>(n);
    double var = sum_sq / static_cast<double>(n) - mean * mean;
    if (var < 0) var = 0;
    T invstd = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps_)));
    cached_invstd_[static_cast<size_t>(ch)] = invstd;
    T g = gamma.at(ch), off = beta.at(ch);
    T m = static_cast<T>(mean);
    for (i64 nb = 0; nb < b; ++nb) {
      const T* xp = x.ptr() + (nb * c + ch) * plane;
      T* hp = xhat.ptr() + (nb * c + ch) * plane;
      T* yp = y.ptr() + (nb * c + ch) * plane;
      for (i64 i = 0; i < plane; ++i) {
        T xh = (xp[i] - m) * invstd;
        hp[i] = xh;
        yp[i] = g * xh + off;
      }
    }
    double unbiased = n > 1 ? var * static_cast<double>(n) / (n - 1) : var;
    running_mean.at(ch) = static_cast<T>(
        (1 - momentum_) * running_mean.at(ch) + momentum_ * mean);
    running_var.at(ch) = static_cast<T>(
        (1 - momentum_) * running_var.at(ch) + momentum_ * unbiased);
  }
  cached_xhat_ = std::move(xhat);
  return y;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::backward(const Tensor<T>& grad_out) {
  if (cached_xhat_.numel() == 0)
    throw Error(name_ + ": backward without train-mode forward");
  i64 b = grad_out.dim(0), c = grad_out.dim(1);
  i64 plane = grad_out.dim(2) * grad_out.dim(3);
  i64 n = b * plane;
  gamma.ensure_grad();
  beta.ensure_grad();
  Tensor<T> grad_in = Tensor<T>::uninit(grad_out.shape());
  for (i64 ch = 0; ch < c; ++ch) {
    double sum_g = 0, sum_gx = 0;
    for (i64 nb = 0; nb < b; ++nb)
      sum_and_dot(grad_out.ptr() + (nb * c + ch) * plane,
                  cached_xhat_.ptr() + (nb * c + ch) * plane, plane, sum_g,
                  sum_gx);
    gamma.grad_ptr()[ch] += static_cast<T>(sum_gx);
    beta.grad_ptr()[ch] += static_cast<T>(sum_g);
    T mean_g = static_cast<T>(sum_g / static_cast<double>(n));
    T mean_gx = static_cast<T>(sum_gx / static_cast<double>(n));
    T scale = gamma.at(ch) * cached_invstd_[static_cast<size_t>(ch)];
    for (i64 nb = 0; nb < b; ++nb) {
      const T* gp = grad_out.ptr() + (nb * c + ch) * plane;
      const T* hp = cached_xhat_.ptr() + (nb * c + ch) * plane;
      T* ip = grad_in.ptr() + (nb * c + ch) * plane;
      for (i64 i = 0; i < plane; ++i)
        ip[i] = scale * (gp[i] - mean_g - hp[i] * mean_gx);
    }
  }
  return grad_in;
}

template <typename T>
std::vector<Param<T>> BatchNorm2d<T>::params() {
  return {{name_ + "/gamma", &gamma}, {name_ + "/beta", &beta}};
}

template <typename T>
std::vector<Param<T>> BatchNorm2d<T>::state_params() {
  return {{name_ + "/gamma", &gamma},
          {name_ + "/beta", &beta},
          {name_ + "/running_mean", &running_mean},
          {name_ + "/running_var", &running_var}};
}

// ---------------------------------------------------------------------------
// ReLU

template <typename T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& x, Mode mode) {
  Tensor<T> y = Tensor<T>::uninit(x.shape());
  const T* xp = x.ptr();
  T* yp = y.ptr();
  if (mode == Mode::train) {
    cached_mask_.resize(static_cast<size_t>(x.numel()));
    for (i64 i = 0; i < x.numel(); ++i) {
      bool on = xp[i] > T(0);
      cached_mask_[static_cast<size_t>(i)] = on;
      yp[i] = on ? xp[i] : T(0);
    }
  } else {
    for (i64 i = 0; i < x.numel(); ++i) yp[i] = xp[i] > T(0) ? xp[i] : T(0);
  }
  return y;
}

template <typename T>
Tensor<T> ReLU<T>::backward(const Tensor<T>& grad_out) {
  if (cached_mask_.size() != static_cast<size_t>(grad_out.numel()))
    throw Error("relu: backward without train-mode forward");
  Tensor<T> grad_in = Tensor<T>::uninit(grad_out.shape());
  const T* gp = grad_out.ptr();
  T* ip = grad_in.ptr();
  for (i64 i = 0; i < grad_out.numel(); ++i)
    ip[i] = cached_mask_[static_cast<size_t>(i)] ? gp[i] : T(0);
  return grad_in;
}

// ---------------------------------------------------------------------------
// Dropout

template <typename T>
Tensor<T> Dropout<T>::forward(const Tensor<T>& x, Mode mode) {
  if (mode == Mode::eval || rate_ <= T(0)) return x;
  if (!(freeze_mask_ && mask_.size() == static_cast<size_t>(x.numel()))) {
    mask_.resize(static_cast<size_t>(x.numel()));
    T keep = T(1) - rate_;
    T scale = T(1) / keep;
    for (auto& m : mask_)
      m = rng_->uniform(0.0, 1.0) < static_cast<double>(rate_) ? T(0) : scale;
  }
  Tensor<T> y = Tensor<T>::uninit(x.shape());
  const T* xp = x.ptr();
  T* yp = y.ptr();
  for (i64 i = 0; i < x.numel(); ++i) yp[i] = xp[i] * mask_[static_cast<size_t>(i)];
  return y;
}

template <typename T>
Tensor<T> Dropout<T>::backward(const Tensor<T>& grad_out) {
  if (rate_ <= T(0)) return grad_out;
  if (mask_.size() != static_cast<size_t>(grad_out.numel()))
    throw Error("dropout: backward without train-mode forward");
  Tensor<T> grad_in = Tensor<T>::uninit(grad_out.shape());
  const T* gp = grad_out.ptr();
  T* ip = grad_in.ptr();
  for (i64 i = 0; i < grad_out.numel(); ++i)
    ip[i] = gp[i] * mask_[static_cast<size_t>(i)];
  return grad_in;
}

// ---------------------------------------------------------------------------
// Dense

template <typename T>
Dense<T>::Dense(std::string name, int in_features, int out_features)
    : weight({in_features, out_features}),
      bias({out_features}),
      name_(std::move(name)),
      in_(in_features),
      out_(out_features) {}

template <typename T>
Tensor<T> Dense<T>::forward(const Tensor<T>& x, Mode mode) {
  if (x.rank() != 2 || x.dim(1) != in_)
    throw Error(name_ + ": expected (B," + std::to_string(in_) + ") input");
  i64 b = x.dim(0);
  Tensor<T> y = Tensor<T>::uninit({b, out_});
  gemm(false, false, static_cast<int>(b), out_, in_, T(1), x.ptr(), in_,
       weight.ptr(), out_, T(0), y.ptr(), out_);
  for (i64 n = 0; n < b; ++n)
    for (int j = 0; j < out_; ++j) y.ptr()[n * out_ + j] += bias.at(j);
  if (mode == Mode::train) cached_input_ = x;
  return y;
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& grad_out) {
  if (cached_input_.numel() == 0)
    throw Error(name_ + ": backward without train-mode forward");
  i64 b = cached_input_.dim(0);
  weight.ensure_grad();
  bias.ensure_grad();
  gemm(true, false, in_, out_, static_cast<int>(b), T(1), cached_input_.ptr(),
       in_, grad_out.ptr(), out_, T(1), weight.grad_ptr(), out_);
  for (i64 n = 0; n < b; ++n)
    for (int j = 0; j < out_; ++j)
      bias.grad_ptr()[j] += grad_out.ptr()[n * out_ + j];
  Tensor<T> grad_in = Tensor<T>::uninit({b, in_});
  gemm(false, true, static_cast<int>(b), in_, out_, T(1), grad_out.ptr(), out_,
       weight.ptr(), out_, T(0), grad_in.ptr(), in_);
  return grad_in;
}

template <typename T>
void Dense<T>::init(Rng& rng) {
  glorot_init(weight, in_, out_, rng);
  std::fill(bias.data().begin(), bias.data().end(), T(0));
}

template <typename T>
std::vector<Param<T>> Dense<T>::params() {
  return {{name_ + "/weight", &weight}, {name_ + "/bias", &bias}};
}

// ---------------------------------------------------------------------------
// Softmax

template <typename T>
Tensor<T> Softmax<T>::forward(const Tensor<T>& x, Mode mode) {
  if (x.rank() != 2) throw Error("softmax: expected (B,K) input");
  i64 b = x.dim(0), k = x.dim(1);
  Tensor<T> y(x.shape());
  for (i64 n = 0; n < b; ++n) {
    const T* xp = x.ptr() + n * k;
    T* yp = y.ptr() + n * k;
    T mx = xp[0];
    for (i64 j = 1; j < k; ++j) mx = std::max(mx, xp[j]);
    double sum = 0;
    for (i64 j = 0; j < k; ++j) {
      double e = std::exp(static_cast<double>(xp[j] - mx));
      yp[j] = static_cast<T>(e);
      sum += e;
    }
    for (i64 j = 0; j < k; ++j) yp[j] = static_cast<T>(yp[j] / sum);
  }
  if (mode == Mode::train) cached_output_ = y;
  return y;
}

template <typename T>
Tensor<T> Softmax<T>::backward(const Tensor<T>& grad_out) {
  if (cached_output_.numel() == 0)
    throw Error("softmax: backward without train-mode forward");
  i64 b = grad_out.dim(0), k = grad_out.dim(1);
  Tensor<T> grad_in(grad_out.shape());
  for (i64 n = 0; n < b; ++n) {
    const T* gp = grad_out.ptr() + n * k;
    const T* yp = cached_output_.ptr() + n * k;
    T* ip = grad_in.ptr() + n * k;
    double dot = 0;
    for (i64 j = 0; j < k; ++j) dot += static_cast<double>(gp[j]) * yp[j];
    for (i64 j = 0; j < k; ++j)
      ip[j] = static_cast<T>(yp[j] * (gp[j] - dot));
  }
  return grad_in;
}

template class Conv2d<float>;
template class Conv2d<double>;
template class ConvTranspose2d<float>;
template class ConvTranspose2d<double>;
template class MaxPool2d<float>;
template class MaxPool2d<double>;
template class BatchNorm2d<float>;
template class BatchNorm2d<double>;
template class ReLU<float>;
template class ReLU<double>;
template class Dropout<float>;
template class Dropout<double>;
template class Dense<float>;
template class Dense<double>;
template class Softmax<float>;
template class Softmax<double>;

}  // namespace mtae

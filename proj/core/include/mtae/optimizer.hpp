#pragma once

#include <vector>

#include "mtae/layers.hpp"

namespace mtae {

// Plain SGD. step() updates every listed parameter that has gradient storage
// attached and zeroes those gradients; parameters whose grads were never
// allocated did not take part in the backward pass and are left alone.
template <typename T>
class Sgd {
 public:
  explicit Sgd(T lr) : lr_(lr) {}

  void step(const std::vector<Param<T>>& params) {
    for (const auto& p : params) {
      if (!p.tensor->has_grad()) continue;
      T* w = p.tensor->ptr();
      const T* g = p.tensor->grad().data();
      for (i64 i = 0; i < p.tensor->numel(); ++i) w[i] -= lr_ * g[i];
      p.tensor->zero_grad();
    }
  }

  static void zero(const std::vector<Param<T>>& params) {
    for (const auto& p : params)
      if (p.tensor->has_grad()) p.tensor->zero_grad();
  }

  T lr() const { return lr_; }
  void set_lr(T lr) { lr_ = lr; }

 private:
  T lr_;
};

// Validation-driven schedule: halve when the monitored metric (higher is
// better) fails to improve for `patience` consecutive epochs; training stops
// once the rate falls below `floor`.
class LrSchedule {
 public:
  LrSchedule(double initial_lr, int patience, double floor)
      : lr_(initial_lr), patience_(patience), floor_(floor) {}

  struct Decision {
    bool improved = false;
    bool halved = false;
    bool stop = false;
    double lr = 0.0;
  };

  Decision observe(double metric) {
    Decision d;
    if (metric > best_) {
      best_ = metric;
      bad_epochs_ = 0;
      d.improved = true;
    } else if (++bad_epochs_ >= patience_) {
      lr_ /= 2.0;
      bad_epochs_ = 0;
      d.halved = true;
      if (lr_ < floor_) d.stop = true;
    }
    d.lr = lr_;
    return d;
  }

  double lr() const { return lr_; }
  double best() const { return best_; }
  int bad_epochs() const { return bad_epochs_; }

 private:
  double lr_;
  int patience_;
  double floor_;
  double best_ = -1e300;
  int bad_epochs_ = 0;
};

}  // namespace mtae

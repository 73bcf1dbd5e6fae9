#pragma once

#include <algorithm>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "mtae/common.hpp"

namespace mtae {

std::string shape_to_string(const std::vector<i64>& shape);

// Heap array with explicit control over zero-initialisation. Activation
// buffers are fully overwritten by the layer that produces them; zeroing
// those first would roughly double the memory traffic of a forward pass.
template <typename T>
class Buffer {
 public:
  Buffer() = default;
  Buffer(size_t n, bool zeroed)
      : p_(n == 0 ? nullptr : (zeroed ? new T[n]() : new T[n])), n_(n) {}
  Buffer(const Buffer& o) : Buffer(o.n_, false) {
    std::copy(o.begin(), o.end(), begin());
  }
  Buffer(Buffer&& o) noexcept : p_(std::move(o.p_)), n_(o.n_) { o.n_ = 0; }
  Buffer& operator=(const Buffer& o) {
    if (this != &o) {
      if (n_ != o.n_) {
        Buffer tmp(o.n_, false);
        p_ = std::move(tmp.p_);
        n_ = o.n_;
      }
      std::copy(o.begin(), o.end(), begin());
    }
    return *this;
  }
  Buffer& operator=(Buffer&& o) noexcept {
    p_ = std::move(o.p_);
    n_ = o.n_;
    o.n_ = 0;
    return *this;
  }

  void assign(size_t n, T value) {
    if (n_ != n) {
      p_.reset(n == 0 ? nullptr : new T[n]);
      n_ = n;
    }
    std::fill(begin(), end(), value);
  }
  void clear() {
    p_.reset();
    n_ = 0;
  }

  size_t size() const { return n_; }
  bool empty() const { return n_ == 0; }
  T* data() { return p_.get(); }
  const T* data() const { return p_.get(); }
  T* begin() { return p_.get(); }
  T* end() { return p_.get() + n_; }
  const T* begin() const { return p_.get(); }
  const T* end() const { return p_.get() + n_; }
  T& operator[](size_t i) { return p_[i]; }
  const T& operator[](size_t i) const { return p_[i]; }

 private:
  std::unique_ptr<T[]> p_;
  size_t n_ = 0;
};

// Dense row-major tensor. Gradient storage lives alongside the values and is
// allocated on demand; layers accumulate into it and the optimizer clears it.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<i64> shape)
      : shape_(std::move(shape)),
        data_(static_cast<size_t>(checked_numel(shape_)), true) {}

  Tensor(std::vector<i64> shape, const std::vector<T>& values)
      : shape_(std::move(shape)),
        data_(static_cast<size_t>(checked_numel(shape_)), false) {
    if (values.size() != data_.size())
      throw Error("tensor: " + std::to_string(values.size()) +
                  " values for shape " + shape_to_string(shape_));
    std::copy(values.begin(), values.end(), data_.begin());
  }

  // Skips the zero fill; caller promises to write every element.
  static Tensor uninit(std::vector<i64> shape) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = Buffer<T>(static_cast<size_t>(checked_numel(t.shape_)), false);
    return t;
  }

  static Tensor full(std::vector<i64> shape, T value) {
    Tensor t = uninit(std::move(shape));
    for (auto& v : t.data_) v = value;
    return t;
  }

  const std::vector<i64>& shape() const { return shape_; }
  size_t rank() const { return shape_.size(); }
  i64 dim(size_t i) const { return shape_.at(i); }
  i64 numel() const { return static_cast<i64>(data_.size()); }

  T* ptr() { return data_.data(); }
  const T* ptr() const { return data_.data(); }
  Buffer<T>& data() { return data_; }
  const Buffer<T>& data() const { return data_; }

  bool has_grad() const { return !grad_.empty(); }
  void ensure_grad() {
    if (grad_.empty()) grad_.assign(data_.size(), T(0));
  }
  void zero_grad() { grad_.assign(grad_.size(), T(0)); }
  T* grad_ptr() {
    ensure_grad();
    return grad_.data();
  }
  Buffer<T>& grad() {
    ensure_grad();
    return grad_;
  }
  const Buffer<T>& grad() const {
    if (grad_.empty()) throw Error("tensor: gradient never allocated");
    return grad_;
  }

  T& at(i64 flat) {
    check_index(flat);
    return data_[static_cast<size_t>(flat)];
  }
  const T& at(i64 flat) const {
    check_index(flat);
    return data_[static_cast<size_t>(flat)];
  }

  i64 offset(std::initializer_list<i64> idx) const {
    if (idx.size() != shape_.size())
      throw Error("tensor: index rank mismatch");
    i64 flat = 0;
    size_t d = 0;
    for (i64 i : idx) {
      if (i < 0 || i >= shape_[d]) throw Error("tensor: index out of range");
      flat = flat * shape_[d] + i;
      ++d;
    }
    return flat;
  }
  T& operator()(std::initializer_list<i64> idx) { return data_[offset(idx)]; }
  const T& operator()(std::initializer_list<i64> idx) const {
    return data_[offset(idx)];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  void reshape(std::vector<i64> shape) {
    if (checked_numel(shape) != numel())
      throw Error("tensor: reshape " + shape_to_string(shape_) + " -> " +
                  shape_to_string(shape) + " changes element count");
    shape_ = std::move(shape);
  }

 private:
  static i64 checked_numel(const std::vector<i64>& shape) {
    i64 n = 1;
    for (i64 d : shape) {
      if (d <= 0) throw Error("tensor: bad shape " + shape_to_string(shape));
      n *= d;
    }
    return n;
  }

  void check_index(i64 flat) const {
    if (flat < 0 || static_cast<size_t>(flat) >= data_.size())
      throw Error("tensor: index " + std::to_string(flat) +
                  " out of range for " + shape_to_string(shape_));
  }

  std::vector<i64> shape_;
  Buffer<T> data_;
  Buffer<T> grad_;
};

template <typename T>
void require_shape(const Tensor<T>& t, const std::vector<i64>& shape,
                   const char* what) {
  if (t.shape() != shape)
    throw Error(std::string(what) + ": expected shape " +
                shape_to_string(shape) + ", got " + shape_to_string(t.shape()));
}

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace mtae

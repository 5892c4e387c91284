#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "egopose/check.hpp"

namespace egopose {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

/// Dense row-major float32 tensor with value semantics.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0f) {}
  Tensor(Shape shape, float fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}
  Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
    EGOPOSE_CHECK(static_cast<int64_t>(data_.size()) == shape_numel(shape_),
                  "tensor data size does not match shape " + shape_str(shape_));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, float v) { return Tensor(std::move(shape), v); }
  static Tensor scalar(float v) { return Tensor(Shape{}, std::vector<float>{v}); }

  bool defined() const { return !data_.empty() || !shape_.empty(); }
  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::vector<float>& vec() { return data_; }
  const std::vector<float>& vec() const { return data_; }

  float item() const {
    EGOPOSE_CHECK(numel() == 1, "item() on non-scalar tensor");
    return data_[0];
  }

  /// Slow multi-index accessor, meant for tests and setup code.
  float& at(std::initializer_list<int64_t> idx) { return data_[offset(idx)]; }
  float at(std::initializer_list<int64_t> idx) const { return data_[offset(idx)]; }

  /// Same data, new shape (must preserve element count).
  Tensor reshaped(Shape shape) const {
    EGOPOSE_CHECK(shape_numel(shape) == numel(),
                  "reshape " + shape_str(shape_) + " -> " + shape_str(shape) + " changes numel");
    Tensor out;
    out.shape_ = std::move(shape);
    out.data_ = data_;
    return out;
  }

  void fill(float v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

 private:
  int64_t offset(std::initializer_list<int64_t> idx) const {
    EGOPOSE_CHECK(idx.size() == shape_.size(), "index rank mismatch");
    int64_t off = 0;
    size_t i = 0;
    for (int64_t v : idx) {
      off = off * shape_[i] + v;
      ++i;
    }
    return off;
  }

  Shape shape_;
  std::vector<float> data_;
};

}  // namespace egopose

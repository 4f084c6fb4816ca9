#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

#include "sparc/common.hpp"

namespace sparc::nn {

inline std::size_t numel_of(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

/// Row-major dense tensor. The scalar type is double in test mode and
/// float in (default) training mode; callers pick via the template.
template <typename T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s)
      : shape(std::move(s)), data(numel_of(shape), T(0)) {}
  Tensor(std::vector<std::size_t> s, std::vector<T> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (numel_of(shape) != data.size())
      throw ConfigError("tensor: shape/data size mismatch");
  }

  std::size_t numel() const { return data.size(); }
  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }
  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  static Tensor zeros_like(const Tensor& o) { return Tensor(o.shape); }
};

template <typename T>
std::string shape_str(const Tensor<T>& t) {
  std::string s = "(";
  for (std::size_t i = 0; i < t.shape.size(); ++i)
    s += (i ? "," : "") + std::to_string(t.shape[i]);
  return s + ")";
}

}  // namespace sparc::nn

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "vac/error.hpp"

namespace vac::nn {

inline std::size_t shape_size(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// Dense row-major array of up to four dimensions (batch, channels, height, width).
template <typename T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s, T fill = T(0)) : shape(std::move(s)), data(shape_size(shape), fill) {}
  Tensor(std::vector<std::size_t> s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
    if (shape_size(shape) != data.size())
      throw Error(ErrorCode::ShapeMismatch, "shape " + shape_string(shape) + " does not match " +
                                                std::to_string(data.size()) + " values");
  }

  std::size_t size() const noexcept { return data.size(); }
  std::size_t rank() const noexcept { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  bool empty() const noexcept { return data.empty(); }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  bool all_finite() const noexcept {
    for (const T& v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.assign(data.begin(), data.end());
    return out;
  }
};

}  // namespace vac::nn

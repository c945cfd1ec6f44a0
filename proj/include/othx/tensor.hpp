#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "othx/errors.hpp"

namespace othx::nn {

// Dense row-major tensor. Plain storage: shape + flat buffer. All model math
// happens in kernels operating on raw pointers.
template <typename T>
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(numel_of(shape)), T(0));
  }

  static int64_t numel_of(const std::vector<int64_t>& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int64_t dim(int i) const { return shape[static_cast<size_t>(i)]; }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  void zero() { std::fill(data.begin(), data.end(), T(0)); }

  void resize(std::vector<int64_t> s) {
    shape = std::move(s);
    data.assign(static_cast<size_t>(numel_of(shape)), T(0));
  }
};

// A named parameter with its gradient buffer.
template <typename T>
struct Param {
  std::string name;
  Tensor<T> w;
  Tensor<T> g;

  void init_shape(std::string n, std::vector<int64_t> s) {
    name = std::move(n);
    w.resize(s);
    g.resize(std::move(s));
  }
};

}  // namespace othx::nn

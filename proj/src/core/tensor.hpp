#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace hypcbc::ad {

// Dense row-major tensor of doubles. Rank is 1 or 2 in practice; a scalar is
// shape {1}. All training math runs in 64-bit; checkpoints quantize to f32.
struct Tensor {
  std::vector<size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  Tensor(std::vector<size_t> s, std::vector<double> v);

  static Tensor zeros(std::vector<size_t> s);
  static Tensor scalar(double v);
  static Tensor row(std::vector<double> v);                // shape {1, d}
  static Tensor matrix(size_t rows, size_t cols, std::vector<double> v);

  size_t size() const { return values.size(); }
  size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
  bool is_scalar() const { return values.size() == 1; }

  double& at(size_t i, size_t j) { return values[i * cols() + j]; }
  double at(size_t i, size_t j) const { return values[i * cols() + j]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
};

}  // namespace hypcbc::ad

#include "core/tensor.hpp"

#include <cmath>

#include "core/error.hpp"

namespace hypcbc::ad {

namespace {
size_t shape_size(const std::vector<size_t>& s) {
  size_t n = 1;
  for (const size_t d : s) n *= d;
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<size_t> s, std::vector<double> v)
    : shape(std::move(s)), values(std::move(v)) {
  if (shape_size(shape) != values.size())
    throw_usage("tensor shape does not match value count");
}

Tensor Tensor::zeros(std::vector<size_t> s) {
  const size_t n = shape_size(s);
  return Tensor(std::move(s), std::vector<double>(n, 0.0));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::row(std::vector<double> v) {
  const size_t d = v.size();
  return Tensor({1, d}, std::move(v));
}

Tensor Tensor::matrix(size_t rows, size_t cols, std::vector<double> v) {
  return Tensor({rows, cols}, std::move(v));
}

bool Tensor::all_finite() const {
  for (const double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace hypcbc::ad

#include "datk/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "datk/error.hpp"

namespace datk {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {
void check_dims(const Shape& shape) {
  if (shape.empty()) throw ConfigError("tensor shape must have at least one dimension");
  for (std::size_t d : shape) {
    if (d == 0) throw ConfigError("tensor dimension must be positive: " + shape_str(shape));
  }
}
}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_dims(shape_);
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_dims(shape_);
  if (shape_numel(shape_) != data_.size()) {
    throw ConfigError("tensor data length " + std::to_string(data_.size()) +
                      " does not match shape " + shape_str(shape_));
  }
}

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

Tensor Tensor::rows(std::size_t begin, std::size_t count) const {
  if (rank() == 0 || begin + count > shape_[0] || count == 0) {
    throw ContractError("row slice out of range");
  }
  const std::size_t stride = numel() / shape_[0];
  Shape s = shape_;
  s[0] = count;
  return Tensor(std::move(s), std::vector<double>(data_.begin() + begin * stride,
                                                  data_.begin() + (begin + count) * stride));
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

Tensor stack(std::span<const Tensor> items) {
  if (items.empty()) throw ContractError("stack of zero tensors");
  const Shape& inner = items.front().shape();
  Shape s{items.size()};
  s.insert(s.end(), inner.begin(), inner.end());
  std::vector<double> data;
  data.reserve(shape_numel(s));
  for (const Tensor& t : items) {
    if (t.shape() != inner) throw ConfigError("stack: mismatched shapes");
    data.insert(data.end(), t.vec().begin(), t.vec().end());
  }
  return Tensor(std::move(s), std::move(data));
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ContractError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace datk

#include "privswarm/tensor.hpp"

#include <functional>
#include <numeric>

#include "privswarm/errors.hpp"

namespace privswarm {

std::size_t shape_size(const Shape& shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

std::size_t last_dim(const Shape& shape) {
  if (shape.empty()) return 1;
  return shape.back();
}

std::size_t leading_size(const Shape& shape) {
  const std::size_t cols = last_dim(shape);
  return cols == 0 ? 0 : shape_size(shape) / cols;
}

PublicTensor::PublicTensor(Shape s, std::vector<Ring> d, int sc)
    : shape(std::move(s)), data(std::move(d)), scale(sc) {
  if (shape_size(shape) != data.size()) {
    throw ShapeError("public tensor shape " + shape_str(shape) +
                     " does not match " + std::to_string(data.size()) +
                     " elements");
  }
}

PublicTensor PublicTensor::scalar(Ring v, int scale) {
  return PublicTensor(Shape{}, {v}, scale);
}

std::size_t check_broadcast(const Shape& target, const Shape& operand) {
  const std::size_t n = shape_size(operand);
  if (n == 1) return 1;
  if (operand.size() <= target.size() &&
      std::equal(operand.rbegin(), operand.rend(), target.rbegin())) {
    return n;
  }
  throw ShapeError("cannot broadcast " + shape_str(operand) + " onto " +
                   shape_str(target));
}

}  // namespace privswarm

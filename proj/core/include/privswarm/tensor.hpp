#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "privswarm/fixed_point.hpp"

namespace privswarm {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape) noexcept;
std::string shape_str(const Shape& shape);

// Rows/columns of a tensor viewed as a matrix over its last dimension.
std::size_t last_dim(const Shape& shape);
std::size_t leading_size(const Shape& shape);

// A public (non-secret) ring tensor carrying its fixed-point scale.
struct PublicTensor {
  Shape shape;
  std::vector<Ring> data;
  int scale = 0;

  PublicTensor() = default;
  PublicTensor(Shape s, std::vector<Ring> d, int sc);
  static PublicTensor scalar(Ring v, int scale);
  std::size_t size() const noexcept { return data.size(); }
};

// Broadcast rule shared by every public-operand op: the operand's shape is
// equal to, a suffix of, or a scalar relative to the target shape. Returns the
// operand's element count; throws ShapeError otherwise.
std::size_t check_broadcast(const Shape& target, const Shape& operand);

}  // namespace privswarm

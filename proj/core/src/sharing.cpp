#include "privswarm/sharing.hpp"

#include <algorithm>
#include <string>

#include "privswarm/errors.hpp"

namespace privswarm {

std::array<ReplicatedShare, 3> share(Ring secret, Ring r1, Ring r2) noexcept {
  const std::array<Ring, 3> s{r1, r2, secret - r1 - r2};
  return {ReplicatedShare{s[0], s[1]}, ReplicatedShare{s[1], s[2]},
          ReplicatedShare{s[2], s[0]}};
}

Ring reconstruct(PartyId a, const ReplicatedShare& sa, PartyId b,
                 const ReplicatedShare& sb) {
  if (a == b) {
    throw ShareCorruptionError("reconstruction needs two distinct parties");
  }
  // Orient so that `lo` is followed by `hi`; lo holds (s_i, s_i+1) and hi
  // holds (s_i+1, s_i+2).
  const bool forward = next_party(a) == b;
  const ReplicatedShare& lo = forward ? sa : sb;
  const ReplicatedShare& hi = forward ? sb : sa;
  if (lo.second != hi.first) {
    throw ShareCorruptionError("overlapping summand mismatch");
  }
  return lo.first + lo.second + hi.second;
}

SharedTensor::SharedTensor(PartyId p, Shape s, int sc)
    : party(p), shape(std::move(s)), scale(sc) {
  const std::size_t n = shape_size(shape);
  first.assign(n, 0);
  second.assign(n, 0);
}

SharedTensor SharedTensor::zeros(PartyId p, Shape s, int scale) {
  return SharedTensor(p, std::move(s), scale);
}

SharedTensor SharedTensor::from_public(PartyId p, const PublicTensor& value) {
  SharedTensor out(p, value.shape, value.scale);
  // Summand 0 is held by P1 (as first) and P3 (as second).
  if (p == PartyId::p1) out.first = value.data;
  if (p == PartyId::p3) out.second = value.data;
  return out;
}

std::vector<Ring> reconstruct(const SharedTensor& a, const SharedTensor& b) {
  if (a.shape != b.shape) {
    throw ShapeError("reconstruct shape mismatch " + shape_str(a.shape) +
                     " vs " + shape_str(b.shape));
  }
  std::vector<Ring> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = reconstruct(a.party, a.at(i), b.party, b.at(i));
  }
  return out;
}

namespace {

void check_same(const SharedTensor& a, const SharedTensor& b) {
  if (a.shape != b.shape) {
    throw ShapeError("shape mismatch " + shape_str(a.shape) + " vs " +
                     shape_str(b.shape));
  }
  if (a.scale != b.scale) {
    throw ScaleError("scale mismatch " + std::to_string(a.scale) + " vs " +
                     std::to_string(b.scale));
  }
  if (a.party != b.party) {
    throw ShapeError("operands belong to different parties");
  }
}

}  // namespace

SharedTensor add(const SharedTensor& a, const SharedTensor& b) {
  check_same(a, b);
  SharedTensor out = a;
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.first[i] += b.first[i];
    out.second[i] += b.second[i];
  }
  return out;
}

SharedTensor sub(const SharedTensor& a, const SharedTensor& b) {
  check_same(a, b);
  SharedTensor out = a;
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.first[i] -= b.first[i];
    out.second[i] -= b.second[i];
  }
  return out;
}

SharedTensor neg(const SharedTensor& a) {
  SharedTensor out = a;
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.first[i] = Ring{0} - a.first[i];
    out.second[i] = Ring{0} - a.second[i];
  }
  return out;
}

SharedTensor add_public(const SharedTensor& a, const PublicTensor& b) {
  if (a.scale != b.scale) {
    throw ScaleError("add_public scale mismatch " + std::to_string(a.scale) +
                     " vs " + std::to_string(b.scale));
  }
  const std::size_t m = check_broadcast(a.shape, b.shape);
  SharedTensor out = a;
  if (a.party == PartyId::p1) {
    for (std::size_t i = 0; i < a.size(); ++i) out.first[i] += b.data[i % m];
  } else if (a.party == PartyId::p3) {
    for (std::size_t i = 0; i < a.size(); ++i) out.second[i] += b.data[i % m];
  }
  return out;
}

SharedTensor mul_public(const SharedTensor& a, const PublicTensor& b) {
  const std::size_t m = check_broadcast(a.shape, b.shape);
  SharedTensor out = a;
  out.scale = a.scale + b.scale;
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.first[i] *= b.data[i % m];
    out.second[i] *= b.data[i % m];
  }
  return out;
}

SharedTensor mul_integer(const SharedTensor& a, std::int64_t k) {
  SharedTensor out = a;
  const Ring c = to_ring(k);
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.first[i] *= c;
    out.second[i] *= c;
  }
  return out;
}

SharedTensor local_linear(LinearOp op, const SharedTensor& a,
                          const SharedTensor& b) {
  if (op != LinearOp::add_shared) {
    throw ShapeError("shared second operand only supports add_shared");
  }
  return add(a, b);
}

SharedTensor local_linear(LinearOp op, const SharedTensor& a,
                          const PublicTensor& b) {
  switch (op) {
    case LinearOp::add_public:
      return add_public(a, b);
    case LinearOp::mul_public:
      return mul_public(a, b);
    case LinearOp::add_shared:
      break;
  }
  throw ShapeError("add_shared needs a shared second operand");
}

SharedTensor reshape(SharedTensor a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw ShapeError("cannot reshape " + shape_str(a.shape) + " to " +
                     shape_str(shape));
  }
  a.shape = std::move(shape);
  return a;
}

SharedTensor slice_rows(const SharedTensor& a, std::size_t begin,
                        std::size_t end) {
  const std::size_t cols = last_dim(a.shape);
  const std::size_t rows = leading_size(a.shape);
  if (begin > end || end > rows) {
    throw ShapeError("row slice out of range");
  }
  SharedTensor out(a.party, Shape{end - begin, cols}, a.scale);
  std::copy(a.first.begin() + begin * cols, a.first.begin() + end * cols,
            out.first.begin());
  std::copy(a.second.begin() + begin * cols, a.second.begin() + end * cols,
            out.second.begin());
  return out;
}

SharedTensor concat_rows(const SharedTensor& a, const SharedTensor& b) {
  if (a.size() == 0) return b;
  if (b.size() == 0) return a;
  const std::size_t cols = last_dim(a.shape);
  if (last_dim(b.shape) != cols || a.scale != b.scale) {
    throw ShapeError("concat_rows column/scale mismatch");
  }
  SharedTensor out = a;
  out.shape = Shape{leading_size(a.shape) + leading_size(b.shape), cols};
  out.first.insert(out.first.end(), b.first.begin(), b.first.end());
  out.second.insert(out.second.end(), b.second.begin(), b.second.end());
  return out;
}

SharedTensor concat_flat(std::span<const SharedTensor> parts) {
  if (parts.empty()) throw ShapeError("concat of nothing");
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  SharedTensor out(parts.front().party, Shape{total}, parts.front().scale);
  std::size_t at = 0;
  for (const auto& p : parts) {
    if (p.scale != out.scale) throw ScaleError("concat scale mismatch");
    std::copy(p.first.begin(), p.first.end(), out.first.begin() + at);
    std::copy(p.second.begin(), p.second.end(), out.second.begin() + at);
    at += p.size();
  }
  return out;
}

std::vector<SharedTensor> split_flat(const SharedTensor& a,
                                     std::span<const std::size_t> sizes) {
  std::vector<SharedTensor> out;
  std::size_t at = 0;
  for (std::size_t n : sizes) {
    if (at + n > a.size()) throw ShapeError("split beyond tensor");
    SharedTensor piece(a.party, Shape{n}, a.scale);
    std::copy(a.first.begin() + at, a.first.begin() + at + n,
              piece.first.begin());
    std::copy(a.second.begin() + at, a.second.begin() + at + n,
              piece.second.begin());
    out.push_back(std::move(piece));
    at += n;
  }
  return out;
}

SharedTensor transpose(const SharedTensor& a) {
  if (a.shape.size() != 2) throw ShapeError("transpose expects a matrix");
  const std::size_t r = a.shape[0], c = a.shape[1];
  SharedTensor out(a.party, Shape{c, r}, a.scale);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      out.first[j * r + i] = a.first[i * c + j];
      out.second[j * r + i] = a.second[i * c + j];
    }
  }
  return out;
}

SharedTensor row_sum(const SharedTensor& a) {
  const std::size_t cols = last_dim(a.shape);
  const std::size_t rows = leading_size(a.shape);
  SharedTensor out(a.party, Shape{rows, 1}, a.scale);
  for (std::size_t r = 0; r < rows; ++r) {
    Ring f = 0, s = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      f += a.first[r * cols + c];
      s += a.second[r * cols + c];
    }
    out.first[r] = f;
    out.second[r] = s;
  }
  return out;
}

SharedTensor repeat_cols(const SharedTensor& a, std::size_t cols) {
  const std::size_t rows = a.size();
  SharedTensor out(a.party, Shape{rows, cols}, a.scale);
  for (std::size_t r = 0; r < rows; ++r) {
    std::fill_n(out.first.begin() + r * cols, cols, a.first[r]);
    std::fill_n(out.second.begin() + r * cols, cols, a.second[r]);
  }
  return out;
}

}  // namespace privswarm

#include "privswarm/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "privswarm/errors.hpp"
#include "privswarm/triples.hpp"

namespace privswarm {

namespace {

constexpr int kBits = 64;

void require_same_shape(const SharedTensor& a, const SharedTensor& b,
                        const char* what) {
  if (a.shape != b.shape) {
    throw ShapeError(std::string(what) + ": shapes " + shape_str(a.shape) +
                     " and " + shape_str(b.shape) + " differ");
  }
}

PublicTensor pub(Party& party, double v) {
  return PublicTensor::scalar(party.fixed_point().encode(v), party.frac_bits());
}

// Adds a fresh arithmetic zero-sharing to the local cross terms, sends them
// to the previous party and returns the next party's terms.
std::vector<Ring> reshare(Party& party, std::vector<Ring>& z, Opcode op) {
  const std::size_t n = z.size();
  std::vector<Ring> mine(n), theirs(n);
  party.prg_with_prev().fill(mine);
  party.prg_with_next().fill(theirs);
  for (std::size_t i = 0; i < n; ++i) z[i] += mine[i] - theirs[i];
  const Outgoing out[1] = {{party.prev(), z}};
  const Incoming in[1] = {{party.next(), n}};
  auto got = party.exchange(op, out, in);
  return std::move(got[0]);
}

// XOR counterpart of reshare.
std::vector<std::uint64_t> reshare_xor(Party& party,
                                       std::vector<std::uint64_t>& z) {
  const std::size_t n = z.size();
  std::vector<Ring> mine(n), theirs(n);
  party.prg_with_prev().fill(mine);
  party.prg_with_next().fill(theirs);
  for (std::size_t i = 0; i < n; ++i) z[i] ^= mine[i] ^ theirs[i];
  const Outgoing out[1] = {{party.prev(), z}};
  const Incoming in[1] = {{party.next(), n}};
  auto got = party.exchange(Opcode::and_gate, out, in);
  return std::move(got[0]);
}

// Opens flat values to everyone: each party sends its second summand to its
// predecessor, which is the one summand that party lacks.
std::vector<Ring> open_values(Party& party, const std::vector<Ring>& first,
                              const std::vector<Ring>& second, Opcode op) {
  const Outgoing out[1] = {{party.prev(), second}};
  const Incoming in[1] = {{party.next(), second.size()}};
  auto got = party.exchange(op, out, in);
  std::vector<Ring> v(first.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = first[i] + second[i] + got[0][i];
  }
  return v;
}

SharedTensor mul_replicated(Party& party, const SharedTensor& x,
                            const SharedTensor& y) {
  SharedTensor out(x.party, x.shape, x.scale + y.scale);
  std::vector<Ring> z(x.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    z[i] = x.first[i] * y.first[i] + x.first[i] * y.second[i] +
           x.second[i] * y.first[i];
  }
  out.second = reshare(party, z, Opcode::mul);
  out.first = std::move(z);
  return out;
}

SharedTensor mul_beaver(Party& party, const SharedTensor& x,
                        const SharedTensor& y) {
  TripleStore* store = party.triples();
  if (store == nullptr) throw CapacityError("no triple store attached");
  const std::size_t n = x.size();
  const auto triples = store->take(n);
  std::vector<Ring> f(2 * n), s(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    f[i] = x.first[i] - triples[i].a.first;
    s[i] = x.second[i] - triples[i].a.second;
    f[n + i] = y.first[i] - triples[i].b.first;
    s[n + i] = y.second[i] - triples[i].b.second;
  }
  const auto opened = open_values(party, f, s, Opcode::beaver_open);
  SharedTensor out(x.party, x.shape, x.scale + y.scale);
  const int me = index_of(party.id());
  for (std::size_t i = 0; i < n; ++i) {
    const Ring e = opened[i], d = opened[n + i];
    const TripleShare& t = triples[i];
    out.first[i] = t.c.first + e * t.b.first + d * t.a.first;
    out.second[i] = t.c.second + e * t.b.second + d * t.a.second;
    // e*d is public and lives in summand 0.
    if (me == 0) out.first[i] += e * d;
    if (me == 2) out.second[i] += e * d;
  }
  return out;
}

// Local truncation core with a per-element shift. P1 knows s0 + s1, P2 and
// P3 know s2; the new summands are (tA - r, r, tB) and P1 forwards tA - r to
// P3.
void trunc_core(Party& party, std::vector<Ring>& first,
                std::vector<Ring>& second, std::span<const int> bits) {
  const std::size_t n = first.size();
  switch (party.id()) {
    case PartyId::p1: {
      std::vector<Ring> r(n), send(n);
      party.prg_with_next().fill(r);
      for (std::size_t i = 0; i < n; ++i) {
        const Ring ta = arith_shift(first[i] + second[i], bits[i]);
        send[i] = ta - r[i];
      }
      const Outgoing out[1] = {{PartyId::p3, send}};
      party.exchange(Opcode::trunc, out, {});
      first = std::move(send);
      second = std::move(r);
      break;
    }
    case PartyId::p2: {
      std::vector<Ring> r(n);
      party.prg_with_prev().fill(r);
      for (std::size_t i = 0; i < n; ++i) {
        second[i] = Ring{0} - arith_shift(Ring{0} - second[i], bits[i]);
      }
      first = std::move(r);
      party.exchange(Opcode::trunc, {}, {});
      break;
    }
    case PartyId::p3: {
      for (std::size_t i = 0; i < n; ++i) {
        first[i] = Ring{0} - arith_shift(Ring{0} - first[i], bits[i]);
      }
      const Incoming in[1] = {{PartyId::p1, n}};
      auto got = party.exchange(Opcode::trunc, {}, in);
      second = std::move(got[0]);
      break;
    }
  }
}

// Local shares of a value held entirely in summand `slot`, one per party.
SharedTensor slot_share(PartyId p, const Shape& shape, int scale,
                        const std::vector<Ring>& first,
                        const std::vector<Ring>& second, int slot) {
  SharedTensor out = SharedTensor::zeros(p, shape, scale);
  const int me = index_of(p);
  if (me == slot) out.first = first;
  if ((me + 1) % 3 == slot) out.second = second;
  return out;
}

// Bit-sliced layout: plane j holds bit j of every element, `words` words per
// plane.
std::vector<std::uint64_t> bitslice(std::span<const Ring> v, std::size_t words) {
  std::vector<std::uint64_t> planes(kBits * words, 0);
  for (std::size_t e = 0; e < v.size(); ++e) {
    const std::size_t w = e / 64;
    const std::uint64_t bit = std::uint64_t{1} << (e % 64);
    Ring x = v[e];
    for (int j = 0; j < kBits && x != 0; ++j, x >>= 1) {
      if (x & 1u) planes[j * words + w] |= bit;
    }
  }
  return planes;
}

BinaryShare planes_range(const BinaryShare& a, std::size_t words, int from,
                         int to) {
  BinaryShare out{a.party, {}, {}};
  out.first.assign(a.first.begin() + from * words, a.first.begin() + to * words);
  out.second.assign(a.second.begin() + from * words,
                    a.second.begin() + to * words);
  return out;
}

void put_planes(BinaryShare& dst, const BinaryShare& src, std::size_t words,
                int at) {
  std::copy(src.first.begin(), src.first.end(), dst.first.begin() + at * words);
  std::copy(src.second.begin(), src.second.end(),
            dst.second.begin() + at * words);
}

BinaryShare concat_bits(const BinaryShare& a, const BinaryShare& b) {
  BinaryShare out = a;
  out.first.insert(out.first.end(), b.first.begin(), b.first.end());
  out.second.insert(out.second.end(), b.second.begin(), b.second.end());
  return out;
}

// Carry into bit 63 of a + b where b's plane 0 is zero. Inputs are the
// generate (g) and propagate (p) planes.
BinaryShare carry_ripple(Party& party, const BinaryShare& g,
                         const BinaryShare& p, std::size_t words) {
  // b_0 = 0 gives c_1 = 0 and c_2 = g_1.
  BinaryShare c = planes_range(g, words, 1, 2);
  for (int i = 2; i <= 62; ++i) {
    const BinaryShare t = band(party, planes_range(p, words, i, i + 1), c);
    c = bxor(planes_range(g, words, i, i + 1), t);
  }
  return c;
}

BinaryShare carry_prefix(Party& party, BinaryShare g, BinaryShare p,
                         std::size_t words) {
  // Kogge-Stone over bits 0..62; afterwards G_62 is the carry into bit 63.
  constexpr int kTop = 63;
  for (int d = 1; d < kTop; d *= 2) {
    const bool last = 2 * d >= kTop;
    const int count = kTop - d;
    BinaryShare lhs = concat_bits(planes_range(p, words, d, kTop),
                                  planes_range(p, words, d, kTop));
    BinaryShare rhs = concat_bits(planes_range(g, words, 0, kTop - d),
                                  planes_range(p, words, 0, kTop - d));
    if (last) {
      lhs = planes_range(p, words, d, kTop);
      rhs = planes_range(g, words, 0, kTop - d);
    }
    const BinaryShare prod = band(party, lhs, rhs);
    const BinaryShare gp = planes_range(prod, words, 0, count);
    const BinaryShare gnew = bxor(planes_range(g, words, d, kTop), gp);
    put_planes(g, gnew, words, d);
    if (!last) put_planes(p, planes_range(prod, words, count, 2 * count), words, d);
  }
  return planes_range(g, words, 62, 63);
}

// Arithmetic sharing of XOR-shared bits packed one per element.
SharedTensor bits_to_arith(Party& party, const BinaryShare& b, const Shape& shape) {
  const std::size_t n = shape_size(shape);
  std::vector<Ring> f(n), s(n);
  for (std::size_t e = 0; e < n; ++e) {
    f[e] = (b.first[e / 64] >> (e % 64)) & 1u;
    s[e] = (b.second[e / 64] >> (e % 64)) & 1u;
  }
  const PartyId id = party.id();
  const SharedTensor x0 = slot_share(id, shape, 0, f, s, 0);
  const SharedTensor x1 = slot_share(id, shape, 0, f, s, 1);
  const SharedTensor x2 = slot_share(id, shape, 0, f, s, 2);
  // a xor b = a + b - 2ab, applied twice.
  const SharedTensor u =
      sub(add(x0, x1), mul_integer(mul(party, x0, x1), 2));
  return sub(add(u, x2), mul_integer(mul(party, u, x2), 2));
}

// Columns `cols` of a [rows x n] tensor.
SharedTensor gather_cols(const SharedTensor& a, std::size_t rows, std::size_t n,
                         std::span<const std::size_t> cols) {
  SharedTensor out(a.party, Shape{rows, cols.size()}, a.scale);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      out.first[r * cols.size() + j] = a.first[r * n + cols[j]];
      out.second[r * cols.size() + j] = a.second[r * n + cols[j]];
    }
  }
  return out;
}

SharedTensor flat_view(SharedTensor a, int scale) {
  a.shape = Shape{a.size()};
  a.scale = scale;
  return a;
}

}  // namespace

// --- input / output ---------------------------------------------------------

SharedTensor share_input(Party& party, PartyId owner,
                         const std::optional<PublicTensor>& value,
                         const Shape& shape, int scale) {
  PhaseScope scope(party, Phase::share_input, true);
  const std::size_t n = shape_size(shape);
  SharedTensor out(party.id(), shape, scale);
  if (party.id() == owner) {
    if (!value) throw ShapeError("input owner must provide a value");
    if (value->shape != shape) {
      throw ShapeError("input shape " + shape_str(value->shape) +
                       " does not match declared " + shape_str(shape));
    }
    if (value->scale != scale) throw ScaleError("input scale mismatch");
    party.prg_with_prev().fill(out.first);
    party.prg_with_next().fill(out.second);
    std::vector<Ring> rest(n);
    for (std::size_t i = 0; i < n; ++i) {
      rest[i] = value->data[i] - out.first[i] - out.second[i];
    }
    const Outgoing o[2] = {{party.next(), rest}, {party.prev(), rest}};
    party.exchange(Opcode::input, o, {});
  } else if (party.id() == next_party(owner)) {
    party.prg_with_prev().fill(out.first);
    const Incoming in[1] = {{owner, n}};
    out.second = std::move(party.exchange(Opcode::input, {}, in)[0]);
  } else {
    party.prg_with_next().fill(out.second);
    const Incoming in[1] = {{owner, n}};
    out.first = std::move(party.exchange(Opcode::input, {}, in)[0]);
  }
  return out;
}

std::vector<Ring> reveal(Party& party, const SharedTensor& x) {
  PhaseScope scope(party, Phase::output, true);
  party.stats().reveals += x.size();
  return open_values(party, x.first, x.second, Opcode::reveal);
}

std::optional<std::vector<Ring>> reveal_to(Party& party, const SharedTensor& x,
                                           PartyId target) {
  PhaseScope scope(party, Phase::output, true);
  party.stats().reveals += x.size();
  if (party.id() == target) {
    const Incoming in[1] = {{next_party(target), x.size()}};
    auto got = party.exchange(Opcode::reveal, {}, in);
    std::vector<Ring> v(x.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = x.first[i] + x.second[i] + got[0][i];
    }
    return v;
  }
  if (party.id() == next_party(target)) {
    const Outgoing out[1] = {{target, x.second}};
    party.exchange(Opcode::reveal, out, {});
  } else {
    party.exchange(Opcode::reveal, {}, {});
  }
  return std::nullopt;
}

// --- arithmetic -------------------------------------------------------------

SharedTensor mul(Party& party, const SharedTensor& x, const SharedTensor& y) {
  require_same_shape(x, y, "mul");
  PhaseScope scope(party, Phase::mul, true);
  party.stats().mul_elements += x.size();
  if (party.config().mul_backend == MulBackend::triples) {
    return mul_beaver(party, x, y);
  }
  return mul_replicated(party, x, y);
}

std::vector<SharedTensor> matmul_batch(Party& party,
                                       std::span<const SharedTensor> a,
                                       std::span<const SharedTensor> b) {
  if (a.size() != b.size()) throw ShapeError("matmul batch size mismatch");
  PhaseScope scope(party, Phase::mul, true);
  std::vector<SharedTensor> outs;
  std::vector<Ring> z;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const SharedTensor& x = a[t];
    const SharedTensor& y = b[t];
    if (x.shape.size() != 2 || y.shape.size() != 2 || x.shape[1] != y.shape[0]) {
      throw ShapeError("matmul of " + shape_str(x.shape) + " and " +
                       shape_str(y.shape));
    }
    const std::size_t m = x.shape[0], k = x.shape[1], n = y.shape[1];
    party.stats().mul_elements += m * k * n;
    std::vector<Ring> ysum(k * n);
    for (std::size_t i = 0; i < k * n; ++i) ysum[i] = y.first[i] + y.second[i];
    const std::size_t base = z.size();
    z.resize(base + m * n, 0);
    for (std::size_t i = 0; i < m; ++i) {
      Ring* row = z.data() + base + i * n;
      for (std::size_t l = 0; l < k; ++l) {
        const Ring x1 = x.first[i * k + l], x2 = x.second[i * k + l];
        const Ring* ys = ysum.data() + l * n;
        const Ring* y1 = y.first.data() + l * n;
        for (std::size_t j = 0; j < n; ++j) row[j] += x1 * ys[j] + x2 * y1[j];
      }
    }
    outs.emplace_back(x.party, Shape{m, n}, x.scale + y.scale);
  }
  std::vector<Ring> other = reshare(party, z, Opcode::mul);
  std::size_t at = 0;
  for (auto& o : outs) {
    std::copy(z.begin() + at, z.begin() + at + o.size(), o.first.begin());
    std::copy(other.begin() + at, other.begin() + at + o.size(),
              o.second.begin());
    at += o.size();
  }
  return outs;
}

SharedTensor matmul(Party& party, const SharedTensor& a, const SharedTensor& b) {
  const SharedTensor as[1] = {a};
  const SharedTensor bs[1] = {b};
  return std::move(matmul_batch(party, as, bs)[0]);
}

SharedTensor matmul_public(const SharedTensor& a, const PublicTensor& w) {
  if (w.shape.size() != 2 || a.shape.empty() || last_dim(a.shape) != w.shape[0]) {
    throw ShapeError("matmul of " + shape_str(a.shape) + " and public " +
                     shape_str(w.shape));
  }
  const std::size_t k = w.shape[0], n = w.shape[1];
  const std::size_t m = a.size() / k;
  Shape shape = a.shape;
  shape.back() = n;
  SharedTensor out(a.party, shape, a.scale + w.scale);
  for (std::size_t i = 0; i < m; ++i) {
    Ring* f = out.first.data() + i * n;
    Ring* s = out.second.data() + i * n;
    for (std::size_t l = 0; l < k; ++l) {
      const Ring x1 = a.first[i * k + l], x2 = a.second[i * k + l];
      const Ring* wr = w.data.data() + l * n;
      for (std::size_t j = 0; j < n; ++j) {
        f[j] += x1 * wr[j];
        s[j] += x2 * wr[j];
      }
    }
  }
  return out;
}

SharedTensor trunc(Party& party, const SharedTensor& x, int bits) {
  if (bits < 0 || bits >= kBits - 1) {
    throw ScaleError("cannot truncate by " + std::to_string(bits) + " bits");
  }
  PhaseScope scope(party, Phase::trunc, true);
  SharedTensor out = x;
  const std::vector<int> shifts(x.size(), bits);
  trunc_core(party, out.first, out.second, shifts);
  out.scale = x.scale - bits;
  return out;
}

SharedTensor trunc(Party& party, const SharedTensor& x) {
  return trunc(party, x, party.frac_bits());
}

SharedTensor mul_trunc(Party& party, const SharedTensor& x,
                       const SharedTensor& y) {
  return trunc(party, mul(party, x, y));
}

// --- binary -----------------------------------------------------------------

BinaryShare bxor(const BinaryShare& a, const BinaryShare& b) {
  if (a.size() != b.size()) throw ShapeError("bxor size mismatch");
  BinaryShare out = a;
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.first[i] ^= b.first[i];
    out.second[i] ^= b.second[i];
  }
  return out;
}

BinaryShare band(Party& party, const BinaryShare& a, const BinaryShare& b) {
  if (a.size() != b.size()) throw ShapeError("band size mismatch");
  PhaseScope scope(party, Phase::compare, true);
  party.stats().and_words += a.size();
  std::vector<std::uint64_t> z(a.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    z[i] = (a.first[i] & b.first[i]) ^ (a.first[i] & b.second[i]) ^
           (a.second[i] & b.first[i]);
  }
  BinaryShare out{a.party, {}, {}};
  out.second = reshare_xor(party, z);
  out.first = std::move(z);
  return out;
}

std::vector<std::uint64_t> reveal_bits(Party& party, const BinaryShare& x) {
  PhaseScope scope(party, Phase::output, true);
  const Outgoing out[1] = {{party.prev(), x.second}};
  const Incoming in[1] = {{party.next(), x.size()}};
  auto got = party.exchange(Opcode::reveal, out, in);
  std::vector<std::uint64_t> v(x.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = x.first[i] ^ x.second[i] ^ got[0][i];
  }
  return v;
}

// --- comparison and selection -----------------------------------------------

SharedTensor msb(Party& party, const SharedTensor& x) {
  PhaseScope scope(party, Phase::compare, true);
  const std::size_t n = x.size();
  if (n == 0) return SharedTensor(x.party, x.shape, 0);
  const std::size_t words = (n + 63) / 64;
  const int me = index_of(party.id());
  const auto pf = bitslice(x.first, words);
  const auto ps = bitslice(x.second, words);
  const std::vector<std::uint64_t> zero(pf.size(), 0);
  // Summand i as a binary sharing that only its two holders see.
  auto summand = [&](int i) {
    BinaryShare b{party.id(), zero, zero};
    if (me == i) b.first = pf;
    if ((me + 1) % 3 == i) b.second = ps;
    return b;
  };
  const BinaryShare s0 = summand(0), s1 = summand(1), s2 = summand(2);

  // Carry-save layer: s0 + s1 + s2 = sum + 2 * carry.
  const BinaryShare sum = bxor(bxor(s0, s1), s2);
  const BinaryShare carry = bxor(band(party, bxor(s0, s2), bxor(s1, s2)), s2);
  BinaryShare shifted{party.id(), zero, zero};
  put_planes(shifted, planes_range(carry, words, 0, kBits - 1), words, 1);

  const BinaryShare g = band(party, sum, shifted);
  const BinaryShare p = bxor(sum, shifted);
  const BinaryShare c63 = party.config().carry_mode == CarryMode::ripple
                              ? carry_ripple(party, g, p, words)
                              : carry_prefix(party, g, p, words);
  const BinaryShare top = bxor(planes_range(p, words, 63, 64), c63);
  return bits_to_arith(party, top, x.shape);
}

SharedTensor less_than(Party& party, const SharedTensor& x,
                       const SharedTensor& y) {
  require_same_shape(x, y, "less_than");
  return msb(party, sub(x, y));
}

SharedTensor less_than_public(Party& party, const SharedTensor& x,
                              const PublicTensor& c) {
  PublicTensor negc = c;
  for (auto& v : negc.data) v = Ring{0} - v;
  return msb(party, add_public(x, negc));
}

SharedTensor select(Party& party, const SharedTensor& b, const SharedTensor& x,
                    const SharedTensor& y) {
  require_same_shape(x, y, "select");
  require_same_shape(b, x, "select");
  if (b.scale != 0) throw ScaleError("select expects bits at scale 0");
  return add(y, mul(party, b, sub(x, y)));
}

SharedTensor max_last(Party& party, const SharedTensor& x) {
  if (x.shape.empty() || last_dim(x.shape) == 0) {
    throw ShapeError("max over an empty axis");
  }
  PhaseScope scope(party, Phase::compare, true);
  const std::size_t rows = leading_size(x.shape);
  std::size_t m = last_dim(x.shape);
  SharedTensor cur = reshape(x, Shape{rows, m});
  while (m > 1) {
    const std::size_t pairs = m / 2;
    std::vector<std::size_t> lc, rc, tail;
    for (std::size_t i = 0; i < pairs; ++i) {
      lc.push_back(2 * i);
      rc.push_back(2 * i + 1);
    }
    const SharedTensor l = gather_cols(cur, rows, m, lc);
    const SharedTensor r = gather_cols(cur, rows, m, rc);
    const SharedTensor c = less_than(party, l, r);
    SharedTensor win = select(party, c, r, l);
    if (m % 2 == 1) {
      tail.push_back(m - 1);
      const SharedTensor last = gather_cols(cur, rows, m, tail);
      SharedTensor joined(x.party, Shape{rows, pairs + 1}, x.scale);
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < pairs; ++j) {
          joined.first[i * (pairs + 1) + j] = win.first[i * pairs + j];
          joined.second[i * (pairs + 1) + j] = win.second[i * pairs + j];
        }
        joined.first[i * (pairs + 1) + pairs] = last.first[i];
        joined.second[i * (pairs + 1) + pairs] = last.second[i];
      }
      win = std::move(joined);
    }
    cur = std::move(win);
    m = last_dim(cur.shape);
  }
  return cur;
}

SharedTensor argmax_onehot(Party& party, const SharedTensor& x) {
  if (x.shape.empty() || last_dim(x.shape) == 0) {
    throw ShapeError("argmax over an empty axis");
  }
  PhaseScope scope(party, Phase::compare, true);
  const std::size_t rows = leading_size(x.shape);
  const std::size_t n = last_dim(x.shape);
  // Candidates per row: value plus its one-hot over the n positions. The
  // first generation is public.
  std::size_t m = n;
  SharedTensor vals = reshape(x, Shape{rows, n});
  PublicTensor eye(Shape{rows, n * n}, std::vector<Ring>(rows * n * n, 0), 0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < n; ++i) eye.data[r * n * n + i * n + i] = 1;
  }
  SharedTensor hots = SharedTensor::from_public(party.id(), eye);

  while (m > 1) {
    const std::size_t pairs = m / 2;
    const bool odd = m % 2 == 1;
    std::vector<std::size_t> lc, rc;
    for (std::size_t i = 0; i < pairs; ++i) {
      lc.push_back(2 * i);
      rc.push_back(2 * i + 1);
    }
    const SharedTensor l = gather_cols(vals, rows, m, lc);
    const SharedTensor r = gather_cols(vals, rows, m, rc);
    const SharedTensor c = less_than(party, l, r);

    // One multiplication round chooses both the values and the one-hots.
    SharedTensor bsel(x.party, Shape{rows * pairs * (n + 1)}, 0);
    SharedTensor diff(x.party, Shape{rows * pairs * (n + 1)}, 0);
    const std::size_t vcount = rows * pairs;
    for (std::size_t q = 0; q < vcount; ++q) {
      bsel.first[q] = c.first[q];
      bsel.second[q] = c.second[q];
      diff.first[q] = r.first[q] - l.first[q];
      diff.second[q] = r.second[q] - l.second[q];
    }
    for (std::size_t row = 0; row < rows; ++row) {
      for (std::size_t j = 0; j < pairs; ++j) {
        const std::size_t q = row * pairs + j;
        const std::size_t li = row * m * n + (2 * j) * n;
        const std::size_t ri = row * m * n + (2 * j + 1) * n;
        for (std::size_t t = 0; t < n; ++t) {
          const std::size_t o = vcount + q * n + t;
          bsel.first[o] = c.first[q];
          bsel.second[o] = c.second[q];
          diff.first[o] = hots.first[ri + t] - hots.first[li + t];
          diff.second[o] = hots.second[ri + t] - hots.second[li + t];
        }
      }
    }
    const SharedTensor prod = mul(party, bsel, diff);

    const std::size_t next_m = pairs + (odd ? 1 : 0);
    SharedTensor nv(x.party, Shape{rows, next_m}, x.scale);
    SharedTensor nh(x.party, Shape{rows, next_m * n}, 0);
    for (std::size_t row = 0; row < rows; ++row) {
      for (std::size_t j = 0; j < pairs; ++j) {
        const std::size_t q = row * pairs + j;
        nv.first[row * next_m + j] = l.first[q] + prod.first[q];
        nv.second[row * next_m + j] = l.second[q] + prod.second[q];
        const std::size_t li = row * m * n + (2 * j) * n;
        for (std::size_t t = 0; t < n; ++t) {
          const std::size_t o = vcount + q * n + t;
          nh.first[row * next_m * n + j * n + t] = hots.first[li + t] + prod.first[o];
          nh.second[row * next_m * n + j * n + t] =
              hots.second[li + t] + prod.second[o];
        }
      }
      if (odd) {
        nv.first[row * next_m + pairs] = vals.first[row * m + m - 1];
        nv.second[row * next_m + pairs] = vals.second[row * m + m - 1];
        const std::size_t src = row * m * n + (m - 1) * n;
        for (std::size_t t = 0; t < n; ++t) {
          nh.first[row * next_m * n + pairs * n + t] = hots.first[src + t];
          nh.second[row * next_m * n + pairs * n + t] = hots.second[src + t];
        }
      }
    }
    vals = std::move(nv);
    hots = std::move(nh);
    m = next_m;
  }
  Shape shape = x.shape;
  return reshape(std::move(hots), shape);
}

// --- elementary functions ---------------------------------------------------

SharedTensor exp_approx(Party& party, const SharedTensor& x) {
  using namespace approx_constants;
  const int f = party.frac_bits();
  if (x.scale != f) throw ScaleError("exp expects scale f");
  // The squarings run with `extra` guard bits so early truncation errors are
  // not amplified 2^8-fold. Products stay near 2^(2(f+extra)), which bounds
  // the truncation wrap probability; 20 total bits keeps it around 2^-24.
  const int extra = std::clamp(20 - f, 0, kExpSquarings);
  const int s = f + extra;
  SharedTensor y = x;
  if (extra < kExpSquarings) y = trunc(party, x, kExpSquarings - extra);
  y.scale = s;
  y = add_public(y, PublicTensor::scalar(Ring{1} << s, s));
  for (int i = 0; i < kExpSquarings; ++i) {
    const bool last = i + 1 == kExpSquarings;
    y = trunc(party, mul(party, y, y), last ? s + extra : s);
  }
  return y;
}

SharedTensor reciprocal_approx(Party& party, const SharedTensor& x) {
  using namespace approx_constants;
  if (x.scale != party.frac_bits()) throw ScaleError("reciprocal expects scale f");
  const SharedTensor z = add_public(neg(x), pub(party, kReciprocalSeedShift));
  SharedTensor y = mul_integer(exp_approx(party, z),
                               static_cast<std::int64_t>(kReciprocalSeedScale));
  y = add_public(y, pub(party, kReciprocalSeedBias));
  const PublicTensor two = pub(party, 2.0);
  for (int i = 0; i < kReciprocalIterations; ++i) {
    const SharedTensor t = mul_trunc(party, x, y);
    y = mul_trunc(party, y, add_public(neg(t), two));
  }
  return y;
}

SharedTensor rsqrt_approx(Party& party, const SharedTensor& x) {
  using namespace approx_constants;
  const int f = party.frac_bits();
  if (x.scale != f) throw ScaleError("rsqrt expects scale f");
  const std::size_t n = x.size();

  // x/2 and x/2048 in one truncation round.
  SharedTensor both = concat_flat(std::vector<SharedTensor>{flat_view(x, f), flat_view(x, f)});
  std::vector<int> shifts(2 * n, 1);
  std::fill(shifts.begin() + static_cast<long>(n), shifts.end(), 11);
  {
    PhaseScope scope(party, Phase::trunc, true);
    trunc_core(party, both.first, both.second, shifts);
  }
  const std::size_t sizes[2] = {n, n};
  auto parts = split_flat(both, sizes);
  const SharedTensor half = reshape(parts[0], x.shape);
  const SharedTensor slope = reshape(parts[1], x.shape);

  const SharedTensor z = add_public(neg(half), pub(party, -kRsqrtSeedShift));
  const SharedTensor e = exp_approx(party, z);
  SharedTensor y = trunc(party, mul_public(e, pub(party, kRsqrtSeedScale)));
  y = sub(add_public(y, pub(party, kRsqrtSeedBias)), slope);

  const PublicTensor three_halves = pub(party, 1.5);
  for (int i = 0; i < kRsqrtIterations; ++i) {
    // (x*y)*y keeps the truncation error of the first product small; the
    // second truncation also halves.
    const SharedTensor xy = mul_trunc(party, x, y);
    SharedTensor t = trunc(party, mul(party, xy, y), f + 1);
    t.scale = f;
    y = mul_trunc(party, y, add_public(neg(t), three_halves));
  }
  return y;
}

SharedTensor elementary_approx(Party& party, ElementaryKind kind,
                               const SharedTensor& x) {
  switch (kind) {
    case ElementaryKind::exp:
      return exp_approx(party, x);
    case ElementaryKind::reciprocal:
      return reciprocal_approx(party, x);
    case ElementaryKind::rsqrt:
      return rsqrt_approx(party, x);
  }
  throw ValidationError("unknown elementary function");
}

}  // namespace privswarm

#include "privswarm/ref_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

#include "privswarm/errors.hpp"

namespace privswarm {

double erf_precise(double x) {
  if (std::isnan(x)) return x;
  const double ax = std::fabs(x);
  double r;
  if (ax < 2.5) {
    // erf(x) = 2/sqrt(pi) * exp(-x^2) * sum 2^n x^(2n+1) / (1*3*...*(2n+1)),
    // all terms positive.
    double term = ax, sum = ax;
    for (int n = 1; n < 200; ++n) {
      term *= 2.0 * ax * ax / (2.0 * n + 1.0);
      sum += term;
      if (term < sum * 1e-18) break;
    }
    r = 2.0 / std::sqrt(std::numbers::pi) * std::exp(-ax * ax) * sum;
  } else {
    // erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))),
    // modified Lentz.
    constexpr double tiny = 1e-300;
    double f = ax, c = ax, dd = 0.0;
    for (int n = 1; n < 500; ++n) {
      const double a = 0.5 * n;
      dd = ax + a * dd;
      if (dd == 0) dd = tiny;
      c = ax + a / c;
      if (c == 0) c = tiny;
      dd = 1.0 / dd;
      const double delta = c * dd;
      f *= delta;
      if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    r = 1.0 - std::exp(-ax * ax) / std::sqrt(std::numbers::pi) / f;
  }
  return x < 0 ? -r : r;
}

double gelu_reference(double x, GeluKind kind) {
  if (kind == GeluKind::exact) return 0.5 * x * (1.0 + erf_precise(x / std::numbers::sqrt2));
  if (x < -3) return 0.0;
  if (x < -1) return 0.5 * x;
  if (x < 1) return 0.8413 * x + 0.1587;
  return x - 0.1587;
}

double exp_limit(double x) {
  double y = 1.0 + x / 256.0;
  for (int i = 0; i < 8; ++i) y *= y;
  return y;
}

double reciprocal_newton(double x) {
  double y = 3.0 * exp_limit(0.5 - x) + 0.003;
  for (int i = 0; i < 12; ++i) y = y * (2.0 - x * y);
  return y;
}

double rsqrt_newton(double x) {
  double y = 2.2 * exp_limit(-x / 2.0 - 0.2) + 0.2 - x / 2048.0;
  for (int i = 0; i < 10; ++i) y = y * (1.5 - x * y * y / 2.0);
  return y;
}

const std::vector<double>& gelu_poly_coefficients() {
  static const std::vector<double> coeffs = [] {
    constexpr int nodes = 64;
    std::vector<double> c(kGeluPolyDegree + 1, 0.0);
    for (int j = 0; j < nodes; ++j) {
      const double theta = std::numbers::pi * (j + 0.5) / nodes;
      const double g = gelu_reference(kGeluPolyHalfWidth * std::cos(theta), GeluKind::exact);
      for (int k = 0; k <= kGeluPolyDegree; ++k) c[k] += g * std::cos(k * theta);
    }
    for (auto& v : c) v *= 2.0 / nodes;
    c[0] /= 2.0;
    return c;
  }();
  return coeffs;
}

double gelu_poly(double x) {
  const auto& c = gelu_poly_coefficients();
  const double u = x / kGeluPolyHalfWidth;
  double b1 = 0, b2 = 0;
  for (int k = kGeluPolyDegree; k >= 1; --k) {
    const double bk = c[k] + 2.0 * u * b1 - b2;
    b2 = b1;
    b1 = bk;
  }
  return c[0] + u * b1 - b2;
}

ErrorProfile approx_error_profile(const std::function<double(double)>& exact,
                                  const std::function<double(double)>& approx, double lo,
                                  double hi, double step) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !std::isfinite(step) || step <= 0 || hi < lo) {
    throw RangeError("error profile needs a finite domain lo <= hi and step > 0");
  }
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  if (n > (std::size_t{1} << 26)) throw RangeError("error profile grid too large");
  ErrorProfile p;
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = lo + static_cast<double>(i) * step;
    const double e = exact(x), a = approx(x);
    const double err = std::fabs(e - a);
    p.grid.push_back(x);
    p.exact.push_back(e);
    p.approx.push_back(a);
    p.abs_error.push_back(err);
    sum += err;
    if (err > p.max_abs || i == 0) {
      p.max_abs = err;
      p.argmax_x = x;
    }
    if (e != 0) p.max_rel = std::max(p.max_rel, err / std::fabs(e));
  }
  // a constant error can round the mean one step above the max
  p.mean_abs = std::min(sum / static_cast<double>(n), p.max_abs);
  return p;
}

void write_profile_csv(const ErrorProfile& p, std::ostream& out) {
  out << "x,exact,approx,abs_error\n";
  char line[128];
  for (std::size_t i = 0; i < p.grid.size(); ++i) {
    std::snprintf(line, sizeof line, "%.10g,%.10g,%.10g,%.6g\n", p.grid[i], p.exact[i],
                  p.approx[i], p.abs_error[i]);
    out << line;
  }
}

// --- float engine -----------------------------------------------------------

namespace {

using Mat = std::vector<double>;

Mat matmul_f(const Mat& a, const Mat& b, std::size_t m, std::size_t k, std::size_t n) {
  Mat out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t t = 0; t < k; ++t) {
      const double av = a[i * k + t];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += av * b[t * n + j];
    }
  }
  return out;
}

struct FloatKernels {
  FloatMath math;
  GeluMode gelu_mode;

  double exp(double x) const { return math == FloatMath::mirror ? exp_limit(x) : std::exp(x); }
  double recip(double x) const {
    return math == FloatMath::mirror ? reciprocal_newton(x) : 1.0 / x;
  }
  double rsqrt(double x) const {
    return math == FloatMath::mirror ? rsqrt_newton(x) : 1.0 / std::sqrt(x);
  }
  double gelu(double x) const {
    if (gelu_mode == GeluMode::paper_piecewise) {
      return gelu_reference(x, GeluKind::paper_piecewise);
    }
    return math == FloatMath::mirror ? gelu_poly(x) : gelu_reference(x, GeluKind::exact);
  }

  void layernorm(Mat& x, std::size_t rows, std::size_t d, const Mat& g, const Mat& b) const {
    for (std::size_t r = 0; r < rows; ++r) {
      double* row = x.data() + r * d;
      double mean = 0;
      for (std::size_t j = 0; j < d; ++j) mean += row[j];
      mean /= static_cast<double>(d);
      double var = 0;
      for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
      const double inv = rsqrt(var / static_cast<double>(d) + 1e-5);
      for (std::size_t j = 0; j < d; ++j) row[j] = (row[j] - mean) * inv * g[j] + b[j];
    }
  }

  // Row softmax in place; masked entries are excluded in exact mode and get
  // the additive mask constant in mirror mode.
  void softmax(double* row, std::size_t n, std::size_t visible, double temperature) const {
    for (std::size_t j = visible; j < n; ++j) row[j] += -64.0;
    for (std::size_t j = 0; j < n; ++j) row[j] /= temperature;
    const std::size_t used = math == FloatMath::mirror ? n : visible;
    const double m = *std::max_element(row, row + used);
    double sum = 0;
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = j < used ? exp(row[j] - m) : 0.0;
      sum += row[j];
    }
    const double r = recip(sum);
    for (std::size_t j = 0; j < n; ++j) row[j] *= r;
  }
};

}  // namespace

std::vector<double> float_forward(const ModelWeights& w, const std::vector<int>& tokens,
                                  FloatMath math) {
  const auto& c = w.config;
  const std::size_t s = tokens.size(), d = c.d, V = c.vocab, ff = c.ffn();
  const std::size_t H = c.heads, dh = c.head_dim();
  if (s == 0 || s > static_cast<std::size_t>(c.max_seq)) {
    throw ShapeError("sequence length " + std::to_string(s) + " outside [1, max_seq]");
  }
  const FloatKernels K{math, c.gelu_mode};
  Mat h(s * d);
  for (std::size_t i = 0; i < s; ++i) {
    if (tokens[i] < 0 || tokens[i] >= c.vocab) throw ValidationError("token outside vocabulary");
    std::copy_n(w.embedding.begin() + static_cast<long>(tokens[i] * d), d,
                h.begin() + static_cast<long>(i * d));
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (const auto& L : w.layers) {
    K.layernorm(h, s, d, L.ln1_gamma, L.ln1_beta);
    const Mat q = matmul_f(h, L.wq, s, d, d);
    const Mat k = matmul_f(h, L.wk, s, d, d);
    const Mat v = matmul_f(h, L.wv, s, d, d);
    Mat ctx(s * d, 0.0);
    Mat row(s);
    for (std::size_t hd = 0; hd < H; ++hd) {
      for (std::size_t i = 0; i < s; ++i) {
        for (std::size_t j = 0; j < s; ++j) {
          double dot = 0;
          for (std::size_t t = 0; t < dh; ++t) dot += q[i * d + hd * dh + t] * k[j * d + hd * dh + t];
          row[j] = dot * scale;
        }
        K.softmax(row.data(), s, i + 1, c.temperature);
        for (std::size_t j = 0; j < s; ++j) {
          for (std::size_t t = 0; t < dh; ++t) ctx[i * d + hd * dh + t] += row[j] * v[j * d + hd * dh + t];
        }
      }
    }
    const Mat a = matmul_f(ctx, L.wo, s, d, d);
    for (std::size_t i = 0; i < s * d; ++i) h[i] += a[i];
    K.layernorm(h, s, d, L.ln2_gamma, L.ln2_beta);
    Mat u = matmul_f(h, L.w1, s, d, ff);
    for (std::size_t i = 0; i < s * ff; ++i) u[i] = K.gelu(u[i] + L.b1[i % ff]);
    const Mat f = matmul_f(u, L.w2, s, ff, d);
    for (std::size_t i = 0; i < s * d; ++i) h[i] += f[i] + L.b2[i % d];
  }
  return matmul_f(h, w.head, s, d, V);
}

// --- fixed-point engine -----------------------------------------------------

namespace fixed_ref {

namespace {

std::int64_t sgn(Ring v) { return static_cast<std::int64_t>(v); }

PublicTensor constant(const FixedPoint& fp, double v) {
  return PublicTensor::scalar(fp.encode(v), fp.frac_bits());
}

// Element-wise a op b, b broadcast as a suffix or scalar.
template <class Op>
PublicTensor zip(const PublicTensor& a, const PublicTensor& b, int scale, Op op) {
  const std::size_t nb = check_broadcast(a.shape, b.shape);
  PublicTensor out(a.shape, std::vector<Ring>(a.size()), scale);
  for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = op(a.data[i], b.data[i % nb]);
  return out;
}

PublicTensor add(const PublicTensor& a, const PublicTensor& b) {
  if (a.scale != b.scale) throw ScaleError("add scale mismatch");
  return zip(a, b, a.scale, [](Ring x, Ring y) { return x + y; });
}

PublicTensor sub(const PublicTensor& a, const PublicTensor& b) {
  if (a.scale != b.scale) throw ScaleError("sub scale mismatch");
  return zip(a, b, a.scale, [](Ring x, Ring y) { return x - y; });
}

PublicTensor neg(const PublicTensor& a) {
  PublicTensor out = a;
  for (auto& v : out.data) v = Ring{0} - v;
  return out;
}

PublicTensor reshape(PublicTensor a, Shape s) {
  if (shape_size(s) != a.size()) throw ShapeError("reshape size mismatch");
  a.shape = std::move(s);
  return a;
}

PublicTensor row_sum(const PublicTensor& a) {
  const std::size_t rows = leading_size(a.shape), n = last_dim(a.shape);
  PublicTensor out(Shape{rows, 1}, std::vector<Ring>(rows, 0), a.scale);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < n; ++j) out.data[r] += a.data[r * n + j];
  }
  return out;
}

PublicTensor row_max(const PublicTensor& a) {
  const std::size_t rows = leading_size(a.shape), n = last_dim(a.shape);
  PublicTensor out(Shape{rows, 1}, std::vector<Ring>(rows, 0), a.scale);
  for (std::size_t r = 0; r < rows; ++r) {
    std::int64_t m = sgn(a.data[r * n]);
    for (std::size_t j = 1; j < n; ++j) m = std::max(m, sgn(a.data[r * n + j]));
    out.data[r] = static_cast<Ring>(m);
  }
  return out;
}

PublicTensor repeat_cols(const PublicTensor& a, std::size_t n) {
  const std::size_t rows = a.size();
  PublicTensor out(Shape{rows, n}, std::vector<Ring>(rows * n), a.scale);
  for (std::size_t r = 0; r < rows; ++r) {
    std::fill_n(out.data.begin() + static_cast<long>(r * n), n, a.data[r]);
  }
  return out;
}

PublicTensor cols(const PublicTensor& a, std::size_t begin, std::size_t end) {
  const std::size_t rows = a.shape[0], n = a.shape[1], w = end - begin;
  PublicTensor out(Shape{rows, w}, std::vector<Ring>(rows * w), a.scale);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < w; ++j) out.data[r * w + j] = a.data[r * n + begin + j];
  }
  return out;
}

PublicTensor transpose(const PublicTensor& a) {
  const std::size_t m = a.shape[0], n = a.shape[1];
  PublicTensor out(Shape{n, m}, std::vector<Ring>(m * n), a.scale);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.data[j * m + i] = a.data[i * n + j];
  }
  return out;
}

PublicTensor mul_integer(const PublicTensor& a, std::int64_t k) {
  PublicTensor out = a;
  for (auto& v : out.data) v *= static_cast<Ring>(k);
  return out;
}

PublicTensor mul_trunc(const PublicTensor& a, const PublicTensor& b, const FixedPoint& fp) {
  return trunc(mul(a, b), fp.frac_bits());
}

}  // namespace

PublicTensor trunc(const PublicTensor& x, int bits) {
  PublicTensor out = x;
  for (auto& v : out.data) v = static_cast<Ring>(sgn(v) >> bits);
  out.scale = x.scale - bits;
  return out;
}

PublicTensor mul(const PublicTensor& a, const PublicTensor& b) {
  return zip(a, b, a.scale + b.scale, [](Ring x, Ring y) { return x * y; });
}

PublicTensor matmul(const PublicTensor& a, const PublicTensor& b) {
  if (a.shape.size() != 2 || b.shape.size() != 2 || a.shape[1] != b.shape[0]) {
    throw ShapeError("matmul " + shape_str(a.shape) + " by " + shape_str(b.shape));
  }
  const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
  PublicTensor out(Shape{m, n}, std::vector<Ring>(m * n, 0), a.scale + b.scale);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t t = 0; t < k; ++t) {
      const Ring av = a.data[i * k + t];
      for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] += av * b.data[t * n + j];
    }
  }
  return out;
}

PublicTensor less_than_zero(const PublicTensor& x) {
  PublicTensor out(x.shape, std::vector<Ring>(x.size()), 0);
  for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = sgn(x.data[i]) < 0 ? 1 : 0;
  return out;
}

PublicTensor exp(const PublicTensor& x, const FixedPoint& fp) {
  const int f = fp.frac_bits();
  const int extra = std::clamp(20 - f, 0, 8);
  const int s = f + extra;
  PublicTensor y = extra < 8 ? trunc(x, 8 - extra) : x;
  y.scale = s;
  y = add(y, PublicTensor::scalar(Ring{1} << s, s));
  for (int i = 0; i < 8; ++i) y = trunc(mul(y, y), i == 7 ? s + extra : s);
  return y;
}

PublicTensor reciprocal(const PublicTensor& x, const FixedPoint& fp) {
  PublicTensor y = mul_integer(exp(add(neg(x), constant(fp, 0.5)), fp), 3);
  y = add(y, constant(fp, 0.003));
  const PublicTensor two = constant(fp, 2.0);
  for (int i = 0; i < 12; ++i) {
    const PublicTensor t = mul_trunc(x, y, fp);
    y = mul_trunc(y, add(neg(t), two), fp);
  }
  return y;
}

PublicTensor rsqrt(const PublicTensor& x, const FixedPoint& fp) {
  const int f = fp.frac_bits();
  PublicTensor half = trunc(x, 1), slope = trunc(x, 11);
  half.scale = f;
  slope.scale = f;
  const PublicTensor e = exp(add(neg(half), constant(fp, -0.2)), fp);
  PublicTensor y = mul_trunc(e, constant(fp, 2.2), fp);
  y = sub(add(y, constant(fp, 0.2)), slope);
  const PublicTensor three_halves = constant(fp, 1.5);
  for (int i = 0; i < 10; ++i) {
    const PublicTensor xy = mul_trunc(x, y, fp);
    PublicTensor t = trunc(mul(xy, y), f + 1);
    t.scale = f;
    y = mul_trunc(y, add(neg(t), three_halves), fp);
  }
  return y;
}

PublicTensor linear(const PublicTensor& x, const PublicTensor& w, const PublicTensor* b,
                    const FixedPoint& fp) {
  if (x.shape.empty() || w.shape.size() != 2 || last_dim(x.shape) != w.shape[0]) {
    throw ShapeError("linear of " + shape_str(x.shape) + " by " + shape_str(w.shape));
  }
  const std::size_t m = leading_size(x.shape), k = last_dim(x.shape);
  PublicTensor y = trunc(matmul(reshape(x, Shape{m, k}), w), fp.frac_bits());
  Shape shape = x.shape;
  shape.back() = w.shape[1];
  y = reshape(std::move(y), shape);
  if (b != nullptr) y = add(y, *b);
  return y;
}

PublicTensor layernorm(const PublicTensor& x, const PublicTensor& gamma,
                       const PublicTensor& beta, const FixedPoint& fp, double eps) {
  const std::size_t rows = leading_size(x.shape), d = last_dim(x.shape);
  const PublicTensor x2 = reshape(x, Shape{rows, d});
  const PublicTensor inv_d = constant(fp, 1.0 / static_cast<double>(d));
  const PublicTensor mean = mul_trunc(row_sum(x2), inv_d, fp);
  const PublicTensor c = sub(x2, repeat_cols(mean, d));
  const PublicTensor sq_sum = trunc(row_sum(mul(c, c)), fp.frac_bits());
  const PublicTensor var = add(mul_trunc(sq_sum, inv_d, fp), constant(fp, eps));
  const PublicTensor normed = mul_trunc(c, repeat_cols(rsqrt(var, fp), d), fp);
  return reshape(add(mul_trunc(normed, gamma, fp), beta), x.shape);
}

PublicTensor gelu(const PublicTensor& x, const FixedPoint& fp) {
  const PublicTensor below_m3 = less_than_zero(add(x, constant(fp, 3.0)));
  const PublicTensor below_m1 = less_than_zero(add(x, constant(fp, 1.0)));
  const PublicTensor below_1 = less_than_zero(add(x, constant(fp, -1.0)));
  const PublicTensor s1 = mul_trunc(x, constant(fp, 0.5), fp);
  const PublicTensor s2 = add(mul_trunc(x, constant(fp, 0.8413), fp), constant(fp, 0.1587));
  const PublicTensor s3 = add(x, constant(fp, -0.1587));
  PublicTensor r = add(s3, mul(below_1, sub(s2, s3)));
  r = add(r, mul(below_m1, sub(s1, s2)));
  return add(r, mul(below_m3, neg(s1)));
}

PublicTensor gelu_poly(const PublicTensor& x, const FixedPoint& fp) {
  const auto& c = gelu_poly_coefficients();
  const PublicTensor u = mul_trunc(x, constant(fp, 1.0 / kGeluPolyHalfWidth), fp);
  PublicTensor b2(x.shape, std::vector<Ring>(x.size(), 0), x.scale);
  PublicTensor b1 = add(b2, constant(fp, c[kGeluPolyDegree]));
  for (int k = kGeluPolyDegree - 1; k >= 1; --k) {
    PublicTensor bk = add(sub(mul_integer(mul_trunc(u, b1, fp), 2), b2), constant(fp, c[k]));
    b2 = std::move(b1);
    b1 = std::move(bk);
  }
  return add(sub(mul_trunc(u, b1, fp), b2), constant(fp, c[0]));
}

PublicTensor softmax(const PublicTensor& x, double temperature,
                     const std::vector<std::uint8_t>& mask, const FixedPoint& fp) {
  const std::size_t rows = leading_size(x.shape), n = last_dim(x.shape);
  PublicTensor y = reshape(x, Shape{rows, n});
  if (!mask.empty()) {
    if (mask.size() != y.size()) throw ShapeError("softmax mask size mismatch");
    const Ring m = fp.encode(-64.0);
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) y.data[i] += m;
    }
  }
  if (temperature != 1.0) y = mul_trunc(y, constant(fp, 1.0 / temperature), fp);
  const PublicTensor e = exp(sub(y, repeat_cols(row_max(y), n)), fp);
  const PublicTensor r = reciprocal(row_sum(e), fp);
  return reshape(mul_trunc(e, repeat_cols(r, n), fp), x.shape);
}

PublicTensor attention(const PublicTensor& q, const PublicTensor& k, const PublicTensor& v,
                       int heads, bool causal, const PublicTensor& wo, double temperature,
                       const FixedPoint& fp, std::size_t offset) {
  if (q.shape.size() != 2 || k.shape.size() != 2 || v.shape != k.shape ||
      q.shape[1] != k.shape[1]) {
    throw ShapeError("attention shape mismatch");
  }
  const std::size_t sq = q.shape[0], sk = k.shape[0], d = q.shape[1];
  if (heads < 1 || d % static_cast<std::size_t>(heads) != 0) {
    throw ShapeError("hidden size not divisible by heads");
  }
  const std::size_t H = static_cast<std::size_t>(heads), dh = d / H;
  const int f = fp.frac_bits();

  PublicTensor all(Shape{H * sq, sk}, std::vector<Ring>(H * sq * sk), f);
  for (std::size_t h = 0; h < H; ++h) {
    const PublicTensor s =
        trunc(matmul(cols(q, h * dh, (h + 1) * dh), transpose(cols(k, h * dh, (h + 1) * dh))), f);
    std::copy(s.data.begin(), s.data.end(), all.data.begin() + static_cast<long>(h * sq * sk));
  }
  all = mul_trunc(all, constant(fp, 1.0 / std::sqrt(static_cast<double>(dh))), fp);
  std::vector<std::uint8_t> mask;
  if (causal) {
    mask.assign(H * sq * sk, 0);
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t i = 0; i < sq; ++i) {
        for (std::size_t j = offset + i + 1; j < sk; ++j) mask[(h * sq + i) * sk + j] = 1;
      }
    }
  }
  const PublicTensor p = softmax(all, temperature, mask, fp);
  PublicTensor joined(Shape{sq, d}, std::vector<Ring>(sq * d), f);
  for (std::size_t h = 0; h < H; ++h) {
    PublicTensor ph(Shape{sq, sk},
                    std::vector<Ring>(p.data.begin() + static_cast<long>(h * sq * sk),
                                      p.data.begin() + static_cast<long>((h + 1) * sq * sk)),
                    f);
    const PublicTensor ctx = trunc(matmul(ph, cols(v, h * dh, (h + 1) * dh)), f);
    for (std::size_t i = 0; i < sq; ++i) {
      for (std::size_t j = 0; j < dh; ++j) joined.data[i * d + h * dh + j] = ctx.data[i * dh + j];
    }
  }
  return linear(joined, wo, nullptr, fp);
}

}  // namespace fixed_ref

PublicTensor fixed_forward(const EncodedModel& m, const std::vector<int>& tokens) {
  const auto& c = m.config;
  const auto& fp = m.fixed_point;
  const std::size_t s = tokens.size(), d = c.d;
  if (s == 0 || s > static_cast<std::size_t>(c.max_seq)) {
    throw ShapeError("sequence length " + std::to_string(s) + " outside [1, max_seq]");
  }
  PublicTensor h(Shape{s, d}, std::vector<Ring>(s * d), fp.frac_bits());
  for (std::size_t i = 0; i < s; ++i) {
    if (tokens[i] < 0 || tokens[i] >= c.vocab) throw ValidationError("token outside vocabulary");
    std::copy_n(m.embedding.data.begin() + static_cast<long>(tokens[i] * d), d,
                h.data.begin() + static_cast<long>(i * d));
  }
  for (const auto& L : m.layers) {
    h = fixed_ref::layernorm(h, L.ln1_gamma, L.ln1_beta, fp);
    const PublicTensor q = fixed_ref::linear(h, L.wq, nullptr, fp);
    const PublicTensor k = fixed_ref::linear(h, L.wk, nullptr, fp);
    const PublicTensor v = fixed_ref::linear(h, L.wv, nullptr, fp);
    const PublicTensor a = fixed_ref::attention(q, k, v, c.heads, true, L.wo, c.temperature, fp);
    for (std::size_t i = 0; i < h.size(); ++i) h.data[i] += a.data[i];
    h = fixed_ref::layernorm(h, L.ln2_gamma, L.ln2_beta, fp);
    const PublicTensor u = fixed_ref::linear(h, L.w1, &L.b1, fp);
    const PublicTensor g = c.gelu_mode == GeluMode::paper_piecewise ? fixed_ref::gelu(u, fp)
                                                                     : fixed_ref::gelu_poly(u, fp);
    const PublicTensor f = fixed_ref::linear(g, L.w2, &L.b2, fp);
    for (std::size_t i = 0; i < h.size(); ++i) h.data[i] += f.data[i];
  }
  return fixed_ref::linear(h, m.head, nullptr, fp);
}

namespace {

template <class Value>
int first_argmax(const Value* row, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < n; ++j) {
    if (row[j] > row[best]) best = j;
  }
  return static_cast<int>(best);
}

void check_generate(const ModelConfig& c, std::size_t prompt, int steps) {
  if (steps < 1) throw ValidationError("generation needs at least one step");
  if (prompt == 0 || prompt + static_cast<std::size_t>(steps) > static_cast<std::size_t>(c.max_seq)) {
    throw CapacityError("prompt plus steps exceeds max_seq");
  }
}

}  // namespace

std::vector<int> fixed_generate(const EncodedModel& m, std::vector<int> tokens, int steps) {
  check_generate(m.config, tokens.size(), steps);
  const std::size_t V = m.config.vocab;
  std::vector<int> out;
  for (int i = 0; i < steps; ++i) {
    const PublicTensor logits = fixed_forward(m, tokens);
    std::vector<std::int64_t> last(V);
    for (std::size_t j = 0; j < V; ++j) {
      last[j] = static_cast<std::int64_t>(logits.data[(tokens.size() - 1) * V + j]);
    }
    out.push_back(first_argmax(last.data(), V));
    tokens.push_back(out.back());
  }
  return out;
}

std::vector<int> float_generate(const ModelWeights& w, std::vector<int> tokens, int steps,
                                FloatMath math) {
  check_generate(w.config, tokens.size(), steps);
  const std::size_t V = w.config.vocab;
  std::vector<int> out;
  for (int i = 0; i < steps; ++i) {
    const std::vector<double> logits = float_forward(w, tokens, math);
    out.push_back(first_argmax(logits.data() + (tokens.size() - 1) * V, V));
    tokens.push_back(out.back());
  }
  return out;
}

}  // namespace privswarm

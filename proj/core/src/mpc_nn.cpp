#include "privswarm/mpc_nn.hpp"

#include <cmath>
#include <string>

#include "privswarm/errors.hpp"
#include "privswarm/protocols.hpp"

namespace privswarm {

namespace {

PublicTensor pub(Party& party, double v) {
  return PublicTensor::scalar(party.fixed_point().encode(v), party.frac_bits());
}

// [n] -> [rows x n]
SharedTensor broadcast_rows(const SharedTensor& b, std::size_t rows) {
  const std::size_t n = b.size();
  SharedTensor out(b.party, Shape{rows, n}, b.scale);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(b.first.begin(), b.first.end(), out.first.begin() + r * n);
    std::copy(b.second.begin(), b.second.end(), out.second.begin() + r * n);
  }
  return out;
}

SharedTensor cols_slice(const SharedTensor& a, std::size_t begin, std::size_t end) {
  const std::size_t rows = leading_size(a.shape), cols = last_dim(a.shape);
  const std::size_t w = end - begin;
  SharedTensor out(a.party, Shape{rows, w}, a.scale);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < w; ++j) {
      out.first[r * w + j] = a.first[r * cols + begin + j];
      out.second[r * w + j] = a.second[r * cols + begin + j];
    }
  }
  return out;
}

// Truncates several tensors in one round and restores their shapes.
std::vector<SharedTensor> trunc_many(Party& party, const std::vector<SharedTensor>& xs) {
  std::vector<SharedTensor> flat;
  std::vector<std::size_t> sizes;
  for (const auto& x : xs) {
    SharedTensor f = x;
    f.shape = Shape{x.size()};
    flat.push_back(std::move(f));
    sizes.push_back(x.size());
  }
  auto parts = split_flat(trunc(party, concat_flat(flat)), sizes);
  for (std::size_t i = 0; i < parts.size(); ++i) parts[i] = reshape(parts[i], xs[i].shape);
  return parts;
}

void check_param_scale(const Param& p, int f, const char* what) {
  const int s = p.is_shared() ? p.shared->scale : p.value.scale;
  if (s != f) throw ScaleError(std::string(what) + " must be at scale f");
}

// Untruncated x * W at scale 2f.
SharedTensor product(Party& party, const SharedTensor& x, const Param& w) {
  if (x.shape.empty() || w.shape().size() != 2 || last_dim(x.shape) != w.shape()[0]) {
    throw ShapeError("linear of " + shape_str(x.shape) + " by " + shape_str(w.shape()));
  }
  if (!w.is_shared()) return matmul_public(x, w.value);
  const std::size_t m = leading_size(x.shape), k = last_dim(x.shape);
  SharedTensor y = matmul(party, reshape(x, Shape{m, k}), *w.shared);
  Shape shape = x.shape;
  shape.back() = w.shape()[1];
  return reshape(std::move(y), shape);
}

SharedTensor add_bias(const SharedTensor& y, const Param& b) {
  if (b.shape() != Shape{last_dim(y.shape)}) {
    throw ShapeError("bias " + shape_str(b.shape()) + " for output " + shape_str(y.shape));
  }
  if (!b.is_shared()) return add_public(y, b.value);
  return add(y, reshape(broadcast_rows(*b.shared, leading_size(y.shape)), y.shape));
}

// Element-wise product with a per-column parameter [d], truncated.
SharedTensor scale_cols(Party& party, const SharedTensor& y, const Param& g) {
  if (g.shape() != Shape{last_dim(y.shape)}) {
    throw ShapeError("gain " + shape_str(g.shape()) + " for " + shape_str(y.shape));
  }
  if (!g.is_shared()) return trunc(party, mul_public(y, g.value));
  return mul_trunc(party, y, reshape(broadcast_rows(*g.shared, leading_size(y.shape)), y.shape));
}

Param public_param(const PublicTensor& t) { return Param{t, std::nullopt}; }

// Visits the tensors of one layer with their shapes.
template <class L, class F>
void for_each_layer_tensor(L& layer, const ModelConfig& c, F&& fn) {
  const std::size_t d = c.d, ff = c.ffn();
  fn(layer.ln1_gamma, Shape{d});
  fn(layer.ln1_beta, Shape{d});
  fn(layer.wq, Shape{d, d});
  fn(layer.wk, Shape{d, d});
  fn(layer.wv, Shape{d, d});
  fn(layer.wo, Shape{d, d});
  fn(layer.ln2_gamma, Shape{d});
  fn(layer.ln2_beta, Shape{d});
  fn(layer.w1, Shape{d, ff});
  fn(layer.b1, Shape{ff});
  fn(layer.w2, Shape{ff, d});
  fn(layer.b2, Shape{d});
}

}  // namespace

MpcModel public_model(const EncodedModel& m) {
  MpcModel out;
  out.config = m.config;
  out.embedding = public_param(m.embedding);
  out.head = public_param(m.head);
  for (const auto& L : m.layers) {
    out.layers.push_back({public_param(L.ln1_gamma), public_param(L.ln1_beta),
                          public_param(L.wq), public_param(L.wk), public_param(L.wv),
                          public_param(L.wo), public_param(L.ln2_gamma),
                          public_param(L.ln2_beta), public_param(L.w1),
                          public_param(L.b1), public_param(L.w2), public_param(L.b2)});
  }
  return out;
}

MpcModel share_model(Party& party, PartyId owner, const std::optional<EncodedModel>& model,
                     const ModelConfig& config) {
  config.validate();
  const bool mine = party.id() == owner;
  if (mine && !model) throw ValidationError("model owner must provide the weights");
  const int f = party.frac_bits();
  auto share_one = [&](const PublicTensor* value, const Shape& shape) {
    std::optional<PublicTensor> v;
    if (mine) v = *value;
    Param p;
    p.shared = share_input(party, owner, v, shape, f);
    return p;
  };
  const std::size_t d = config.d, vocab = config.vocab;
  MpcModel out;
  out.config = config;
  out.embedding = share_one(mine ? &model->embedding : nullptr, Shape{vocab, d});
  out.layers.resize(static_cast<std::size_t>(config.layers));
  for (std::size_t l = 0; l < out.layers.size(); ++l) {
    std::vector<const PublicTensor*> src;
    if (mine) {
      for_each_layer_tensor(model->layers[l], config,
                            [&](const PublicTensor& t, const Shape&) { src.push_back(&t); });
    }
    std::size_t i = 0;
    for_each_layer_tensor(out.layers[l], config, [&](Param& p, const Shape& shape) {
      p = share_one(mine ? src[i] : nullptr, shape);
      ++i;
    });
  }
  out.head = share_one(mine ? &model->head : nullptr, Shape{d, vocab});
  return out;
}

SharedTensor mpc_linear(Party& party, const SharedTensor& x, const Param& w,
                        const Param* b) {
  PhaseScope scope(party, Phase::linear);
  check_param_scale(w, party.frac_bits(), "weight");
  SharedTensor y = trunc(party, product(party, x, w));
  if (b != nullptr) y = add_bias(y, *b);
  return y;
}

SharedTensor mpc_layernorm(Party& party, const SharedTensor& x, const Param& gamma,
                           const Param& beta, double eps) {
  if (x.shape.empty() || last_dim(x.shape) == 0) throw ShapeError("layernorm of empty rows");
  if (!(eps > 0)) throw ValidationError("layernorm epsilon must be positive");
  const std::size_t rows = leading_size(x.shape), d = last_dim(x.shape);
  const SharedTensor x2 = reshape(x, Shape{rows, d});
  const PublicTensor inv_d = pub(party, 1.0 / static_cast<double>(d));

  const SharedTensor mean = trunc(party, mul_public(row_sum(x2), inv_d));
  const SharedTensor c = sub(x2, repeat_cols(mean, d));
  const SharedTensor sq_sum = trunc(party, row_sum(mul(party, c, c)));
  SharedTensor var = trunc(party, mul_public(sq_sum, inv_d));
  var = add_public(var, pub(party, eps));
  const SharedTensor r = rsqrt_approx(party, var);
  const SharedTensor normed = mul_trunc(party, c, repeat_cols(r, d));
  SharedTensor y = add_bias(scale_cols(party, normed, gamma), beta);
  return reshape(std::move(y), x.shape);
}

SharedTensor mpc_gelu(Party& party, const SharedTensor& x) {
  PhaseScope scope(party, Phase::gelu);
  if (x.scale != party.frac_bits()) throw ScaleError("gelu expects scale f");
  const std::size_t n = x.size();
  const Shape flat{n};
  const SharedTensor xf = reshape(x, flat);

  // Branch bits [x < -3], [x < -1], [x < 1] in one comparison.
  const std::vector<SharedTensor> shifted = {add_public(xf, pub(party, 3.0)),
                                             add_public(xf, pub(party, 1.0)),
                                             add_public(xf, pub(party, -1.0))};
  const std::size_t three[3] = {n, n, n};
  const auto bits = split_flat(msb(party, concat_flat(shifted)), three);
  const SharedTensor& below_m3 = bits[0];
  const SharedTensor& below_m1 = bits[1];
  const SharedTensor& below_1 = bits[2];

  const auto lin = trunc_many(party, {mul_public(xf, pub(party, 0.5)),
                                      mul_public(xf, pub(party, 0.8413))});
  const SharedTensor s1 = lin[0];
  const SharedTensor s2 = add_public(lin[1], pub(party, 0.1587));
  const SharedTensor s3 = add_public(xf, pub(party, -0.1587));

  // r = s3 + [x<1](s2 - s3) + [x<-1](s1 - s2) + [x<-3](0 - s1)
  const std::vector<SharedTensor> sel = {below_1, below_m1, below_m3};
  const std::vector<SharedTensor> diff = {sub(s2, s3), sub(s1, s2), neg(s1)};
  const auto prods = split_flat(mul(party, concat_flat(sel), concat_flat(diff)), three);
  SharedTensor r = add(add(add(s3, prods[0]), prods[1]), prods[2]);
  return reshape(std::move(r), x.shape);
}

SharedTensor mpc_gelu_poly(Party& party, const SharedTensor& x) {
  PhaseScope scope(party, Phase::gelu);
  if (x.scale != party.frac_bits()) throw ScaleError("gelu expects scale f");
  const auto& c = gelu_poly_coefficients();
  const int n = static_cast<int>(c.size()) - 1;
  const SharedTensor u = trunc(party, mul_public(x, pub(party, 1.0 / kGeluPolyHalfWidth)));
  // Clenshaw: b_k = c_k + 2u b_{k+1} - b_{k+2}.
  SharedTensor b2 = SharedTensor::zeros(party.id(), x.shape, x.scale);
  SharedTensor b1 = add_public(b2, pub(party, c[n]));
  for (int k = n - 1; k >= 1; --k) {
    const SharedTensor t = mul_trunc(party, u, b1);
    SharedTensor bk = add_public(sub(mul_integer(t, 2), b2), pub(party, c[k]));
    b2 = std::move(b1);
    b1 = std::move(bk);
  }
  return add_public(sub(mul_trunc(party, u, b1), b2), pub(party, c[0]));
}

SharedTensor mpc_softmax(Party& party, const SharedTensor& x, double temperature,
                         const std::vector<std::uint8_t>& mask) {
  PhaseScope scope(party, Phase::softmax);
  if (x.shape.empty() || last_dim(x.shape) == 0) throw ShapeError("softmax over empty rows");
  if (!(temperature > 0)) throw ValidationError("temperature must be positive");
  const std::size_t rows = leading_size(x.shape), n = last_dim(x.shape);
  SharedTensor y = reshape(x, Shape{rows, n});
  if (!mask.empty()) {
    if (mask.size() != y.size()) throw ShapeError("softmax mask size mismatch");
    const Ring m = party.fixed_point().encode(kSoftmaxMask);
    PublicTensor bias(y.shape, std::vector<Ring>(y.size(), 0), party.frac_bits());
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) bias.data[i] = m;
    }
    y = add_public(y, bias);
  }
  if (temperature != 1.0) y = trunc(party, mul_public(y, pub(party, 1.0 / temperature)));
  const SharedTensor z = sub(y, repeat_cols(max_last(party, y), n));
  const SharedTensor e = exp_approx(party, z);
  const SharedTensor r = reciprocal_approx(party, row_sum(e));
  return reshape(mul_trunc(party, e, repeat_cols(r, n)), x.shape);
}

SharedTensor mpc_attention(Party& party, const SharedTensor& q, const SharedTensor& k,
                           const SharedTensor& v, int heads, bool causal, const Param& wo,
                           double temperature, std::size_t offset) {
  if (q.shape.size() != 2 || k.shape.size() != 2 || v.shape != k.shape ||
      q.shape[1] != k.shape[1]) {
    throw ShapeError("attention over q " + shape_str(q.shape) + ", k " + shape_str(k.shape) +
                     ", v " + shape_str(v.shape));
  }
  const std::size_t sq = q.shape[0], sk = k.shape[0], d = q.shape[1];
  if (heads < 1 || d % static_cast<std::size_t>(heads) != 0) {
    throw ShapeError("hidden size not divisible by heads");
  }
  if (causal && offset + sq > sk) throw ShapeError("causal queries beyond the keys");
  const std::size_t H = static_cast<std::size_t>(heads), dh = d / H;

  std::vector<SharedTensor> qh, kt, vh;
  for (std::size_t h = 0; h < H; ++h) {
    qh.push_back(cols_slice(q, h * dh, (h + 1) * dh));
    kt.push_back(transpose(cols_slice(k, h * dh, (h + 1) * dh)));
    vh.push_back(cols_slice(v, h * dh, (h + 1) * dh));
  }
  std::vector<SharedTensor> scores = trunc_many(party, matmul_batch(party, qh, kt));
  SharedTensor all = scores[0];
  for (std::size_t h = 1; h < H; ++h) all = concat_rows(all, scores[h]);
  all = trunc(party, mul_public(all, pub(party, 1.0 / std::sqrt(static_cast<double>(dh)))));

  std::vector<std::uint8_t> mask;
  if (causal) {
    mask.assign(H * sq * sk, 0);
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t i = 0; i < sq; ++i) {
        for (std::size_t j = offset + i + 1; j < sk; ++j) mask[(h * sq + i) * sk + j] = 1;
      }
    }
  }
  const SharedTensor p = mpc_softmax(party, all, temperature, mask);
  std::vector<SharedTensor> ph;
  for (std::size_t h = 0; h < H; ++h) ph.push_back(slice_rows(p, h * sq, (h + 1) * sq));
  const std::vector<SharedTensor> ctx = trunc_many(party, matmul_batch(party, ph, vh));

  SharedTensor joined(q.party, Shape{sq, d}, ctx[0].scale);
  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t i = 0; i < sq; ++i) {
      for (std::size_t j = 0; j < dh; ++j) {
        joined.first[i * d + h * dh + j] = ctx[h].first[i * dh + j];
        joined.second[i * d + h * dh + j] = ctx[h].second[i * dh + j];
      }
    }
  }
  return mpc_linear(party, joined, wo, nullptr);
}

SharedTensor secure_forward(Party& party, const SharedTensor& x, const MpcModel& model,
                            KvCache* cache) {
  const auto& c = model.config;
  const std::size_t d = c.d;
  if (x.shape.size() != 2 || x.shape[1] != d) {
    throw ShapeError("forward expects [s x " + std::to_string(d) + "], got " +
                     shape_str(x.shape));
  }
  const std::size_t s = x.shape[0];
  const std::size_t start = cache != nullptr ? cache->length : 0;
  if (start + s > static_cast<std::size_t>(c.max_seq)) {
    throw CapacityError("sequence of " + std::to_string(start + s) + " exceeds max_seq " +
                        std::to_string(c.max_seq));
  }
  if (cache != nullptr && cache->keys.size() != model.layers.size()) {
    cache->keys.assign(model.layers.size(), SharedTensor{});
    cache->values.assign(model.layers.size(), SharedTensor{});
  }

  SharedTensor h = x;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const LayerParams& L = model.layers[l];
    h = mpc_layernorm(party, h, L.ln1_gamma, L.ln1_beta);
    std::vector<SharedTensor> qkv;
    {
      PhaseScope scope(party, Phase::linear);
      qkv = trunc_many(party, {product(party, h, L.wq), product(party, h, L.wk),
                               product(party, h, L.wv)});
    }
    SharedTensor keys = qkv[1], values = qkv[2];
    if (cache != nullptr) {
      keys = concat_rows(cache->keys[l], keys);
      values = concat_rows(cache->values[l], values);
      cache->keys[l] = keys;
      cache->values[l] = values;
    }
    const SharedTensor a =
        mpc_attention(party, qkv[0], keys, values, c.heads, true, L.wo, c.temperature, start);
    h = add(h, a);
    h = mpc_layernorm(party, h, L.ln2_gamma, L.ln2_beta);
    const SharedTensor u = mpc_linear(party, h, L.w1, &L.b1);
    const SharedTensor g = c.gelu_mode == GeluMode::paper_piecewise ? mpc_gelu(party, u)
                                                                     : mpc_gelu_poly(party, u);
    h = add(h, mpc_linear(party, g, L.w2, &L.b2));
  }
  if (cache != nullptr) cache->length += s;
  return mpc_linear(party, h, model.head, nullptr);
}

namespace {

SharedTensor embed(Party& party, const SharedTensor& onehot, const MpcModel& model) {
  if (model.embedding.is_shared()) return matmul(party, onehot, *model.embedding.shared);
  return matmul_public(onehot, model.embedding.value);
}

}  // namespace

GenerateResult secure_generate(Party& party, const SharedTensor& prompt, const MpcModel& model,
                               const GenerateOptions& opts) {
  const auto& c = model.config;
  if (opts.steps < 1) throw ValidationError("generation needs at least one step");
  if (prompt.shape.size() != 2 || prompt.shape[0] == 0) {
    throw ShapeError("prompt must be a non-empty matrix");
  }
  const std::size_t s = prompt.shape[0];
  if (s + static_cast<std::size_t>(opts.steps) > static_cast<std::size_t>(c.max_seq)) {
    throw CapacityError("prompt of " + std::to_string(s) + " plus " +
                        std::to_string(opts.steps) + " steps exceeds max_seq " +
                        std::to_string(c.max_seq));
  }
  SharedTensor seq = model.shared_weights() ? embed(party, prompt, model) : prompt;
  const std::size_t vocab = c.vocab;

  GenerateResult out;
  out.onehots = SharedTensor(party.id(), Shape{0, vocab}, 0);
  KvCache cache;
  SharedTensor fresh = seq;
  for (int step = 0; step < opts.steps; ++step) {
    const std::uint64_t before = party.stats().mul_elements;
    const SharedTensor logits =
        opts.cache ? secure_forward(party, fresh, model, &cache) : secure_forward(party, seq, model);
    const std::size_t rows = logits.shape[0];
    const SharedTensor oh = argmax_onehot(party, slice_rows(logits, rows - 1, rows));
    out.onehots = concat_rows(out.onehots, oh);
    const bool more = step + 1 < opts.steps;
    if (opts.reveal_tokens) {
      const int token = decode_onehots(reveal(party, oh), vocab)[0];
      out.revealed.push_back(token);
      if (more) {
        PublicTensor hot(Shape{1, vocab}, std::vector<Ring>(vocab, 0), 0);
        hot.data[static_cast<std::size_t>(token)] = 1;
        fresh = embed(party, SharedTensor::from_public(party.id(), hot), model);
      }
    } else if (more) {
      fresh = embed(party, oh, model);
    }
    if (more) seq = concat_rows(seq, fresh);
    out.step_mul_elements.push_back(party.stats().mul_elements - before);
  }
  return out;
}

PublicTensor embed_tokens(const EncodedModel& m, const std::vector<int>& tokens) {
  const std::size_t d = m.config.d;
  PublicTensor out(Shape{tokens.size(), d}, std::vector<Ring>(tokens.size() * d),
                   m.fixed_point.frac_bits());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] < 0 || tokens[i] >= m.config.vocab) {
      throw ValidationError("token id " + std::to_string(tokens[i]) + " outside vocabulary");
    }
    const auto row = m.embedding.data.begin() + static_cast<long>(tokens[i] * d);
    std::copy(row, row + static_cast<long>(d), out.data.begin() + static_cast<long>(i * d));
  }
  return out;
}

PublicTensor onehot_tokens(const ModelConfig& c, const std::vector<int>& tokens) {
  const std::size_t v = c.vocab;
  PublicTensor out(Shape{tokens.size(), v}, std::vector<Ring>(tokens.size() * v, 0), 0);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] < 0 || tokens[i] >= c.vocab) {
      throw ValidationError("token id " + std::to_string(tokens[i]) + " outside vocabulary");
    }
    out.data[i * v + static_cast<std::size_t>(tokens[i])] = 1;
  }
  return out;
}

std::vector<int> decode_onehots(const std::vector<Ring>& v, std::size_t vocab) {
  if (vocab == 0 || v.size() % vocab != 0) throw ValidationError("one-hot size mismatch");
  std::vector<int> out;
  for (std::size_t r = 0; r < v.size() / vocab; ++r) {
    int at = -1;
    for (std::size_t j = 0; j < vocab; ++j) {
      const Ring x = v[r * vocab + j];
      if (x == 1 && at < 0) {
        at = static_cast<int>(j);
      } else if (x != 0) {
        throw ValidationError("row " + std::to_string(r) + " is not one-hot");
      }
    }
    if (at < 0) throw ValidationError("row " + std::to_string(r) + " is all zero");
    out.push_back(at);
  }
  return out;
}

}  // namespace privswarm

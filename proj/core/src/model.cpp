#include "privswarm/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>

#include "privswarm/errors.hpp"
#include "privswarm/prg.hpp"

namespace privswarm {

namespace {

constexpr char kMagic[4] = {'P', 'L', 'S', 'W'};
constexpr std::uint16_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 2 + 6 * 4;

// Visits every tensor of the model in file order with its expected size.
template <class Model, class F>
void for_each_tensor(Model& w, F&& fn) {
  const auto& c = w.config;
  const std::size_t d = c.d, ff = c.ffn(), v = c.vocab;
  fn("embedding", w.embedding, v * d);
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    auto& L = w.layers[l];
    const std::string p = "layer" + std::to_string(l) + ".";
    fn(p + "ln1_gamma", L.ln1_gamma, d);
    fn(p + "ln1_beta", L.ln1_beta, d);
    fn(p + "wq", L.wq, d * d);
    fn(p + "wk", L.wk, d * d);
    fn(p + "wv", L.wv, d * d);
    fn(p + "wo", L.wo, d * d);
    fn(p + "ln2_gamma", L.ln2_gamma, d);
    fn(p + "ln2_beta", L.ln2_beta, d);
    fn(p + "w1", L.w1, d * ff);
    fn(p + "b1", L.b1, ff);
    fn(p + "w2", L.w2, ff * d);
    fn(p + "b2", L.b2, d);
  }
  fn("head", w.head, d * v);
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
std::uint32_t get32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 |
         std::uint32_t{p[3]} << 24;
}

class Gaussian {
 public:
  explicit Gaussian(std::uint64_t seed) : prg_(seed, 0x6d6f64656cULL) {}
  double operator()(double sd) {
    // Box-Muller over 53-bit uniforms.
    const double u1 = (static_cast<double>(prg_.next() >> 11) + 1.0) * 0x1p-53;
    const double u2 = static_cast<double>(prg_.next() >> 11) * 0x1p-53;
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2 * std::numbers::pi * u2);
    return static_cast<float>(z * sd);
  }

 private:
  Prg prg_;
};

PublicTensor encode(const FixedPoint& fp, const std::vector<double>& v, Shape shape) {
  return PublicTensor(std::move(shape), fp.encode(v), fp.frac_bits());
}

}  // namespace

void ModelConfig::validate() const {
  if (layers < 0) throw ValidationError("layer count must be >= 0");
  if (d < 1 || heads < 1 || d % heads != 0) {
    throw ValidationError("hidden size " + std::to_string(d) +
                          " must be a positive multiple of heads " +
                          std::to_string(heads));
  }
  if (vocab < 1) throw ValidationError("vocab must be >= 1");
  if (max_seq < 1) throw ValidationError("max_seq must be >= 1");
  if (d_ff < 0) throw ValidationError("d_ff must be >= 0");
  if (!(temperature > 0) || !std::isfinite(temperature)) {
    throw ValidationError("temperature must be positive");
  }
}

void ModelWeights::validate() const {
  config.validate();
  if (layers.size() != static_cast<std::size_t>(config.layers)) {
    throw ValidationError("model has " + std::to_string(layers.size()) +
                          " layers, config says " + std::to_string(config.layers));
  }
  for_each_tensor(*this, [](const std::string& name, const std::vector<double>& t,
                            std::size_t n) {
    if (t.size() != n) {
      throw ValidationError(name + " has " + std::to_string(t.size()) +
                            " values, expected " + std::to_string(n));
    }
    for (double v : t) {
      if (!std::isfinite(v)) throw ValidationError(name + " holds a non-finite value");
    }
  });
}

ModelWeights random_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Gaussian g(seed);
  ModelWeights w;
  w.config = config;
  w.layers.resize(static_cast<std::size_t>(config.layers));
  const double d = config.d, ff = config.ffn();
  auto fill = [&](std::vector<double>& t, std::size_t n, double mean, double sd) {
    t.resize(n);
    for (auto& v : t) v = static_cast<float>(mean + g(sd));
  };
  const std::size_t D = config.d, F = config.ffn(), V = config.vocab;
  fill(w.embedding, V * D, 0, 1);
  for (auto& L : w.layers) {
    fill(L.ln1_gamma, D, 1, 0.1);
    fill(L.ln1_beta, D, 0, 0.1);
    fill(L.wq, D * D, 0, 1 / std::sqrt(d));
    fill(L.wk, D * D, 0, 1 / std::sqrt(d));
    fill(L.wv, D * D, 0, 1 / std::sqrt(d));
    fill(L.wo, D * D, 0, 1 / std::sqrt(d));
    fill(L.ln2_gamma, D, 1, 0.1);
    fill(L.ln2_beta, D, 0, 0.1);
    fill(L.w1, D * F, 0, 1 / std::sqrt(d));
    fill(L.b1, F, 0, 0.1);
    fill(L.w2, F * D, 0, 1 / std::sqrt(ff));
    fill(L.b2, D, 0, 0.1);
  }
  fill(w.head, D * V, 0, 1 / std::sqrt(d));
  return w;
}

std::vector<std::uint8_t> serialize_model(const ModelWeights& w) {
  w.validate();
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put16(out, kVersion);
  const auto& c = w.config;
  for (int v : {c.layers, c.d, c.heads, c.vocab, c.max_seq, c.ffn()}) {
    put32(out, static_cast<std::uint32_t>(v));
  }
  for_each_tensor(w, [&](const std::string&, const std::vector<double>& t, std::size_t) {
    for (double v : t) {
      std::uint32_t bits;
      const float f = static_cast<float>(v);
      std::memcpy(&bits, &f, 4);
      put32(out, bits);
    }
  });
  return out;
}

ModelWeights parse_model(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderBytes) throw FormatError("model file truncated in header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad magic, expected PLSW");
  const std::uint16_t version = static_cast<std::uint16_t>(bytes[4] | bytes[5] << 8);
  if (version != kVersion) {
    throw FormatError("unsupported model version " + std::to_string(version));
  }
  const char* names[6] = {"layers", "d", "heads", "vocab", "max_seq", "d_ff"};
  std::uint32_t fields[6];
  for (int i = 0; i < 6; ++i) {
    fields[i] = get32(bytes.data() + 6 + 4 * i);
    if (fields[i] > (1u << 20)) {
      throw FormatError(std::string("field ") + names[i] + " out of range");
    }
  }
  ModelWeights w;
  w.config.layers = static_cast<int>(fields[0]);
  w.config.d = static_cast<int>(fields[1]);
  w.config.heads = static_cast<int>(fields[2]);
  w.config.vocab = static_cast<int>(fields[3]);
  w.config.max_seq = static_cast<int>(fields[4]);
  w.config.d_ff = static_cast<int>(fields[5]);
  try {
    w.config.validate();
  } catch (const ValidationError& e) {
    throw FormatError(std::string("invalid header: ") + e.what());
  }
  w.layers.resize(fields[0]);
  std::size_t at = kHeaderBytes;
  for_each_tensor(w, [&](const std::string& name, std::vector<double>& t, std::size_t n) {
    if (bytes.size() - at < 4 * n) throw FormatError("model file truncated in " + name);
    t.resize(n);
    for (std::size_t i = 0; i < n; ++i, at += 4) {
      const std::uint32_t bits = get32(bytes.data() + at);
      float f;
      std::memcpy(&f, &bits, 4);
      if (!std::isfinite(f)) throw FormatError(name + " holds a non-finite value");
      t[i] = f;
    }
  });
  if (at != bytes.size()) {
    throw FormatError(std::to_string(bytes.size() - at) + " trailing bytes after head");
  }
  return w;
}

void save_model(const ModelWeights& w, const std::filesystem::path& path) {
  const auto bytes = serialize_model(w);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

ModelWeights load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open model file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_model(bytes);
}

std::uint64_t model_digest(const ModelWeights& w) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : serialize_model(w)) h = (h ^ b) * 0x100000001b3ULL;
  return h;
}

EncodedModel encode_model(const ModelWeights& w, const FixedPoint& fp) {
  w.validate();
  const auto& c = w.config;
  const std::size_t d = c.d, ff = c.ffn(), v = c.vocab;
  EncodedModel m{c, fp, encode(fp, w.embedding, {v, d}), {}, encode(fp, w.head, {d, v})};
  for (const auto& L : w.layers) {
    m.layers.push_back({encode(fp, L.ln1_gamma, {d}), encode(fp, L.ln1_beta, {d}),
                        encode(fp, L.wq, {d, d}), encode(fp, L.wk, {d, d}),
                        encode(fp, L.wv, {d, d}), encode(fp, L.wo, {d, d}),
                        encode(fp, L.ln2_gamma, {d}), encode(fp, L.ln2_beta, {d}),
                        encode(fp, L.w1, {d, ff}), encode(fp, L.b1, {ff}),
                        encode(fp, L.w2, {ff, d}), encode(fp, L.b2, {d})});
  }
  return m;
}

}  // namespace privswarm

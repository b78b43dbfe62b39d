#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "privswarm/errors.hpp"
#include "privswarm/model.hpp"

namespace privswarm {
namespace {

ModelConfig toy(int layers = 2) {
  ModelConfig c;
  c.layers = layers;
  c.d = 8;
  c.heads = 2;
  c.vocab = 12;
  c.max_seq = 6;
  return c;
}

void expect_same(const ModelWeights& a, const ModelWeights& b) {
  EXPECT_EQ(a.config.layers, b.config.layers);
  EXPECT_EQ(a.config.d, b.config.d);
  EXPECT_EQ(a.config.heads, b.config.heads);
  EXPECT_EQ(a.config.vocab, b.config.vocab);
  EXPECT_EQ(a.config.max_seq, b.config.max_seq);
  EXPECT_EQ(a.config.ffn(), b.config.ffn());
  EXPECT_EQ(a.embedding, b.embedding);
  EXPECT_EQ(a.head, b.head);
  ASSERT_EQ(a.layers.size(), b.layers.size());
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    EXPECT_EQ(a.layers[l].wq, b.layers[l].wq);
    EXPECT_EQ(a.layers[l].w2, b.layers[l].w2);
    EXPECT_EQ(a.layers[l].ln2_beta, b.layers[l].ln2_beta);
    EXPECT_EQ(a.layers[l].b1, b.layers[l].b1);
  }
}

TEST(ModelConfig, Validation) {
  EXPECT_NO_THROW(toy().validate());
  EXPECT_NO_THROW(toy(0).validate());
  auto bad = toy();
  bad.heads = 3;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = toy();
  bad.max_seq = 0;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = toy();
  bad.temperature = 0;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = toy();
  bad.layers = -1;
  EXPECT_THROW(bad.validate(), ValidationError);
  EXPECT_EQ(toy().ffn(), 32);
}

TEST(RandomModel, ShapesAndFloatExactness) {
  const auto w = random_model(toy(), 7);
  EXPECT_NO_THROW(w.validate());
  EXPECT_EQ(w.embedding.size(), 12u * 8u);
  EXPECT_EQ(w.head.size(), 8u * 12u);
  EXPECT_EQ(w.layers[0].w1.size(), 8u * 32u);
  for (double v : w.layers[1].w2) EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
  expect_same(w, random_model(toy(), 7));
  EXPECT_NE(w.embedding, random_model(toy(), 8).embedding);
}

TEST(WeightFile, HeaderLayout) {
  const auto w = random_model(toy(1), 3);
  const auto bytes = serialize_model(w);
  ASSERT_GE(bytes.size(), 30u);
  EXPECT_EQ(std::memcmp(bytes.data(), "PLSW", 4), 0);
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5], 0);
  // u32 L, d, h, V, max_seq, d_ff, little-endian
  const std::uint8_t want[] = {1, 0, 0, 0, 8, 0, 0, 0, 2, 0, 0, 0,
                               12, 0, 0, 0, 6, 0, 0, 0, 32, 0, 0, 0};
  EXPECT_EQ(std::memcmp(bytes.data() + 6, want, sizeof want), 0);
  const std::size_t floats = 12 * 8 + (8 * 2 + 4 * 64 + 8 * 2 + 8 * 32 + 32 + 32 * 8 + 8) + 8 * 12;
  EXPECT_EQ(bytes.size(), 30 + 4 * floats);
}

TEST(WeightFile, RoundTripIsLossless) {
  for (int layers : {0, 1, 2}) {
    const auto w = random_model(toy(layers), 11 + layers);
    expect_same(w, parse_model(serialize_model(w)));
  }
}

TEST(WeightFile, SaveAndLoad) {
  const auto path = std::filesystem::temp_directory_path() / "privswarm_model_test.plsw";
  const auto w = random_model(toy(), 5);
  save_model(w, path);
  expect_same(w, load_model(path));
  std::filesystem::remove(path);
  EXPECT_THROW(load_model(path), FormatError);
}

TEST(WeightFile, Corruption) {
  const auto good = serialize_model(random_model(toy(1), 9));
  auto b = good;
  b[0] = 'X';
  EXPECT_THROW(parse_model(b), FormatError);
  b = good;
  b[4] = 2;
  EXPECT_THROW(parse_model(b), FormatError);
  b = good;
  b.resize(b.size() - 1);
  EXPECT_THROW(parse_model(b), FormatError);
  b = good;
  b.push_back(0);
  EXPECT_THROW(parse_model(b), FormatError);
  b = std::vector<std::uint8_t>(good.begin(), good.begin() + 10);
  EXPECT_THROW(parse_model(b), FormatError);
  b = good;
  b[6 + 8] = 3;  // heads = 3 does not divide d = 8
  EXPECT_THROW(parse_model(b), FormatError);
  b = good;
  const float nan = std::nanf("");
  std::memcpy(b.data() + 30, &nan, 4);
  EXPECT_THROW(parse_model(b), FormatError);
}

TEST(ModelDigest, SensitiveToEveryWeight) {
  auto w = random_model(toy(), 2);
  const auto d0 = model_digest(w);
  EXPECT_EQ(d0, model_digest(random_model(toy(), 2)));
  w.layers[1].b2[3] += 1.0;
  EXPECT_NE(d0, model_digest(w));
}

TEST(EncodeModel, ScalesAndRange) {
  auto w = random_model(toy(), 4);
  const FixedPoint fp(16);
  const auto m = encode_model(w, fp);
  EXPECT_EQ(m.embedding.shape, (Shape{12, 8}));
  EXPECT_EQ(m.layers[0].w1.shape, (Shape{8, 32}));
  EXPECT_EQ(m.layers[0].b1.shape, (Shape{32}));
  EXPECT_EQ(m.head.scale, 16);
  EXPECT_EQ(m.layers[1].wv.data[5], fp.encode(w.layers[1].wv[5]));
  w.head[0] = 1e15;
  EXPECT_THROW(encode_model(w, fp), RangeError);
}

}  // namespace
}  // namespace privswarm

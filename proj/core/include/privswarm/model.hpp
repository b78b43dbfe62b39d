#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "privswarm/fixed_point.hpp"
#include "privswarm/tensor.hpp"

namespace privswarm {

enum class GeluMode { paper_piecewise, exact_reference };

struct ModelConfig {
  int layers = 2;
  int d = 32;
  int heads = 2;
  int vocab = 64;
  int max_seq = 16;
  // Feed-forward width; 0 means 4 * d.
  int d_ff = 0;
  double temperature = 1.0;
  GeluMode gelu_mode = GeluMode::paper_piecewise;

  int ffn() const noexcept { return d_ff > 0 ? d_ff : 4 * d; }
  int head_dim() const noexcept { return d / heads; }
  // Throws ValidationError.
  void validate() const;
};

// Plain (float-valued) parameters. Matrices are row-major [in x out] so that
// a row vector times the matrix gives the projection.
struct LayerWeights {
  std::vector<double> ln1_gamma, ln1_beta;  // [d]
  std::vector<double> wq, wk, wv, wo;       // [d x d]
  std::vector<double> ln2_gamma, ln2_beta;  // [d]
  std::vector<double> w1, b1;               // [d x d_ff], [d_ff]
  std::vector<double> w2, b2;               // [d_ff x d], [d]
};

struct ModelWeights {
  ModelConfig config;
  std::vector<double> embedding;  // [V x d]
  std::vector<LayerWeights> layers;
  std::vector<double> head;  // [d x V]

  // Throws ValidationError on shape or finiteness problems.
  void validate() const;
};

// Gaussian toy weights; every value is exactly representable as float32 so
// a save/load round trip is lossless.
ModelWeights random_model(const ModelConfig& config, std::uint64_t seed);

// "PLSW" file: magic, u16 version, u32 L, d, h, V, max_seq, d_ff, then f32
// tensors in LayerWeights field order (embedding first, head last).
void save_model(const ModelWeights& w, const std::filesystem::path& path);
// Throws FormatError naming the problem.
ModelWeights load_model(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_model(const ModelWeights& w);
ModelWeights parse_model(const std::vector<std::uint8_t>& bytes);

// FNV-1a over the serialized model; parties compare it during setup.
std::uint64_t model_digest(const ModelWeights& w);

struct EncodedLayer {
  PublicTensor ln1_gamma, ln1_beta, wq, wk, wv, wo, ln2_gamma, ln2_beta, w1,
      b1, w2, b2;
};

// Fixed-point copy of the weights used by the secure and fixed-point engines.
struct EncodedModel {
  ModelConfig config;
  FixedPoint fixed_point;
  PublicTensor embedding;
  std::vector<EncodedLayer> layers;
  PublicTensor head;
};

// Throws RangeError if a weight exceeds the representable range.
EncodedModel encode_model(const ModelWeights& w, const FixedPoint& fp);

}  // namespace privswarm

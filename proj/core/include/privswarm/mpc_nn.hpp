#pragma once

#include <optional>
#include <vector>

#include "privswarm/model.hpp"
#include "privswarm/party.hpp"
#include "privswarm/ref_engine.hpp"
#include "privswarm/sharing.hpp"

namespace privswarm {

// A weight as one party sees it: public by default, or secret-shared when the
// model owner keeps the parameters private.
struct Param {
  PublicTensor value;
  std::optional<SharedTensor> shared;

  bool is_shared() const noexcept { return shared.has_value(); }
  const Shape& shape() const noexcept { return shared ? shared->shape : value.shape; }
};

struct LayerParams {
  Param ln1_gamma, ln1_beta, wq, wk, wv, wo, ln2_gamma, ln2_beta, w1, b1, w2, b2;
};

struct MpcModel {
  ModelConfig config;
  Param embedding;  // [V x d]
  std::vector<LayerParams> layers;
  Param head;  // [d x V]

  bool shared_weights() const noexcept { return head.is_shared(); }
};

MpcModel public_model(const EncodedModel& m);
// `owner` secret-shares every weight; the other parties pass std::nullopt.
// Costs one input round per tensor.
MpcModel share_model(Party& party, PartyId owner,
                     const std::optional<EncodedModel>& model,
                     const ModelConfig& config);

inline constexpr double kLayerNormEps = 1e-5;
// Added to masked logits before the temperature is applied.
inline constexpr double kSoftmaxMask = -64.0;

// x[.., k] * W[k x n] + b, one truncation per output element. Public W is
// local apart from the truncation round; shared W uses the matmul protocol.
SharedTensor mpc_linear(Party& party, const SharedTensor& x, const Param& w,
                        const Param* b);
SharedTensor mpc_layernorm(Party& party, const SharedTensor& x,
                           const Param& gamma, const Param& beta,
                           double eps = kLayerNormEps);
// Piecewise GELU with thresholds -3, -1, 1; the two identical middle
// branches form one segment.
SharedTensor mpc_gelu(Party& party, const SharedTensor& x);
// Chebyshev fit of x * Phi(x) on [-5, 5] (see gelu_poly_coefficients), the
// polynomial baseline for round counts and the exact_reference mode.
SharedTensor mpc_gelu_poly(Party& party, const SharedTensor& x);

// Softmax along the last dimension of a [rows x n] tensor. `mask` (row-major,
// nonzero = masked) may be empty.
SharedTensor mpc_softmax(Party& party, const SharedTensor& x, double temperature,
                         const std::vector<std::uint8_t>& mask = {});

// Multi-head attention for query rows [s_q x d] against key/value rows
// [s_k x d]. Query row i sits at absolute position offset + i and, when
// causal, sees keys 0..offset+i. The concatenated heads go through W_O.
SharedTensor mpc_attention(Party& party, const SharedTensor& q,
                           const SharedTensor& k, const SharedTensor& v,
                           int heads, bool causal, const Param& wo,
                           double temperature = 1.0, std::size_t offset = 0);

// Per layer keys and values of every position evaluated so far.
struct KvCache {
  std::vector<SharedTensor> keys, values;
  std::size_t length = 0;
};

// Runs the layer stack over embedding rows [s x d] and returns logits
// [s x V]. With a cache, the rows continue the cached sequence and the cache
// is extended. Throws CapacityError past max_seq.
SharedTensor secure_forward(Party& party, const SharedTensor& x,
                            const MpcModel& model, KvCache* cache = nullptr);

struct GenerateOptions {
  int steps = 1;
  bool cache = true;
  // Reveal each chosen token to all parties and look its embedding up in
  // public; otherwise the next embedding is one-hot * E over shares.
  bool reveal_tokens = false;
};

struct GenerateResult {
  SharedTensor onehots;  // [steps x V], scale 0
  std::vector<int> revealed;  // filled in reveal_tokens mode
  // Interactive multiplications per step (CommStats::mul_elements delta).
  std::vector<std::uint64_t> step_mul_elements;
};

// Greedy decoding. `prompt` holds embedding rows [s x d] (public weights)
// or one-hot rows [s x V] (shared weights).
GenerateResult secure_generate(Party& party, const SharedTensor& prompt,
                               const MpcModel& model, const GenerateOptions& opts);

// Embedding rows for token ids, computed by the token owner.
PublicTensor embed_tokens(const EncodedModel& m, const std::vector<int>& tokens);
PublicTensor onehot_tokens(const ModelConfig& c, const std::vector<int>& tokens);

// Index of the 1 in each one-hot row; throws ValidationError otherwise.
std::vector<int> decode_onehots(const std::vector<Ring>& v, std::size_t vocab);

}  // namespace privswarm

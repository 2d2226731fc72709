#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "inmt/corpus.hpp"
#include "inmt/tensor.hpp"

namespace inmt {

enum class AttentionKind { additive, dot };

std::string_view to_string(AttentionKind kind);
AttentionKind parse_attention(std::string_view name);

struct ModelDims {
  std::size_t embedding = 32;
  std::size_t state = 32;
  std::size_t attention = 32;
  std::size_t source_vocab = 0;
  std::size_t target_vocab = 0;

  std::size_t annotation() const { return 2 * state; }
  // Throws ConfigError when any dimension is zero.
  void validate() const;
  bool operator==(const ModelDims&) const = default;
};

// Packed GRU weights, gate blocks ordered (update, reset, candidate).
struct GruWeights {
  Tensor input;      // 3S x in
  Tensor recurrent;  // 3S x S
  Tensor bias;       // 3S

  bool operator==(const GruWeights&) const = default;
};

// Every trainable array of the attentional encoder-decoder. Also used as
// the gradient container (same names, same shapes).
struct ModelParams {
  ModelDims dims;
  AttentionKind attention = AttentionKind::additive;

  Tensor source_embedding;  // Vs x E
  Tensor target_embedding;  // Vt x E
  GruWeights encoder_forward;
  GruWeights encoder_backward;
  GruWeights decoder_first;   // input: target embedding
  GruWeights decoder_second;  // input: context vector
  Tensor attention_state;       // W_a: A x S
  Tensor attention_annotation;  // U_a: A x 2S
  Tensor attention_bias;        // A
  Tensor attention_score;       // v_a: A
  Tensor attention_projection;  // P: S x 2S, dot attention only
  Tensor init_weight;           // S x 2S
  Tensor init_bias;             // S
  Tensor readout_state;         // E x S
  Tensor readout_context;       // E x 2S
  Tensor readout_embedding;     // E x E
  Tensor readout_bias;          // E
  Tensor output_weight;         // Vt x E
  Tensor output_bias;           // Vt

  // All-zero parameters with the shapes implied by dims.
  static ModelParams zeros(const ModelDims& dims,
                           AttentionKind attention = AttentionKind::additive);

  // Visits (name, tensor) for every parameter in a fixed order.
  template <class F>
  void for_each(F&& f) {
    for_each_impl(*this, f);
  }
  template <class F>
  void for_each(F&& f) const {
    for_each_impl(*this, f);
  }

  Tensor* find(std::string_view name);
  const Tensor* find(std::string_view name) const;
  std::size_t parameter_count() const;

  bool operator==(const ModelParams&) const = default;

 private:
  template <class Self, class F>
  static void for_each_impl(Self& p, F& f) {
    f("source_embedding", p.source_embedding);
    f("target_embedding", p.target_embedding);
    f("encoder_forward.input", p.encoder_forward.input);
    f("encoder_forward.recurrent", p.encoder_forward.recurrent);
    f("encoder_forward.bias", p.encoder_forward.bias);
    f("encoder_backward.input", p.encoder_backward.input);
    f("encoder_backward.recurrent", p.encoder_backward.recurrent);
    f("encoder_backward.bias", p.encoder_backward.bias);
    f("decoder_first.input", p.decoder_first.input);
    f("decoder_first.recurrent", p.decoder_first.recurrent);
    f("decoder_first.bias", p.decoder_first.bias);
    f("decoder_second.input", p.decoder_second.input);
    f("decoder_second.recurrent", p.decoder_second.recurrent);
    f("decoder_second.bias", p.decoder_second.bias);
    f("attention.state", p.attention_state);
    f("attention.annotation", p.attention_annotation);
    f("attention.bias", p.attention_bias);
    f("attention.score", p.attention_score);
    f("attention.projection", p.attention_projection);
    f("init.weight", p.init_weight);
    f("init.bias", p.init_bias);
    f("readout.state", p.readout_state);
    f("readout.context", p.readout_context);
    f("readout.embedding", p.readout_embedding);
    f("readout.bias", p.readout_bias);
    f("output.weight", p.output_weight);
    f("output.bias", p.output_bias);
  }
};

using Gradients = ModelParams;

// Glorot-uniform weights, zero biases. Deterministic for a given seed.
ModelParams init_params(const ModelDims& dims, AttentionKind attention,
                        std::uint64_t seed);

struct DecoderState {
  Vec hidden;
  Vec attention;  // weights of the last attend() call; empty before the first step
};

// Source annotations plus the per-row attention keys (U_a h_j for
// additive attention, P h_j for dot attention), computed once per sentence.
struct EncodedSource {
  Tensor annotations;  // J x 2S
  Tensor keys;         // J x A (additive) or J x S (dot)
};

// Bidirectional GRU encoder. Row j is [forward state after token j;
// backward state after reading tokens J..j]. Throws EmptyInputError.
Tensor encode_source(const IdSequence& source, const ModelParams& params);
EncodedSource prepare_source(const IdSequence& source, const ModelParams& params);

struct AttentionResult {
  Vec context;
  Vec weights;
};

AttentionResult attend(std::span<const double> hidden, const Tensor& annotations,
                       const ModelParams& params, AttentionKind kind);
AttentionResult attend(std::span<const double> hidden, const EncodedSource& source,
                       const ModelParams& params);

DecoderState init_decoder_state(const Tensor& annotations, const ModelParams& params);

struct StepOutput {
  DecoderState state;
  Vec logits;
};

// One conditional-GRU step: GRU over the previous target embedding,
// attention, GRU over the context, then the deep output layer.
StepOutput decoder_step(TokenId previous, const DecoderState& state,
                        const EncodedSource& source, const ModelParams& params);

Vec softmax(std::span<const double> logits);
Vec log_softmax(std::span<const double> logits);

struct GruCache {
  Vec input, hidden, update, reset, candidate, reset_hidden;
};

struct StepCache {
  TokenId previous = kBos;
  Vec embedding;
  GruCache first;
  Vec intermediate;     // output of the first GRU
  Vec attention;        // weights over source rows
  Tensor score_hidden;  // J x A tanh activations (additive only)
  Vec context;
  GruCache second;
  Vec state;
  Vec readout;
  Vec logits;
};

// Activations of a teacher-forced pass, consumed by backward().
struct ForwardCache {
  const ModelParams* params = nullptr;
  IdSequence source;
  IdSequence target;
  std::vector<GruCache> encoder_forward;
  std::vector<GruCache> encoder_backward;
  EncodedSource encoded;
  Vec mean_annotation;
  Vec initial_state;
  std::vector<StepCache> steps;

  bool valid() const { return params != nullptr; }
};

struct ForwardResult {
  // log p(target[t] | target[<t], source) for t = 1..T-1.
  Vec logprobs;
  ForwardCache cache;
};

// Teacher-forced pass; target must begin with bos. The cache keeps a
// pointer to params, which must outlive it.
ForwardResult forward_logprob(const IdSequence& source, const IdSequence& target,
                              const ModelParams& params);

// d(loss)/d(logits) and, optionally, d(loss)/d(attention weights), one row
// per decoder step.
struct LossGradient {
  std::vector<Vec> logits;
  std::vector<Vec> attention;
};

Gradients backward(const ForwardCache& cache, const LossGradient& grad);
// Accumulating variant: adds into `out`, which must have matching shapes.
void backward_into(const ForwardCache& cache, const LossGradient& grad,
                   Gradients& out);

}  // namespace inmt

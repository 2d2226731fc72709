#include <cmath>
#include <random>

#include "inmt/error.hpp"
#include "inmt/model.hpp"

namespace inmt {

std::string_view to_string(AttentionKind kind) {
  return kind == AttentionKind::additive ? "additive" : "dot";
}

AttentionKind parse_attention(std::string_view name) {
  if (name == "additive" || name == "add") return AttentionKind::additive;
  if (name == "dot") return AttentionKind::dot;
  throw ConfigError("unknown attention kind: " + std::string(name));
}

void ModelDims::validate() const {
  if (embedding == 0 || state == 0 || attention == 0 || source_vocab == 0 ||
      target_vocab == 0) {
    throw ConfigError("model dimensions must all be at least 1");
  }
}

namespace {
GruWeights gru_zeros(std::size_t in, std::size_t state) {
  return {Tensor::matrix(3 * state, in), Tensor::matrix(3 * state, state),
          Tensor::vector(3 * state)};
}
}  // namespace

ModelParams ModelParams::zeros(const ModelDims& dims, AttentionKind attention) {
  dims.validate();
  const auto E = dims.embedding, S = dims.state, A = dims.attention;
  const auto H = dims.annotation();
  ModelParams p;
  p.dims = dims;
  p.attention = attention;
  p.source_embedding = Tensor::matrix(dims.source_vocab, E);
  p.target_embedding = Tensor::matrix(dims.target_vocab, E);
  p.encoder_forward = gru_zeros(E, S);
  p.encoder_backward = gru_zeros(E, S);
  p.decoder_first = gru_zeros(E, S);
  p.decoder_second = gru_zeros(H, S);
  p.attention_state = Tensor::matrix(A, S);
  p.attention_annotation = Tensor::matrix(A, H);
  p.attention_bias = Tensor::vector(A);
  p.attention_score = Tensor::vector(A);
  p.attention_projection = Tensor::matrix(S, H);
  p.init_weight = Tensor::matrix(S, H);
  p.init_bias = Tensor::vector(S);
  p.readout_state = Tensor::matrix(E, S);
  p.readout_context = Tensor::matrix(E, H);
  p.readout_embedding = Tensor::matrix(E, E);
  p.readout_bias = Tensor::vector(E);
  p.output_weight = Tensor::matrix(dims.target_vocab, E);
  p.output_bias = Tensor::vector(dims.target_vocab);
  return p;
}

Tensor* ModelParams::find(std::string_view name) {
  Tensor* found = nullptr;
  for_each([&](std::string_view n, Tensor& t) {
    if (n == name) found = &t;
  });
  return found;
}

const Tensor* ModelParams::find(std::string_view name) const {
  const Tensor* found = nullptr;
  for_each([&](std::string_view n, const Tensor& t) {
    if (n == name) found = &t;
  });
  return found;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&](std::string_view, const Tensor& t) { n += t.size(); });
  return n;
}

ModelParams init_params(const ModelDims& dims, AttentionKind attention,
                        std::uint64_t seed) {
  auto p = ModelParams::zeros(dims, attention);
  std::mt19937_64 rng(seed);
  p.for_each([&](std::string_view, Tensor& t) {
    if (t.shape.size() != 2) return;  // biases and v_a stay zero
    const double fan_in = static_cast<double>(t.cols());
    const double fan_out = static_cast<double>(t.rows());
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& v : t.data) v = dist(rng);
  });
  // v_a is a vector but acts as an A x 1 projection.
  const double limit = std::sqrt(6.0 / (static_cast<double>(dims.attention) + 1.0));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : p.attention_score.data) v = dist(rng);
  return p;
}

}  // namespace inmt

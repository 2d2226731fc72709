#include <algorithm>
#include <cmath>

#include "inmt/error.hpp"
#include "internal.hpp"

namespace inmt {

namespace detail {

void gru_forward(const GruWeights& w, std::span<const double> x,
                 std::span<const double> h, Vec& out, GruCache* cache) {
  const std::size_t S = h.size();
  Vec gx(3 * S);
  kernels::gemv(w.input.data, 3 * S, x.size(), x, gx);
  for (std::size_t i = 0; i < 3 * S; ++i) gx[i] += w.bias.data[i];
  Vec gh(2 * S);
  kernels::gemv(w.recurrent.row_block(0, 2 * S), 2 * S, S, h, gh);

  Vec z(S), r(S), rh(S), n(S);
  for (std::size_t i = 0; i < S; ++i) {
    z[i] = sigmoid(gx[i] + gh[i]);
    r[i] = sigmoid(gx[S + i] + gh[S + i]);
    rh[i] = r[i] * h[i];
  }
  Vec gn(S);
  kernels::gemv(w.recurrent.row_block(2 * S, S), S, S, rh, gn);
  out.resize(S);
  for (std::size_t i = 0; i < S; ++i) {
    n[i] = std::tanh(gx[2 * S + i] + gn[i]);
    out[i] = (1.0 - z[i]) * h[i] + z[i] * n[i];
  }
  if (cache != nullptr) {
    cache->input.assign(x.begin(), x.end());
    cache->hidden.assign(h.begin(), h.end());
    cache->update = std::move(z);
    cache->reset = std::move(r);
    cache->candidate = std::move(n);
    cache->reset_hidden = std::move(rh);
  }
}

std::span<const double> embedding_row(const Tensor& table, TokenId id,
                                      const char* what) {
  if (id < 0 || static_cast<std::size_t>(id) >= table.rows()) {
    throw OutOfRangeError(std::string(what) + " id " + std::to_string(id) +
                          " out of range");
  }
  return table.row(static_cast<std::size_t>(id));
}

Tensor attention_keys(const Tensor& annotations, const ModelParams& params,
                      AttentionKind kind) {
  const Tensor& proj = kind == AttentionKind::additive
                           ? params.attention_annotation
                           : params.attention_projection;
  Tensor keys = Tensor::matrix(annotations.rows(), proj.rows());
  for (std::size_t j = 0; j < annotations.rows(); ++j) {
    kernels::gemv(proj.data, proj.rows(), proj.cols(), annotations.row(j),
                  keys.row(j));
  }
  return keys;
}

AttentionResult attend_impl(std::span<const double> hidden,
                            const EncodedSource& source,
                            const ModelParams& params, AttentionKind kind,
                            Tensor* score_hidden) {
  const Tensor& H = source.annotations;
  const std::size_t J = H.rows();
  Vec scores(J);
  if (kind == AttentionKind::additive) {
    const std::size_t A = params.attention_state.rows();
    Vec query(A);
    kernels::gemv(params.attention_state.data, A, hidden.size(), hidden, query);
    for (std::size_t a = 0; a < A; ++a) query[a] += params.attention_bias.data[a];
    if (score_hidden != nullptr) *score_hidden = Tensor::matrix(J, A);
    for (std::size_t j = 0; j < J; ++j) {
      const auto key = source.keys.row(j);
      double e = 0.0;
      for (std::size_t a = 0; a < A; ++a) {
        const double u = std::tanh(query[a] + key[a]);
        if (score_hidden != nullptr) score_hidden->at(j, a) = u;
        e += params.attention_score.data[a] * u;
      }
      scores[j] = e;
    }
  } else {
    for (std::size_t j = 0; j < J; ++j) {
      const auto key = source.keys.row(j);
      double e = 0.0;
      for (std::size_t i = 0; i < hidden.size(); ++i) e += hidden[i] * key[i];
      scores[j] = e;
    }
  }
  AttentionResult out;
  out.weights = softmax(scores);
  out.context.assign(H.cols(), 0.0);
  for (std::size_t j = 0; j < J; ++j) {
    const auto row = H.row(j);
    const double w = out.weights[j];
    for (std::size_t k = 0; k < H.cols(); ++k) out.context[k] += w * row[k];
  }
  return out;
}

StepOutput step_impl(TokenId previous, std::span<const double> hidden,
                     const EncodedSource& source, const ModelParams& params,
                     StepCache* cache) {
  const auto emb = embedding_row(params.target_embedding, previous, "target");
  Vec intermediate;
  detail::gru_forward(params.decoder_first, emb, hidden, intermediate,
                      cache ? &cache->first : nullptr);
  auto att = attend_impl(intermediate, source, params, params.attention,
                         cache ? &cache->score_hidden : nullptr);
  Vec state;
  detail::gru_forward(params.decoder_second, att.context, intermediate, state,
                      cache ? &cache->second : nullptr);

  const std::size_t E = params.readout_bias.size();
  Vec readout(E);
  kernels::gemv(params.readout_state.data, E, state.size(), state, readout);
  kernels::gemv(params.readout_context.data, E, att.context.size(), att.context,
                readout, true);
  kernels::gemv(params.readout_embedding.data, E, emb.size(), emb, readout, true);
  for (std::size_t i = 0; i < E; ++i) {
    readout[i] = std::tanh(readout[i] + params.readout_bias.data[i]);
  }
  const std::size_t V = params.output_bias.size();
  StepOutput out;
  out.logits.resize(V);
  kernels::gemv(params.output_weight.data, V, E, readout, out.logits);
  for (std::size_t v = 0; v < V; ++v) out.logits[v] += params.output_bias.data[v];

  if (cache != nullptr) {
    cache->previous = previous;
    cache->embedding.assign(emb.begin(), emb.end());
    cache->intermediate = intermediate;
    cache->attention = att.weights;
    cache->context = att.context;
    cache->state = state;
    cache->readout = readout;
    cache->logits = out.logits;
  }
  out.state.hidden = std::move(state);
  out.state.attention = std::move(att.weights);
  return out;
}

}  // namespace detail

Vec softmax(std::span<const double> logits) {
  Vec out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double mx = *std::max_element(out.begin(), out.end());
  double sum = 0.0;
  for (auto& v : out) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : out) v /= sum;
  return out;
}

Vec log_softmax(std::span<const double> logits) {
  Vec out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double mx = *std::max_element(out.begin(), out.end());
  double sum = 0.0;
  for (double v : out) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  for (auto& v : out) v -= lse;
  return out;
}

namespace {

Tensor run_encoder(const IdSequence& source, const ModelParams& params,
                   std::vector<GruCache>* fwd_cache,
                   std::vector<GruCache>* bwd_cache) {
  if (source.empty()) throw EmptyInputError("cannot encode an empty source sequence");
  const std::size_t J = source.size();
  const std::size_t S = params.dims.state;
  Tensor H = Tensor::matrix(J, 2 * S);
  if (fwd_cache) fwd_cache->assign(J, {});
  if (bwd_cache) bwd_cache->assign(J, {});

  Vec h(S, 0.0), next;
  for (std::size_t j = 0; j < J; ++j) {
    const auto x = detail::embedding_row(params.source_embedding, source[j], "source");
    detail::gru_forward(params.encoder_forward, x, h, next,
                        fwd_cache ? &(*fwd_cache)[j] : nullptr);
    h.swap(next);
    std::copy(h.begin(), h.end(), H.row(j).begin());
  }
  h.assign(S, 0.0);
  for (std::size_t k = J; k-- > 0;) {
    const auto x = detail::embedding_row(params.source_embedding, source[k], "source");
    detail::gru_forward(params.encoder_backward, x, h, next,
                        bwd_cache ? &(*bwd_cache)[k] : nullptr);
    h.swap(next);
    std::copy(h.begin(), h.end(), H.row(k).begin() + static_cast<std::ptrdiff_t>(S));
  }
  return H;
}

Vec mean_rows(const Tensor& H) {
  Vec m(H.cols(), 0.0);
  for (std::size_t j = 0; j < H.rows(); ++j) {
    const auto row = H.row(j);
    for (std::size_t k = 0; k < m.size(); ++k) m[k] += row[k];
  }
  for (auto& v : m) v /= static_cast<double>(H.rows());
  return m;
}

}  // namespace

Tensor encode_source(const IdSequence& source, const ModelParams& params) {
  return run_encoder(source, params, nullptr, nullptr);
}

EncodedSource prepare_source(const IdSequence& source, const ModelParams& params) {
  EncodedSource out;
  out.annotations = encode_source(source, params);
  out.keys = detail::attention_keys(out.annotations, params, params.attention);
  return out;
}

AttentionResult attend(std::span<const double> hidden, const Tensor& annotations,
                       const ModelParams& params, AttentionKind kind) {
  EncodedSource source{annotations, detail::attention_keys(annotations, params, kind)};
  return detail::attend_impl(hidden, source, params, kind, nullptr);
}

AttentionResult attend(std::span<const double> hidden, const EncodedSource& source,
                       const ModelParams& params) {
  return detail::attend_impl(hidden, source, params, params.attention, nullptr);
}

DecoderState init_decoder_state(const Tensor& annotations, const ModelParams& params) {
  if (annotations.rows() == 0) throw EmptyInputError("no annotations");
  const Vec m = mean_rows(annotations);
  const std::size_t S = params.init_bias.size();
  DecoderState st;
  st.hidden.resize(S);
  kernels::gemv(params.init_weight.data, S, m.size(), m, st.hidden);
  for (std::size_t i = 0; i < S; ++i) {
    st.hidden[i] = std::tanh(st.hidden[i] + params.init_bias.data[i]);
  }
  return st;
}

StepOutput decoder_step(TokenId previous, const DecoderState& state,
                        const EncodedSource& source, const ModelParams& params) {
  return detail::step_impl(previous, state.hidden, source, params, nullptr);
}

ForwardResult forward_logprob(const IdSequence& source, const IdSequence& target,
                              const ModelParams& params) {
  if (target.size() < 2 || target.front() != kBos) {
    throw UsageError("target must start with bos and contain at least one token");
  }
  ForwardResult result;
  ForwardCache& c = result.cache;
  c.params = &params;
  c.source = source;
  c.target = target;
  c.encoded.annotations = run_encoder(source, params, &c.encoder_forward,
                                      &c.encoder_backward);
  c.encoded.keys = detail::attention_keys(c.encoded.annotations, params, params.attention);
  c.mean_annotation = mean_rows(c.encoded.annotations);
  c.initial_state = init_decoder_state(c.encoded.annotations, params).hidden;

  const std::size_t T = target.size() - 1;
  c.steps.resize(T);
  result.logprobs.resize(T);
  Vec hidden = c.initial_state;
  for (std::size_t t = 0; t < T; ++t) {
    auto out = detail::step_impl(target[t], hidden, c.encoded, params, &c.steps[t]);
    const auto next = target[t + 1];
    if (next < 0 || static_cast<std::size_t>(next) >= out.logits.size()) {
      throw OutOfRangeError("target id " + std::to_string(next) + " out of range");
    }
    result.logprobs[t] = log_softmax(out.logits)[static_cast<std::size_t>(next)];
    hidden = std::move(out.state.hidden);
  }
  return result;
}

}  // namespace inmt

#include "inmt/error.hpp"
#include "internal.hpp"

namespace inmt {

namespace detail {

void gru_backward(const GruWeights& w, const GruCache& c,
                  std::span<const double> dout, GruWeights& gw,
                  std::span<double> dx, std::span<double> dh) {
  const std::size_t S = c.hidden.size();
  const std::size_t in = c.input.size();
  Vec dpre(3 * S, 0.0);
  for (std::size_t i = 0; i < S; ++i) {
    const double z = c.update[i], n = c.candidate[i];
    dh[i] += dout[i] * (1.0 - z);
    dpre[i] = dout[i] * (n - c.hidden[i]) * z * (1.0 - z);
    dpre[2 * S + i] = dout[i] * z * (1.0 - n * n);
  }
  // Candidate block sees r * h through the recurrent weights.
  const std::span<const double> dpre_n(dpre.data() + 2 * S, S);
  kernels::outer_acc(gw.recurrent.row_block(2 * S, S), S, S, dpre_n, c.reset_hidden);
  Vec drh(S, 0.0);
  kernels::gemv_t_acc(w.recurrent.row_block(2 * S, S), S, S, dpre_n, drh);
  for (std::size_t i = 0; i < S; ++i) {
    const double r = c.reset[i];
    dh[i] += drh[i] * r;
    dpre[S + i] = drh[i] * c.hidden[i] * r * (1.0 - r);
  }
  const std::span<const double> dpre_zr(dpre.data(), 2 * S);
  kernels::outer_acc(gw.recurrent.row_block(0, 2 * S), 2 * S, S, dpre_zr, c.hidden);
  kernels::gemv_t_acc(w.recurrent.row_block(0, 2 * S), 2 * S, S, dpre_zr, dh);

  kernels::outer_acc(gw.input.data, 3 * S, in, dpre, c.input);
  kernels::gemv_t_acc(w.input.data, 3 * S, in, dpre, dx);
  for (std::size_t i = 0; i < 3 * S; ++i) gw.bias.data[i] += dpre[i];
}

}  // namespace detail

namespace {

void add_embedding_grad(Tensor& table, TokenId id, std::span<const double> g) {
  auto row = table.row(static_cast<std::size_t>(id));
  for (std::size_t i = 0; i < g.size(); ++i) row[i] += g[i];
}

void check_shapes(const ModelParams& p, const Gradients& g) {
  bool ok = p.dims == g.dims;
  if (ok) {
    std::vector<std::vector<std::size_t>> shapes;
    p.for_each([&](std::string_view, const Tensor& t) { shapes.push_back(t.shape); });
    std::size_t k = 0;
    g.for_each([&](std::string_view, const Tensor& t) { ok = ok && t.shape == shapes[k++]; });
  }
  if (!ok) throw ShapeError("gradient container does not match parameter shapes");
}

}  // namespace

void backward_into(const ForwardCache& cache, const LossGradient& grad,
                   Gradients& g) {
  if (!cache.valid()) throw UsageError("backward called without a forward cache");
  const ModelParams& p = *cache.params;
  check_shapes(p, g);
  const std::size_t T = cache.steps.size();
  if (grad.logits.size() != T) {
    throw ShapeError("loss gradient has " + std::to_string(grad.logits.size()) +
                     " steps, forward pass has " + std::to_string(T));
  }
  if (!grad.attention.empty() && grad.attention.size() != T) {
    throw ShapeError("attention gradient step count mismatch");
  }

  const std::size_t S = p.dims.state;
  const std::size_t E = p.dims.embedding;
  const std::size_t A = p.dims.attention;
  const std::size_t HD = p.dims.annotation();
  const std::size_t V = p.dims.target_vocab;
  const Tensor& H = cache.encoded.annotations;
  const std::size_t J = H.rows();

  Tensor dH = Tensor::matrix(J, HD);
  Tensor dkeys = Tensor::matrix(J, cache.encoded.keys.cols());
  Vec dstate_carry(S, 0.0);

  for (std::size_t t = T; t-- > 0;) {
    const StepCache& st = cache.steps[t];
    const Vec& dlogits = grad.logits[t];
    if (dlogits.size() != V) throw ShapeError("logit gradient size mismatch");

    // Output projection and deep output layer.
    kernels::outer_acc(g.output_weight.data, V, E, dlogits, st.readout);
    for (std::size_t v = 0; v < V; ++v) g.output_bias.data[v] += dlogits[v];
    Vec dreadout(E, 0.0);
    kernels::gemv_t_acc(p.output_weight.data, V, E, dlogits, dreadout);
    for (std::size_t i = 0; i < E; ++i) {
      dreadout[i] *= 1.0 - st.readout[i] * st.readout[i];
      g.readout_bias.data[i] += dreadout[i];
    }
    Vec dstate = dstate_carry;
    Vec dcontext(HD, 0.0);
    Vec demb(E, 0.0);
    kernels::outer_acc(g.readout_state.data, E, S, dreadout, st.state);
    kernels::gemv_t_acc(p.readout_state.data, E, S, dreadout, dstate);
    kernels::outer_acc(g.readout_context.data, E, HD, dreadout, st.context);
    kernels::gemv_t_acc(p.readout_context.data, E, HD, dreadout, dcontext);
    kernels::outer_acc(g.readout_embedding.data, E, E, dreadout, st.embedding);
    kernels::gemv_t_acc(p.readout_embedding.data, E, E, dreadout, demb);

    // Second GRU: input context, hidden = intermediate state.
    Vec dinter(S, 0.0);
    detail::gru_backward(p.decoder_second, st.second, dstate, g.decoder_second,
                         dcontext, dinter);

    // Attention.
    Vec dalpha(J, 0.0);
    if (!grad.attention.empty()) {
      if (grad.attention[t].size() != J) throw ShapeError("attention gradient size mismatch");
      dalpha = grad.attention[t];
    }
    for (std::size_t j = 0; j < J; ++j) {
      const auto h = H.row(j);
      auto dh = dH.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < HD; ++k) {
        acc += dcontext[k] * h[k];
        dh[k] += st.attention[j] * dcontext[k];
      }
      dalpha[j] += acc;
    }
    double weighted = 0.0;
    for (std::size_t j = 0; j < J; ++j) weighted += st.attention[j] * dalpha[j];
    Vec dscore(J);
    for (std::size_t j = 0; j < J; ++j) dscore[j] = st.attention[j] * (dalpha[j] - weighted);

    if (p.attention == AttentionKind::additive) {
      Vec dquery(A, 0.0);
      for (std::size_t j = 0; j < J; ++j) {
        auto dk = dkeys.row(j);
        for (std::size_t a = 0; a < A; ++a) {
          const double u = st.score_hidden.at(j, a);
          g.attention_score.data[a] += dscore[j] * u;
          const double dpre = dscore[j] * p.attention_score.data[a] * (1.0 - u * u);
          dquery[a] += dpre;
          dk[a] += dpre;
        }
      }
      for (std::size_t a = 0; a < A; ++a) g.attention_bias.data[a] += dquery[a];
      kernels::outer_acc(g.attention_state.data, A, S, dquery, st.intermediate);
      kernels::gemv_t_acc(p.attention_state.data, A, S, dquery, dinter);
    } else {
      for (std::size_t j = 0; j < J; ++j) {
        const auto key = cache.encoded.keys.row(j);
        auto dk = dkeys.row(j);
        for (std::size_t i = 0; i < S; ++i) {
          dinter[i] += dscore[j] * key[i];
          dk[i] += dscore[j] * st.intermediate[i];
        }
      }
    }

    // First GRU: input embedding, hidden = previous decoder state.
    std::fill(dstate_carry.begin(), dstate_carry.end(), 0.0);
    detail::gru_backward(p.decoder_first, st.first, dinter, g.decoder_first, demb,
                         dstate_carry);
    add_embedding_grad(g.target_embedding, st.previous, demb);
  }

  // Attention keys depend on the annotations.
  {
    const Tensor& proj = p.attention == AttentionKind::additive
                             ? p.attention_annotation
                             : p.attention_projection;
    Tensor& gproj = p.attention == AttentionKind::additive
                        ? g.attention_annotation
                        : g.attention_projection;
    for (std::size_t j = 0; j < J; ++j) {
      kernels::outer_acc(gproj.data, proj.rows(), HD, dkeys.row(j), H.row(j));
      kernels::gemv_t_acc(proj.data, proj.rows(), HD, dkeys.row(j), dH.row(j));
    }
  }

  // Decoder initial state: tanh(W mean(H) + b).
  {
    Vec dpre(S);
    for (std::size_t i = 0; i < S; ++i) {
      const double s0 = cache.initial_state[i];
      dpre[i] = dstate_carry[i] * (1.0 - s0 * s0);
      g.init_bias.data[i] += dpre[i];
    }
    kernels::outer_acc(g.init_weight.data, S, HD, dpre, cache.mean_annotation);
    Vec dmean(HD, 0.0);
    kernels::gemv_t_acc(p.init_weight.data, S, HD, dpre, dmean);
    const double inv = 1.0 / static_cast<double>(J);
    for (std::size_t j = 0; j < J; ++j) {
      auto dh = dH.row(j);
      for (std::size_t k = 0; k < HD; ++k) dh[k] += dmean[k] * inv;
    }
  }

  // Encoder, both directions.
  Vec carry(S, 0.0), dout(S), dx(E);
  for (std::size_t j = J; j-- > 0;) {
    const auto dh = dH.row(j);
    for (std::size_t i = 0; i < S; ++i) dout[i] = dh[i] + carry[i];
    std::fill(carry.begin(), carry.end(), 0.0);
    std::fill(dx.begin(), dx.end(), 0.0);
    detail::gru_backward(p.encoder_forward, cache.encoder_forward[j], dout,
                         g.encoder_forward, dx, carry);
    add_embedding_grad(g.source_embedding, cache.source[j], dx);
  }
  std::fill(carry.begin(), carry.end(), 0.0);
  for (std::size_t j = 0; j < J; ++j) {
    const auto dh = dH.row(j);
    for (std::size_t i = 0; i < S; ++i) dout[i] = dh[S + i] + carry[i];
    std::fill(carry.begin(), carry.end(), 0.0);
    std::fill(dx.begin(), dx.end(), 0.0);
    detail::gru_backward(p.encoder_backward, cache.encoder_backward[j], dout,
                         g.encoder_backward, dx, carry);
    add_embedding_grad(g.source_embedding, cache.source[j], dx);
  }
}

Gradients backward(const ForwardCache& cache, const LossGradient& grad) {
  if (!cache.valid()) throw UsageError("backward called without a forward cache");
  auto g = ModelParams::zeros(cache.params->dims, cache.params->attention);
  backward_into(cache, grad, g);
  return g;
}

}  // namespace inmt

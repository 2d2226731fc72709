#pragma once

#include <cmath>
#include <span>

#include "inmt/kernels.hpp"
#include "inmt/model.hpp"

namespace inmt::detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline std::span<const double> span_of(const Tensor& t) { return t.data; }
inline std::span<double> span_of(Tensor& t) { return t.data; }

// out = GRU(x, h); fills cache when given.
void gru_forward(const GruWeights& w, std::span<const double> x,
                 std::span<const double> h, Vec& out, GruCache* cache);

// Accumulates parameter gradients into gw, input gradient into dx and
// hidden gradient into dh (dx/dh are added to, not overwritten).
void gru_backward(const GruWeights& w, const GruCache& cache,
                  std::span<const double> dout, GruWeights& gw,
                  std::span<double> dx, std::span<double> dh);

std::span<const double> embedding_row(const Tensor& table, TokenId id,
                                      const char* what);

AttentionResult attend_impl(std::span<const double> hidden,
                            const EncodedSource& source,
                            const ModelParams& params, AttentionKind kind,
                            Tensor* score_hidden);

Tensor attention_keys(const Tensor& annotations, const ModelParams& params,
                      AttentionKind kind);

StepOutput step_impl(TokenId previous, std::span<const double> hidden,
                     const EncodedSource& source, const ModelParams& params,
                     StepCache* cache);

}  // namespace inmt::detail

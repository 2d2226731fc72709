#include <cmath>
#include <stdexcept>

#include "inmt/error.hpp"
#include "inmt/training.hpp"

namespace inmt {

LossAndGrad cross_entropy(const std::vector<Vec>& logits, std::span<const TokenId> targets,
                          std::span<const std::uint8_t> mask, double smoothing) {
  if (!(smoothing >= 0.0 && smoothing < 1.0)) {
    throw ConfigError("label smoothing must lie in [0, 1)");
  }
  if (targets.size() != logits.size() || mask.size() != logits.size()) {
    throw ShapeError("cross_entropy: logits, targets and mask differ in length");
  }
  std::size_t count = 0;
  for (auto m : mask) count += m ? 1 : 0;
  if (count == 0) throw EmptyInputError("cross_entropy: every position is masked");

  LossAndGrad out;
  out.grad.resize(logits.size());
  const double inv = 1.0 / static_cast<double>(count);
  double total = 0.0;
  for (std::size_t t = 0; t < logits.size(); ++t) {
    const std::size_t V = logits[t].size();
    out.grad[t].assign(V, 0.0);
    if (!mask[t]) continue;
    const auto y = static_cast<std::size_t>(targets[t]);
    if (targets[t] < 0 || y >= V) throw OutOfRangeError("cross_entropy: target id out of range");
    const Vec lp = log_softmax(logits[t]);
    auto& g = out.grad[t];
    if (smoothing == 0.0) {
      total += -lp[y];
      for (std::size_t v = 0; v < V; ++v) g[v] = std::exp(lp[v]) * inv;
      g[y] -= inv;
      continue;
    }
    // q(pad) = 0, the rest share the smoothing mass.
    const double share = smoothing / static_cast<double>(V - 1);
    double uniform = 0.0;
    for (std::size_t v = 0; v < V; ++v) {
      if (v != static_cast<std::size_t>(kPad)) uniform += lp[v];
    }
    total += -(1.0 - smoothing) * lp[y] - share * uniform;
    for (std::size_t v = 0; v < V; ++v) {
      double q = v == static_cast<std::size_t>(kPad) ? 0.0 : share;
      if (v == y) q += 1.0 - smoothing;
      g[v] = (std::exp(lp[v]) - q) * inv;
    }
  }
  out.loss = total * inv;
  return out;
}

LossAndGrad coverage_regularizer(const std::vector<Vec>& attention, double lambda) {
  if (lambda < 0.0) throw ConfigError("coverage penalty must be non-negative");
  LossAndGrad out;
  out.grad.resize(attention.size());
  if (attention.empty()) return out;
  const std::size_t J = attention.front().size();
  Vec mass(J, 0.0);
  for (const auto& a : attention) {
    if (a.size() != J) throw ShapeError("coverage_regularizer: ragged attention history");
    for (std::size_t j = 0; j < J; ++j) mass[j] += a[j];
  }
  Vec d(J);
  for (std::size_t j = 0; j < J; ++j) {
    const double gap = 1.0 - mass[j];
    out.loss += gap * gap;
    d[j] = -2.0 * lambda * gap;
  }
  out.loss *= lambda;
  for (auto& g : out.grad) g = d;
  return out;
}

double clip_gradients(std::span<const std::span<double>> arrays, double max_norm) {
  if (!(max_norm > 0.0)) throw ConfigError("clip norm must be positive");
  double sq = 0.0;
  for (auto a : arrays)
    for (double x : a) sq += x * x;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    // Land strictly below the threshold so clipping twice is a no-op.
    const double scale = max_norm / norm * (1.0 - 1e-12);
    for (auto a : arrays)
      for (double& x : a) x *= scale;
  }
  return norm;
}

double clip_gradients(Gradients& grads, double max_norm) {
  std::vector<std::span<double>> arrays;
  grads.for_each([&](std::string_view, Tensor& t) { arrays.emplace_back(t.data); });
  return clip_gradients(std::span<const std::span<double>>(arrays), max_norm);
}

}  // namespace inmt

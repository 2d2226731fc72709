#include <cstdio>
#include <string>

#include "inmt/decoding.hpp"
#include "inmt/error.hpp"

namespace inmt {

double score_sentence(const ModelParams& params, const IdSequence& source,
                      const IdSequence& target) {
  const auto fwd = forward_logprob(source, target, params);
  double total = 0.0;
  for (double lp : fwd.logprobs) total += lp;
  return total;
}

ModelParams average_checkpoints(std::span<const ModelParams> checkpoints) {
  if (checkpoints.empty()) throw EmptyInputError("no checkpoints to average");
  const ModelParams& first = checkpoints.front();
  for (const auto& c : checkpoints) {
    if (!(c.dims == first.dims) || c.attention != first.attention) {
      throw ShapeError("checkpoints disagree on model dimensions");
    }
  }
  auto avg = ModelParams::zeros(first.dims, first.attention);
  std::vector<std::pair<std::string, Tensor*>> slots;
  avg.for_each([&](std::string_view name, Tensor& t) { slots.emplace_back(name, &t); });
  for (const auto& c : checkpoints) {
    std::size_t k = 0;
    c.for_each([&](std::string_view name, const Tensor& t) {
      auto& [slot_name, slot] = slots[k++];
      if (name != slot_name || t.shape != slot->shape) {
        throw ShapeError("parameter mismatch while averaging: " + std::string(name));
      }
      for (std::size_t i = 0; i < t.size(); ++i) slot->data[i] += t.data[i];
    });
  }
  const double n = static_cast<double>(checkpoints.size());
  avg.for_each([&](std::string_view, Tensor& t) {
    for (auto& v : t.data) v /= n;
  });
  return avg;
}

std::string format_nbest_line(std::size_t index, std::string_view text, double score,
                              double logprob) {
  char buf[64];
  std::string out = std::to_string(index);
  out += " ||| ";
  out.append(text);
  std::snprintf(buf, sizeof(buf), " ||| %.6f ||| %.6f", score, logprob);
  out += buf;
  return out;
}

}  // namespace inmt

#include <cmath>
#include <map>
#include <stdexcept>

#include "inmt/corpus.hpp"
#include "inmt/error.hpp"
#include "inmt/metrics.hpp"

namespace inmt {

namespace {

constexpr int kMaxOrder = 4;

struct NgramStats {
  std::size_t matches[kMaxOrder] = {};
  std::size_t totals[kMaxOrder] = {};
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
};

std::map<Words, std::size_t> ngram_counts(const Words& w, std::size_t n) {
  std::map<Words, std::size_t> counts;
  for (std::size_t i = 0; i + n <= w.size(); ++i) {
    ++counts[Words(w.begin() + static_cast<std::ptrdiff_t>(i),
                   w.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

void accumulate(NgramStats& st, const Words& hyp, const Words& ref) {
  st.hyp_len += hyp.size();
  st.ref_len += ref.size();
  for (int n = 1; n <= kMaxOrder; ++n) {
    const auto h = ngram_counts(hyp, static_cast<std::size_t>(n));
    const auto r = ngram_counts(ref, static_cast<std::size_t>(n));
    for (const auto& [gram, count] : h) {
      auto it = r.find(gram);
      if (it != r.end()) st.matches[n - 1] += std::min(count, it->second);
    }
    if (hyp.size() >= static_cast<std::size_t>(n)) {
      st.totals[n - 1] += hyp.size() - static_cast<std::size_t>(n) + 1;
    }
  }
}

double score(const NgramStats& st) {
  if (st.hyp_len == 0) return 0.0;
  double log_sum = 0.0;
  for (int n = 0; n < kMaxOrder; ++n) {
    if (st.totals[n] == 0 || st.matches[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(st.matches[n]) / static_cast<double>(st.totals[n]));
  }
  const double bp = st.hyp_len >= st.ref_len
                        ? 1.0
                        : std::exp(1.0 - static_cast<double>(st.ref_len) /
                                             static_cast<double>(st.hyp_len));
  return 100.0 * bp * std::exp(log_sum / kMaxOrder);
}

std::vector<Words> split_all(const std::vector<std::string>& lines) {
  std::vector<Words> out;
  out.reserve(lines.size());
  for (const auto& l : lines) out.push_back(tokenize(l));
  return out;
}

}  // namespace

double bleu(const std::vector<Words>& hypotheses, const std::vector<Words>& references) {
  if (hypotheses.size() != references.size()) {
    throw std::invalid_argument("hypothesis and reference counts differ");
  }
  if (hypotheses.empty()) throw EmptyInputError("BLEU of an empty corpus");
  NgramStats st;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) accumulate(st, hypotheses[i], references[i]);
  return score(st);
}

double bleu(const std::vector<std::string>& hypotheses,
            const std::vector<std::string>& references) {
  return bleu(split_all(hypotheses), split_all(references));
}

MetricReport bleu_report(const std::vector<std::string>& hypotheses,
                         const std::vector<std::string>& references) {
  MetricReport r;
  r.name = "BLEU";
  const auto h = split_all(hypotheses);
  const auto ref = split_all(references);
  r.value = bleu(h, ref);
  for (std::size_t i = 0; i < h.size(); ++i) {
    NgramStats st;
    accumulate(st, h[i], ref[i]);
    r.per_sentence.push_back(score(st));
  }
  return r;
}

}  // namespace inmt

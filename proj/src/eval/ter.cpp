#include <algorithm>
#include <cstdio>
#include <deque>
#include <set>
#include <stdexcept>

#include "inmt/corpus.hpp"
#include "inmt/error.hpp"
#include "inmt/metrics.hpp"

namespace inmt {

namespace {

// Caps from the reference TER tool; irrelevant for short sentences.
constexpr std::size_t kMaxShiftSize = 10;
constexpr std::size_t kMaxShiftDistance = 50;
// Up to this hypothesis length the shift sequence is searched exhaustively.
constexpr std::size_t kExactLength = 6;

Words shifted(const Words& w, std::size_t start, std::size_t len, std::size_t dest) {
  Words block(w.begin() + static_cast<std::ptrdiff_t>(start),
              w.begin() + static_cast<std::ptrdiff_t>(start + len));
  Words rest;
  rest.reserve(w.size());
  rest.insert(rest.end(), w.begin(), w.begin() + static_cast<std::ptrdiff_t>(start));
  rest.insert(rest.end(), w.begin() + static_cast<std::ptrdiff_t>(start + len), w.end());
  rest.insert(rest.begin() + static_cast<std::ptrdiff_t>(dest), block.begin(), block.end());
  return rest;
}

}  // namespace

std::size_t edit_distance(const Words& a, const Words& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

namespace {

// Breadth-first over shifted variants; a state at depth d can only help
// while d + 1 < best.
TerStats exact_edits(const Words& hypothesis, const Words& reference) {
  TerStats st;
  st.reference_length = reference.size();
  std::size_t best = edit_distance(hypothesis, reference);
  std::size_t best_shifts = 0;
  std::set<Words> seen{hypothesis};
  std::deque<std::pair<Words, std::size_t>> queue{{hypothesis, 0}};
  while (!queue.empty()) {
    auto [cur, depth] = std::move(queue.front());
    queue.pop_front();
    if (depth + 1 >= best) continue;
    const std::size_t n = cur.size();
    for (std::size_t start = 0; start < n; ++start) {
      for (std::size_t len = 1; start + len <= n; ++len) {
        for (std::size_t dest = 0; dest + len <= n; ++dest) {
          if (dest == start) continue;
          auto next = shifted(cur, start, len, dest);
          if (!seen.insert(next).second) continue;
          const std::size_t total = depth + 1 + edit_distance(next, reference);
          if (total < best) {
            best = total;
            best_shifts = depth + 1;
          }
          queue.emplace_back(std::move(next), depth + 1);
        }
      }
    }
  }
  st.shifts = best_shifts;
  st.edits = static_cast<double>(best);
  return st;
}

}  // namespace

TerStats ter_edits(const Words& hypothesis, const Words& reference) {
  if (hypothesis.size() <= kExactLength) return exact_edits(hypothesis, reference);
  TerStats st;
  st.reference_length = reference.size();
  Words cur = hypothesis;
  std::size_t base = edit_distance(cur, reference);
  while (base > 0) {
    std::size_t best_gain = 0;
    Words best;
    const std::size_t n = cur.size();
    for (std::size_t start = 0; start < n; ++start) {
      for (std::size_t len = std::min(kMaxShiftSize, n - start); len >= 1; --len) {
        // Destination is an index into the sequence with the block removed.
        for (std::size_t dest = 0; dest + len <= n; ++dest) {
          if (dest == start) continue;
          const std::size_t dist = dest > start ? dest - start : start - dest;
          if (dist > kMaxShiftDistance) continue;
          auto cand = shifted(cur, start, len, dest);
          const std::size_t d = edit_distance(cand, reference);
          if (d + 1 < base && base - d - 1 > best_gain) {
            best_gain = base - d - 1;
            best = std::move(cand);
          }
        }
      }
    }
    if (best_gain == 0) break;
    cur = std::move(best);
    base = edit_distance(cur, reference);
    ++st.shifts;
  }
  st.edits = static_cast<double>(st.shifts + base);
  return st;
}

double ter(const Words& hypothesis, const Words& reference) {
  if (reference.empty()) throw EmptyInputError("TER needs a non-empty reference");
  const auto st = ter_edits(hypothesis, reference);
  return 100.0 * st.edits / static_cast<double>(st.reference_length);
}

double corpus_ter(const std::vector<Words>& hypotheses, const std::vector<Words>& references) {
  if (hypotheses.size() != references.size()) {
    throw std::invalid_argument("hypothesis and reference counts differ");
  }
  double edits = 0.0;
  std::size_t len = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto st = ter_edits(hypotheses[i], references[i]);
    edits += st.edits;
    len += st.reference_length;
  }
  if (len == 0) throw EmptyInputError("TER needs non-empty references");
  return 100.0 * edits / static_cast<double>(len);
}

double corpus_ter(const std::vector<std::string>& hypotheses,
                  const std::vector<std::string>& references) {
  std::vector<Words> h, r;
  for (const auto& s : hypotheses) h.push_back(tokenize(s));
  for (const auto& s : references) r.push_back(tokenize(s));
  return corpus_ter(h, r);
}

MetricReport ter_report(const std::vector<std::string>& hypotheses,
                        const std::vector<std::string>& references) {
  MetricReport r;
  r.name = "TER";
  r.value = corpus_ter(hypotheses, references);
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto ref = tokenize(references[i]);
    r.per_sentence.push_back(ref.empty() ? 0.0 : ter(tokenize(hypotheses[i]), ref));
  }
  return r;
}

double ksmr(const std::vector<SentenceEffort>& reports) {
  if (reports.empty()) throw EmptyInputError("KSMR of an empty report list");
  std::size_t actions = 0, chars = 0;
  for (const auto& r : reports) {
    actions += r.keystrokes + r.mouse_actions;
    chars += r.reference_chars;
  }
  if (chars == 0) throw EmptyInputError("KSMR needs at least one reference character");
  return 100.0 * static_cast<double>(actions) / static_cast<double>(chars);
}

std::string format_metric(const std::string& name, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s = %.2f", name.c_str(), value);
  return buf;
}

}  // namespace inmt

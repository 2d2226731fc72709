#include <algorithm>
#include <numeric>
#include <random>

#include "inmt/corpus.hpp"
#include "inmt/error.hpp"
#include "inmt/utf8.hpp"

namespace inmt {

ParallelCorpus ParallelCorpus::load(const std::filesystem::path& source,
                                    const std::filesystem::path& target,
                                    Split split) {
  auto src = read_lines(source);
  auto trg = read_lines(target);
  if (src.size() != trg.size()) {
    throw FormatError("line count mismatch: " + source.string() + " has " +
                      std::to_string(src.size()) + ", " + target.string() +
                      " has " + std::to_string(trg.size()));
  }
  ParallelCorpus corpus;
  corpus.split = split;
  corpus.pairs.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (!utf8::is_valid(src[i]) || !utf8::is_valid(trg[i])) {
      throw FormatError("invalid UTF-8 on line " + std::to_string(i + 1));
    }
    corpus.pairs.push_back({std::move(src[i]), std::move(trg[i])});
  }
  return corpus;
}

IdSequence unpad(const IdSequence& row) {
  auto end = std::find(row.begin(), row.end(), kEos);
  return end == row.end() ? IdSequence(row.begin(), row.end())
                          : IdSequence(row.begin(), end + 1);
}

namespace {
void pad_rows(std::vector<IdSequence>& rows, std::vector<std::vector<std::uint8_t>>& masks) {
  std::size_t width = 0;
  for (const auto& r : rows) width = std::max(width, r.size());
  masks.clear();
  for (auto& r : rows) {
    std::vector<std::uint8_t> m(width, 0);
    std::fill_n(m.begin(), r.size(), 1);
    r.resize(width, kPad);
    masks.push_back(std::move(m));
  }
}
}  // namespace

std::vector<Batch> make_batches(const ParallelCorpus& corpus,
                                const VocabularyPair& vocabs,
                                std::size_t batch_size, std::uint64_t seed) {
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (corpus.empty()) throw EmptyInputError("cannot batch an empty corpus");

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    Batch b;
    const auto stop = std::min(order.size(), start + batch_size);
    for (std::size_t k = start; k < stop; ++k) {
      const auto& pair = corpus.pairs[order[k]];
      b.indices.push_back(order[k]);
      b.source.push_back(encode(pair.source, *vocabs.source, vocabs.source_bpe));
      b.target.push_back(encode(pair.target, *vocabs.target, vocabs.target_bpe));
    }
    pad_rows(b.source, b.source_mask);
    pad_rows(b.target, b.target_mask);
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace inmt

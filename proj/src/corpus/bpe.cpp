#include <fstream>
#include <limits>

#include "inmt/corpus.hpp"
#include "inmt/error.hpp"
#include "inmt/utf8.hpp"

namespace inmt {

namespace {

std::vector<std::string> characters(std::string_view word) {
  std::vector<std::string> out;
  for (char32_t cp : utf8::decode(word)) out.push_back(utf8::encode(cp));
  return out;
}

// Replaces every non-overlapping left-to-right occurrence of (a, b).
void merge_pair(std::vector<std::string>& symbols, const std::string& a,
                const std::string& b) {
  std::vector<std::string> merged;
  merged.reserve(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i + 1 < symbols.size() && symbols[i] == a && symbols[i + 1] == b) {
      merged.push_back(a + b);
      ++i;
    } else {
      merged.push_back(std::move(symbols[i]));
    }
  }
  symbols = std::move(merged);
}

}  // namespace

BpeModel::BpeModel(std::vector<Pair> merges) : merges_(std::move(merges)) {
  for (std::size_t i = 0; i < merges_.size(); ++i) {
    if (!rank_.emplace(merges_[i], i).second) {
      throw FormatError("duplicate BPE merge: " + merges_[i].first + " " +
                        merges_[i].second);
    }
  }
}

std::vector<std::string> BpeModel::apply(std::string_view word) const {
  auto symbols = characters(word);
  while (symbols.size() > 1) {
    std::size_t best = std::numeric_limits<std::size_t>::max();
    const Pair* best_pair = nullptr;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = rank_.find(Pair{symbols[i], symbols[i + 1]});
      if (it != rank_.end() && it->second < best) {
        best = it->second;
        best_pair = &it->first;
      }
    }
    if (best_pair == nullptr) break;
    merge_pair(symbols, best_pair->first, best_pair->second);
  }
  for (std::size_t i = 0; i + 1 < symbols.size(); ++i) symbols[i] += kBpeMarker;
  return symbols;
}

void BpeModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  for (const auto& [a, b] : merges_) out << a << ' ' << b << '\n';
}

BpeModel BpeModel::load(const std::filesystem::path& path) {
  std::vector<Pair> merges;
  for (const auto& line : read_lines(path)) {
    if (line.empty() || line.starts_with("#version")) continue;
    auto parts = tokenize(line);
    if (parts.size() != 2) throw FormatError("malformed merge line: " + line);
    merges.emplace_back(parts[0], parts[1]);
  }
  return BpeModel(std::move(merges));
}

BpeModel learn_bpe(const std::map<std::string, std::size_t>& word_counts,
                   std::size_t num_merges) {
  std::vector<std::pair<std::vector<std::string>, std::size_t>> words;
  for (const auto& [w, n] : word_counts) words.emplace_back(characters(w), n);

  std::vector<BpeModel::Pair> merges;
  while (merges.size() < num_merges) {
    std::map<BpeModel::Pair, std::size_t> counts;
    for (const auto& [symbols, n] : words) {
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
        counts[{symbols[i], symbols[i + 1]}] += n;
      }
    }
    // std::map iterates pairs in lexicographic order, so the first maximum
    // wins ties.
    const BpeModel::Pair* best = nullptr;
    std::size_t best_count = 0;
    for (const auto& [pair, n] : counts) {
      if (n > best_count) {
        best_count = n;
        best = &pair;
      }
    }
    if (best == nullptr) break;
    merges.push_back(*best);
    for (auto& [symbols, n] : words) merge_pair(symbols, best->first, best->second);
  }
  return BpeModel(std::move(merges));
}

std::vector<std::string> apply_bpe(std::string_view word, const BpeModel& model) {
  return model.apply(word);
}

}  // namespace inmt

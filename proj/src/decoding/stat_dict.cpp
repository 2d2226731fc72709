#include <fstream>
#include <unordered_map>

#include "inmt/decoding.hpp"
#include "inmt/error.hpp"
#include "json.hpp"

namespace inmt {

const StatDict::Entry* StatDict::lookup(std::string_view source) const {
  auto it = entries.find(std::string(source));
  return it == entries.end() ? nullptr : &it->second;
}

void StatDict::save(const std::filesystem::path& path) const {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [src, e] : entries) doc[src] = {{"target", e.target}, {"score", e.score}};
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << doc.dump(1) << '\n';
}

StatDict StatDict::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  StatDict dict;
  try {
    const auto doc = nlohmann::json::parse(in);
    for (const auto& [src, e] : doc.items()) {
      dict.entries[src] = {e.at("target").get<std::string>(), e.at("score").get<double>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return dict;
}

StatDict build_stat_dict(const ParallelCorpus& corpus, std::size_t iterations) {
  if (corpus.empty()) throw EmptyInputError("cannot build a dictionary from an empty corpus");
  std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> pairs;
  std::unordered_map<std::string, std::size_t> target_words;
  for (const auto& p : corpus.pairs) {
    pairs.emplace_back(tokenize(p.source), tokenize(p.target));
    for (const auto& t : pairs.back().second) target_words.emplace(t, target_words.size());
  }
  if (target_words.empty()) throw EmptyInputError("corpus has no target words");

  // prob[s][t] = p(t | s); only co-occurring pairs are ever non-zero.
  using Row = std::unordered_map<std::string, double>;
  std::unordered_map<std::string, Row> prob;
  const double uniform = 1.0 / static_cast<double>(target_words.size());
  for (const auto& [src, trg] : pairs) {
    for (const auto& s : src) {
      auto& row = prob[s];
      for (const auto& t : trg) row.emplace(t, uniform);
    }
  }

  for (std::size_t it = 0; it < iterations; ++it) {
    std::unordered_map<std::string, Row> counts;
    std::unordered_map<std::string, double> totals;
    for (const auto& [src, trg] : pairs) {
      for (const auto& t : trg) {
        double denom = 0.0;
        for (const auto& s : src) denom += prob[s][t];
        if (denom <= 0.0) continue;
        for (const auto& s : src) {
          const double c = prob[s][t] / denom;
          counts[s][t] += c;
          totals[s] += c;
        }
      }
    }
    for (auto& [s, row] : prob) {
      const double total = totals[s];
      for (auto& [t, v] : row) v = total > 0.0 ? counts[s][t] / total : 0.0;
    }
  }

  StatDict dict;
  for (const auto& [s, row] : prob) {
    const std::string* best = nullptr;
    double best_p = 0.0;
    for (const auto& [t, v] : row) {
      if (v > best_p || (v == best_p && best != nullptr && t < *best)) {
        best_p = v;
        best = &t;
      }
    }
    if (best != nullptr && best_p > 0.0) dict.entries[s] = {*best, best_p};
  }
  return dict;
}

std::vector<std::string> replace_unknowns(const Hypothesis& hyp,
                                          const std::vector<std::string>& source_tokens,
                                          const Vocabulary& target_vocab,
                                          const StatDict* dict) {
  auto is_special = [](const std::string& tok) {
    return tok == kPadToken || tok == kUnkToken || tok == kBosToken || tok == kEosToken;
  };
  std::vector<std::string> out;
  out.reserve(hyp.tokens.size());
  for (std::size_t t = 0; t < hyp.tokens.size(); ++t) {
    const TokenId id = hyp.tokens[t];
    if (t < hyp.verbatim.size() && !hyp.verbatim[t].empty()) {
      out.push_back(hyp.verbatim[t]);
      continue;
    }
    if (id != kUnk || t >= hyp.attention.size()) {
      out.push_back(target_vocab.token(id));
      continue;
    }
    const Vec& alpha = hyp.attention[t];
    std::size_t best = source_tokens.size();
    for (std::size_t j = 0; j < alpha.size() && j < source_tokens.size(); ++j) {
      if (is_special(source_tokens[j])) continue;
      if (best == source_tokens.size() || alpha[j] > alpha[best]) best = j;
    }
    if (best == source_tokens.size()) {
      out.push_back(target_vocab.token(id));
      continue;
    }
    const std::string& word = source_tokens[best];
    const auto* entry = dict ? dict->lookup(word) : nullptr;
    out.push_back(entry ? entry->target : word);
  }
  return out;
}

}  // namespace inmt

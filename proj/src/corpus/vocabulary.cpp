#include <algorithm>
#include <fstream>
#include <sstream>

#include "inmt/corpus.hpp"
#include "inmt/error.hpp"
#include "json.hpp"

namespace inmt {

namespace {
std::vector<std::string> special_tokens() {
  return {std::string(kPadToken), std::string(kUnkToken),
          std::string(kBosToken), std::string(kEosToken)};
}
}  // namespace

Vocabulary::Vocabulary() : Vocabulary(special_tokens()) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens)
    : tokens_(std::move(tokens)) {
  const auto specials = special_tokens();
  if (tokens_.size() < specials.size() ||
      !std::equal(specials.begin(), specials.end(), tokens_.begin())) {
    throw FormatError("vocabulary must start with <pad> <unk> <s> </s>");
  }
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw FormatError("duplicate vocabulary token: " + tokens_[i]);
    }
  }
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw OutOfRangeError("token id " + std::to_string(id) +
                          " outside vocabulary of size " +
                          std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.contains(std::string(token));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << nlohmann::json{{"tokens", tokens_}}.dump(1) << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  try {
    auto doc = nlohmann::json::parse(in);
    return Vocabulary(doc.at("tokens").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& corpus,
                            std::size_t max_size, std::size_t min_freq) {
  if (max_size < 4) throw ConfigError("max_size must be at least 4");
  if (min_freq < 1) throw ConfigError("min_freq must be at least 1");
  std::unordered_map<std::string, std::size_t> counts;
  bool any = false;
  for (const auto& sentence : corpus) {
    for (const auto& tok : sentence) {
      ++counts[tok];
      any = true;
    }
  }
  if (!any) throw EmptyInputError("cannot build a vocabulary from an empty corpus");

  const auto specials = special_tokens();
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : counts) {
    if (n < min_freq) continue;
    if (std::find(specials.begin(), specials.end(), tok) != specials.end()) continue;
    ranked.emplace_back(tok, n);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  auto tokens = specials;
  for (auto& [tok, n] : ranked) {
    if (tokens.size() >= max_size) break;
    tokens.push_back(tok);
  }
  return Vocabulary(std::move(tokens));
}

std::vector<std::string> tokenize(std::string_view sentence) {
  std::vector<std::string> out;
  std::size_t i = 0;
  auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
  };
  while (i < sentence.size()) {
    while (i < sentence.size() && is_space(sentence[i])) ++i;
    std::size_t j = i;
    while (j < sentence.size() && !is_space(sentence[j])) ++j;
    if (j > i) out.emplace_back(sentence.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string> segment(std::string_view sentence, const BpeModel* bpe) {
  auto words = tokenize(sentence);
  if (bpe == nullptr) return words;
  std::vector<std::string> out;
  for (const auto& w : words) {
    auto pieces = bpe->apply(w);
    out.insert(out.end(), pieces.begin(), pieces.end());
  }
  return out;
}

std::string detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  bool glue = true;
  for (const auto& tok : tokens) {
    if (!glue) out.push_back(' ');
    std::string_view piece = tok;
    glue = piece.size() > kBpeMarker.size() && piece.ends_with(kBpeMarker);
    if (glue) piece.remove_suffix(kBpeMarker.size());
    out.append(piece);
  }
  return out;
}

IdSequence encode(std::string_view sentence, const Vocabulary& vocab,
                  const BpeModel* bpe) {
  IdSequence ids{kBos};
  for (const auto& tok : segment(sentence, bpe)) ids.push_back(vocab.id(tok));
  ids.push_back(kEos);
  return ids;
}

std::string decode(const IdSequence& ids, const Vocabulary& vocab,
                   const BpeModel* bpe) {
  std::vector<std::string> tokens;
  for (TokenId id : ids) {
    const auto& tok = vocab.token(id);
    if (id == kPad || id == kBos || id == kEos) continue;
    tokens.push_back(tok);
  }
  if (bpe == nullptr) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i > 0) out.push_back(' ');
      out += tokens[i];
    }
    return out;
  }
  return detokenize(tokens);
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace inmt

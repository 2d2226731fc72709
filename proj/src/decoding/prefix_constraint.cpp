#include "inmt/decoding.hpp"
#include "inmt/utf8.hpp"

namespace inmt {

namespace {
bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\v' || c == U'\f';
}
}  // namespace

PrefixConstraint::PrefixConstraint(const Vocabulary& vocab, std::string_view prefix,
                                   bool complete)
    : prefix_(utf8::decode(prefix)), complete_(complete) {
  surfaces_.reserve(vocab.size());
  continuation_.reserve(vocab.size());
  for (const auto& tok : vocab.tokens()) {
    std::string_view piece = tok;
    const bool cont = piece.size() > kBpeMarker.size() && piece.ends_with(kBpeMarker);
    if (cont) piece.remove_suffix(kBpeMarker.size());
    surfaces_.push_back(utf8::decode(piece));
    continuation_.push_back(cont);
  }
}

bool PrefixConstraint::compatible(std::u32string_view text) const {
  const std::size_t n = std::min(text.size(), prefix_.size());
  if (text.substr(0, n) != std::u32string_view(prefix_).substr(0, n)) return false;
  return !complete_ || text.size() <= prefix_.size();
}

bool PrefixConstraint::eos_allowed(const State& s) const {
  return complete_ ? s.text.size() == prefix_.size() && consumed(s) : consumed(s);
}

std::optional<PrefixConstraint::State> PrefixConstraint::advance(const State& s,
                                                                 TokenId token) const {
  if (token < 0 || static_cast<std::size_t>(token) >= surfaces_.size() ||
      Vocabulary::is_special(token)) {
    return std::nullopt;
  }
  State next;
  next.text = s.text;
  if (!s.glue && !s.text.empty()) next.text.push_back(U' ');
  next.text += surfaces_[static_cast<std::size_t>(token)];
  next.glue = continuation_[static_cast<std::size_t>(token)];
  if (active(s) && !compatible(next.text)) return std::nullopt;
  return next;
}

PrefixConstraint::State PrefixConstraint::advance_verbatim(const State& s,
                                                           std::u32string_view piece) const {
  State next;
  next.text = s.text;
  next.text += piece;
  next.glue = false;
  return next;
}

std::u32string PrefixConstraint::fallback_piece(const State& s) const {
  const std::size_t start = s.text.size();
  if (start >= prefix_.size()) return {};
  std::size_t end = start + 1;
  while (end < prefix_.size() && !is_space(prefix_[end])) ++end;
  return prefix_.substr(start, end - start);
}

std::string render_hypothesis(const Hypothesis& hyp, const Vocabulary& target_vocab,
                              const std::vector<std::string>* tokens) {
  std::string out;
  bool glue = true;
  for (std::size_t i = 0; i < hyp.tokens.size(); ++i) {
    const TokenId id = hyp.tokens[i];
    if (id == kEos || id == kPad || id == kBos) continue;
    if (i < hyp.verbatim.size() && !hyp.verbatim[i].empty()) {
      out += hyp.verbatim[i];
      glue = false;
      continue;
    }
    std::string_view piece = tokens ? std::string_view((*tokens)[i])
                                    : std::string_view(target_vocab.token(id));
    if (!glue && !out.empty()) out.push_back(' ');
    glue = piece.size() > kBpeMarker.size() && piece.ends_with(kBpeMarker);
    if (glue) piece.remove_suffix(kBpeMarker.size());
    out.append(piece);
  }
  return out;
}

}  // namespace inmt

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "inmt/corpus.hpp"
#include "inmt/model.hpp"

namespace inmt {

struct BeamConfig {
  std::size_t beam_size = 6;
  // Maximum hypothesis length (eos included) is ceil(a * source_len + b).
  double max_len_a = 1.5;
  double max_len_b = 10.0;
  // Minimum number of tokens before eos may be emitted.
  std::size_t min_length = 0;
  double length_alpha = 0.0;   // length-normalization exponent
  double coverage_beta = 0.0;  // coverage-penalty weight

  void validate() const;
  std::size_t max_length(std::size_t source_len) const;
};

struct Hypothesis {
  IdSequence tokens;                  // generated ids, no bos; eos last when closed by eos
  std::vector<std::string> verbatim;  // forced surface text per token, empty for vocabulary tokens
  double logprob = 0.0;
  double score = 0.0;                 // normalized score used for ranking
  std::vector<Vec> attention;         // one weight vector per generated token
  Vec coverage;                       // sum of attention over steps
  bool finished = false;

  bool ends_with_eos() const { return !tokens.empty() && tokens.back() == kEos; }
};

// ((5 + length) / 6)^alpha
double length_penalty(std::size_t length, double alpha);
// beta * sum_j log(min(1, coverage_j))
double coverage_penalty(std::span<const double> coverage, double beta);
double normalized_score(double logprob, std::size_t length,
                        std::span<const double> coverage, const BeamConfig& config);

// Character-prefix constraint over detokenized output. Tokens are joined
// with single spaces, except after a piece carrying the "@@" marker.
// Verbatim (forced) pieces are appended exactly as given.
class PrefixConstraint {
 public:
  struct State {
    std::u32string text;
    bool glue = true;  // next vocabulary token attaches without a space
  };

  // complete: the prefix is the whole sentence, so eos is forced once it
  // has been produced.
  PrefixConstraint(const Vocabulary& vocab, std::string_view prefix, bool complete = false);

  const std::u32string& prefix() const { return prefix_; }
  bool complete() const { return complete_; }

  State initial() const { return {}; }
  bool consumed(const State& s) const { return s.text.size() >= prefix_.size(); }
  // True while candidate tokens still have to be checked.
  bool active(const State& s) const { return complete_ || !consumed(s); }
  bool eos_allowed(const State& s) const;
  bool unk_allowed(const State& s) const { return consumed(s) && !complete_; }

  // Successor state, or nullopt if the token contradicts the prefix.
  std::optional<State> advance(const State& s, TokenId token) const;
  State advance_verbatim(const State& s, std::u32string_view piece) const;
  // Verbatim fallback: the rest of the prefix from the current position
  // up to the next whitespace (always at least one character).
  std::u32string fallback_piece(const State& s) const;

 private:
  bool compatible(std::u32string_view text) const;

  std::u32string prefix_;
  bool complete_;
  std::vector<std::u32string> surfaces_;
  std::vector<bool> continuation_;
};

// Beam search over one model or an ensemble (per-step probabilities are
// averaged). Returns up to beam_size finished hypotheses sorted by
// normalized score, ties broken lexicographically on token ids. `source`
// is an encoded id sequence (bos ... eos). Throws EmptyInputError.
std::vector<Hypothesis> beam_search(std::span<const ModelParams* const> models,
                                    const IdSequence& source, const BeamConfig& config,
                                    const PrefixConstraint* constraint = nullptr);
std::vector<Hypothesis> beam_search(const ModelParams& model, const IdSequence& source,
                                    const BeamConfig& config,
                                    const PrefixConstraint* constraint = nullptr);

// Sum of teacher-forced log-probabilities of target (bos ... eos).
double score_sentence(const ModelParams& params, const IdSequence& source,
                      const IdSequence& target);

// Elementwise mean. Throws ShapeError on mismatched checkpoints and
// EmptyInputError for an empty list.
ModelParams average_checkpoints(std::span<const ModelParams> checkpoints);

struct StatDict {
  struct Entry {
    std::string target;
    double score = 0.0;
    bool operator==(const Entry&) const = default;
  };
  std::map<std::string, Entry> entries;

  const Entry* lookup(std::string_view source) const;
  void save(const std::filesystem::path& path) const;
  static StatDict load(const std::filesystem::path& path);
};

// Lexical translation table from EM over word co-occurrences (IBM model 1
// style, uniform start), keeping the best target per source word.
StatDict build_stat_dict(const ParallelCorpus& corpus, std::size_t iterations = 10);

// Token strings aligned with hyp.tokens. Each unk is replaced by the
// dictionary entry of the most attended source token, or by that token
// itself. `source_tokens` is aligned with the encoder positions; special
// tokens there are never copied.
std::vector<std::string> replace_unknowns(const Hypothesis& hyp,
                                          const std::vector<std::string>& source_tokens,
                                          const Vocabulary& target_vocab,
                                          const StatDict* dict = nullptr);

// Detokenized text of a hypothesis (eos dropped). `tokens` overrides the
// vocabulary strings, e.g. with the output of replace_unknowns.
std::string render_hypothesis(const Hypothesis& hyp, const Vocabulary& target_vocab,
                              const std::vector<std::string>* tokens = nullptr);

// "idx ||| hypothesis ||| normalized score ||| raw logprob"
std::string format_nbest_line(std::size_t index, std::string_view text, double score,
                              double logprob);

}  // namespace inmt

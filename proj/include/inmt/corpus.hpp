#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace inmt {

using TokenId = std::int32_t;
using IdSequence = std::vector<TokenId>;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUnk = 1;
inline constexpr TokenId kBos = 2;
inline constexpr TokenId kEos = 3;
inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kBosToken = "<s>";
inline constexpr std::string_view kEosToken = "</s>";

inline constexpr std::string_view kBpeMarker = "@@";

// Bijective token <-> id map. Ids 0..3 are pad/unk/bos/eos; the remaining
// tokens are ordered by descending corpus frequency, ties lexicographic.
class Vocabulary {
 public:
  Vocabulary();
  // Tokens must start with the four specials in order and be unique.
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(TokenId id) const;
  // kUnk for unknown tokens.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;

  static bool is_special(TokenId id) { return id >= 0 && id <= kEos; }

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Ordered merge list; a pair's priority is its position.
class BpeModel {
 public:
  using Pair = std::pair<std::string, std::string>;

  BpeModel() = default;
  explicit BpeModel(std::vector<Pair> merges);

  const std::vector<Pair>& merges() const { return merges_; }

  // Segments one whitespace-free word. Every piece but the last carries
  // the "@@" continuation marker.
  std::vector<std::string> apply(std::string_view word) const;

  void save(const std::filesystem::path& path) const;
  static BpeModel load(const std::filesystem::path& path);

 private:
  std::vector<Pair> merges_;
  std::map<Pair, std::size_t> rank_;
};

BpeModel learn_bpe(const std::map<std::string, std::size_t>& word_counts,
                   std::size_t num_merges);
std::vector<std::string> apply_bpe(std::string_view word, const BpeModel& model);

// Whitespace split, no further normalization.
std::vector<std::string> tokenize(std::string_view sentence);
// Tokenize and, when a BPE model is given, segment every word.
std::vector<std::string> segment(std::string_view sentence,
                                 const BpeModel* bpe = nullptr);
// Join tokens with single spaces and undo "@@ " continuations.
std::string detokenize(const std::vector<std::string>& tokens);

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& corpus,
                            std::size_t max_size, std::size_t min_freq = 1);

// [bos] ++ ids ++ [eos]; OOV tokens map to unk.
IdSequence encode(std::string_view sentence, const Vocabulary& vocab,
                  const BpeModel* bpe = nullptr);
// Strips pad/bos/eos and undoes BPE. Throws OutOfRangeError for id >= |V|.
std::string decode(const IdSequence& ids, const Vocabulary& vocab,
                   const BpeModel* bpe = nullptr);

enum class Split { train, dev, test };

struct SentencePair {
  std::string source;
  std::string target;
  bool operator==(const SentencePair&) const = default;
};

struct ParallelCorpus {
  std::vector<SentencePair> pairs;
  Split split = Split::train;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }

  // Two line-aligned UTF-8 files. Throws FormatError on count mismatch or
  // invalid UTF-8.
  static ParallelCorpus load(const std::filesystem::path& source,
                             const std::filesystem::path& target,
                             Split split = Split::train);
};

std::vector<std::string> read_lines(const std::filesystem::path& path);

// Row-padded id matrices with 0/1 masks over non-pad cells.
struct Batch {
  std::vector<IdSequence> source;
  std::vector<IdSequence> target;
  std::vector<std::vector<std::uint8_t>> source_mask;
  std::vector<std::vector<std::uint8_t>> target_mask;
  // Index of each row in the originating corpus.
  std::vector<std::size_t> indices;

  std::size_t rows() const { return source.size(); }
};

// Trims padding off a padded row.
IdSequence unpad(const IdSequence& row);

struct VocabularyPair {
  const Vocabulary* source;
  const Vocabulary* target;
  const BpeModel* source_bpe = nullptr;
  const BpeModel* target_bpe = nullptr;
};

std::vector<Batch> make_batches(const ParallelCorpus& corpus,
                                const VocabularyPair& vocabs,
                                std::size_t batch_size, std::uint64_t seed);

}  // namespace inmt

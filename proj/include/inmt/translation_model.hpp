#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "inmt/corpus.hpp"
#include "inmt/decoding.hpp"
#include "inmt/model.hpp"

namespace inmt {

// Parameters plus everything needed to go from text to ids and back.
struct TranslationModel {
  ModelParams params;
  Vocabulary source_vocab;
  Vocabulary target_vocab;
  std::optional<BpeModel> source_bpe;
  std::optional<BpeModel> target_bpe;
  std::optional<StatDict> dict;

  VocabularyPair vocabs() const;
  IdSequence encode_source(std::string_view text) const;
  IdSequence encode_target(std::string_view text) const;
  // Strings aligned with encoder positions (bos and eos included), BPE
  // markers stripped; used for unknown-word replacement.
  std::vector<std::string> source_tokens(std::string_view text) const;

  // Directory layout: params.ckpt, source.vocab.json, target.vocab.json and,
  // when present, source.bpe, target.bpe, dict.json.
  void save(const std::filesystem::path& dir) const;
  static TranslationModel load(const std::filesystem::path& dir);
};

struct Translation {
  std::string text;  // detokenized, unknown words replaced
  Hypothesis hypothesis;
};

// N-best translations; `extra` adds ensemble members sharing the vocabularies.
std::vector<Translation> translate(const TranslationModel& model, std::string_view source,
                                   const BeamConfig& beam,
                                   const PrefixConstraint* constraint = nullptr,
                                   std::span<const ModelParams* const> extra = {});

}  // namespace inmt

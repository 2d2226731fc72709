#include "inmt/translation_model.hpp"

#include "inmt/checkpoint.hpp"
#include "inmt/error.hpp"

namespace inmt {

namespace fs = std::filesystem;

VocabularyPair TranslationModel::vocabs() const {
  return {&source_vocab, &target_vocab, source_bpe ? &*source_bpe : nullptr,
          target_bpe ? &*target_bpe : nullptr};
}

IdSequence TranslationModel::encode_source(std::string_view text) const {
  return encode(text, source_vocab, source_bpe ? &*source_bpe : nullptr);
}

IdSequence TranslationModel::encode_target(std::string_view text) const {
  return encode(text, target_vocab, target_bpe ? &*target_bpe : nullptr);
}

std::vector<std::string> TranslationModel::source_tokens(std::string_view text) const {
  std::vector<std::string> out{std::string(kBosToken)};
  for (auto piece : segment(text, source_bpe ? &*source_bpe : nullptr)) {
    if (piece.size() > kBpeMarker.size() && piece.ends_with(kBpeMarker)) {
      piece.resize(piece.size() - kBpeMarker.size());
    }
    out.push_back(std::move(piece));
  }
  out.emplace_back(kEosToken);
  return out;
}

void TranslationModel::save(const fs::path& dir) const {
  fs::create_directories(dir);
  save_checkpoint(dir / "params.ckpt", params);
  source_vocab.save(dir / "source.vocab.json");
  target_vocab.save(dir / "target.vocab.json");
  if (source_bpe) source_bpe->save(dir / "source.bpe");
  if (target_bpe) target_bpe->save(dir / "target.bpe");
  if (dict) dict->save(dir / "dict.json");
}

TranslationModel TranslationModel::load(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw FormatError("model directory not found: " + dir.string());
  TranslationModel m;
  m.source_vocab = Vocabulary::load(dir / "source.vocab.json");
  m.target_vocab = Vocabulary::load(dir / "target.vocab.json");
  m.params = load_checkpoint(dir / "params.ckpt");
  if (m.params.dims.source_vocab != m.source_vocab.size() ||
      m.params.dims.target_vocab != m.target_vocab.size()) {
    throw ShapeError("checkpoint vocabulary sizes do not match the vocabulary files");
  }
  if (fs::exists(dir / "source.bpe")) m.source_bpe = BpeModel::load(dir / "source.bpe");
  if (fs::exists(dir / "target.bpe")) m.target_bpe = BpeModel::load(dir / "target.bpe");
  if (fs::exists(dir / "dict.json")) m.dict = StatDict::load(dir / "dict.json");
  return m;
}

std::vector<Translation> translate(const TranslationModel& model, std::string_view source,
                                   const BeamConfig& beam, const PrefixConstraint* constraint,
                                   std::span<const ModelParams* const> extra) {
  const auto ids = model.encode_source(source);
  if (ids.size() <= 2) throw EmptyInputError("cannot translate an empty source");
  std::vector<const ModelParams*> models{&model.params};
  models.insert(models.end(), extra.begin(), extra.end());
  const auto hyps = beam_search(models, ids, beam, constraint);
  const auto tokens = model.source_tokens(source);
  const StatDict* dict = model.dict ? &*model.dict : nullptr;
  std::vector<Translation> out;
  out.reserve(hyps.size());
  for (const auto& h : hyps) {
    const auto replaced = replace_unknowns(h, tokens, model.target_vocab, dict);
    out.push_back({render_hypothesis(h, model.target_vocab, &replaced), h});
  }
  return out;
}

}  // namespace inmt

#pragma once

#include <random>
#include <string>
#include <vector>

#include "inmt/corpus.hpp"
#include "inmt/training.hpp"
#include "inmt/translation_model.hpp"

namespace inmt::testing {

inline const char* const kDigitWords[] = {"zero", "one", "two",   "three", "four",
                                          "five", "six", "seven", "eight", "nine"};

// "3 1 4" -> "three one four", lengths in [min_len, max_len].
inline ParallelCorpus digit_corpus(std::size_t n, std::uint64_t seed, std::size_t min_len = 3,
                                   std::size_t max_len = 6) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::uniform_int_distribution<int> digit(0, 9);
  ParallelCorpus c;
  for (std::size_t i = 0; i < n; ++i) {
    std::string src, trg;
    const std::size_t L = len(rng);
    for (std::size_t k = 0; k < L; ++k) {
      const int d = digit(rng);
      if (k) {
        src += ' ';
        trg += ' ';
      }
      src += std::to_string(d);
      trg += kDigitWords[d];
    }
    c.pairs.push_back({src, trg});
  }
  return c;
}

inline Vocabulary vocabulary_of(const std::vector<const ParallelCorpus*>& corpora, bool source) {
  std::vector<std::vector<std::string>> sents;
  for (const auto* c : corpora)
    for (const auto& p : c->pairs) sents.push_back(tokenize(source ? p.source : p.target));
  return build_vocabulary(sents, 1000);
}

struct DigitTask {
  ParallelCorpus train, dev;
  Vocabulary source, target;

  explicit DigitTask(std::size_t n_train = 100, std::size_t n_dev = 20, std::uint64_t seed = 7)
      : train(digit_corpus(n_train, seed)), dev(digit_corpus(n_dev, seed + 1)) {
    dev.split = Split::dev;
    source = vocabulary_of({&train}, true);
    target = vocabulary_of({&train}, false);
  }
  VocabularyPair vocabs() const { return {&source, &target}; }
};

// Small corpus in which "à" is always followed by "jamais", so a model
// trained on it finishes a forced "Ils sont perdus à" with "jamais .".
inline ParallelCorpus lost_forever_corpus() {
  ParallelCorpus c;
  c.pairs = {
      {"They are lost forever .", "Ils sont perdus pour toujours ."},
      {"They are gone forever .", "Ils sont partis pour toujours ."},
      {"They are lost .", "Ils sont perdus ."},
      {"We are lost .", "Nous sommes perdus ."},
      {"We are gone .", "Nous sommes partis ."},
      {"They left for good .", "Ils sont partis à jamais ."},
      {"It is over for good .", "C' est fini à jamais ."},
      {"It is over forever .", "C' est fini pour toujours ."},
      {"She is lost forever .", "Elle est perdue pour toujours ."},
      {"He is gone for good .", "Il est parti à jamais ."},
      {"We left .", "Nous sommes partis ."},
      {"It is over .", "C' est fini ."},
      {"We are lost forever .", "Nous sommes perdus à jamais ."},
      {"She left forever .", "Elle est partie à jamais ."},
  };
  return c;
}

// Plain Adam epochs over the corpus; keeps the final parameters, since an
// overfit toy model saturates any held-out selection early.
inline TranslationModel train_toy_model(const ParallelCorpus& corpus, std::size_t dim,
                                        std::size_t epochs, std::uint64_t seed = 1) {
  TranslationModel m;
  m.source_vocab = vocabulary_of({&corpus}, true);
  m.target_vocab = vocabulary_of({&corpus}, false);
  ModelDims d;
  d.embedding = d.state = d.attention = dim;
  d.source_vocab = m.source_vocab.size();
  d.target_vocab = m.target_vocab.size();
  m.params = init_params(d, AttentionKind::additive, seed);
  TrainConfig c;
  c.learning_rate = 0.01;
  OptimizerState state;
  for (std::size_t e = 0; e < epochs; ++e) {
    for (const auto& b : make_batches(corpus, m.vocabs(), 8, seed + e)) {
      auto g = Gradients::zeros(d);
      batch_gradients(m.params, b, c, g);
      clip_gradients(g, c.clip_norm);
      optimizer_step(m.params, g, state, c);
    }
  }
  return m;
}

}  // namespace inmt::testing

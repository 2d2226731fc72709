#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "inmt/decoding.hpp"
#include "inmt/error.hpp"
#include "inmt/utf8.hpp"

namespace inmt {

void BeamConfig::validate() const {
  if (beam_size < 1) throw ConfigError("beam_size must be at least 1");
  if (max_len_a < 0.0) throw ConfigError("max_len_a must be non-negative");
  if (length_alpha < 0.0) throw ConfigError("length_alpha must be non-negative");
  if (coverage_beta < 0.0) throw ConfigError("coverage_beta must be non-negative");
  if (max_length(0) < 1) throw ConfigError("max length must allow at least one token");
  if (min_length > max_length(0) && max_len_a == 0.0) {
    throw ConfigError("min_length exceeds max length");
  }
}

std::size_t BeamConfig::max_length(std::size_t source_len) const {
  const double v = std::ceil(max_len_a * static_cast<double>(source_len) + max_len_b);
  return v <= 0.0 ? 0 : static_cast<std::size_t>(v);
}

double length_penalty(std::size_t length, double alpha) {
  if (alpha == 0.0) return 1.0;
  return std::pow((5.0 + static_cast<double>(length)) / 6.0, alpha);
}

double coverage_penalty(std::span<const double> coverage, double beta) {
  if (beta == 0.0) return 0.0;
  double sum = 0.0;
  for (double c : coverage) sum += std::log(std::min(1.0, c));
  return beta * sum;
}

double normalized_score(double logprob, std::size_t length,
                        std::span<const double> coverage, const BeamConfig& config) {
  return logprob / length_penalty(length, config.length_alpha) +
         coverage_penalty(coverage, config.coverage_beta);
}

namespace {

struct Entry {
  Hypothesis hyp;
  std::vector<DecoderState> states;  // one per model
  PrefixConstraint::State constraint;
};

struct Expansion {
  Vec logprobs;
  Vec attention;
  std::vector<DecoderState> states;
};

struct Candidate {
  std::size_t parent;
  TokenId token;
  std::u32string verbatim;
  double logprob;
  double score;
  bool finished;
};

// log of the mean of the models' probabilities. Written relative to the
// first model so that k identical models reproduce it exactly.
Vec combine_logprobs(const std::vector<Vec>& per_model) {
  Vec out = per_model.front();
  const std::size_t K = per_model.size();
  if (K == 1) return out;
  const double inv = 1.0 / static_cast<double>(K);
  for (std::size_t v = 0; v < out.size(); ++v) {
    const double base = per_model[0][v];
    double max_diff = 0.0;
    for (std::size_t m = 1; m < K; ++m) max_diff = std::max(max_diff, per_model[m][v] - base);
    if (max_diff < 30.0) {
      double acc = 0.0;
      for (std::size_t m = 1; m < K; ++m) acc += std::expm1(per_model[m][v] - base);
      out[v] = base + std::log1p(acc * inv);
    } else {
      double mx = base;
      for (std::size_t m = 1; m < K; ++m) mx = std::max(mx, per_model[m][v]);
      double s = 0.0;
      for (std::size_t m = 0; m < K; ++m) s += std::exp(per_model[m][v] - mx);
      out[v] = mx + std::log(s * inv);
    }
  }
  return out;
}

Vec combine_attention(const std::vector<Vec>& per_model) {
  Vec out = per_model.front();
  const std::size_t K = per_model.size();
  if (K == 1) return out;
  const double inv = 1.0 / static_cast<double>(K);
  for (std::size_t j = 0; j < out.size(); ++j) {
    double acc = 0.0;
    for (std::size_t m = 1; m < K; ++m) acc += per_model[m][j] - per_model[0][j];
    out[j] += acc * inv;
  }
  return out;
}

bool lexicographically_less(const IdSequence& a_prefix, TokenId a_tok,
                            const IdSequence& b_prefix, TokenId b_tok) {
  const std::size_t n = std::min(a_prefix.size(), b_prefix.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (a_prefix[i] != b_prefix[i]) return a_prefix[i] < b_prefix[i];
  }
  if (a_prefix.size() != b_prefix.size()) {
    // Same generation step implies equal lengths; kept for completeness.
    const TokenId a_next = a_prefix.size() > n ? a_prefix[n] : a_tok;
    const TokenId b_next = b_prefix.size() > n ? b_prefix[n] : b_tok;
    return a_next < b_next;
  }
  return a_tok < b_tok;
}

bool hypothesis_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return std::lexicographical_compare(a.tokens.begin(), a.tokens.end(), b.tokens.begin(),
                                      b.tokens.end());
}

std::size_t content_length(const IdSequence& source) {
  std::size_t n = 0;
  for (TokenId id : source) n += Vocabulary::is_special(id) ? 0 : 1;
  return n;
}

}  // namespace

std::vector<Hypothesis> beam_search(std::span<const ModelParams* const> models,
                                    const IdSequence& source, const BeamConfig& config,
                                    const PrefixConstraint* constraint) {
  config.validate();
  if (models.empty()) throw UsageError("beam search needs at least one model");
  if (source.empty()) throw EmptyInputError("cannot translate an empty source");
  const std::size_t V = models[0]->dims.target_vocab;
  for (const auto* m : models) {
    if (m->dims.target_vocab != V || m->dims.source_vocab != models[0]->dims.source_vocab) {
      throw ShapeError("ensemble members must share vocabularies");
    }
  }
  const std::size_t K = models.size();
  const std::size_t beam = config.beam_size;
  std::size_t max_len = std::max<std::size_t>(1, config.max_length(content_length(source)));
  // Each prefix character needs at most one extra token.
  if (constraint != nullptr) max_len += constraint->prefix().size();

  std::vector<EncodedSource> encoded(K);
  Entry root;
  for (std::size_t m = 0; m < K; ++m) {
    encoded[m] = prepare_source(source, *models[m]);
    root.states.push_back(init_decoder_state(encoded[m].annotations, *models[m]));
  }
  root.hyp.coverage.assign(source.size(), 0.0);
  if (constraint != nullptr) root.constraint = constraint->initial();

  std::vector<Entry> alive;
  alive.push_back(std::move(root));
  std::vector<Hypothesis> finished;

  for (std::size_t step = 1; step <= max_len && !alive.empty() && finished.size() < beam;
       ++step) {
    // Score every live entry; entries are independent.
    std::vector<Expansion> expansions(alive.size());
    const auto n_alive = static_cast<std::int64_t>(alive.size());
#pragma omp parallel for schedule(static) if (n_alive > 1)
    for (std::int64_t i = 0; i < n_alive; ++i) {
      const Entry& e = alive[static_cast<std::size_t>(i)];
      const TokenId prev = e.hyp.tokens.empty() ? kBos : e.hyp.tokens.back();
      std::vector<Vec> lps(K), atts(K);
      Expansion& x = expansions[static_cast<std::size_t>(i)];
      x.states.resize(K);
      for (std::size_t m = 0; m < K; ++m) {
        auto out = decoder_step(prev, e.states[m], encoded[m], *models[m]);
        lps[m] = log_softmax(out.logits);
        atts[m] = out.state.attention;
        x.states[m] = std::move(out.state);
      }
      x.logprobs = combine_logprobs(lps);
      x.attention = combine_attention(atts);
    }

    std::vector<Candidate> cands;
    std::vector<Vec> coverages(alive.size());
    std::vector<PrefixConstraint::State> next_states;  // parallel to cands when constrained
    for (std::size_t i = 0; i < alive.size(); ++i) {
      const Entry& e = alive[i];
      const Expansion& x = expansions[i];
      Vec& cov = coverages[i];
      cov = e.hyp.coverage;
      for (std::size_t j = 0; j < cov.size(); ++j) cov[j] += x.attention[j];
      const std::size_t len = e.hyp.tokens.size() + 1;
      const double lp = length_penalty(len, config.length_alpha);
      const double cp = coverage_penalty(cov, config.coverage_beta);
      const bool last = step == max_len;
      const bool cons_active = constraint != nullptr && constraint->active(e.constraint);
      bool any = false;

      for (std::size_t v = 0; v < V; ++v) {
        const auto tok = static_cast<TokenId>(v);
        if (tok == kPad || tok == kBos) continue;
        PrefixConstraint::State ns;
        if (tok == kEos) {
          if (len <= config.min_length &&
              !(constraint != nullptr && constraint->complete())) continue;
          if (constraint != nullptr && !constraint->eos_allowed(e.constraint)) continue;
          if (constraint != nullptr) ns = e.constraint;
        } else if (tok == kUnk) {
          if (constraint != nullptr && !constraint->unk_allowed(e.constraint)) continue;
          if (constraint != nullptr) ns = e.constraint;
        } else if (constraint != nullptr) {
          if (cons_active) {
            auto adv = constraint->advance(e.constraint, tok);
            if (!adv) continue;
            ns = std::move(*adv);
          } else {
            ns = *constraint->advance(e.constraint, tok);
          }
        }
        const double logprob = e.hyp.logprob + x.logprobs[v];
        cands.push_back({i, tok, {}, logprob, logprob / lp + cp, tok == kEos || last});
        if (constraint != nullptr) next_states.push_back(std::move(ns));
        any = true;
      }
      if (!any && constraint != nullptr && !constraint->consumed(e.constraint)) {
        // Nothing in the vocabulary continues the prefix: force the next
        // prefix segment verbatim, scored as unk.
        auto piece = constraint->fallback_piece(e.constraint);
        const double logprob = e.hyp.logprob + x.logprobs[kUnk];
        next_states.push_back(constraint->advance_verbatim(e.constraint, piece));
        cands.push_back({i, kUnk, std::move(piece), logprob, logprob / lp + cp, last});
      }
    }
    if (cands.empty()) break;

    std::vector<std::size_t> order(cands.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t keep = std::min(order.size(), beam - finished.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep),
                      order.end(), [&](std::size_t a, std::size_t b) {
                        const auto& ca = cands[a];
                        const auto& cb = cands[b];
                        if (ca.score != cb.score) return ca.score > cb.score;
                        return lexicographically_less(alive[ca.parent].hyp.tokens, ca.token,
                                                      alive[cb.parent].hyp.tokens, cb.token);
                      });

    std::vector<Entry> next_alive;
    for (std::size_t r = 0; r < keep; ++r) {
      const std::size_t ci = order[r];
      const Candidate& c = cands[ci];
      const Entry& parent = alive[c.parent];
      Entry child;
      child.hyp.tokens = parent.hyp.tokens;
      child.hyp.tokens.push_back(c.token);
      child.hyp.verbatim = parent.hyp.verbatim;
      child.hyp.verbatim.push_back(utf8::encode(c.verbatim));
      child.hyp.logprob = c.logprob;
      child.hyp.score = c.score;
      child.hyp.attention = parent.hyp.attention;
      child.hyp.attention.push_back(expansions[c.parent].attention);
      child.hyp.coverage = coverages[c.parent];
      if (constraint != nullptr) child.constraint = next_states[ci];
      if (c.finished) {
        child.hyp.finished = true;
        finished.push_back(std::move(child.hyp));
      } else {
        child.states = expansions[c.parent].states;
        next_alive.push_back(std::move(child));
      }
    }
    alive = std::move(next_alive);
  }

  std::sort(finished.begin(), finished.end(), hypothesis_before);
  if (finished.size() > beam) finished.resize(beam);
  return finished;
}

std::vector<Hypothesis> beam_search(const ModelParams& model, const IdSequence& source,
                                    const BeamConfig& config,
                                    const PrefixConstraint* constraint) {
  const ModelParams* models[] = {&model};
  return beam_search(std::span<const ModelParams* const>(models), source, config, constraint);
}

}  // namespace inmt

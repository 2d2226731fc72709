#include <limits>
#include <ostream>

#include "json.hpp"
#include <omp.h>

#include "inmt/decoding.hpp"
#include "inmt/error.hpp"
#include "inmt/metrics.hpp"
#include "inmt/training.hpp"

namespace inmt {

namespace {

struct RowTerms {
  double ce_sum = 0.0;  // summed over tokens
  double coverage = 0.0;
  std::size_t tokens = 0;
};

// Forward/backward for one pair. Gradients are those of
// ce_scale * (summed CE) + cov_scale * (coverage penalty), added into out.
RowTerms row_terms(const ModelParams& params, const IdSequence& source, const IdSequence& target,
                   const TrainConfig& config, double ce_scale, double cov_scale,
                   Gradients* out) {
  auto fwd = forward_logprob(source, target, params);
  const auto& steps = fwd.cache.steps;
  std::vector<Vec> logits, attention;
  logits.reserve(steps.size());
  for (const auto& s : steps) {
    logits.push_back(s.logits);
    attention.push_back(s.attention);
  }
  std::span<const TokenId> targets(target.data() + 1, steps.size());
  std::vector<std::uint8_t> mask(steps.size(), 1);
  auto ce = cross_entropy(logits, targets, mask, config.label_smoothing);
  RowTerms r;
  r.tokens = steps.size();
  r.ce_sum = ce.loss * static_cast<double>(r.tokens);
  if (!out) {
    if (config.coverage_penalty > 0.0) {
      r.coverage = coverage_regularizer(attention, config.coverage_penalty).loss;
    }
    return r;
  }
  // ce.grad is d(mean)/d(logits); rescale to d(sum)/d(logits) * ce_scale.
  const double k = ce_scale * static_cast<double>(r.tokens);
  LossGradient lg;
  lg.logits = std::move(ce.grad);
  for (auto& row : lg.logits)
    for (double& x : row) x *= k;
  if (config.coverage_penalty > 0.0) {
    auto cov = coverage_regularizer(attention, config.coverage_penalty);
    r.coverage = cov.loss;
    for (auto& row : cov.grad)
      for (double& x : row) x *= cov_scale;
    lg.attention = std::move(cov.grad);
  }
  backward_into(fwd.cache, lg, *out);
  return r;
}

void add_into(Gradients& dst, const Gradients& src) {
  std::vector<Tensor*> d;
  dst.for_each([&](std::string_view, Tensor& t) { d.push_back(&t); });
  std::size_t i = 0;
  src.for_each([&](std::string_view, const Tensor& t) {
    auto& out = d[i++]->data;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += t.data[k];
  });
}

std::vector<std::string> greedy_translations(const ModelParams& params,
                                             const ParallelCorpus& corpus,
                                             const VocabularyPair& vocabs) {
  std::vector<std::string> out(corpus.size());
  BeamConfig beam;
  beam.beam_size = 1;
  const auto n = static_cast<std::ptrdiff_t>(corpus.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& pair = corpus.pairs[static_cast<std::size_t>(i)];
    const auto src = encode(pair.source, *vocabs.source, vocabs.source_bpe);
    const auto hyps = beam_search(params, src, beam);
    out[static_cast<std::size_t>(i)] = hyps.empty() ? std::string() : render_hypothesis(hyps.front(), *vocabs.target);
  }
  return out;
}

double dev_bleu(const ModelParams& params, const TrainingData& data) {
  std::vector<std::string> refs;
  for (const auto& p : data.dev.pairs) refs.push_back(p.target);
  return bleu(greedy_translations(params, data.dev, data.vocabs), refs);
}

}  // namespace

SampleLoss sample_loss(const ModelParams& params, const IdSequence& source,
                       const IdSequence& target, const TrainConfig& config) {
  const auto r = row_terms(params, source, target, config, 0.0, 0.0, nullptr);
  return {r.ce_sum / static_cast<double>(r.tokens) + r.coverage, r.tokens};
}

BatchResult batch_gradients(const ModelParams& params, const Batch& batch,
                            const TrainConfig& config, Gradients& out, Execution exec) {
  const std::size_t B = batch.rows();
  if (B == 0) throw EmptyInputError("empty batch");
  std::vector<IdSequence> src(B), trg(B);
  std::size_t total = 0;
  for (std::size_t i = 0; i < B; ++i) {
    src[i] = unpad(batch.source[i]);
    trg[i] = unpad(batch.target[i]);
    if (trg[i].size() < 2) throw EmptyInputError("batch row without target tokens");
    total += trg[i].size() - 1;
  }
  const double ce_scale = 1.0 / static_cast<double>(total);
  const double cov_scale = 1.0 / static_cast<double>(B);

  std::vector<Gradients> rows(B);
  std::vector<RowTerms> terms(B);
  auto work = [&](std::size_t i) {
    rows[i] = Gradients::zeros(params.dims, params.attention);
    terms[i] = row_terms(params, src[i], trg[i], config, ce_scale, cov_scale, &rows[i]);
  };
  if (exec == Execution::parallel) {
    const auto n = static_cast<std::ptrdiff_t>(B);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) work(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < B; ++i) work(i);
  }

  // Fixed reduction order keeps both paths bitwise identical.
  BatchResult res;
  res.tokens = total;
  for (std::size_t i = 0; i < B; ++i) {
    add_into(out, rows[i]);
    res.loss += terms[i].ce_sum * ce_scale + terms[i].coverage * cov_scale;
  }
  return res;
}

void TrainLog::write_jsonl(std::ostream& out) const {
  for (const auto& u : updates) {
    out << nlohmann::json{{"type", "update"}, {"update", u.update}, {"epoch", u.epoch},
                          {"loss", u.loss}, {"lr", u.learning_rate}}
               .dump()
        << '\n';
  }
  for (std::size_t i = 0; i < evaluations.size(); ++i) {
    const auto& e = evaluations[i];
    out << nlohmann::json{{"type", "eval"}, {"update", e.update}, {"epoch", e.epoch},
                          {"bleu", e.bleu}, {"best", best && *best == i}}
               .dump()
        << '\n';
  }
}

TrainResult train(const TrainingData& data, ModelParams initial, const TrainConfig& config,
                  const TrainObserver& observer) {
  config.validate();
  if (data.train.empty()) throw EmptyInputError("training split is empty");
  if (data.dev.empty()) throw EmptyInputError("dev split is empty");
  if (!data.vocabs.source || !data.vocabs.target) throw ConfigError("vocabularies missing");

  TrainResult result;
  result.params = initial;
  ModelParams current = std::move(initial);
  double best_bleu = -std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  std::size_t update = 0;

  // Returns true when training should stop.
  auto evaluate = [&](std::size_t epoch) {
    EvalRecord rec{update, epoch, dev_bleu(current, data)};
    result.log.evaluations.push_back(rec);
    if (rec.bleu > best_bleu) {
      best_bleu = rec.bleu;
      result.log.best = result.log.evaluations.size() - 1;
      result.params = current;
      stale = 0;
    } else {
      ++stale;
    }
    if (observer) observer(nullptr, &rec);
    return stale > config.patience;
  };

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto batches = make_batches(data.train, data.vocabs, config.batch_size,
                                      config.seed * 1000003ULL + epoch);
    for (const auto& batch : batches) {
      Gradients grads = Gradients::zeros(current.dims, current.attention);
      const auto br = batch_gradients(current, batch, config, grads);
      clip_gradients(grads, config.clip_norm);
      optimizer_step(current, grads, result.optimizer, config);
      ++update;
      UpdateRecord rec{update, epoch, br.loss,
                       schedule_lr(config.learning_rate, result.optimizer.step, config)};
      result.log.updates.push_back(rec);
      if (observer) observer(&rec, nullptr);
      if (config.eval_every > 0 && update % config.eval_every == 0 && evaluate(epoch)) {
        return result;
      }
    }
    if (config.eval_every == 0 && evaluate(epoch)) return result;
  }
  if (result.log.evaluations.empty()) result.params = current;
  return result;
}

std::vector<double> online_update(ModelParams& params, OptimizerState& state,
                                  const IdSequence& source, const IdSequence& target,
                                  std::size_t steps, const TrainConfig& config) {
  if (target.size() < 2) throw EmptyInputError("online update needs a non-empty target");
  std::vector<double> losses;
  for (std::size_t s = 0; s < steps; ++s) {
    Gradients grads = Gradients::zeros(params.dims, params.attention);
    const auto r = row_terms(params, source, target, config,
                             1.0 / static_cast<double>(target.size() - 1), 1.0, &grads);
    losses.push_back(r.ce_sum / static_cast<double>(r.tokens) + r.coverage);
    clip_gradients(grads, config.clip_norm);
    optimizer_step(params, grads, state, config);
  }
  return losses;
}

}  // namespace inmt

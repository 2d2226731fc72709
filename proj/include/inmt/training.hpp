#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "inmt/corpus.hpp"
#include "inmt/model.hpp"

namespace inmt {

enum class OptimizerKind { sgd, adam, adadelta };
enum class ScheduleKind { constant, linear, exponential, noam };

std::string_view to_string(OptimizerKind kind);
std::string_view to_string(ScheduleKind kind);
OptimizerKind parse_optimizer(std::string_view name);
ScheduleKind parse_schedule(std::string_view name);

struct TrainConfig {
  double learning_rate = 0.01;
  OptimizerKind optimizer = OptimizerKind::adam;
  ScheduleKind schedule = ScheduleKind::constant;
  double decay = 0.999;             // exponential gamma
  std::size_t total_steps = 10000;  // linear schedule horizon
  std::size_t warmup_steps = 4000;  // noam
  std::size_t model_dim = 512;      // noam
  double label_smoothing = 0.0;
  double weight_decay = 0.0;
  double coverage_penalty = 0.0;  // doubly stochastic attention lambda
  double clip_norm = 5.0;
  std::size_t max_epochs = 100;
  std::size_t patience = 5;
  std::size_t eval_every = 0;  // 0: evaluate once per epoch
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;

  // Throws ConfigError for out-of-range values.
  void validate() const;
};

struct LossAndGrad {
  double loss = 0.0;
  std::vector<Vec> grad;
};

// Mean over unmasked positions of -sum_v q(v) log p(v), where q mixes the
// one-hot target with a uniform distribution over the non-pad vocabulary.
// logits[t] scores targets[t]. Throws EmptyInputError when all positions
// are masked.
LossAndGrad cross_entropy(const std::vector<Vec>& logits, std::span<const TokenId> targets,
                          std::span<const std::uint8_t> mask, double smoothing);

// lambda * sum_j (1 - sum_t alpha[t][j])^2 and its gradient.
LossAndGrad coverage_regularizer(const std::vector<Vec>& attention, double lambda);

// Scales all arrays so their joint L2 norm is at most max_norm. Returns the
// norm before clipping.
double clip_gradients(std::span<const std::span<double>> arrays, double max_norm);
double clip_gradients(Gradients& grads, double max_norm);

struct OptimizerState {
  std::size_t step = 0;
  std::optional<Gradients> first;   // adam m / adadelta E[g^2]
  std::optional<Gradients> second;  // adam v / adadelta E[dx^2]
};

void optimizer_step(ModelParams& params, const Gradients& grads, OptimizerState& state,
                    const TrainConfig& config);

// Effective learning rate at a 1-based step.
double schedule_lr(double base_lr, std::size_t step, const TrainConfig& config);

struct SampleLoss {
  double loss = 0.0;  // cross entropy mean + coverage penalty
  std::size_t tokens = 0;
};

// Loss of one (source, target) id pair under the config's smoothing and
// coverage settings.
SampleLoss sample_loss(const ModelParams& params, const IdSequence& source,
                       const IdSequence& target, const TrainConfig& config);

enum class Execution { serial, parallel };

struct BatchResult {
  double loss = 0.0;
  std::size_t tokens = 0;
};

// Loss and gradients of one batch. Row gradients are reduced in row order,
// so serial and parallel execution give bitwise-identical results.
BatchResult batch_gradients(const ModelParams& params, const Batch& batch,
                            const TrainConfig& config, Gradients& out,
                            Execution exec = Execution::parallel);

struct UpdateRecord {
  std::size_t update = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
  double learning_rate = 0.0;
  bool operator==(const UpdateRecord&) const = default;
};

struct EvalRecord {
  std::size_t update = 0;
  std::size_t epoch = 0;
  double bleu = 0.0;
  bool operator==(const EvalRecord&) const = default;
};

struct TrainLog {
  std::vector<UpdateRecord> updates;
  std::vector<EvalRecord> evaluations;
  std::optional<std::size_t> best;  // index into evaluations

  void write_jsonl(std::ostream& out) const;
  bool operator==(const TrainLog&) const = default;
};

struct TrainResult {
  ModelParams params;  // best checkpoint by dev BLEU
  TrainLog log;
  OptimizerState optimizer;
};

struct TrainingData {
  const ParallelCorpus& train;
  const ParallelCorpus& dev;
  VocabularyPair vocabs;
};

// Called after every update/evaluation, e.g. to stream the log.
using TrainObserver = std::function<void(const UpdateRecord*, const EvalRecord*)>;

TrainResult train(const TrainingData& data, ModelParams initial, const TrainConfig& config,
                  const TrainObserver& observer = {});

// Runs `steps` optimizer updates on a single pair. Returns the sample loss
// measured before each update.
std::vector<double> online_update(ModelParams& params, OptimizerState& state,
                                  const IdSequence& source, const IdSequence& target,
                                  std::size_t steps, const TrainConfig& config);

}  // namespace inmt

#include <cmath>
#include <random>
#include <sstream>

#include "common/fixtures.hpp"
#include "common/random_model.hpp"
#include "doctest.h"
#include "inmt/decoding.hpp"
#include "inmt/error.hpp"
#include "inmt/metrics.hpp"
#include "inmt/training.hpp"

using namespace inmt;
using inmt::testing::DigitTask;
using inmt::testing::random_model;

namespace {

ModelDims small_dims(const DigitTask& t, std::size_t d = 8) {
  ModelDims m;
  m.embedding = d;
  m.state = d;
  m.attention = d;
  m.source_vocab = t.source.size();
  m.target_vocab = t.target.size();
  return m;
}

std::vector<double> flat(const ModelParams& p) {
  std::vector<double> out;
  p.for_each([&](std::string_view, const Tensor& t) { out.insert(out.end(), t.data.begin(), t.data.end()); });
  return out;
}

}  // namespace

TEST_CASE("cross entropy") {
  SUBCASE("uniform logits") {
    const std::vector<Vec> logits(3, Vec(8, 0.25));
    const std::vector<TokenId> y{4, 5, 6};
    const std::vector<std::uint8_t> m{1, 1, 1};
    CHECK(cross_entropy(logits, y, m, 0.0).loss == doctest::Approx(std::log(8.0)).epsilon(1e-14));
  }
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 2);
  std::vector<Vec> logits(5, Vec(7));
  for (auto& row : logits)
    for (auto& x : row) x = n(rng);
  const std::vector<TokenId> y{3, 4, 6, 1, 5};
  const std::vector<std::uint8_t> mask{1, 1, 0, 1, 1};

  SUBCASE("no smoothing is plain cross entropy, bitwise") {
    double plain = 0.0;
    for (std::size_t t = 0; t < 5; ++t)
      if (mask[t]) plain += -log_softmax(logits[t])[static_cast<std::size_t>(y[t])];
    plain *= 1.0 / 4.0;
    CHECK(cross_entropy(logits, y, mask, 0.0).loss == plain);
  }
  SUBCASE("smoothing mixes in the uniform target") {
    double ce = 0.0, uni = 0.0;
    for (std::size_t t = 0; t < 5; ++t) {
      if (!mask[t]) continue;
      const Vec lp = log_softmax(logits[t]);
      ce += -lp[static_cast<std::size_t>(y[t])];
      for (std::size_t v = 1; v < 7; ++v) uni += -lp[v] / 6.0;
    }
    CHECK(cross_entropy(logits, y, mask, 0.1).loss == doctest::Approx(0.9 * ce / 4 + 0.1 * uni / 4).epsilon(1e-13));
  }
  SUBCASE("gradient matches finite differences") {
    const auto r = cross_entropy(logits, y, mask, 0.2);
    const double h = 1e-6;
    for (std::size_t t = 0; t < 5; ++t) {
      for (std::size_t v = 0; v < 7; ++v) {
        auto up = logits, down = logits;
        up[t][v] += h;
        down[t][v] -= h;
        const double num = (cross_entropy(up, y, mask, 0.2).loss - cross_entropy(down, y, mask, 0.2).loss) / (2 * h);
        CHECK(r.grad[t][v] == doctest::Approx(num).epsilon(1e-6));
      }
    }
  }
  SUBCASE("errors") {
    const std::vector<std::uint8_t> none(5, 0);
    CHECK_THROWS_AS(cross_entropy(logits, y, none, 0.0), EmptyInputError);
    CHECK_THROWS_AS(cross_entropy(logits, y, mask, 1.0), ConfigError);
  }
}

TEST_CASE("coverage regularizer") {
  CHECK(coverage_regularizer({{0.3, 0.7}}, 0.0).loss == 0.0);
  CHECK(coverage_regularizer({{0.5, 0.5}, {0.5, 0.5}}, 2.0).loss == 0.0);
  CHECK(coverage_regularizer({{1.0, 0.0}}, 0.7).loss == doctest::Approx(0.7));
  const std::vector<Vec> a{{0.2, 0.5, 0.3}, {0.6, 0.1, 0.3}};
  const auto r = coverage_regularizer(a, 1.5);
  const double h = 1e-6;
  for (std::size_t t = 0; t < 2; ++t) {
    for (std::size_t j = 0; j < 3; ++j) {
      auto up = a, down = a;
      up[t][j] += h;
      down[t][j] -= h;
      const double num = (coverage_regularizer(up, 1.5).loss - coverage_regularizer(down, 1.5).loss) / (2 * h);
      CHECK(r.grad[t][j] == doctest::Approx(num).epsilon(1e-7));
    }
  }
}

TEST_CASE("gradient clipping") {
  std::vector<double> g{3.0, 4.0};
  std::vector<std::span<double>> arrays{g};
  CHECK(clip_gradients(arrays, 1.0) == 5.0);
  CHECK(g[0] == doctest::Approx(0.6).epsilon(1e-11));
  CHECK(g[1] == doctest::Approx(0.8).epsilon(1e-11));
  const auto once = g;
  clip_gradients(arrays, 1.0);
  CHECK(g == once);

  std::vector<double> small{0.1, -0.2};
  std::vector<std::span<double>> s{small};
  clip_gradients(s, 1.0);
  CHECK(small == std::vector<double>{0.1, -0.2});
  std::vector<double> zero(4, 0.0);
  std::vector<std::span<double>> z{zero};
  clip_gradients(z, 1.0);
  CHECK(zero == std::vector<double>(4, 0.0));

  // Joint norm across arrays, direction kept.
  std::vector<double> a{1.0, 2.0}, b{2.0};
  std::vector<std::span<double>> ab{a, b};
  clip_gradients(ab, 1.5);
  CHECK(std::sqrt(a[0] * a[0] + a[1] * a[1] + b[0] * b[0]) <= 1.5);
  CHECK(a[1] / a[0] == doctest::Approx(2.0));
  CHECK_THROWS_AS(clip_gradients(ab, 0.0), ConfigError);
}

TEST_CASE("optimizers") {
  ModelDims d;
  d.embedding = d.state = d.attention = 2;
  d.source_vocab = d.target_vocab = 5;
  auto params = ModelParams::zeros(d);
  auto grads = ModelParams::zeros(d);
  params.output_bias.data[0] = 1.0;
  grads.output_bias.data[0] = 0.5;
  grads.output_bias.data[1] = -0.25;

  SUBCASE("sgd") {
    TrainConfig c;
    c.optimizer = OptimizerKind::sgd;
    c.learning_rate = 0.1;
    OptimizerState st;
    optimizer_step(params, grads, st, c);
    CHECK(params.output_bias.data[0] == doctest::Approx(0.95).epsilon(1e-15));
    CHECK(st.step == 1);
  }
  SUBCASE("adam first step moves by about lr") {
    TrainConfig c;
    c.optimizer = OptimizerKind::adam;
    c.learning_rate = 0.01;
    OptimizerState st;
    optimizer_step(params, grads, st, c);
    CHECK(params.output_bias.data[0] == doctest::Approx(1.0 - 0.01 * 0.5 / (0.5 + 1e-8)).epsilon(1e-13));
    CHECK(params.output_bias.data[1] == doctest::Approx(0.01 * 0.25 / (0.25 + 1e-8)).epsilon(1e-13));
    CHECK(params.output_bias.data[2] == 0.0);
    REQUIRE(st.first);
    CHECK(st.first->output_bias.shape == params.output_bias.shape);
  }
  SUBCASE("adadelta against the published rule") {
    TrainConfig c;
    c.optimizer = OptimizerKind::adadelta;
    c.learning_rate = 1.0;
    OptimizerState st;
    double w = 1.0, eg = 0.0, ex = 0.0;
    const double rho = 0.95, eps = 1e-6;
    for (int k = 0; k < 3; ++k) {
      const double g = 0.5 / (k + 1);
      grads.output_bias.data[0] = g;
      optimizer_step(params, grads, st, c);
      eg = rho * eg + (1 - rho) * g * g;
      const double dx = -std::sqrt(ex + eps) / std::sqrt(eg + eps) * g;
      ex = rho * ex + (1 - rho) * dx * dx;
      w += dx;
      CHECK(params.output_bias.data[0] == doctest::Approx(w).epsilon(1e-14));
    }
    // First step closed form: sqrt(eps) / sqrt((1 - rho) g^2 + eps) * g.
    CHECK(1.0 - 0.5 * std::sqrt(eps) / std::sqrt(0.05 * 0.25 + eps) ==
          doctest::Approx(1.0 - std::sqrt(eps) / std::sqrt(0.05 * 0.25 + eps) * 0.5));
  }
  SUBCASE("decoupled weight decay") {
    TrainConfig c;
    c.optimizer = OptimizerKind::sgd;
    c.learning_rate = 0.1;
    c.weight_decay = 0.5;
    OptimizerState st;
    optimizer_step(params, grads, st, c);
    CHECK(params.output_bias.data[0] == doctest::Approx(1.0 - 0.1 * 0.5 * 1.0 - 0.1 * 0.5));
  }
  SUBCASE("shape mismatch") {
    ModelDims other = d;
    other.target_vocab = 6;
    auto wrong = ModelParams::zeros(other);
    OptimizerState st;
    CHECK_THROWS_AS(optimizer_step(params, wrong, st, TrainConfig{}), ShapeError);
  }
}

TEST_CASE("learning-rate schedules") {
  TrainConfig c;
  c.schedule = ScheduleKind::constant;
  CHECK(schedule_lr(0.3, 1, c) == 0.3);
  CHECK(schedule_lr(0.3, 99999, c) == 0.3);
  c.schedule = ScheduleKind::noam;
  c.model_dim = 512;
  c.warmup_steps = 4000;
  CHECK(schedule_lr(1.0, 4000, c) == doctest::Approx(std::pow(512.0, -0.5) * std::pow(4000.0, -0.5)));
  CHECK(std::abs(schedule_lr(1.0, 4000, c) - 6.988e-4) < 1e-6);
  CHECK(schedule_lr(1.0, 100, c) < schedule_lr(1.0, 200, c));
  CHECK(schedule_lr(1.0, 8000, c) < schedule_lr(1.0, 4000, c));
  c.schedule = ScheduleKind::exponential;
  c.decay = 0.5;
  CHECK(schedule_lr(0.8, 3, c) == 0.1);
  c.schedule = ScheduleKind::linear;
  c.total_steps = 10;
  CHECK(schedule_lr(1.0, 5, c) == doctest::Approx(0.5));
  CHECK(schedule_lr(1.0, 12, c) == 0.0);
  CHECK_THROWS_AS(parse_schedule("cosine"), ConfigError);
  CHECK_THROWS_AS(parse_optimizer("rmsprop"), ConfigError);
  CHECK(parse_schedule(to_string(ScheduleKind::noam)) == ScheduleKind::noam);
}

TEST_CASE("config validation") {
  auto bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    return c;
  };
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.learning_rate = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.label_smoothing = 1.0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.weight_decay = -1; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.clip_norm = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.batch_size = 0; }).validate(), ConfigError);
  CHECK_NOTHROW(TrainConfig{}.validate());
}

TEST_CASE("batch gradients") {
  const DigitTask task(12, 4);
  const auto p = random_model(small_dims(task, 5), AttentionKind::additive, 3, 0.3);
  TrainConfig c;
  c.label_smoothing = 0.1;
  c.coverage_penalty = 0.05;
  const auto batches = make_batches(task.train, task.vocabs(), 6, 1);
  const Batch& b = batches.front();

  auto serial = ModelParams::zeros(p.dims), parallel = ModelParams::zeros(p.dims);
  const auto rs = batch_gradients(p, b, c, serial, Execution::serial);
  const auto rp = batch_gradients(p, b, c, parallel, Execution::parallel);
  CHECK(rs.loss == rp.loss);
  CHECK(serial == parallel);

  // Oracle: per-row losses recombined by hand, gradient by central differences
  // on a few coordinates.
  std::size_t tokens = 0;
  double ce_sum = 0.0, cov_sum = 0.0;
  TrainConfig no_cov = c;
  no_cov.coverage_penalty = 0.0;
  TrainConfig cov_only = c;
  for (std::size_t i = 0; i < b.rows(); ++i) {
    const auto s = unpad(b.source[i]), t = unpad(b.target[i]);
    const auto ce = sample_loss(p, s, t, no_cov);
    ce_sum += ce.loss * static_cast<double>(ce.tokens);
    cov_sum += sample_loss(p, s, t, cov_only).loss - ce.loss;
    tokens += ce.tokens;
  }
  const double expected = ce_sum / static_cast<double>(tokens) + cov_sum / static_cast<double>(b.rows());
  CHECK(rs.loss == doctest::Approx(expected).epsilon(1e-12));
  CHECK(rs.tokens == tokens);

  auto loss_at = [&](const ModelParams& q) {
    auto g = ModelParams::zeros(q.dims);
    return batch_gradients(q, b, c, g, Execution::serial).loss;
  };
  for (std::size_t k : {0ul, 7ul, 19ul}) {
    auto up = p, down = p;
    up.readout_state.data[k] += 1e-5;
    down.readout_state.data[k] -= 1e-5;
    const double num = (loss_at(up) - loss_at(down)) / 2e-5;
    CHECK(serial.readout_state.data[k] == doctest::Approx(num).epsilon(1e-5));
  }
}

TEST_CASE("first-batch loss decreases with a small learning rate") {
  const DigitTask task(8, 2);
  auto p = init_params(small_dims(task), AttentionKind::additive, 5);
  TrainConfig c;
  c.optimizer = OptimizerKind::sgd;
  c.learning_rate = 0.5;
  const auto b = make_batches(task.train, task.vocabs(), 8, 1).front();
  OptimizerState st;
  double prev = INFINITY;
  for (int k = 0; k < 5; ++k) {
    auto g = ModelParams::zeros(p.dims);
    const double loss = batch_gradients(p, b, c, g).loss;
    CHECK(loss < prev);
    prev = loss;
    clip_gradients(g, c.clip_norm);
    optimizer_step(p, g, st, c);
  }

  // lr -> 0 leaves the loss where it was.
  TrainConfig tiny = c;
  tiny.learning_rate = 1e-8;
  auto g = ModelParams::zeros(p.dims);
  const double before = batch_gradients(p, b, tiny, g).loss;
  optimizer_step(p, g, st, tiny);
  auto g2 = ModelParams::zeros(p.dims);
  CHECK(std::abs(batch_gradients(p, b, tiny, g2).loss - before) < 1e-6);
}

TEST_CASE("training loop") {
  const DigitTask task(16, 6);
  const auto init = init_params(small_dims(task), AttentionKind::additive, 11);
  TrainConfig c;
  c.learning_rate = 0.02;
  c.batch_size = 8;
  c.max_epochs = 6;
  c.eval_every = 2;
  c.patience = 100;

  const auto a = train({task.train, task.dev, task.vocabs()}, init, c);
  const auto b = train({task.train, task.dev, task.vocabs()}, init, c);
  CHECK(a.log == b.log);
  CHECK(a.params == b.params);
  CHECK(a.log.updates.size() == 12);
  CHECK(a.log.evaluations.size() == 6);
  for (std::size_t i = 0; i < a.log.updates.size(); ++i) CHECK(a.log.updates[i].update == i + 1);

  // The returned checkpoint is the best one in the log.
  REQUIRE(a.log.best);
  double best = -1;
  for (const auto& e : a.log.evaluations) best = std::max(best, e.bleu);
  CHECK(a.log.evaluations[*a.log.best].bleu == best);
  std::vector<std::string> hyps, refs;
  BeamConfig greedy;
  greedy.beam_size = 1;
  for (const auto& pr : task.dev.pairs) {
    hyps.push_back(render_hypothesis(beam_search(a.params, encode(pr.source, task.source), greedy).front(), task.target));
    refs.push_back(pr.target);
  }
  CHECK(bleu(hyps, refs) == best);

  std::ostringstream jsonl;
  a.log.write_jsonl(jsonl);
  CHECK(jsonl.str().find("\"type\":\"eval\"") != std::string::npos);

  SUBCASE("patience zero stops at the first non-improving evaluation") {
    TrainConfig p0 = c;
    p0.patience = 0;
    p0.max_epochs = 40;
    p0.eval_every = 1;
    const auto r = train({task.train, task.dev, task.vocabs()}, init, p0);
    const auto& ev = r.log.evaluations;
    REQUIRE(!ev.empty());
    for (std::size_t i = 1; i + 1 < ev.size(); ++i) CHECK(ev[i].bleu > ev[i - 1].bleu);
    if (r.log.updates.size() < 40 * 2) CHECK(ev.back().bleu <= ev[ev.size() - 2].bleu);
  }
  SUBCASE("configuration errors come first") {
    TrainConfig badc = c;
    badc.learning_rate = -1;
    CHECK_THROWS_AS(train({task.train, task.dev, task.vocabs()}, init, badc), ConfigError);
    const ParallelCorpus empty;
    CHECK_THROWS_AS(train({task.train, empty, task.vocabs()}, init, c), EmptyInputError);
  }
}

TEST_CASE("online update") {
  const DigitTask task(20, 2);
  auto p = init_params(small_dims(task, 12), AttentionKind::additive, 2);
  const auto src = encode(task.train.pairs[0].source, task.source);
  const auto trg = encode(task.train.pairs[0].target, task.target);
  TrainConfig c;
  c.optimizer = OptimizerKind::sgd;
  c.learning_rate = 0.01;

  SUBCASE("zero steps") {
    const auto before = p;
    OptimizerState st;
    CHECK(online_update(p, st, src, trg, 0, c).empty());
    CHECK(p == before);
  }
  SUBCASE("five sgd steps strictly decrease the loss") {
    OptimizerState st;
    auto losses = online_update(p, st, src, trg, 5, c);
    losses.push_back(sample_loss(p, src, trg, c).loss);
    for (std::size_t i = 1; i < losses.size(); ++i) CHECK(losses[i] < losses[i - 1]);
  }
  SUBCASE("k steps equal k single steps") {
    auto q = p;
    OptimizerState s1, s2;
    online_update(p, s1, src, trg, 4, c);
    for (int i = 0; i < 4; ++i) online_update(q, s2, src, trg, 1, c);
    CHECK(flat(p) == flat(q));
  }
  SUBCASE("overfits one sample") {
    TrainConfig fast = c;
    fast.learning_rate = 0.5;
    OptimizerState st;
    online_update(p, st, src, trg, 50, fast);
    BeamConfig greedy;
    greedy.beam_size = 1;
    const auto h = beam_search(p, src, greedy).front();
    CHECK(render_hypothesis(h, task.target) == task.train.pairs[0].target);
  }
  SUBCASE("unk-only target is valid") {
    OptimizerState st;
    const IdSequence unk_target{kBos, kUnk, kUnk, kEos};
    CHECK(online_update(p, st, src, unk_target, 1, c).size() == 1);
    CHECK_THROWS_AS(online_update(p, st, src, IdSequence{kBos}, 1, c), EmptyInputError);
  }
}

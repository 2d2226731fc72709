#include <cmath>
#include <random>

#include "common/random_model.hpp"
#include "doctest.h"
#include "inmt/error.hpp"
#include "inmt/model.hpp"

using namespace inmt;
using inmt::testing::random_model;
using inmt::testing::random_sentence;

namespace {

ModelDims tiny_dims() {
  ModelDims d;
  d.embedding = 4;
  d.state = 5;
  d.attention = 3;
  d.source_vocab = 8;
  d.target_vocab = 7;
  return d;
}

// Scalar probe: sum of random weights times logits and attention weights.
struct LinearProbe {
  std::vector<Vec> logit_weights;
  std::vector<Vec> attention_weights;

  double value(const ForwardCache& c) const {
    double total = 0.0;
    for (std::size_t t = 0; t < c.steps.size(); ++t) {
      for (std::size_t v = 0; v < c.steps[t].logits.size(); ++v)
        total += logit_weights[t][v] * c.steps[t].logits[v];
      for (std::size_t j = 0; j < c.steps[t].attention.size(); ++j)
        total += attention_weights[t][j] * c.steps[t].attention[j];
    }
    return total;
  }
};

LinearProbe make_probe(std::size_t steps, std::size_t vocab, std::size_t src_len,
                       std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  LinearProbe probe;
  for (std::size_t t = 0; t < steps; ++t) {
    Vec a(vocab), b(src_len);
    for (auto& v : a) v = dist(rng);
    for (auto& v : b) v = dist(rng);
    probe.logit_weights.push_back(a);
    probe.attention_weights.push_back(b);
  }
  return probe;
}

double max_relative_error(AttentionKind kind, std::uint64_t seed) {
  const auto dims = tiny_dims();
  auto params = random_model(dims, kind, seed);
  std::mt19937_64 rng(seed + 1);
  const auto src = random_sentence(3, dims.source_vocab, rng);
  const auto trg = random_sentence(3, dims.target_vocab, rng);
  auto fwd = forward_logprob(src, trg, params);
  const auto probe = make_probe(fwd.cache.steps.size(), dims.target_vocab, src.size(), rng);
  const auto grads = backward(fwd.cache, {probe.logit_weights, probe.attention_weights});

  const double h = 1e-5;
  double worst = 0.0;
  std::vector<std::string> names;
  params.for_each([&](std::string_view n, Tensor&) { names.emplace_back(n); });
  for (const auto& name : names) {
    Tensor* t = params.find(name);
    const Tensor* g = grads.find(name);
    for (std::size_t i = 0; i < t->size(); ++i) {
      const double saved = t->data[i];
      t->data[i] = saved + h;
      const double up = probe.value(forward_logprob(src, trg, params).cache);
      t->data[i] = saved - h;
      const double down = probe.value(forward_logprob(src, trg, params).cache);
      t->data[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = g->data[i];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      const double rel = std::abs(numeric - analytic) / denom;
      if (rel > worst) {
        worst = rel;
        if (rel > 1e-4) MESSAGE(name << "[" << i << "] analytic " << analytic << " numeric " << numeric);
      }
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("backward matches central differences, additive attention") {
  CHECK(max_relative_error(AttentionKind::additive, 11) < 1e-4);
}

TEST_CASE("backward matches central differences, dot attention") {
  CHECK(max_relative_error(AttentionKind::dot, 12) < 1e-4);
}

namespace {

ModelDims dims_of(std::size_t e, std::size_t s, std::size_t a, std::size_t vs, std::size_t vt) {
  ModelDims d;
  d.embedding = e;
  d.state = s;
  d.attention = a;
  d.source_vocab = vs;
  d.target_vocab = vt;
  return d;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("initialization") {
  const auto d = dims_of(16, 12, 10, 40, 30);
  const auto p = init_params(d, AttentionKind::additive, 5);
  p.for_each([&](std::string_view name, const Tensor& t) {
    if (t.shape.size() == 2) {
      const double bound = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
      for (double v : t.data) REQUIRE(std::abs(v) <= bound);
    } else if (name != "attention.score") {
      for (double v : t.data) REQUIRE(v == 0.0);
    }
  });
  CHECK(init_params(d, AttentionKind::additive, 5) == p);
  CHECK(!(init_params(d, AttentionKind::additive, 6) == p));

  // Uniform(-b, b) mean has standard deviation b / sqrt(3 n); 0.01 is > 5 sigma here.
  const auto big = init_params(dims_of(256, 8, 8, 256, 8), AttentionKind::additive, 1);
  double sum = 0.0;
  for (double v : big.source_embedding.data) sum += v;
  CHECK(std::abs(sum / static_cast<double>(big.source_embedding.size())) < 0.01);

  CHECK_THROWS_AS(init_params(dims_of(0, 4, 4, 8, 8), AttentionKind::additive, 1), ConfigError);
  CHECK_THROWS_AS(init_params(dims_of(4, 4, 4, 8, 0), AttentionKind::additive, 1), ConfigError);
}

TEST_CASE("encoder") {
  const auto d = tiny_dims();
  const auto p = random_model(d, AttentionKind::additive, 3);
  CHECK(encode_source({5}, p).shape == std::vector<std::size_t>{1, 2 * d.state});
  CHECK_THROWS_AS(encode_source({}, p), EmptyInputError);
  CHECK_THROWS_AS(encode_source({2, 99, 3}, p), OutOfRangeError);

  const auto zero = ModelParams::zeros(d);
  for (double v : encode_source({2, 4, 5, 3}, zero).data) CHECK(v == 0.0);

  SUBCASE("reversal symmetry") {
    auto swapped = p;
    std::swap(swapped.encoder_forward, swapped.encoder_backward);
    const IdSequence src{2, 4, 7, 5, 6, 3};
    const IdSequence rev(src.rbegin(), src.rend());
    const auto H = encode_source(src, p);
    const auto R = encode_source(rev, swapped);
    const std::size_t J = src.size(), S = d.state;
    for (std::size_t j = 0; j < J; ++j) {
      for (std::size_t k = 0; k < S; ++k) {
        CHECK(R.at(J - 1 - j, k) == doctest::Approx(H.at(j, S + k)).epsilon(1e-12));
        CHECK(R.at(J - 1 - j, S + k) == doctest::Approx(H.at(j, k)).epsilon(1e-12));
      }
    }
  }

  SUBCASE("single step matches a hand-written GRU") {
    // J = 1: forward half is GRU(x, 0) with the forward weights.
    const auto H = encode_source({6}, p);
    const auto& g = p.encoder_forward;
    const std::size_t S = d.state, E = d.embedding;
    for (std::size_t i = 0; i < S; ++i) {
      auto pre = [&](std::size_t gate) {
        double a = g.bias.data[gate * S + i];
        for (std::size_t k = 0; k < E; ++k) a += g.input.at(gate * S + i, k) * p.source_embedding.at(6, k);
        return a;
      };
      const double z = sigmoid(pre(0));
      // h_prev = 0, so the reset gate and recurrent term drop out;
      // h' = (1 - z) h + z n.
      const double n = std::tanh(pre(2));
      CHECK(H.at(0, i) == doctest::Approx(z * n).epsilon(1e-12));
    }
  }
}

TEST_CASE("attention") {
  const auto d = tiny_dims();
  const auto p = random_model(d, AttentionKind::additive, 4);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  Vec s(d.state);
  for (auto& v : s) v = u(rng);

  SUBCASE("identical rows give uniform weights") {
    Tensor H = Tensor::matrix(4, 2 * d.state);
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t k = 0; k < H.cols(); ++k) H.at(j, k) = 0.1 * static_cast<double>(k);
    for (auto kind : {AttentionKind::additive, AttentionKind::dot}) {
      const auto r = attend(s, H, random_model(d, kind, 9), kind);
      for (double w : r.weights) CHECK(w == doctest::Approx(0.25).epsilon(1e-12));
      for (std::size_t k = 0; k < H.cols(); ++k) CHECK(r.context[k] == doctest::Approx(H.at(0, k)).epsilon(1e-12));
    }
  }
  SUBCASE("one row") {
    Tensor H = Tensor::matrix(1, 2 * d.state);
    for (auto& v : H.data) v = u(rng);
    const auto r = attend(s, H, p, AttentionKind::additive);
    CHECK(r.weights == Vec{1.0});
    CHECK(r.context == H.data);
  }
  SUBCASE("closed-form softmax") {
    // Dot attention with S = 1 and P = [1 0]: scores are s * h_j[0].
    auto q = ModelParams::zeros(dims_of(2, 1, 1, 5, 5), AttentionKind::dot);
    q.attention_projection.data = {1.0, 0.0};
    Tensor H = Tensor::matrix(2, 2);
    H.at(0, 0) = std::log(2.0);
    H.at(0, 1) = 3.0;
    H.at(1, 1) = -3.0;
    const auto r = attend(Vec{1.0}, H, q, AttentionKind::dot);
    CHECK(r.weights[0] == doctest::Approx(2.0 / 3).epsilon(1e-14));
    CHECK(r.weights[1] == doctest::Approx(1.0 / 3).epsilon(1e-14));
    CHECK(r.context[1] == doctest::Approx(2.0 / 3 * 3 - 1.0 / 3 * 3).epsilon(1e-14));
  }
  SUBCASE("weights form a probability vector") {
    for (int trial = 0; trial < 20; ++trial) {
      Tensor H = Tensor::matrix(1 + trial % 7, 2 * d.state);
      for (auto& v : H.data) v = 3 * u(rng);
      for (auto kind : {AttentionKind::additive, AttentionKind::dot}) {
        const auto r = attend(s, H, random_model(d, kind, trial), kind);
        double sum = 0.0;
        for (double w : r.weights) {
          CHECK(w >= 0.0);
          sum += w;
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
      }
    }
  }
}

TEST_CASE("decoder initial state") {
  const auto d = tiny_dims();
  const auto p = random_model(d, AttentionKind::additive, 6);
  const auto H = encode_source({2, 4, 6, 3}, p);
  const auto s0 = init_decoder_state(H, p);
  const std::size_t S = d.state, A = H.cols();
  for (std::size_t i = 0; i < S; ++i) {
    double a = p.init_bias.data[i];
    for (std::size_t k = 0; k < A; ++k) {
      double mean = 0.0;
      for (std::size_t j = 0; j < H.rows(); ++j) mean += H.at(j, k);
      a += p.init_weight.at(i, k) * mean / static_cast<double>(H.rows());
    }
    CHECK(s0.hidden[i] == doctest::Approx(std::tanh(a)).epsilon(1e-12));
  }
  for (double v : init_decoder_state(H, ModelParams::zeros(d)).hidden) CHECK(v == 0.0);
  // J = 1: the mean is the single row.
  const auto H1 = encode_source({5}, p);
  const auto s1 = init_decoder_state(H1, p);
  for (std::size_t i = 0; i < S; ++i) {
    double a = p.init_bias.data[i];
    for (std::size_t k = 0; k < A; ++k) a += p.init_weight.at(i, k) * H1.at(0, k);
    CHECK(s1.hidden[i] == doctest::Approx(std::tanh(a)).epsilon(1e-12));
  }
}

TEST_CASE("decoder step and teacher-forced pass") {
  const auto d = tiny_dims();
  for (auto kind : {AttentionKind::additive, AttentionKind::dot}) {
    const auto p = random_model(d, kind, 8);
    std::mt19937_64 rng(2);
    const auto src = random_sentence(4, d.source_vocab, rng);
    const auto trg = random_sentence(3, d.target_vocab, rng);
    const auto enc = prepare_source(src, p);
    auto state = init_decoder_state(enc.annotations, p);

    const auto a = decoder_step(kBos, state, enc, p);
    const auto b = decoder_step(kBos, state, enc, p);
    CHECK(a.logits == b.logits);
    CHECK(a.state.hidden == b.state.hidden);
    CHECK(a.logits.size() == d.target_vocab);
    double sum = 0.0;
    for (double v : softmax(a.logits)) sum += v;
    CHECK(std::abs(sum - 1.0) < 1e-9);
    for (double v : a.logits) CHECK(std::isfinite(v));
    CHECK_THROWS_AS(decoder_step(static_cast<TokenId>(d.target_vocab), state, enc, p), OutOfRangeError);

    // Step-by-step composition is the oracle for the cached pass.
    const auto fwd = forward_logprob(src, trg, p);
    REQUIRE(fwd.logprobs.size() == trg.size() - 1);
    for (std::size_t t = 0; t + 1 < trg.size(); ++t) {
      const auto out = decoder_step(trg[t], state, enc, p);
      const auto lp = log_softmax(out.logits);
      CHECK(fwd.logprobs[t] == doctest::Approx(lp[trg[t + 1]]).epsilon(1e-12));
      CHECK(fwd.logprobs[t] <= 0.0);
      state = out.state;
    }
  }
}

TEST_CASE("uniform output gives -ln V per token") {
  const auto d = tiny_dims();
  auto p = random_model(d, AttentionKind::additive, 10);
  p.output_weight.fill(0.0);
  p.output_bias.fill(0.25);
  const auto fwd = forward_logprob({2, 4, 5, 3}, {2, 6, 4, 3}, p);
  for (double lp : fwd.logprobs) CHECK(lp == doctest::Approx(-std::log(7.0)).epsilon(1e-14));
}

TEST_CASE("backward basics") {
  const auto d = tiny_dims();
  const auto p = random_model(d, AttentionKind::additive, 13);
  const auto fwd = forward_logprob({2, 4, 5, 3}, {2, 6, 3}, p);
  LossGradient zero;
  zero.logits.assign(fwd.cache.steps.size(), Vec(d.target_vocab, 0.0));
  const auto g0 = backward(fwd.cache, zero);
  g0.for_each([](std::string_view, const Tensor& t) {
    for (double v : t.data) REQUIRE(v == 0.0);
  });

  LossGradient some;
  some.logits.assign(fwd.cache.steps.size(), Vec(d.target_vocab, 0.3));
  const auto g = backward(fwd.cache, some);
  for (double v : g.attention_projection.data) CHECK(v == 0.0);  // additive leaves P unused
  CHECK(g == backward(fwd.cache, some));

  CHECK_THROWS_AS(backward(ForwardCache{}, some), UsageError);
}

TEST_CASE("shapes follow from the dimensions") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::size_t> dim(1, 9);
  for (int trial = 0; trial < 3; ++trial) {
    const auto d = dims_of(dim(rng), dim(rng), dim(rng), 4 + dim(rng), 4 + dim(rng));
    for (auto kind : {AttentionKind::additive, AttentionKind::dot}) {
      const auto p = init_params(d, kind, trial);
      const auto src = random_sentence(1 + trial, d.source_vocab, rng);
      const auto trg = random_sentence(2, d.target_vocab, rng);
      const auto enc = prepare_source(src, p);
      CHECK(enc.annotations.shape == std::vector<std::size_t>{src.size(), 2 * d.state});
      const auto s0 = init_decoder_state(enc.annotations, p);
      CHECK(s0.hidden.size() == d.state);
      const auto step = decoder_step(kBos, s0, enc, p);
      CHECK(step.logits.size() == d.target_vocab);
      CHECK(step.state.attention.size() == src.size());
      const auto fwd = forward_logprob(src, trg, p);
      LossGradient lg;
      lg.logits.assign(fwd.cache.steps.size(), Vec(d.target_vocab, 1.0));
      const auto g = backward(fwd.cache, lg);
      std::vector<std::vector<std::size_t>> a, b;
      p.for_each([&](std::string_view, const Tensor& t) { a.push_back(t.shape); });
      g.for_each([&](std::string_view, const Tensor& t) { b.push_back(t.shape); });
      CHECK(a == b);
      CHECK(p.parameter_count() > 0);
    }
  }
}

#include <benchmark/benchmark.h>

#include <random>

#include "inmt/corpus.hpp"
#include "inmt/kernels.hpp"
#include "inmt/training.hpp"

using namespace inmt;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

template <bool Parallel>
void BM_gemv(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto w = random_vec(n * n, 1), x = random_vec(n, 2);
  std::vector<double> y(n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::gemv(w, n, n, x, y);
    } else {
      kernels::serial::gemv(w, n, n, x, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n));
}

template <bool Parallel>
void BM_outer(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto dw = random_vec(n * n, 1);
  const auto dy = random_vec(n, 2), x = random_vec(n, 3);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::outer_acc(dw, n, n, dy, x);
    } else {
      kernels::serial::outer_acc(dw, n, n, dy, x);
    }
    benchmark::DoNotOptimize(dw.data());
  }
}

// Digit-task batch of 32 sentences on a 64-dim model.
template <Execution Exec>
void BM_batch_gradients(benchmark::State& state) {
  static const char* words[] = {"zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine"};
  std::mt19937_64 rng(7);
  ParallelCorpus corpus;
  std::vector<std::vector<std::string>> src, trg;
  for (int i = 0; i < 32; ++i) {
    std::string s, t;
    for (int k = 0; k < 8; ++k) {
      const auto d = rng() % 10;
      s += (k ? " " : "") + std::to_string(d);
      t += std::string(k ? " " : "") + words[d];
    }
    corpus.pairs.push_back({s, t});
    src.push_back(tokenize(s));
    trg.push_back(tokenize(t));
  }
  const auto sv = build_vocabulary(src, 100), tv = build_vocabulary(trg, 100);
  ModelDims d;
  d.embedding = d.state = d.attention = 64;
  d.source_vocab = sv.size();
  d.target_vocab = tv.size();
  const auto params = init_params(d, AttentionKind::additive, 1);
  const auto batch = make_batches(corpus, {&sv, &tv}, 32, 1).front();
  TrainConfig config;
  for (auto _ : state) {
    auto g = Gradients::zeros(d);
    benchmark::DoNotOptimize(batch_gradients(params, batch, config, g, Exec));
  }
}

}  // namespace

BENCHMARK(BM_gemv<false>)->Name("gemv/serial")->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK(BM_gemv<true>)->Name("gemv/parallel")->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK(BM_outer<false>)->Name("outer_acc/serial")->Arg(256)->Arg(1024);
BENCHMARK(BM_outer<true>)->Name("outer_acc/parallel")->Arg(256)->Arg(1024);
BENCHMARK(BM_batch_gradients<Execution::serial>)->Name("batch_gradients/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_batch_gradients<Execution::parallel>)->Name("batch_gradients/parallel")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

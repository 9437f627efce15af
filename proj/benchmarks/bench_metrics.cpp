#include <benchmark/benchmark.h>

#include "behaviorkit/common.hpp"
#include "behaviorkit/masking.hpp"
#include "behaviorkit/metrics.hpp"

namespace {

using namespace bk;

std::vector<PredictionRecord> random_predictions(int samples, int classes, uint64_t seed) {
  Rng rng(seed);
  std::vector<PredictionRecord> preds;
  preds.reserve(samples);
  for (int i = 0; i < samples; ++i) {
    PredictionRecord r;
    r.sample_id = "s" + std::to_string(i);
    for (int c = 0; c < classes; ++c) {
      r.scores.push_back(rng.uniform());
      r.ground_truth.push_back(rng.uniform() < 0.3 ? 1 : 0);
    }
    preds.push_back(std::move(r));
  }
  preds[0].ground_truth.assign(static_cast<std::size_t>(classes), 1);
  return preds;
}

void BM_ava_map(benchmark::State& state) {
  const auto preds =
      random_predictions(static_cast<int>(state.range(0)), 23, 42);  // ChimpACT-sized class set
  std::vector<std::string> names;
  for (int c = 0; c < 23; ++c) names.push_back("class" + std::to_string(c));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ava_map(preds, names, {}));
  }
}
BENCHMARK(BM_ava_map)->Arg(100)->Arg(2000);

void BM_make_mask(benchmark::State& state) {
  const TokenGrid grid{8, 14, 14};  // reference-config grid
  uint64_t i = 0;
  for (auto _ : state) {
    Rng rng(hash_mix(9, i++));
    benchmark::DoNotOptimize(make_mask(grid, 0.5, {}, rng));
  }
}
BENCHMARK(BM_make_mask);

}  // namespace

BENCHMARK_MAIN();

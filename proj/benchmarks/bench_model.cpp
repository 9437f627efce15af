#include <benchmark/benchmark.h>

#include "behaviorkit/config.hpp"
#include "behaviorkit/pretrain.hpp"

namespace {

using namespace bk;

VideoTensor random_video(const EncoderConfig& cfg, uint64_t seed) {
  VideoTensor v;
  v.frames = cfg.frames;
  v.height = cfg.image_size;
  v.width = cfg.image_size;
  v.data.resize(static_cast<std::size_t>(cfg.frames) * cfg.image_size * cfg.image_size * 3);
  Rng rng(seed);
  for (auto& x : v.data) x = rng.normal();
  return v;
}

std::vector<int> all_indices(int n) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  return idx;
}

void BM_patchify(benchmark::State& state) {
  const EncoderConfig cfg = desk_config().model;
  const VideoModel model = VideoModel::init(cfg, 1);
  const VideoTensor video = random_video(cfg, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(patchify(video, cfg, model.online, model.pos_enc));
  }
}
BENCHMARK(BM_patchify);

void BM_encode_full(benchmark::State& state) {
  const EncoderConfig cfg = desk_config().model;
  const VideoModel model = VideoModel::init(cfg, 1);
  const TokenSequence seq = patchify(random_video(cfg, 2), cfg, model.online, model.pos_enc);
  const auto keep = all_indices(cfg.token_count());
  for (auto _ : state) {
    benchmark::DoNotOptimize(encode(model.online, cfg, seq, keep));
  }
}
BENCHMARK(BM_encode_full);

void BM_pretrain_step(benchmark::State& state) {
  const EncoderConfig cfg = desk_config().model;
  TrainConfig tc;
  tc.total_steps = 1 << 20;
  tc.warmup_steps = 100;
  tc.batch_size = static_cast<int>(state.range(0));
  PretrainState ps{VideoModel::init(cfg, 1), AdamW(tc.adam), make_schedule(tc)};
  std::vector<VideoTensor> batch;
  for (int i = 0; i < tc.batch_size; ++i) batch.push_back(random_video(cfg, 10 + i));
  MaskingConfig masking;
  uint64_t step = 0;
  for (auto _ : state) {
    Rng rng(hash_mix(7, step++));
    benchmark::DoNotOptimize(pretrain_step(batch, ps, masking, rng, 2));
  }
}
BENCHMARK(BM_pretrain_step)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

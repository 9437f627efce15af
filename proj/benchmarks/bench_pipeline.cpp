#include <benchmark/benchmark.h>

#include "behaviorkit/pipeline.hpp"

namespace {

using namespace bk;

VideoSnippet textured_video(int frames, int hw) {
  VideoSnippet v = make_snippet(frames, hw, hw, 8.0, "bench");
  for (std::size_t i = 0; i < v.data.size(); ++i)
    v.data[i] = static_cast<uint8_t>((i * 2654435761u) >> 24);
  return v;
}

void BM_crop_resize(benchmark::State& state) {
  const VideoSnippet v = textured_video(24, 64);
  const BoundingBox box{7.5, 4.25, 51.0, 59.75};
  const int out = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(crop_resize(v, box, out));
  }
}
BENCHMARK(BM_crop_resize)->Arg(32)->Arg(224);

void BM_build_pretrain_sample(benchmark::State& state) {
  const VideoSnippet v = textured_video(24, 64);
  const DetectionRecord det{"bench", 12, {{{10, 10, 40, 40}, 0.9}}};
  PipelineConfig cfg;
  cfg.crop_size = 32;
  cfg.segment_frames = 16;
  cfg.temporal_stride = 2;
  uint64_t i = 0;
  for (auto _ : state) {
    Rng rng(hash_mix(3, i++));
    benchmark::DoNotOptimize(build_pretrain_sample(v, det, rng, cfg));
  }
}
BENCHMARK(BM_build_pretrain_sample);

}  // namespace

BENCHMARK_MAIN();

#include <doctest.h>

#include <cmath>

#include "behaviorkit/pipeline.hpp"

using namespace bk;

namespace {

VideoSnippet gradient_video(int frames, int hw, double fps) {
  VideoSnippet v = make_snippet(frames, hw, hw, fps, "grad");
  for (int t = 0; t < frames; ++t)
    for (int y = 0; y < hw; ++y)
      for (int x = 0; x < hw; ++x) {
        v.at(t, y, x, 0) = static_cast<uint8_t>((x * 7 + t) % 256);
        v.at(t, y, x, 1) = static_cast<uint8_t>((y * 5 + t) % 256);
        v.at(t, y, x, 2) = static_cast<uint8_t>((x + y + t) % 256);
      }
  return v;
}

}  // namespace

TEST_CASE("crop_resize full-frame square is the identity") {
  const VideoSnippet v = gradient_video(4, 32, 8.0);
  const VideoSnippet out = crop_resize(v, {0, 0, 32, 32}, 32);
  CHECK(out.data == v.data);
  CHECK(out.fps == v.fps);
  CHECK(out.frames == v.frames);
}

TEST_CASE("crop_resize shape contract and constant preservation") {
  VideoSnippet v = make_snippet(16, 64, 64, 32.0, "const");
  for (auto& byte : v.data) byte = 137;
  const VideoSnippet out = crop_resize(v, {3.7, 5.1, 49.9, 60.2}, 224);
  CHECK(out.frames == 16);
  CHECK(out.height == 224);
  CHECK(out.width == 224);
  CHECK(out.data.size() == std::size_t{16} * 224 * 224 * 3);
  for (auto byte : out.data) CHECK(byte == 137);
}

TEST_CASE("crop_resize rejects degenerate clipped boxes") {
  const VideoSnippet v = gradient_video(2, 32, 8.0);
  CHECK_THROWS_AS(crop_resize(v, {-10, -10, -1, -1}, 16), NoValidCrop);
  CHECK_THROWS_AS(crop_resize(v, {40, 0, 50, 32}, 16), NoValidCrop);
}

TEST_CASE("take_frames arithmetic progressions") {
  const VideoSnippet v = gradient_video(96, 16, 32.0);
  const VideoSnippet out = take_frames(v, 10, 64, 4);
  REQUIRE(out.frames == 16);
  for (int i = 0; i < 16; ++i) {
    const int src = 10 + 4 * i;
    for (std::size_t k = 0; k < v.frame_bytes(); ++k)
      REQUIRE(out.data[i * out.frame_bytes() + k] == v.data[src * v.frame_bytes() + k]);
  }

  const VideoSnippet exact = gradient_video(64, 16, 32.0);
  const VideoSnippet out2 = take_frames(exact, 0, 64, 4);
  CHECK(out2.frames == 16);

  // stride 1 returns the frames verbatim
  const VideoSnippet v16 = gradient_video(16, 16, 32.0);
  const VideoSnippet out3 = take_frames(v16, 0, 16, 1);
  CHECK(out3.data == v16.data);
}

TEST_CASE("sample_frames forces start 0 when the segment fills the video") {
  const VideoSnippet v = gradient_video(64, 16, 32.0);
  Rng rng(1);
  const VideoSnippet out = sample_frames(v, 64, 4, rng);
  for (std::size_t k = 0; k < v.frame_bytes(); ++k) CHECK(out.data[k] == v.data[k]);
}

TEST_CASE("sample_frames pads short inputs by repeating the last frame") {
  const VideoSnippet v = gradient_video(10, 16, 8.0);
  Rng rng(3);
  const VideoSnippet out = sample_frames(v, 16, 2, rng);
  REQUIRE(out.frames == 8);
  // frames 10..15 repeat frame 9; sampled indices are 0,2,...,14
  const std::size_t fb = v.frame_bytes();
  for (std::size_t k = 0; k < fb; ++k) {
    CHECK(out.data[5 * fb + k] == v.data[9 * fb + k]);   // index 10 -> last real frame
    CHECK(out.data[7 * fb + k] == v.data[9 * fb + k]);   // index 14 -> last real frame
    CHECK(out.data[4 * fb + k] == v.data[8 * fb + k]);   // index 8 still real
  }
}

TEST_CASE("take_frames rejects indivisible stride") {
  const VideoSnippet v = gradient_video(32, 16, 8.0);
  CHECK_THROWS_AS(take_frames(v, 0, 10, 4), std::invalid_argument);
}

TEST_CASE("centered_window boundary rules") {
  const VideoSnippet v = gradient_video(40, 16, 4.0);  // 10 s at 4 fps

  const VideoSnippet mid = centered_window(v, 5.0, 2.0);
  CHECK(mid.frames == 8);
  CHECK(mid.start_time == doctest::Approx(4.0));

  const VideoSnippet early = centered_window(v, 0.5, 2.0);
  CHECK(early.frames == 8);
  CHECK(early.start_time == doctest::Approx(0.0));

  const VideoSnippet late = centered_window(v, 9.8, 2.0);
  CHECK(late.frames == 8);
  CHECK(late.start_time == doctest::Approx(8.0));

  CHECK_THROWS_AS(centered_window(v, 5.0, 11.0), std::invalid_argument);
  CHECK_THROWS_AS(centered_window(v, 12.0, 2.0), std::invalid_argument);
}

TEST_CASE("build_pretrain_sample discards empty detections") {
  const VideoSnippet v = gradient_video(24, 64, 8.0);
  DetectionRecord empty{"grad", 12, {}};
  Rng rng(9);
  PipelineConfig cfg;
  cfg.crop_size = 32;
  cfg.segment_frames = 16;
  cfg.temporal_stride = 2;
  CHECK(!build_pretrain_sample(v, empty, rng, cfg).has_value());
}

TEST_CASE("build_pretrain_sample shape contract and determinism") {
  const VideoSnippet v = gradient_video(24, 64, 8.0);
  DetectionRecord det{"grad", 12, {{{10, 10, 40, 40}, 0.9}}};
  PipelineConfig cfg;
  cfg.crop_size = 32;
  cfg.segment_frames = 16;
  cfg.temporal_stride = 2;

  Rng r1(77), r2(77);
  const auto a = build_pretrain_sample(v, det, r1, cfg);
  const auto b = build_pretrain_sample(v, det, r2, cfg);
  REQUIRE(a.has_value());
  REQUIRE(b.has_value());
  CHECK(a->frames == 8);
  CHECK(a->height == 32);
  CHECK(a->width == 32);
  CHECK(a->data == b->data);  // byte-identical under the same seed
}

TEST_CASE("build_pretrain_sample picks both boxes roughly uniformly") {
  // Two disjoint boxes with distinct content; identify the choice by mean
  // brightness of the crop.
  VideoSnippet two = make_snippet(24, 64, 64, 8.0, "two");
  for (int t = 0; t < 24; ++t)
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        for (int c = 0; c < 3; ++c) two.at(t, y, x, c) = x < 32 ? 10 : 240;
  DetectionRecord det{"two", 12, {{{2, 2, 26, 26}, 0.9}, {{38, 38, 62, 62}, 0.8}}};
  PipelineConfig cfg;
  cfg.crop_size = 32;
  cfg.segment_frames = 16;
  cfg.temporal_stride = 2;

  int dark = 0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    Rng rng(hash_mix(4242, static_cast<uint64_t>(i)));
    const auto sample = build_pretrain_sample(two, det, rng, cfg);
    REQUIRE(sample.has_value());
    double sum = 0;
    for (auto byte : sample->data) sum += byte;
    dark += (sum / static_cast<double>(sample->data.size())) < 128.0;
  }
  const double frac = static_cast<double>(dark) / trials;
  CHECK(frac > 0.48);
  CHECK(frac < 0.52);
}

TEST_CASE("normalize applies the configured constants") {
  VideoSnippet v = make_snippet(1, 16, 16, 8.0, "n");
  v.at(0, 0, 0, 0) = 255;
  v.at(0, 0, 0, 1) = 0;
  v.at(0, 0, 0, 2) = 114;
  PixelNorm norm;
  const VideoTensor t = normalize(v, norm);
  CHECK(t.at(0, 0, 0, 0) == doctest::Approx((1.0 - 0.45) / 0.225));
  CHECK(t.at(0, 0, 0, 1) == doctest::Approx((0.0 - 0.45) / 0.225));
  CHECK(t.at(0, 0, 0, 2) == doctest::Approx((114.0 / 255.0 - 0.45) / 0.225));
}

#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "behaviorkit/geometry.hpp"
#include "behaviorkit/video.hpp"

namespace bk {

// Detector output for one frame of one source. Consumed, never produced,
// by this module; boxes are kept sorted by descending confidence.
struct DetectionRecord {
  std::string source_id;
  int frame_index = 0;
  std::vector<std::pair<BoundingBox, double>> boxes;
};

struct SnippetIndexEntry {
  std::string source_id;
  double snippet_start = 0.0;
  double snippet_len = 0.0;
  bool has_detection = false;
};

// Knobs of the sampling geometry. Defaults follow the reference recipe:
// 1.25x box growth, scale U[0.3,1.0], aspect U[0.75,1.35], 64-frame segment
// reduced by stride 4, 224x224 output.
struct PipelineConfig {
  double bbox_expand_factor = 1.25;
  CropJitter jitter;
  int crop_size = 224;
  int segment_frames = 64;
  int temporal_stride = 4;
  double snippet_len = 3.0;
  double chunk_stride = 1.5;
  PixelNorm norm;
};

// Crop every frame to b (clipped to the frame) and bilinearly resize to
// out_hw x out_hw; half-pixel-center convention, fixed project-wide.
VideoSnippet crop_resize(const VideoSnippet& v, const BoundingBox& b, int out_hw);

// Deterministic core of sample_frames: frames start, start+stride, ...,
// start+segment_len-stride. Repeats the last frame first when the input is
// shorter than segment_len.
VideoSnippet take_frames(const VideoSnippet& v, int start, int segment_len, int stride);

// Uniform random segment position, then strided subsampling.
VideoSnippet sample_frames(const VideoSnippet& v, int segment_len, int stride, Rng& rng);

// The `window`-second clip centered at time t (seconds, in source time).
// Windows overrunning a boundary are shifted inside, never padded.
VideoSnippet centered_window(const VideoSnippet& v_star, double t, double window);

// Full pretraining composition: random detector box -> expand -> jittered
// crop -> resize -> temporal sampling. Empty detections (and crop failures)
// yield Discard, reported as nullopt.
std::optional<VideoSnippet> build_pretrain_sample(const VideoSnippet& v,
                                                  const DetectionRecord& detections, Rng& rng,
                                                  const PipelineConfig& cfg);

}  // namespace bk

#include "behaviorkit/pipeline.hpp"

#include <algorithm>
#include <cmath>

namespace bk {

namespace {

// Bilinear sample of one channel at continuous position (x, y), pixel
// centers at integer+0.5, edge-clamped.
inline double bilinear(const VideoSnippet& v, int t, double y, double x, int c) {
  const double fx = x - 0.5;
  const double fy = y - 0.5;
  int x0 = static_cast<int>(std::floor(fx));
  int y0 = static_cast<int>(std::floor(fy));
  const double wx = fx - x0;
  const double wy = fy - y0;
  const int x1 = std::clamp(x0 + 1, 0, v.width - 1);
  const int y1 = std::clamp(y0 + 1, 0, v.height - 1);
  x0 = std::clamp(x0, 0, v.width - 1);
  y0 = std::clamp(y0, 0, v.height - 1);
  const double top = (1.0 - wx) * v.at(t, y0, x0, c) + wx * v.at(t, y0, x1, c);
  const double bot = (1.0 - wx) * v.at(t, y1, x0, c) + wx * v.at(t, y1, x1, c);
  return (1.0 - wy) * top + wy * bot;
}

}  // namespace

VideoSnippet crop_resize(const VideoSnippet& v, const BoundingBox& b, int out_hw) {
  v.validate();
  if (out_hw < 1) throw std::invalid_argument("crop_resize: output size must be positive");
  const BoundingBox c = clip_to_frame(b, v.width, v.height);
  if (!c.valid()) throw NoValidCrop("crop_resize: degenerate clipped box");

  VideoSnippet out;
  out.frames = v.frames;
  out.height = out_hw;
  out.width = out_hw;
  out.fps = v.fps;
  out.source_id = v.source_id;
  out.start_time = v.start_time;
  out.data.resize(static_cast<std::size_t>(v.frames) * out_hw * out_hw * 3);

  const double sx = c.width() / out_hw;
  const double sy = c.height() / out_hw;
  for (int t = 0; t < v.frames; ++t) {
    for (int y = 0; y < out_hw; ++y) {
      const double src_y = c.y0 + (y + 0.5) * sy;
      for (int x = 0; x < out_hw; ++x) {
        const double src_x = c.x0 + (x + 0.5) * sx;
        for (int ch = 0; ch < 3; ++ch) {
          const double val = bilinear(v, t, src_y, src_x, ch);
          out.at(t, y, x, ch) = static_cast<uint8_t>(std::lround(std::clamp(val, 0.0, 255.0)));
        }
      }
    }
  }
  return out;
}

VideoSnippet take_frames(const VideoSnippet& v, int start, int segment_len, int stride) {
  if (segment_len < 1 || stride < 1)
    throw std::invalid_argument("take_frames: segment_len and stride must be positive");
  if (segment_len % stride != 0)
    throw std::invalid_argument("take_frames: segment_len must be divisible by stride");

  // Inputs shorter than the segment repeat their last frame until the
  // segment fits.
  const VideoSnippet* src = &v;
  VideoSnippet padded;
  if (v.frames < segment_len) {
    padded = v;
    padded.data.resize(static_cast<std::size_t>(segment_len) * v.frame_bytes());
    const std::size_t fb = v.frame_bytes();
    for (int t = v.frames; t < segment_len; ++t)
      std::copy_n(padded.data.begin() + static_cast<std::ptrdiff_t>(v.frames - 1) * fb, fb,
                  padded.data.begin() + static_cast<std::ptrdiff_t>(t) * fb);
    padded.frames = segment_len;
    src = &padded;
  }
  if (start < 0 || start > src->frames - segment_len)
    throw std::invalid_argument("take_frames: start out of range");

  VideoSnippet out;
  const int count = segment_len / stride;
  out.frames = count;
  out.height = src->height;
  out.width = src->width;
  out.fps = src->fps / stride;
  out.source_id = src->source_id;
  out.start_time = src->start_time + start / src->fps;
  out.data.resize(static_cast<std::size_t>(count) * src->frame_bytes());
  const std::size_t fb = src->frame_bytes();
  for (int i = 0; i < count; ++i) {
    const int t = start + i * stride;
    std::copy_n(src->data.begin() + static_cast<std::ptrdiff_t>(t) * fb, fb,
                out.data.begin() + static_cast<std::ptrdiff_t>(i) * fb);
  }
  return out;
}

VideoSnippet sample_frames(const VideoSnippet& v, int segment_len, int stride, Rng& rng) {
  const int span = std::max(0, v.frames - segment_len);
  const int start = span == 0 ? 0 : static_cast<int>(rng.uniform_int(span + 1));
  return take_frames(v, start, segment_len, stride);
}

VideoSnippet centered_window(const VideoSnippet& v_star, double t, double window) {
  v_star.validate();
  const double duration = v_star.duration();
  if (!(window > 0.0)) throw std::invalid_argument("centered_window: window must be positive");
  if (window > duration)
    throw std::invalid_argument("centered_window: window longer than the video");
  const double t_local = t - v_star.start_time;
  if (t_local < 0.0 || t_local > duration)
    throw std::invalid_argument("centered_window: t outside the video time span");

  const int n = std::max(1, static_cast<int>(std::lround(window * v_star.fps)));
  const int max_start = v_star.frames - n;
  int start = static_cast<int>(std::lround((t_local - 0.5 * window) * v_star.fps));
  start = std::clamp(start, 0, max_start);

  VideoSnippet out;
  out.frames = n;
  out.height = v_star.height;
  out.width = v_star.width;
  out.fps = v_star.fps;
  out.source_id = v_star.source_id;
  out.start_time = v_star.start_time + start / v_star.fps;
  const std::size_t fb = v_star.frame_bytes();
  out.data.assign(v_star.data.begin() + static_cast<std::ptrdiff_t>(start) * fb,
                  v_star.data.begin() + static_cast<std::ptrdiff_t>(start + n) * fb);
  return out;
}

std::optional<VideoSnippet> build_pretrain_sample(const VideoSnippet& v,
                                                  const DetectionRecord& detections, Rng& rng,
                                                  const PipelineConfig& cfg) {
  if (detections.boxes.empty()) return std::nullopt;
  const auto pick = rng.uniform_int(static_cast<int64_t>(detections.boxes.size()));
  const BoundingBox& chosen = detections.boxes[static_cast<std::size_t>(pick)].first;
  try {
    const BoundingBox grown = expand_bbox(chosen, cfg.bbox_expand_factor);
    const BoundingBox crop = sample_crop_box(grown, v.width, v.height, rng, cfg.jitter);
    VideoSnippet resized = crop_resize(v, crop, cfg.crop_size);
    return sample_frames(resized, cfg.segment_frames, cfg.temporal_stride, rng);
  } catch (const NoValidCrop&) {
    return std::nullopt;
  }
}

}  // namespace bk

#include "behaviorkit/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace bk {

BoundingBox clip_to_frame(const BoundingBox& b, double frame_w, double frame_h) {
  BoundingBox out;
  out.x0 = std::max(b.x0, 0.0);
  out.y0 = std::max(b.y0, 0.0);
  out.x1 = std::min(b.x1, frame_w);
  out.y1 = std::min(b.y1, frame_h);
  return out;
}

BoundingBox expand_bbox(const BoundingBox& b, double factor) {
  if (!b.valid()) throw std::invalid_argument("expand_bbox: degenerate box");
  if (!(factor >= 1.0)) throw std::invalid_argument("expand_bbox: factor must be >= 1");
  const double cx = b.center_x();
  const double cy = b.center_y();
  const double hw = 0.5 * b.width() * factor;
  const double hh = 0.5 * b.height() * factor;
  return {cx - hw, cy - hh, cx + hw, cy + hh};
}

BoundingBox union_bboxes(std::span<const BoundingBox> boxes) {
  if (boxes.empty()) throw std::invalid_argument("union_bboxes: empty list");
  BoundingBox out = boxes[0];
  for (const auto& b : boxes.subspan(1)) {
    out.x0 = std::min(out.x0, b.x0);
    out.y0 = std::min(out.y0, b.y0);
    out.x1 = std::max(out.x1, b.x1);
    out.y1 = std::max(out.y1, b.y1);
  }
  return out;
}

BoundingBox crop_box_from_draws(const BoundingBox& b, double frame_w, double frame_h,
                                double scale, double aspect) {
  const BoundingBox base = clip_to_frame(b, frame_w, frame_h);
  if (!base.valid()) throw NoValidCrop("crop box lies entirely outside the frame");
  const double target_area = scale * base.area();
  const double target_aspect = (base.width() / base.height()) * aspect;
  double w = std::sqrt(target_area * target_aspect);
  double h = std::sqrt(target_area / target_aspect);
  const double cx = base.center_x();
  const double cy = base.center_y();
  BoundingBox out{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  out = clip_to_frame(out, frame_w, frame_h);
  // base is non-degenerate and inside the frame, so its center is strictly
  // interior and the clipped result keeps positive extent.
  if (!out.valid()) throw NoValidCrop("crop degenerated after clipping");
  return out;
}

BoundingBox sample_crop_box(const BoundingBox& b, double frame_w, double frame_h, Rng& rng,
                            const CropJitter& jitter) {
  const double scale = rng.uniform(jitter.scale_min, jitter.scale_max);
  const double aspect = rng.uniform(jitter.aspect_min, jitter.aspect_max);
  return crop_box_from_draws(b, frame_w, frame_h, scale, aspect);
}

std::vector<double> chunk_video(double duration, double snippet_len, double stride) {
  if (!(snippet_len > 0.0)) throw std::invalid_argument("chunk_video: snippet_len must be > 0");
  if (!(stride > 0.0)) throw std::invalid_argument("chunk_video: stride must be > 0");
  if (!(duration >= 0.0)) throw std::invalid_argument("chunk_video: negative duration");
  std::vector<double> starts;
  if (duration < snippet_len) return starts;
  // Count via the closed form so the output matches floor((d-l)/s)+1 even
  // when (d-l)/s sits on a representation boundary.
  const double ratio = (duration - snippet_len) / stride;
  const auto count = static_cast<std::size_t>(std::floor(ratio + 1e-9)) + 1;
  starts.reserve(count);
  for (std::size_t i = 0; i < count; ++i) starts.push_back(static_cast<double>(i) * stride);
  return starts;
}

}  // namespace bk

#pragma once

#include <span>
#include <vector>

#include "behaviorkit/common.hpp"

namespace bk {

// Axis-aligned box in continuous pixel coordinates. Boxes are stored
// unclipped; clipping to a frame happens at crop time.
struct BoundingBox {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x0 + x1); }
  double center_y() const { return 0.5 * (y0 + y1); }
  bool valid() const {
    return std::isfinite(x0) && std::isfinite(y0) && std::isfinite(x1) && std::isfinite(y1) &&
           x0 < x1 && y0 < y1;
  }
  bool operator==(const BoundingBox&) const = default;
};

// Scale/aspect jitter ranges for random crops.
struct CropJitter {
  double scale_min = 0.3;
  double scale_max = 1.0;
  double aspect_min = 0.75;
  double aspect_max = 1.35;
};

// Intersection of b with the frame [0,w]x[0,h]; degenerate result reported
// via valid() == false.
BoundingBox clip_to_frame(const BoundingBox& b, double frame_w, double frame_h);

// Grows width and height by `factor` about the box center.
BoundingBox expand_bbox(const BoundingBox& b, double factor);

// Smallest box containing every input box.
BoundingBox union_bboxes(std::span<const BoundingBox> boxes);

// Deterministic core of the random crop: area scaled by `scale`, aspect
// ratio multiplied by `aspect`, center preserved, clipped to the frame.
BoundingBox crop_box_from_draws(const BoundingBox& b, double frame_w, double frame_h,
                                double scale, double aspect);

// Random crop box with scale ~ U[scale_min, scale_max] applied to the area of
// the frame-clipped input and aspect multiplier ~ U[aspect_min, aspect_max].
BoundingBox sample_crop_box(const BoundingBox& b, double frame_w, double frame_h, Rng& rng,
                            const CropJitter& jitter = {});

// Snippet start times 0, stride, 2*stride, ... with start + snippet_len <=
// duration. Empty when the video is shorter than one snippet.
std::vector<double> chunk_video(double duration, double snippet_len, double stride);

}  // namespace bk

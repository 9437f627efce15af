#pragma once

#include <vector>

#include "behaviorkit/model.hpp"

namespace bk {

// Disjoint partition of [0, N) into context and target token indices; both
// sides non-empty, indices ascending.
struct MaskSpec {
  std::vector<int> context_idx;
  std::vector<int> target_idx;
  int total = 0;

  void validate() const;
};

struct BlockSpec {
  int num_blocks = 2;
  double aspect_min = 0.5;
  double aspect_max = 2.0;
};

// Multi-block masking: `num_blocks` random spatial rectangles, extruded
// through every temporal position. The achieved spatial coverage lands
// within max(1, floor(0.05 * H * W)) cells of round(ratio * H * W).
MaskSpec make_mask(const TokenGrid& grid, double mask_ratio, const BlockSpec& spec, Rng& rng);

}  // namespace bk

#include "behaviorkit/masking.hpp"

#include <algorithm>
#include <cmath>

namespace bk {

void MaskSpec::validate() const {
  if (context_idx.empty() || target_idx.empty())
    throw std::invalid_argument("MaskSpec: both sides must be non-empty");
  std::vector<int> all;
  all.reserve(context_idx.size() + target_idx.size());
  all.insert(all.end(), context_idx.begin(), context_idx.end());
  all.insert(all.end(), target_idx.begin(), target_idx.end());
  std::sort(all.begin(), all.end());
  if (static_cast<int>(all.size()) != total)
    throw std::invalid_argument("MaskSpec: partition does not cover [0, N)");
  for (int i = 0; i < total; ++i)
    if (all[static_cast<std::size_t>(i)] != i)
      throw std::invalid_argument("MaskSpec: indices are not a partition of [0, N)");
}

namespace {

struct Rect {
  int y0, x0, y1, x1;  // half-open cell coordinates
  int area() const { return (y1 - y0) * (x1 - x0); }
};

int union_cells(const std::vector<Rect>& rects, int h, int w, std::vector<char>& grid) {
  std::fill(grid.begin(), grid.end(), 0);
  int covered = 0;
  for (const Rect& r : rects)
    for (int y = r.y0; y < r.y1; ++y)
      for (int x = r.x0; x < r.x1; ++x) {
        char& cell = grid[static_cast<std::size_t>(y) * w + x];
        covered += cell == 0;
        cell = 1;
      }
  return covered;
}

Rect sample_rect(int h, int w, int want_area, const BlockSpec& spec, Rng& rng) {
  const double aspect = rng.uniform(spec.aspect_min, spec.aspect_max);
  int bh = std::clamp(static_cast<int>(std::lround(std::sqrt(want_area * aspect))), 1, h);
  int bw = std::clamp(static_cast<int>(std::lround(std::sqrt(want_area / aspect))), 1, w);
  const int y0 = static_cast<int>(rng.uniform_int(h - bh + 1));
  const int x0 = static_cast<int>(rng.uniform_int(w - bw + 1));
  return {y0, x0, y0 + bh, x0 + bw};
}

// Grow/shrink one rectangle side at a time while it reduces |union - want|.
void refine(std::vector<Rect>& rects, int h, int w, int want, std::vector<char>& grid) {
  int best = std::abs(union_cells(rects, h, w, grid) - want);
  bool improved = true;
  while (improved && best > 0) {
    improved = false;
    for (std::size_t i = 0; i < rects.size() && best > 0; ++i) {
      const Rect saved = rects[i];
      const Rect candidates[8] = {
          {saved.y0 - 1, saved.x0, saved.y1, saved.x1}, {saved.y0 + 1, saved.x0, saved.y1, saved.x1},
          {saved.y0, saved.x0 - 1, saved.y1, saved.x1}, {saved.y0, saved.x0 + 1, saved.y1, saved.x1},
          {saved.y0, saved.x0, saved.y1 + 1, saved.x1}, {saved.y0, saved.x0, saved.y1 - 1, saved.x1},
          {saved.y0, saved.x0, saved.y1, saved.x1 + 1}, {saved.y0, saved.x0, saved.y1, saved.x1 - 1}};
      for (const Rect& c : candidates) {
        if (c.y0 < 0 || c.x0 < 0 || c.y1 > h || c.x1 > w || c.y0 >= c.y1 || c.x0 >= c.x1)
          continue;
        rects[i] = c;
        const int err = std::abs(union_cells(rects, h, w, grid) - want);
        if (err < best) {
          best = err;
          improved = true;
          break;  // keep the move
        }
        rects[i] = saved;
      }
    }
  }
}

}  // namespace

MaskSpec make_mask(const TokenGrid& grid, double mask_ratio, const BlockSpec& spec, Rng& rng) {
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0))
    throw std::invalid_argument("make_mask: mask_ratio must be in (0, 1)");
  const int h = grid.h;
  const int w = grid.w;
  const int cells = h * w;
  if (grid.t < 1 || cells < 2)
    throw std::invalid_argument("make_mask: grid too small to split");
  if (spec.num_blocks < 1 || spec.num_blocks > cells)
    throw std::invalid_argument("make_mask: block count unsatisfiable for grid");
  if (!(spec.aspect_min > 0.0 && spec.aspect_max >= spec.aspect_min))
    throw std::invalid_argument("make_mask: bad aspect range");

  const int want = std::clamp(static_cast<int>(std::lround(mask_ratio * cells)), 1, cells - 1);
  const int tol = std::max(1, static_cast<int>(std::floor(0.05 * cells)));
  const int per_block = std::max(1, want / spec.num_blocks);

  std::vector<char> grid_cells(static_cast<std::size_t>(cells));
  std::vector<Rect> best_rects;
  int best_err = cells + 1;
  for (int attempt = 0; attempt < 16 && best_err > 0; ++attempt) {
    std::vector<Rect> rects;
    rects.reserve(spec.num_blocks);
    for (int b = 0; b < spec.num_blocks; ++b) rects.push_back(sample_rect(h, w, per_block, spec, rng));
    refine(rects, h, w, want, grid_cells);
    const int err = std::abs(union_cells(rects, h, w, grid_cells) - want);
    if (err < best_err) {
      best_err = err;
      best_rects = rects;
    }
  }
  const int achieved = union_cells(best_rects, h, w, grid_cells);
  if (achieved >= cells || std::abs(achieved - want) > tol)
    throw std::invalid_argument("make_mask: block spec unsatisfiable for grid");

  // Extrude the spatial union through all temporal positions.
  MaskSpec mask;
  mask.total = grid.count();
  for (int t = 0; t < grid.t; ++t)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int idx = (t * h + y) * w + x;
        if (grid_cells[static_cast<std::size_t>(y) * w + x])
          mask.target_idx.push_back(idx);
        else
          mask.context_idx.push_back(idx);
      }
  mask.validate();
  return mask;
}

}  // namespace bk

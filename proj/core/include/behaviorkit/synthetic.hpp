#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "behaviorkit/common.hpp"

namespace bk {

// Synthetic stand-in dataset: videos of one moving shape whose motion
// pattern encodes the class. Appearance (shape kind, color, size) is drawn
// independently of the class so only temporal structure is informative.
struct SyntheticConfig {
  int n_videos = 300;
  double duration = 6.0;  // seconds
  double fps = 8.0;
  int width = 64;
  int height = 64;
  int n_classes = 2;
  // One pattern per class: drift | oscillate | triangle | circle.
  std::vector<std::string> patterns = {"drift", "oscillate"};
  double size_min = 10.0;
  double size_max = 22.0;
  double speed_min = 1.5;  // px per frame, mean speed for every pattern
  double speed_max = 3.0;
  // Cycle length in frames for oscillate/triangle/circle.
  double period_min = 4.0;
  double period_max = 8.0;
  // Per-video low-frequency background texture and per-frame pixel noise;
  // nuisance variation that motion features must ignore.
  double texture_amplitude = 40.0;
  double noise_amplitude = 12.0;
  // Base background level range; mid-gray keeps both flicker polarities
  // visible.
  double background_min = 20.0;
  double background_max = 80.0;
  // Extra moving shapes per video whose motion pattern is drawn
  // independently of the class; only the detected (primary) shape carries
  // the label, as with multiple animals in one camera view.
  int n_distractors = 1;
  // Invert the luminance of half the videos. Signed motion stops being a
  // fixed linear template of the pixels, so readouts must be
  // polarity-invariant.
  bool random_polarity = false;
  // Sinusoidal shape-contrast flicker through the background level, cycle
  // length drawn per video (frames). The shape's contrast sign changes over
  // time within one clip, so motion readouts must track through polarity.
  double flicker_amplitude = 0.0;
  double flicker_period_min = 5.0;
  double flicker_period_max = 11.0;
  // "square" keeps the shape at full contrast between sign flips; "sine"
  // fades it through the background.
  std::string flicker_waveform = "square";
  // Ornstein-Uhlenbeck positional wobble layered on every pattern. Both
  // classes get the same micro-reversals, so only the macro trajectory
  // separates them.
  double wobble_sigma = 0.0;  // px per frame
  double wobble_rho = 0.5;    // AR(1) coefficient
  // "solid": filled shapes. "contrast": second-order objects — a moving
  // contrast envelope over a static carrier texture; frame differences have
  // carrier-random signs, so no fixed linear motion template exists.
  std::string object_style = "solid";
  double carrier_amplitude = 55.0;
  double contrast_inside = 1.9;
  double contrast_outside = 0.45;
  int train_videos = 200;
  int val_videos = 50;
  int test_videos = 50;
  int label_snippet_frames = 8;

  void validate() const;
};

// Writes videos/, videos.jsonl, detections.jsonl (exact oracle boxes),
// labels_snippet.jsonl, labels_frame.jsonl and dataset.json under out_dir.
// Refuses a non-empty out_dir unless force is set. Byte-identical output for
// identical (config, seed).
void generate_synthetic(const SyntheticConfig& cfg, uint64_t seed,
                        const std::filesystem::path& out_dir, bool force);

}  // namespace bk

#include "behaviorkit/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "behaviorkit/manifest.hpp"
#include "behaviorkit/video.hpp"
#include "json_util.hpp"

namespace bk {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

void SyntheticConfigCheckPattern(const std::string& p) {
  if (p != "drift" && p != "oscillate" && p != "triangle" && p != "circle")
    throw std::invalid_argument("SyntheticConfig: unknown motion pattern '" + p + "'");
}

struct TextureWave {
  double fx = 0.0, fy = 0.0, phase = 0.0, amp = 0.0;
};

struct ShapeTrack {
  bool disk = false;
  double size = 0.0;
  uint8_t color[3] = {0, 0, 0};
  // Contrast flicker: luminance offset relative to the local background;
  // sinusoidal or square in t with per-channel gains when amp > 0.
  double flicker_amp = 0.0;
  double flicker_period = 8.0;
  double flicker_phase = 0.0;
  double flicker_gain[3] = {1.0, 1.0, 1.0};
  bool flicker_square = true;
  std::vector<std::pair<double, double>> centers;        // per frame, rendered
  std::vector<std::pair<double, double>> macro_centers;  // wobble-free path
  double angle = 0.0;                                    // motion axis
};

// One video: a labeled primary shape, class-independent distractors, a
// static texture field and per-frame noise.
struct Scene {
  ShapeTrack primary;
  std::vector<ShapeTrack> distractors;
  double background[3] = {0, 0, 0};
  TextureWave texture[3][3];
  TextureWave carrier[3][3];  // fine static texture for contrast objects
  bool contrast_objects = false;
  double carrier_amp = 0.0;
  double k_inside = 1.0;
  double k_outside = 1.0;
  double noise_amp = 0.0;
  bool inverted = false;
};

// Reflect x into [lo, hi].
double fold(double x, double lo, double hi) {
  const double span = hi - lo;
  if (span <= 0) return lo;
  double y = std::fmod(x - lo, 2.0 * span);
  if (y < 0) y += 2.0 * span;
  return y <= span ? lo + y : hi - (y - span);
}

ShapeTrack make_track(const SyntheticConfig& cfg, const std::string& pattern, Rng& rng) {
  ShapeTrack track;
  track.disk = rng.uniform() < 0.5;
  track.size = rng.uniform(cfg.size_min, cfg.size_max);
  for (int c = 0; c < 3; ++c)
    track.color[c] = static_cast<uint8_t>(170 + rng.uniform_int(86));  // bright
  if (cfg.flicker_amplitude > 0.0) {
    track.flicker_amp = cfg.flicker_amplitude;
    track.flicker_period = rng.uniform(cfg.flicker_period_min, cfg.flicker_period_max);
    track.flicker_phase = rng.uniform(0.0, 2.0 * kPi);
    for (int c = 0; c < 3; ++c) track.flicker_gain[c] = rng.uniform(0.8, 1.2);
    track.flicker_square = cfg.flicker_waveform == "square";
  }
  const int frames = static_cast<int>(std::lround(cfg.duration * cfg.fps));
  const double speed = rng.uniform(cfg.speed_min, cfg.speed_max);
  const double angle = rng.uniform(0.0, 2.0 * kPi);
  track.angle = angle;
  const double ux = std::cos(angle);
  const double uy = std::sin(angle);
  const double margin = 0.5 * track.size + 1.0;
  const double lo_x = margin, hi_x = cfg.width - margin;
  const double lo_y = margin, hi_y = cfg.height - margin;

  track.centers.reserve(frames);
  if (pattern == "drift") {
    const double x0 = rng.uniform(lo_x, hi_x);
    const double y0 = rng.uniform(lo_y, hi_y);
    for (int t = 0; t < frames; ++t)
      track.centers.emplace_back(fold(x0 + speed * t * ux, lo_x, hi_x),
                                 fold(y0 + speed * t * uy, lo_y, hi_y));
  } else if (pattern == "circle") {
    const double period = rng.uniform(cfg.period_min, cfg.period_max);
    const double radius = speed * period / (2.0 * kPi);
    const double cx = rng.uniform(lo_x + radius, std::max(lo_x + radius, hi_x - radius));
    const double cy = rng.uniform(lo_y + radius, std::max(lo_y + radius, hi_y - radius));
    const double phase = rng.uniform(0.0, 2.0 * kPi);
    for (int t = 0; t < frames; ++t) {
      const double a = phase + 2.0 * kPi * t / period;
      track.centers.emplace_back(fold(cx + radius * std::cos(a), lo_x, hi_x),
                                 fold(cy + radius * std::sin(a), lo_y, hi_y));
    }
  } else {
    // oscillate (sinusoid) and triangle share amplitude A = speed*P/4 so
    // both match the drift's mean per-frame displacement.
    const double period = rng.uniform(cfg.period_min, cfg.period_max);
    const double amplitude = speed * period / 4.0;
    const double phase = rng.uniform(0.0, 2.0 * kPi);
    const double cx = rng.uniform(lo_x, hi_x);
    const double cy = rng.uniform(lo_y, hi_y);
    for (int t = 0; t < frames; ++t) {
      double offset;
      if (pattern == "oscillate") {
        offset = amplitude * std::sin(phase + 2.0 * kPi * t / period);
      } else {
        const double cycle = std::fmod(t / period + phase / (2.0 * kPi), 1.0);
        offset = amplitude * (4.0 * std::abs(cycle - 0.5) - 1.0);
      }
      track.centers.emplace_back(fold(cx + offset * ux, lo_x, hi_x),
                                 fold(cy + offset * uy, lo_y, hi_y));
    }
  }
  track.macro_centers = track.centers;
  if (cfg.wobble_sigma > 0.0) {
    const double margin = 0.5 * track.size + 1.0;
    double wx = 0.0, wy = 0.0;
    for (auto& [cx, cy] : track.centers) {
      wx = cfg.wobble_rho * wx + rng.normal() * cfg.wobble_sigma;
      wy = cfg.wobble_rho * wy + rng.normal() * cfg.wobble_sigma;
      cx = fold(cx + wx, margin, cfg.width - margin);
      cy = fold(cy + wy, margin, cfg.height - margin);
    }
  }
  return track;
}

Scene make_scene(const SyntheticConfig& cfg, const std::string& pattern, Rng& rng) {
  Scene scene;
  scene.noise_amp = cfg.noise_amplitude;
  scene.inverted = cfg.random_polarity && rng.uniform() < 0.5;
  for (int c = 0; c < 3; ++c) {
    scene.background[c] = rng.uniform(cfg.background_min, cfg.background_max);
    for (int w = 0; w < 3; ++w) {
      TextureWave& wave = scene.texture[c][w];
      wave.fx = rng.uniform(-0.35, 0.35);
      wave.fy = rng.uniform(-0.35, 0.35);
      wave.phase = rng.uniform(0.0, 2.0 * kPi);
      wave.amp = rng.uniform(0.2, 1.0) * cfg.texture_amplitude / 3.0;
    }
  }
  scene.contrast_objects = cfg.object_style == "contrast";
  if (scene.contrast_objects) {
    scene.carrier_amp = cfg.carrier_amplitude;
    scene.k_inside = cfg.contrast_inside;
    scene.k_outside = cfg.contrast_outside;
    for (int c = 0; c < 3; ++c)
      for (int w = 0; w < 3; ++w) {
        TextureWave& wave = scene.carrier[c][w];
        const double freq = rng.uniform(0.8, 1.8);
        const double theta = rng.uniform(0.0, 2.0 * kPi);
        wave.fx = freq * std::cos(theta);
        wave.fy = freq * std::sin(theta);
        wave.phase = rng.uniform(0.0, 2.0 * kPi);
        wave.amp = rng.uniform(0.4, 1.0);
      }
  }
  scene.primary = make_track(cfg, pattern, rng);
  for (int i = 0; i < cfg.n_distractors; ++i) {
    const auto& pool = cfg.patterns;
    const std::string decoy =
        pool[static_cast<std::size_t>(rng.uniform_int(static_cast<int64_t>(pool.size())))];
    scene.distractors.push_back(make_track(cfg, decoy, rng));
  }
  return scene;
}

bool shape_covers(const ShapeTrack& track, int frame, double px, double py) {
  const auto [cx, cy] = track.centers[static_cast<std::size_t>(frame)];
  const double half = 0.5 * track.size;
  if (track.disk) {
    const double dx = px - cx, dy = py - cy;
    return dx * dx + dy * dy <= half * half;
  }
  return std::abs(px - cx) <= half && std::abs(py - cy) <= half;
}

VideoSnippet render(const Scene& scene, const SyntheticConfig& cfg,
                    const std::string& source_id, Rng& rng) {
  const int frames = static_cast<int>(scene.primary.centers.size());
  VideoSnippet v = make_snippet(frames, cfg.height, cfg.width, cfg.fps, source_id, 0.0);
  // Static per-video texture field.
  std::vector<double> field(static_cast<std::size_t>(cfg.height) * cfg.width * 3);
  for (int y = 0; y < cfg.height; ++y)
    for (int x = 0; x < cfg.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double val = scene.background[c];
        for (const TextureWave& w : scene.texture[c])
          val += w.amp * std::sin(w.fx * x + w.fy * y + w.phase);
        field[(static_cast<std::size_t>(y) * cfg.width + x) * 3 + c] = val;
      }
  for (int t = 0; t < frames; ++t) {
    for (int y = 0; y < cfg.height; ++y) {
      for (int x = 0; x < cfg.width; ++x) {
        const double px = x + 0.5, py = y + 0.5;
        // Primary drawn last, occluding distractors.
        const ShapeTrack* hit = nullptr;
        if (shape_covers(scene.primary, t, px, py)) {
          hit = &scene.primary;
        } else {
          for (const ShapeTrack& d : scene.distractors)
            if (shape_covers(d, t, px, py)) {
              hit = &d;
              break;
            }
        }
        for (int c = 0; c < 3; ++c) {
          const double bg = field[(static_cast<std::size_t>(y) * cfg.width + x) * 3 + c];
          double val;
          if (scene.contrast_objects) {
            double carrier = 0.0;
            for (const TextureWave& w : scene.carrier[c])
              carrier += w.amp * std::sin(w.fx * x + w.fy * y + w.phase);
            const double k = hit ? scene.k_inside : scene.k_outside;
            val = bg + scene.carrier_amp * k * carrier / 3.0;
          } else if (!hit) {
            val = bg;
          } else if (hit->flicker_amp > 0.0) {
            double wave = std::sin(2.0 * kPi * t / hit->flicker_period + hit->flicker_phase);
            if (hit->flicker_square) wave = wave >= 0.0 ? 1.0 : -1.0;
            val = bg + hit->flicker_amp * hit->flicker_gain[c] * wave;
          } else {
            val = hit->color[c];
          }
          if (scene.noise_amp > 0.0)
            val += rng.uniform(-scene.noise_amp, scene.noise_amp);
          if (scene.inverted) val = 255.0 - val;
          v.at(t, y, x, c) = static_cast<uint8_t>(std::lround(std::clamp(val, 0.0, 255.0)));
        }
      }
    }
  }
  return v;
}

// True when the motion direction flips anywhere inside [start, start+len):
// wall bounces turn a drifting shape into an oscillator-lookalike, so label
// windows for sustained patterns avoid them.
bool has_reversal(const ShapeTrack& track, int start, int len) {
  for (int t = start + 1; t + 1 < start + len; ++t) {
    const auto [x0, y0] = track.macro_centers[static_cast<std::size_t>(t - 1)];
    const auto [x1, y1] = track.macro_centers[static_cast<std::size_t>(t)];
    const auto [x2, y2] = track.macro_centers[static_cast<std::size_t>(t + 1)];
    const double dot = (x1 - x0) * (x2 - x1) + (y1 - y0) * (y2 - y1);
    if (dot < -1e-9) return true;
  }
  return false;
}

BoundingBox oracle_box(const ShapeTrack& track, int frame) {
  const auto [cx, cy] = track.centers[static_cast<std::size_t>(frame)];
  const double half = 0.5 * track.size;
  return {cx - half, cy - half, cx + half, cy + half};
}

}  // namespace

void SyntheticConfig::validate() const {
  if (n_videos < 1) throw std::invalid_argument("SyntheticConfig: need at least one video");
  if (!(duration > 0) || !(fps > 0))
    throw std::invalid_argument("SyntheticConfig: duration and fps must be positive");
  if (width < 16 || height < 16)
    throw std::invalid_argument("SyntheticConfig: frames must be at least 16x16");
  if (n_classes < 2) throw std::invalid_argument("SyntheticConfig: need at least two classes");
  if (static_cast<int>(patterns.size()) != n_classes)
    throw std::invalid_argument("SyntheticConfig: one motion pattern per class");
  for (const auto& p : patterns) SyntheticConfigCheckPattern(p);
  for (std::size_t i = 0; i < patterns.size(); ++i)
    for (std::size_t j = i + 1; j < patterns.size(); ++j)
      if (patterns[i] == patterns[j])
        throw std::invalid_argument("SyntheticConfig: class patterns must be pairwise distinct");
  if (!(size_min >= 2) || !(size_max >= size_min))
    throw std::invalid_argument("SyntheticConfig: bad size range");
  if (!(speed_min > 0) || !(speed_max >= speed_min))
    throw std::invalid_argument("SyntheticConfig: bad speed range");
  if (!(period_min >= 2) || !(period_max >= period_min))
    throw std::invalid_argument("SyntheticConfig: bad period range");
  if (flicker_amplitude < 0.0 ||
      (flicker_amplitude > 0.0 &&
       !(flicker_period_min >= 2 && flicker_period_max >= flicker_period_min)))
    throw std::invalid_argument("SyntheticConfig: bad flicker settings");
  if (flicker_waveform != "square" && flicker_waveform != "sine")
    throw std::invalid_argument("SyntheticConfig: flicker_waveform must be square or sine");
  if (wobble_sigma < 0.0 || wobble_rho < 0.0 || wobble_rho >= 1.0)
    throw std::invalid_argument("SyntheticConfig: bad wobble settings");
  if (!(background_min >= 0.0 && background_max >= background_min && background_max <= 255.0))
    throw std::invalid_argument("SyntheticConfig: bad background range");
  if (object_style != "solid" && object_style != "contrast")
    throw std::invalid_argument("SyntheticConfig: object_style must be solid or contrast");
  if (train_videos + val_videos + test_videos != n_videos)
    throw std::invalid_argument("SyntheticConfig: splits must sum to n_videos");
  if (label_snippet_frames < 1)
    throw std::invalid_argument("SyntheticConfig: label_snippet_frames must be positive");
  if (label_snippet_frames > static_cast<int>(std::lround(duration * fps)))
    throw std::invalid_argument("SyntheticConfig: label snippet longer than the video");
  if (n_distractors < 0)
    throw std::invalid_argument("SyntheticConfig: n_distractors must be >= 0");
}

void generate_synthetic(const SyntheticConfig& cfg, uint64_t seed, const fs::path& out_dir,
                        bool force) {
  cfg.validate();
  if (fs::exists(out_dir) && !fs::is_empty(out_dir)) {
    if (!force)
      throw DataError("output directory not empty (use --force to overwrite): " +
                      out_dir.string());
    fs::remove_all(out_dir);
  }
  fs::create_directories(out_dir / "videos");

  const int frames = static_cast<int>(std::lround(cfg.duration * cfg.fps));
  std::vector<VideoInfo> video_index;
  DetectionManifest detections;
  detections.detector_prompt = "synthetic-oracle";
  detections.threshold = 0.2;

  LabelsManifest snippet_labels;
  snippet_labels.task = TaskKind::kSingle;
  for (int c = 0; c < cfg.n_classes; ++c)
    snippet_labels.class_names.push_back("motion_" + cfg.patterns[static_cast<std::size_t>(c)]);

  LabelsManifest frame_labels;
  frame_labels.task = TaskKind::kMulti;
  frame_labels.class_names = {"moving_horizontal", "moving_vertical"};
  frame_labels.class_groups["moving_horizontal"] = "Locomotion";
  frame_labels.class_groups["moving_vertical"] = "Locomotion";
  for (int c = 0; c < cfg.n_classes; ++c) {
    const std::string name = "pattern_" + cfg.patterns[static_cast<std::size_t>(c)];
    frame_labels.class_names.push_back(name);
    frame_labels.class_groups[name] = "Other";
  }

  for (int i = 0; i < cfg.n_videos; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "vid_%05d", i);
    const std::string source_id = buf;
    // Round-robin classes keep every split balanced; splits are contiguous
    // video ranges.
    const int cls = i % cfg.n_classes;
    const std::string split = i < cfg.train_videos                    ? "train"
                              : i < cfg.train_videos + cfg.val_videos ? "val"
                                                                      : "test";
    Rng rng(hash_mix(seed, hash_mix(hash_str("synthetic-video"), static_cast<uint64_t>(i))));
    const Scene scene = make_scene(cfg, cfg.patterns[static_cast<std::size_t>(cls)], rng);
    const ShapeTrack& track = scene.primary;
    const VideoSnippet video = render(scene, cfg, source_id, rng);
    write_rawvid(out_dir / "videos" / (source_id + ".rawvid"), video);
    video_index.push_back({source_id, frames, cfg.fps, cfg.width, cfg.height});

    for (int t = 0; t < frames; ++t) {
      DetectionRecord rec;
      rec.source_id = source_id;
      rec.frame_index = t;
      rec.boxes.emplace_back(oracle_box(track, t), 0.5 + 0.5 * rng.uniform());
      detections.records.push_back(std::move(rec));
    }

    {
      LabeledSample s;
      s.sample_id = source_id + "_s0";
      s.source_id = source_id;
      s.task = TaskKind::kSingle;
      s.split = split;
      // Sustained-behavior windows: drifting shapes must not bounce inside
      // the labeled snippet.
      const int max_start = frames - cfg.label_snippet_frames;
      std::vector<int> starts;
      if (cfg.patterns[static_cast<std::size_t>(cls)] == "drift") {
        for (int cand = 0; cand <= max_start; ++cand)
          if (!has_reversal(track, cand, cfg.label_snippet_frames)) starts.push_back(cand);
      }
      if (starts.empty())
        for (int cand = 0; cand <= max_start; ++cand) starts.push_back(cand);
      s.start_frame = starts[static_cast<std::size_t>(
          rng.uniform_int(static_cast<int64_t>(starts.size())))];
      for (int t = 0; t < cfg.label_snippet_frames; ++t)
        s.boxes.push_back(oracle_box(track, s.start_frame + t));
      s.label.assign(static_cast<std::size_t>(cfg.n_classes), 0);
      s.label[static_cast<std::size_t>(cls)] = 1;
      snippet_labels.samples.push_back(std::move(s));
    }

    {
      LabeledSample s;
      s.sample_id = source_id + "_f0";
      s.source_id = source_id;
      s.task = TaskKind::kMulti;
      s.split = split;
      const int f = static_cast<int>(rng.uniform_int(frames));
      s.t = (f + 0.5) / cfg.fps;
      s.boxes.push_back(oracle_box(track, f));
      const bool horizontal = std::abs(std::cos(track.angle)) >= std::abs(std::sin(track.angle));
      s.label.assign(frame_labels.class_names.size(), 0);
      s.label[horizontal ? 0 : 1] = 1;
      s.label[static_cast<std::size_t>(2 + cls)] = 1;
      frame_labels.samples.push_back(std::move(s));
    }
  }

  write_video_index(out_dir / "videos.jsonl", video_index);
  write_detections(out_dir / "detections.jsonl", detections);
  write_labels(out_dir / "labels_snippet.jsonl", snippet_labels);
  write_labels(out_dir / "labels_frame.jsonl", frame_labels);

  json meta;
  meta["format"] = "behaviorkit/dataset";
  meta["version"] = 1;
  meta["seed"] = seed;
  meta["config"] = {{"n_videos", cfg.n_videos},
                    {"duration", cfg.duration},
                    {"fps", cfg.fps},
                    {"width", cfg.width},
                    {"height", cfg.height},
                    {"n_classes", cfg.n_classes},
                    {"patterns", cfg.patterns},
                    {"size_range", {cfg.size_min, cfg.size_max}},
                    {"speed_range", {cfg.speed_min, cfg.speed_max}},
                    {"period_range", {cfg.period_min, cfg.period_max}},
                    {"texture_amplitude", cfg.texture_amplitude},
                    {"noise_amplitude", cfg.noise_amplitude},
                    {"background_range", {cfg.background_min, cfg.background_max}},
                    {"n_distractors", cfg.n_distractors},
                    {"random_polarity", cfg.random_polarity},
                    {"flicker_amplitude", cfg.flicker_amplitude},
                    {"flicker_period_range", {cfg.flicker_period_min, cfg.flicker_period_max}},
                    {"flicker_waveform", cfg.flicker_waveform},
                    {"wobble", {cfg.wobble_sigma, cfg.wobble_rho}},
                    {"object_style", cfg.object_style},
                    {"carrier_amplitude", cfg.carrier_amplitude},
                    {"contrast_levels", {cfg.contrast_inside, cfg.contrast_outside}},
                    {"splits", {cfg.train_videos, cfg.val_videos, cfg.test_videos}},
                    {"label_snippet_frames", cfg.label_snippet_frames}};
  std::ofstream os(out_dir / "dataset.json", std::ios::trunc);
  os << meta.dump(2) << "\n";
}

}  // namespace bk

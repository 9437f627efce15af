#include "behaviorkit/config.hpp"

#include <fstream>

#include "json_util.hpp"

namespace bk {

namespace fs = std::filesystem;

std::string head_variant_name(HeadVariant v) {
  return v == HeadVariant::kAttentionOnly ? "attention_only" : "full_block";
}

HeadVariant head_variant_from_name(const std::string& name) {
  if (name == "attention_only") return HeadVariant::kAttentionOnly;
  if (name == "full_block") return HeadVariant::kFullBlock;
  throw std::invalid_argument("unknown head variant '" + name +
                              "' (expected attention_only or full_block)");
}

void ExperimentConfig::validate() const {
  model.validate();
  if (!(masking.ratio > 0.0 && masking.ratio < 1.0))
    throw std::invalid_argument("config: masking.ratio must be in (0, 1)");
  if (masking.blocks.num_blocks < 1)
    throw std::invalid_argument("config: masking.num_blocks must be >= 1");
  if (train.total_steps < 1) throw std::invalid_argument("config: train.total_steps must be >= 1");
  if (train.warmup_steps < 0 || train.warmup_steps >= train.total_steps)
    throw std::invalid_argument("config: train.warmup_steps must be in [0, total_steps)");
  if (train.batch_size < 1) throw std::invalid_argument("config: train.batch_size must be >= 1");
  if (!(train.ema_momentum >= 0.0 && train.ema_momentum <= 1.0))
    throw std::invalid_argument("config: train.ema_momentum must be in [0, 1]");
  if (train.ema_momentum_final > 1.0)
    throw std::invalid_argument("config: train.ema_momentum_final must be <= 1");
  if (!(pipeline.bbox_expand_factor >= 1.0))
    throw std::invalid_argument("config: pipeline.bbox_expand_factor must be >= 1");
  if (!(pipeline.jitter.scale_min > 0.0 && pipeline.jitter.scale_max >= pipeline.jitter.scale_min))
    throw std::invalid_argument("config: bad pipeline crop scale range");
  if (!(pipeline.jitter.aspect_min > 0.0 &&
        pipeline.jitter.aspect_max >= pipeline.jitter.aspect_min))
    throw std::invalid_argument("config: bad pipeline crop aspect range");
  if (pipeline.crop_size != model.image_size)
    throw std::invalid_argument("config: pipeline.crop_size must equal model.image_size");
  if (pipeline.segment_frames < 1 || pipeline.temporal_stride < 1 ||
      pipeline.segment_frames % pipeline.temporal_stride != 0)
    throw std::invalid_argument("config: segment_frames must be divisible by temporal_stride");
  if (pipeline.segment_frames / pipeline.temporal_stride != model.frames)
    throw std::invalid_argument(
        "config: segment_frames/temporal_stride must equal model.frames");
  if (!(pipeline.snippet_len > 0.0) || !(pipeline.chunk_stride > 0.0))
    throw std::invalid_argument("config: snippet_len and chunk_stride must be positive");
  if (probe.epochs < 1 || probe.patience < 1 || probe.batch_size < 1 || !(probe.lr > 0.0))
    throw std::invalid_argument("config: bad probe settings");
  if (!(probe_window_seconds > 0.0))
    throw std::invalid_argument("config: probe_window_seconds must be positive");
  synthetic.validate();
  if (synthetic.label_snippet_frames != model.frames)
    throw std::invalid_argument(
        "config: synthetic.label_snippet_frames must equal model.frames");
}

namespace {

json to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["model"] = to_json(c.model);
  j["masking"] = {{"ratio", c.masking.ratio},
                  {"num_blocks", c.masking.blocks.num_blocks},
                  {"block_aspect", {c.masking.blocks.aspect_min, c.masking.blocks.aspect_max}}};
  j["train"] = {{"total_steps", c.train.total_steps},
                {"warmup_steps", c.train.warmup_steps},
                {"base_lr", c.train.base_lr},
                {"initial_wd", c.train.initial_wd},
                {"final_wd", c.train.final_wd},
                {"ema_momentum", c.train.ema_momentum},
                {"ema_momentum_final", c.train.ema_momentum_final},
                {"batch_size", c.train.batch_size},
                {"checkpoint_interval", c.train.checkpoint_interval},
                {"adam",
                 {{"beta1", c.train.adam.beta1},
                  {"beta2", c.train.adam.beta2},
                  {"eps", c.train.adam.eps},
                  {"wd_skip_1d", c.train.adam.wd_skip_1d}}}};
  j["pipeline"] = {{"bbox_expand_factor", c.pipeline.bbox_expand_factor},
                   {"crop_scale", {c.pipeline.jitter.scale_min, c.pipeline.jitter.scale_max}},
                   {"crop_aspect", {c.pipeline.jitter.aspect_min, c.pipeline.jitter.aspect_max}},
                   {"crop_size", c.pipeline.crop_size},
                   {"segment_frames", c.pipeline.segment_frames},
                   {"temporal_stride", c.pipeline.temporal_stride},
                   {"snippet_len", c.pipeline.snippet_len},
                   {"chunk_stride", c.pipeline.chunk_stride},
                   {"pixel_mean",
                    {c.pipeline.norm.mean[0], c.pipeline.norm.mean[1], c.pipeline.norm.mean[2]}},
                   {"pixel_std",
                    {c.pipeline.norm.stddev[0], c.pipeline.norm.stddev[1],
                     c.pipeline.norm.stddev[2]}}};
  j["probe"] = {{"head", head_variant_name(c.probe.variant)},
                {"epochs", c.probe.epochs},
                {"patience", c.probe.patience},
                {"batch_size", c.probe.batch_size},
                {"lr", c.probe.lr},
                {"weight_decay", c.probe.weight_decay},
                {"adam",
                 {{"beta1", c.probe.adam.beta1},
                  {"beta2", c.probe.adam.beta2},
                  {"eps", c.probe.adam.eps},
                  {"wd_skip_1d", c.probe.adam.wd_skip_1d}}},
                {"window_seconds", c.probe_window_seconds},
                {"expand_frame_box", c.probe_expand_frame_box}};
  j["synthetic"] = {{"n_videos", c.synthetic.n_videos},
                    {"duration", c.synthetic.duration},
                    {"fps", c.synthetic.fps},
                    {"width", c.synthetic.width},
                    {"height", c.synthetic.height},
                    {"n_classes", c.synthetic.n_classes},
                    {"patterns", c.synthetic.patterns},
                    {"size_range", {c.synthetic.size_min, c.synthetic.size_max}},
                    {"speed_range", {c.synthetic.speed_min, c.synthetic.speed_max}},
                    {"period_range", {c.synthetic.period_min, c.synthetic.period_max}},
                    {"texture_amplitude", c.synthetic.texture_amplitude},
                    {"noise_amplitude", c.synthetic.noise_amplitude},
                    {"background_range", {c.synthetic.background_min, c.synthetic.background_max}},
                    {"n_distractors", c.synthetic.n_distractors},
                    {"random_polarity", c.synthetic.random_polarity},
                    {"flicker_amplitude", c.synthetic.flicker_amplitude},
                    {"flicker_period_range",
                     {c.synthetic.flicker_period_min, c.synthetic.flicker_period_max}},
                    {"flicker_waveform", c.synthetic.flicker_waveform},
                    {"wobble", {c.synthetic.wobble_sigma, c.synthetic.wobble_rho}},
                    {"object_style", c.synthetic.object_style},
                    {"carrier_amplitude", c.synthetic.carrier_amplitude},
                    {"contrast_levels",
                     {c.synthetic.contrast_inside, c.synthetic.contrast_outside}},
                    {"train_videos", c.synthetic.train_videos},
                    {"val_videos", c.synthetic.val_videos},
                    {"test_videos", c.synthetic.test_videos},
                    {"label_snippet_frames", c.synthetic.label_snippet_frames}};
  return j;
}

void range_from_json(const json& j, double& lo, double& hi) {
  lo = j.at(0).get<double>();
  hi = j.at(1).get<double>();
}

ExperimentConfig from_json(const json& j) {
  // Unspecified fields inherit the desk preset.
  ExperimentConfig c = desk_config();
  c.seed = j.value("seed", uint64_t{0});
  c.threads = j.value("threads", 0);
  if (j.contains("model")) c.model = encoder_config_from_json(j.at("model"));
  if (j.contains("masking")) {
    const auto& m = j.at("masking");
    c.masking.ratio = m.value("ratio", c.masking.ratio);
    c.masking.blocks.num_blocks = m.value("num_blocks", c.masking.blocks.num_blocks);
    if (m.contains("block_aspect"))
      range_from_json(m.at("block_aspect"), c.masking.blocks.aspect_min,
                      c.masking.blocks.aspect_max);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    c.train.total_steps = t.value("total_steps", c.train.total_steps);
    c.train.warmup_steps = t.value("warmup_steps", c.train.warmup_steps);
    c.train.base_lr = t.value("base_lr", c.train.base_lr);
    c.train.initial_wd = t.value("initial_wd", c.train.initial_wd);
    c.train.final_wd = t.value("final_wd", c.train.final_wd);
    c.train.ema_momentum = t.value("ema_momentum", c.train.ema_momentum);
    c.train.ema_momentum_final = t.value("ema_momentum_final", c.train.ema_momentum_final);
    c.train.batch_size = t.value("batch_size", c.train.batch_size);
    c.train.checkpoint_interval = t.value("checkpoint_interval", c.train.checkpoint_interval);
    if (t.contains("adam")) {
      const auto& a = t.at("adam");
      c.train.adam.beta1 = a.value("beta1", c.train.adam.beta1);
      c.train.adam.beta2 = a.value("beta2", c.train.adam.beta2);
      c.train.adam.eps = a.value("eps", c.train.adam.eps);
      c.train.adam.wd_skip_1d = a.value("wd_skip_1d", c.train.adam.wd_skip_1d);
    }
  }
  if (j.contains("pipeline")) {
    const auto& p = j.at("pipeline");
    c.pipeline.bbox_expand_factor = p.value("bbox_expand_factor", c.pipeline.bbox_expand_factor);
    if (p.contains("crop_scale"))
      range_from_json(p.at("crop_scale"), c.pipeline.jitter.scale_min,
                      c.pipeline.jitter.scale_max);
    if (p.contains("crop_aspect"))
      range_from_json(p.at("crop_aspect"), c.pipeline.jitter.aspect_min,
                      c.pipeline.jitter.aspect_max);
    c.pipeline.crop_size = p.value("crop_size", c.pipeline.crop_size);
    c.pipeline.segment_frames = p.value("segment_frames", c.pipeline.segment_frames);
    c.pipeline.temporal_stride = p.value("temporal_stride", c.pipeline.temporal_stride);
    c.pipeline.snippet_len = p.value("snippet_len", c.pipeline.snippet_len);
    c.pipeline.chunk_stride = p.value("chunk_stride", c.pipeline.chunk_stride);
    if (p.contains("pixel_mean"))
      for (int i = 0; i < 3; ++i) c.pipeline.norm.mean[i] = p.at("pixel_mean").at(i).get<double>();
    if (p.contains("pixel_std"))
      for (int i = 0; i < 3; ++i)
        c.pipeline.norm.stddev[i] = p.at("pixel_std").at(i).get<double>();
  }
  if (j.contains("probe")) {
    const auto& p = j.at("probe");
    if (p.contains("head")) c.probe.variant = head_variant_from_name(p.at("head").get<std::string>());
    c.probe.epochs = p.value("epochs", c.probe.epochs);
    c.probe.patience = p.value("patience", c.probe.patience);
    c.probe.batch_size = p.value("batch_size", c.probe.batch_size);
    c.probe.lr = p.value("lr", c.probe.lr);
    c.probe.weight_decay = p.value("weight_decay", c.probe.weight_decay);
    if (p.contains("adam")) {
      const auto& a = p.at("adam");
      c.probe.adam.beta1 = a.value("beta1", c.probe.adam.beta1);
      c.probe.adam.beta2 = a.value("beta2", c.probe.adam.beta2);
      c.probe.adam.eps = a.value("eps", c.probe.adam.eps);
      c.probe.adam.wd_skip_1d = a.value("wd_skip_1d", c.probe.adam.wd_skip_1d);
    }
    c.probe_window_seconds = p.value("window_seconds", c.probe_window_seconds);
    c.probe_expand_frame_box = p.value("expand_frame_box", c.probe_expand_frame_box);
  }
  if (j.contains("synthetic")) {
    const auto& s = j.at("synthetic");
    c.synthetic.n_videos = s.value("n_videos", c.synthetic.n_videos);
    c.synthetic.duration = s.value("duration", c.synthetic.duration);
    c.synthetic.fps = s.value("fps", c.synthetic.fps);
    c.synthetic.width = s.value("width", c.synthetic.width);
    c.synthetic.height = s.value("height", c.synthetic.height);
    c.synthetic.n_classes = s.value("n_classes", c.synthetic.n_classes);
    if (s.contains("patterns"))
      c.synthetic.patterns = s.at("patterns").get<std::vector<std::string>>();
    if (s.contains("size_range"))
      range_from_json(s.at("size_range"), c.synthetic.size_min, c.synthetic.size_max);
    if (s.contains("speed_range"))
      range_from_json(s.at("speed_range"), c.synthetic.speed_min, c.synthetic.speed_max);
    if (s.contains("period_range"))
      range_from_json(s.at("period_range"), c.synthetic.period_min, c.synthetic.period_max);
    c.synthetic.texture_amplitude = s.value("texture_amplitude", c.synthetic.texture_amplitude);
    c.synthetic.noise_amplitude = s.value("noise_amplitude", c.synthetic.noise_amplitude);
    if (s.contains("background_range"))
      range_from_json(s.at("background_range"), c.synthetic.background_min,
                      c.synthetic.background_max);
    c.synthetic.n_distractors = s.value("n_distractors", c.synthetic.n_distractors);
    c.synthetic.random_polarity = s.value("random_polarity", c.synthetic.random_polarity);
    c.synthetic.flicker_amplitude =
        s.value("flicker_amplitude", c.synthetic.flicker_amplitude);
    if (s.contains("flicker_period_range"))
      range_from_json(s.at("flicker_period_range"), c.synthetic.flicker_period_min,
                      c.synthetic.flicker_period_max);
    c.synthetic.flicker_waveform =
        s.value("flicker_waveform", c.synthetic.flicker_waveform);
    if (s.contains("wobble"))
      range_from_json(s.at("wobble"), c.synthetic.wobble_sigma, c.synthetic.wobble_rho);
    c.synthetic.object_style = s.value("object_style", c.synthetic.object_style);
    c.synthetic.carrier_amplitude =
        s.value("carrier_amplitude", c.synthetic.carrier_amplitude);
    if (s.contains("contrast_levels"))
      range_from_json(s.at("contrast_levels"), c.synthetic.contrast_inside,
                      c.synthetic.contrast_outside);
    c.synthetic.train_videos = s.value("train_videos", c.synthetic.train_videos);
    c.synthetic.val_videos = s.value("val_videos", c.synthetic.val_videos);
    c.synthetic.test_videos = s.value("test_videos", c.synthetic.test_videos);
    c.synthetic.label_snippet_frames =
        s.value("label_snippet_frames", c.synthetic.label_snippet_frames);
  }
  return c;
}

}  // namespace

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open config: " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw DataError("corrupt config " + path.string() + ": " + e.what());
  }
  ExperimentConfig c;
  try {
    c = from_json(j);
  } catch (const json::exception& e) {
    throw DataError("bad config value in " + path.string() + ": " + e.what());
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError("invalid config " + path.string() + ": " + e.what());
  }
  return c;
}

void save_config(const fs::path& path, const ExperimentConfig& cfg) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write config: " + path.string());
  os << to_json(cfg).dump(2) << "\n";
}

std::string config_to_json_string(const ExperimentConfig& cfg) { return to_json(cfg).dump(); }

ExperimentConfig desk_config() {
  ExperimentConfig c;
  c.seed = 1;
  c.threads = 0;
  c.model = EncoderConfig{8, 32, {2, 8, 8}, 64, 4, 4, 2, 32};
  c.masking = {0.5, {2, 0.5, 2.0}};
  c.train.total_steps = 1000;
  c.train.warmup_steps = 100;
  c.train.base_lr = 1e-3;
  c.train.initial_wd = 0.01;
  c.train.final_wd = 0.1;
  c.train.ema_momentum = 0.998;
  c.train.batch_size = 8;
  c.train.checkpoint_interval = 500;
  c.pipeline.bbox_expand_factor = 1.25;
  c.pipeline.jitter = {0.3, 1.0, 0.75, 1.35};
  c.pipeline.crop_size = 32;
  c.pipeline.segment_frames = 16;
  c.pipeline.temporal_stride = 2;
  c.pipeline.snippet_len = 3.0;
  c.pipeline.chunk_stride = 1.5;
  c.probe.variant = HeadVariant::kAttentionOnly;
  c.probe.epochs = 30;
  c.probe.patience = 5;
  c.probe.batch_size = 32;
  c.probe.lr = 1e-3;
  c.probe.weight_decay = 0.01;
  c.probe_window_seconds = 2.0;
  c.synthetic = SyntheticConfig{};
  c.synthetic.label_snippet_frames = 8;
  c.validate();
  return c;
}

ExperimentConfig paper_config() {
  ExperimentConfig c;
  c.seed = 1;
  c.model = EncoderConfig{16, 224, {2, 16, 16}, 1024, 24, 16, 12, 384};
  c.masking = {0.5, {2, 0.5, 2.0}};
  c.train.total_steps = 14400;
  c.train.warmup_steps = 1440;
  c.train.base_lr = 6e-6;
  c.train.initial_wd = 0.01;
  c.train.final_wd = 0.1;
  c.train.ema_momentum = 0.998;
  c.train.batch_size = 80;
  c.train.checkpoint_interval = 1000;
  c.pipeline.bbox_expand_factor = 1.25;
  c.pipeline.jitter = {0.3, 1.0, 0.75, 1.35};
  c.pipeline.crop_size = 224;
  c.pipeline.segment_frames = 64;
  c.pipeline.temporal_stride = 4;
  c.pipeline.snippet_len = 3.0;
  c.pipeline.chunk_stride = 1.5;
  c.probe.variant = HeadVariant::kAttentionOnly;
  c.probe.epochs = 30;
  c.probe.patience = 5;
  c.probe.batch_size = 32;
  c.probe.lr = 1e-3;
  c.probe.weight_decay = 0.01;
  c.probe_window_seconds = 2.0;
  // The 64-frames = 2 s convention implies 32 fps sources.
  c.synthetic.fps = 32.0;
  c.synthetic.duration = 3.0;
  c.synthetic.label_snippet_frames = 16;
  c.validate();
  return c;
}

}  // namespace bk

#pragma once

#include <filesystem>
#include <optional>
#include <span>

#include "behaviorkit/checkpoint.hpp"
#include "behaviorkit/manifest.hpp"
#include "behaviorkit/masking.hpp"
#include "behaviorkit/model.hpp"
#include "behaviorkit/optimizer.hpp"
#include "behaviorkit/pipeline.hpp"
#include "behaviorkit/schedule.hpp"

namespace bk {

struct MaskingConfig {
  double ratio = 0.5;
  BlockSpec blocks;
};

// Optimization-loop knobs; reference values follow the published recipe
// (lr 6e-6 warmup+cosine, weight decay 0.01 -> 0.1).
struct TrainConfig {
  int64_t total_steps = 1000;
  int64_t warmup_steps = 100;
  double base_lr = 1e-3;
  double initial_wd = 0.01;
  double final_wd = 0.1;
  double ema_momentum = 0.998;
  double ema_momentum_final = -1.0;  // < 0: constant momentum
  int batch_size = 8;
  int64_t checkpoint_interval = 500;
  AdamConfig adam;
};

ScheduleState make_schedule(const TrainConfig& cfg);

// Mean absolute difference over all entries; the target side never carries
// gradients.
double jepa_loss(const nn::Mat& pred, const nn::Mat& target);

struct PretrainState {
  VideoModel model;
  AdamW optimizer;
  ScheduleState schedule;
};

struct StepStats {
  double loss = 0.0;
  double lr = 0.0;
  double wd = 0.0;
};

// One optimizer step of masked latent prediction: targets come from the EMA
// encoder applied to the full token sequence, the context encoder and
// predictor take an AdamW update, then the target encoder moves via EMA and
// the schedule advances.
StepStats pretrain_step(std::span<const VideoTensor> batch, PretrainState& state,
                        const MaskingConfig& masking, Rng& rng, int threads,
                        const std::string& batch_tag = "");

struct DapOptions {
  EncoderConfig model;
  MaskingConfig masking;
  TrainConfig train;
  PipelineConfig pipeline;
  uint64_t seed = 0;
  int threads = 0;  // 0: hardware concurrency
  // Config snapshot copied into checkpoints and the run directory.
  std::string experiment_config_json;
};

struct DapResult {
  std::filesystem::path final_checkpoint;
  double mean_loss_first_100 = 0.0;
  double mean_loss_last_100 = 0.0;
  int64_t discarded_snippets = 0;
};

// The full domain-adaptive pretraining loop: streams pretraining samples
// from the snippet index, runs pretrain_step until total_steps, checkpoints
// periodically, and writes losses.csv into run_dir.
DapResult run_dap(std::span<const SnippetIndexEntry> index, const DetectionLookup& detections,
                  const VideoStore& videos, std::optional<CheckpointData> init,
                  const DapOptions& opts, const std::filesystem::path& run_dir, bool resume);

}  // namespace bk

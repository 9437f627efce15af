#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "behaviorkit/model.hpp"
#include "behaviorkit/optimizer.hpp"
#include "behaviorkit/schedule.hpp"

namespace bk {

// On-disk checkpoint: a directory holding meta.json (config, step count,
// schedule state, seed, parameter manifest) plus one little-endian f64 blob
// per named parameter. Round-trips are bit-exact.
struct CheckpointData {
  EncoderConfig cfg;
  EncoderParams online;
  EncoderParams target;
  PredictorParams predictor;
  ScheduleState schedule;
  uint64_t seed = 0;
  std::string experiment_config_json;  // verbatim copy, may be empty

  bool has_optimizer = false;
  int64_t optimizer_step = 0;
  std::map<std::string, AdamW::Slot> optimizer_slots;
};

// Writes to a temp directory next to `dir` and renames into place.
void save_checkpoint(const std::filesystem::path& dir, const CheckpointData& data);

CheckpointData load_checkpoint(const std::filesystem::path& dir);

// Highest-step checkpoint under <run_dir>/checkpoints, if any.
std::optional<std::filesystem::path> latest_checkpoint(const std::filesystem::path& run_dir);

}  // namespace bk

#pragma once

#include <filesystem>
#include <string>

#include "behaviorkit/classifier.hpp"
#include "behaviorkit/pretrain.hpp"
#include "behaviorkit/synthetic.hpp"

namespace bk {

// One experiment = one config. Every tunable of the recipe lives here with
// its default, so the copy written into a run directory re-executes the run
// exactly.
struct ExperimentConfig {
  uint64_t seed = 0;
  int threads = 0;  // 0: hardware concurrency
  EncoderConfig model;
  MaskingConfig masking;
  TrainConfig train;
  PipelineConfig pipeline;
  ProbeConfig probe;
  double probe_window_seconds = 2.0;
  bool probe_expand_frame_box = true;
  SyntheticConfig synthetic;

  void validate() const;
  AdapterConfig adapter() const {
    return {pipeline, probe_window_seconds, probe_expand_frame_box};
  }
};

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ExperimentConfig& cfg);
std::string config_to_json_string(const ExperimentConfig& cfg);

// CI-runnable tiny preset.
ExperimentConfig desk_config();
// Reference full-scale preset (documentation; not CI-sized).
ExperimentConfig paper_config();

std::string head_variant_name(HeadVariant v);
HeadVariant head_variant_from_name(const std::string& name);

}  // namespace bk

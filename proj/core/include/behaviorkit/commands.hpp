#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "behaviorkit/config.hpp"
#include "behaviorkit/metrics.hpp"
#include "behaviorkit/pretrain.hpp"

namespace bk {

// Shared implementations of the CLI subcommands; tools/behaviorkit.cpp is a
// thin argument-parsing shell over these.

void run_gen_synthetic(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                       bool force);

// Splits every indexed video into snippets and marks center-frame detector
// hits; writes the snippet index manifest.
void run_chunk(const ExperimentConfig& cfg, const std::filesystem::path& data_dir,
               const std::filesystem::path& out_index);

DapResult run_pretrain(const ExperimentConfig& cfg, const std::filesystem::path& data_dir,
                       const std::filesystem::path& index_path,
                       const std::filesystem::path& run_dir,
                       const std::optional<std::filesystem::path>& init_checkpoint,
                       bool resume);

struct ProbeRunResult {
  double val_metric = 0.0;
  double test_metric = 0.0;
  MetricsReport test_report;
  int best_epoch = 0;
};

// Trains the attentive head on a frozen backbone ("random" or a checkpoint
// path), dumps val/test predictions and a tagged report into run_dir.
// Embeddings are cached under run_dir and reused on retraining.
ProbeRunResult run_probe(const ExperimentConfig& cfg, const std::filesystem::path& data_dir,
                         const std::filesystem::path& labels_path, const std::string& backbone,
                         const std::filesystem::path& run_dir,
                         std::optional<HeadVariant> head_override);

// Metrics from a prediction dump; writes report JSON and returns the report.
MetricsReport run_eval(const std::filesystem::path& predictions_path,
                       const std::filesystem::path& report_path);

// Comparison table over every tagged report found under run_dir.
std::string run_report(const std::filesystem::path& run_dir);

}  // namespace bk

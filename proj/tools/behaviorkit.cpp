// behaviorkit CLI: gen-synthetic | chunk | pretrain | probe | eval | report
//
// Exit codes: 0 success, 1 invalid arguments or config, 2 missing/corrupt
// input files, 3 runtime failure.

#include <CLI11.hpp>
#include <iostream>

#include "behaviorkit/commands.hpp"

namespace {

bk::ExperimentConfig load_with_overrides(const std::string& config_path,
                                         const std::optional<uint64_t>& seed) {
  bk::ExperimentConfig cfg =
      config_path.empty() ? bk::desk_config() : bk::load_config(config_path);
  if (seed) cfg.seed = *seed;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale masked latent-prediction video pretraining and attentive probing"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<uint64_t> seed;
  app.add_option("--config", config_path, "Experiment config JSON (default: built-in desk preset)")
      ->envname("BEHAVIORKIT_CONFIG");
  app.add_option("--seed", seed, "Override the config seed");

  auto* gen = app.add_subcommand("gen-synthetic", "Generate the synthetic moving-shape dataset");
  std::string gen_out;
  bool gen_force = false;
  gen->add_option("--out", gen_out, "Output dataset directory")->required();
  gen->add_flag("--force", gen_force, "Overwrite a non-empty output directory");

  auto* chunk = app.add_subcommand("chunk", "Split indexed videos into snippets");
  std::string chunk_data, chunk_out;
  chunk->add_option("--data", chunk_data, "Dataset directory")->required();
  chunk->add_option("--out", chunk_out, "Snippet index output path (default <data>/snippets.jsonl)");

  auto* pretrain = app.add_subcommand("pretrain", "Run domain-adaptive pretraining");
  std::string pre_data, pre_index, pre_run, pre_init;
  bool pre_resume = false;
  pretrain->add_option("--data", pre_data, "Dataset directory")->required();
  pretrain->add_option("--index", pre_index, "Snippet index (default <data>/snippets.jsonl)");
  pretrain->add_option("--run", pre_run, "Run directory for checkpoints and logs")->required();
  pretrain->add_option("--init", pre_init, "Initial checkpoint (default: random init)");
  pretrain->add_flag("--resume", pre_resume, "Continue from the latest checkpoint in --run");

  auto* probe = app.add_subcommand("probe", "Train the attentive classifier on a frozen backbone");
  std::string probe_data, probe_labels, probe_backbone, probe_run, probe_head;
  probe->add_option("--data", probe_data, "Dataset directory")->required();
  probe->add_option("--labels", probe_labels,
                    "Labels manifest (default <data>/labels_snippet.jsonl)");
  probe->add_option("--backbone", probe_backbone, "Checkpoint directory, or 'random'")->required();
  probe->add_option("--run", probe_run, "Output directory")->required();
  probe->add_option("--head", probe_head, "Head variant: attention_only | full_block");

  auto* eval = app.add_subcommand("eval", "Compute metrics from a prediction dump");
  std::string eval_preds, eval_out;
  eval->add_option("--predictions", eval_preds, "Prediction dump path")->required();
  eval->add_option("--out", eval_out, "Report JSON output (default <predictions>.report.json)");

  auto* report = app.add_subcommand("report", "Render the comparison table for a run directory");
  std::string report_dir;
  report->add_option("--run", report_dir, "Directory scanned recursively for reports")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      bk::run_gen_synthetic(load_with_overrides(config_path, seed), gen_out, gen_force);
      std::cout << "dataset written to " << gen_out << "\n";
    } else if (*chunk) {
      const auto out = chunk_out.empty() ? chunk_data + "/snippets.jsonl" : chunk_out;
      bk::run_chunk(load_with_overrides(config_path, seed), chunk_data, out);
      std::cout << "snippet index written to " << out << "\n";
    } else if (*pretrain) {
      const auto index = pre_index.empty() ? pre_data + "/snippets.jsonl" : pre_index;
      std::optional<std::filesystem::path> init;
      if (!pre_init.empty()) init = pre_init;
      const auto result = bk::run_pretrain(load_with_overrides(config_path, seed), pre_data, index,
                                       pre_run, init, pre_resume);
      std::cout << "final checkpoint: " << result.final_checkpoint.string() << "\n"
                << "mean loss (first 100 steps): " << result.mean_loss_first_100 << "\n"
                << "mean loss (last 100 steps):  " << result.mean_loss_last_100 << "\n";
    } else if (*probe) {
      const auto labels = probe_labels.empty() ? probe_data + "/labels_snippet.jsonl"
                                               : probe_labels;
      std::optional<bk::HeadVariant> head;
      if (!probe_head.empty()) head = bk::head_variant_from_name(probe_head);
      const auto result = bk::run_probe(load_with_overrides(config_path, seed), probe_data, labels,
                                    probe_backbone, probe_run, head);
      std::cout << "best val metric: " << result.val_metric << " (epoch " << result.best_epoch
                << ")\ntest metric: " << result.test_metric << "\n";
    } else if (*eval) {
      const auto out = eval_out.empty() ? eval_preds + ".report.json" : eval_out;
      const auto r = bk::run_eval(eval_preds, out);
      if (r.top1 >= 0.0)
        std::cout << "top1: " << r.top1 << "\nclass_avg: " << r.class_avg << "\n";
      if (r.mAP >= 0.0) {
        std::cout << "mAP: " << r.mAP << "\n";
        for (const auto& [group, v] : r.group_mAP) std::cout << "mAP[" << group << "]: " << v << "\n";
      }
      std::cout << "report written to " << out << "\n";
    } else if (*report) {
      std::cout << bk::run_report(report_dir);
    }
  } catch (const bk::DataError& e) {
    std::cerr << "error (input): " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error (invalid argument): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

#include "behaviorkit/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "behaviorkit/classifier.hpp"
#include "behaviorkit/parallel.hpp"
#include "json_util.hpp"

namespace bk {

namespace fs = std::filesystem;

void run_gen_synthetic(const ExperimentConfig& cfg, const fs::path& out_dir, bool force) {
  cfg.validate();
  generate_synthetic(cfg.synthetic, cfg.seed, out_dir, force);
}

void run_chunk(const ExperimentConfig& cfg, const fs::path& data_dir,
               const fs::path& out_index) {
  cfg.validate();
  const auto videos = read_video_index(data_dir / "videos.jsonl");
  const auto detections = read_detections(data_dir / "detections.jsonl");
  const DetectionLookup lookup(detections);

  std::vector<SnippetIndexEntry> entries;
  for (const auto& v : videos) {
    for (double start : chunk_video(v.duration(), cfg.pipeline.snippet_len,
                                    cfg.pipeline.chunk_stride)) {
      SnippetIndexEntry e;
      e.source_id = v.source_id;
      e.snippet_start = start;
      e.snippet_len = cfg.pipeline.snippet_len;
      const int center =
          static_cast<int>(std::lround((start + 0.5 * cfg.pipeline.snippet_len) * v.fps));
      const DetectionRecord* rec = lookup.nearest(v.source_id, center);
      const int first = static_cast<int>(std::lround(start * v.fps));
      const int last = static_cast<int>(std::lround((start + cfg.pipeline.snippet_len) * v.fps));
      e.has_detection = rec != nullptr && !rec->boxes.empty() && rec->frame_index >= first &&
                        rec->frame_index < last;
      entries.push_back(std::move(e));
    }
  }
  write_snippet_index(out_index, entries);
}

DapResult run_pretrain(const ExperimentConfig& cfg, const fs::path& data_dir,
                       const fs::path& index_path, const fs::path& run_dir,
                       const std::optional<fs::path>& init_checkpoint, bool resume) {
  cfg.validate();
  const auto index = read_snippet_index(index_path);
  const auto detections = read_detections(data_dir / "detections.jsonl");
  const DetectionLookup lookup(detections);
  const VideoStore videos(data_dir / "videos");

  std::optional<CheckpointData> init;
  if (init_checkpoint) init = load_checkpoint(*init_checkpoint);

  DapOptions opts;
  opts.model = cfg.model;
  opts.masking = cfg.masking;
  opts.train = cfg.train;
  opts.pipeline = cfg.pipeline;
  opts.seed = cfg.seed;
  opts.threads = cfg.threads;
  opts.experiment_config_json = config_to_json_string(cfg);

  fs::create_directories(run_dir);
  save_config(run_dir / "config.json", cfg);
  return run_dap(index, lookup, videos, std::move(init), opts, run_dir, resume);
}

namespace {

std::vector<EmbeddedSample> embed_split(const LabelsManifest& manifest,
                                        const std::string& split, const VideoStore& videos,
                                        const EncoderConfig& model_cfg,
                                        const EncoderParams& frozen, const nn::Mat& pos,
                                        const AdapterConfig& adapter, uint64_t seed,
                                        int threads) {
  std::vector<const LabeledSample*> picked;
  for (const auto& s : manifest.samples)
    if (s.split == split) picked.push_back(&s);
  std::vector<EmbeddedSample> out(picked.size());
  parallel_for(picked.size(), threads, [&](std::size_t i) {
    const LabeledSample& s = *picked[i];
    const VideoSnippet& video = videos.get(s.source_id);
    TokenSequence tokens;
    if (s.task == TaskKind::kSingle) {
      const int frames = static_cast<int>(s.boxes.size());
      VideoSnippet snippet;
      snippet.frames = frames;
      snippet.height = video.height;
      snippet.width = video.width;
      snippet.fps = video.fps;
      snippet.source_id = video.source_id;
      snippet.start_time = s.start_frame / video.fps;
      const std::size_t fb = video.frame_bytes();
      if (s.start_frame < 0 || s.start_frame + frames > video.frames)
        throw DataError("sample " + s.sample_id + " window outside video " + s.source_id);
      snippet.data.assign(
          video.data.begin() + static_cast<std::ptrdiff_t>(s.start_frame) * fb,
          video.data.begin() + static_cast<std::ptrdiff_t>(s.start_frame + frames) * fb);
      tokens = embed_snippet_task(s, snippet, model_cfg, frozen, pos, adapter);
    } else {
      Rng rng(hash_mix(seed, hash_mix(hash_str("probe-embed"), hash_str(s.sample_id))));
      tokens = embed_frame_task(s, video, model_cfg, frozen, pos, adapter, rng);
    }
    out[i] = EmbeddedSample{s.sample_id, std::move(tokens.tokens), s.label};
  });
  return out;
}

json metrics_to_json(const MetricsReport& r, TaskKind task) {
  json metrics;
  if (task == TaskKind::kSingle) {
    metrics["top1"] = r.top1;
    metrics["class_avg"] = r.class_avg;
  } else {
    metrics["mAP"] = r.mAP;
    metrics["group_mAP"] = r.group_mAP;
    metrics["skipped_classes"] = r.skipped_classes;
  }
  metrics["per_class"] = r.per_class;
  return metrics;
}

MetricsReport evaluate_dump(const PredictionDump& dump) {
  if (dump.task == TaskKind::kSingle)
    return accuracy_report(dump.records, static_cast<int>(dump.class_names.size()));
  return ava_map(dump.records, dump.class_names, dump.class_groups);
}

void write_report_json(const fs::path& path, const MetricsReport& report, TaskKind task,
                       const std::map<std::string, std::string>& tags) {
  json j;
  j["format"] = "behaviorkit/report";
  j["version"] = 1;
  j["task"] = task == TaskKind::kSingle ? "single" : "multi";
  if (!tags.empty()) j["tags"] = tags;
  j["metrics"] = metrics_to_json(report, task);
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write report: " + path.string());
  os << j.dump(2) << "\n";
}

void save_classifier(const fs::path& dir, const ClassifierParams& p, int dim, int classes) {
  const fs::path tmp = dir.parent_path() / (".tmp_" + dir.filename().string());
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  json meta;
  meta["format"] = "behaviorkit/classifier";
  meta["version"] = 1;
  meta["variant"] = head_variant_name(p.variant);
  meta["heads"] = p.heads;
  meta["dim"] = dim;
  meta["classes"] = classes;
  json manifest = json::array();
  visit_params(p, "", [&](const std::string& name, const nn::Mat& m) {
    std::ofstream os(tmp / (name + ".bin"), std::ios::binary | std::ios::trunc);
    os.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(sizeof(double) * m.size()));
    manifest.push_back(json{{"name", name}, {"shape", {m.rows(), m.cols()}}});
  });
  meta["params"] = std::move(manifest);
  std::ofstream os(tmp / "meta.json", std::ios::trunc);
  os << meta.dump(2) << "\n";
  os.close();
  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

}  // namespace

ProbeRunResult run_probe(const ExperimentConfig& cfg, const fs::path& data_dir,
                         const fs::path& labels_path, const std::string& backbone,
                         const fs::path& run_dir, std::optional<HeadVariant> head_override) {
  cfg.validate();
  const LabelsManifest labels = read_labels(labels_path);
  const VideoStore videos(data_dir / "videos");
  const int threads = cfg.threads > 0 ? cfg.threads : hardware_threads();

  // Frozen backbone: the EMA target encoder of a checkpoint, or a fresh
  // random encoder for the no-DAP baseline.
  EncoderParams frozen;
  std::string pretrain_tag;
  if (backbone == "random") {
    frozen = VideoModel::init(cfg.model, cfg.seed).target;
    pretrain_tag = "none";
  } else {
    CheckpointData d = load_checkpoint(backbone);
    if (!(d.cfg == cfg.model))
      throw DataError("backbone checkpoint config does not match: " + backbone);
    frozen = std::move(d.target);
    pretrain_tag = "dap";
  }
  const nn::Mat pos = sincos_posembed(cfg.model.grid(), cfg.model.dim);
  const AdapterConfig adapter = cfg.adapter();

  fs::create_directories(run_dir);
  save_config(run_dir / "config.json", cfg);

  auto embeddings_for = [&](const std::string& split) {
    const fs::path cache_dir = run_dir / ("embeddings_" + split);
    if (auto cached = load_embedding_cache(cache_dir)) return *cached;
    auto computed = embed_split(labels, split, videos, cfg.model, frozen, pos, adapter,
                                cfg.seed, threads);
    save_embedding_cache(cache_dir, computed, cfg.model.dim);
    return computed;
  };
  const auto train_set = embeddings_for("train");
  const auto val_set = embeddings_for("val");
  const auto test_set = embeddings_for("test");
  if (train_set.empty() || val_set.empty())
    throw DataError("labels manifest has empty train or val split: " + labels_path.string());

  ProbeConfig probe_cfg = cfg.probe;
  if (head_override) probe_cfg.variant = *head_override;
  const int num_classes = static_cast<int>(labels.class_names.size());
  const ProbeResult probe = train_probe(train_set, val_set, labels.task, cfg.model.dim,
                                        cfg.model.heads, num_classes, probe_cfg, cfg.seed);

  {
    std::ofstream os(run_dir / "probe_history.csv", std::ios::trunc);
    os << "epoch,train_loss,val_metric,lr\n";
    for (const auto& row : probe.history)
      os << row.epoch << "," << row.train_loss << "," << row.val_metric << "," << row.lr << "\n";
  }
  save_classifier(run_dir / "head", probe.params, cfg.model.dim, num_classes);

  PredictionDump val_dump{labels.task, labels.class_names, labels.class_groups,
                          predict_probe(probe.params, val_set, labels.task)};
  write_predictions(run_dir / "predictions_val.jsonl", val_dump);

  ProbeRunResult result;
  result.val_metric = probe.best_val_metric;
  result.best_epoch = probe.best_epoch;

  if (!test_set.empty()) {
    PredictionDump test_dump{labels.task, labels.class_names, labels.class_groups,
                             predict_probe(probe.params, test_set, labels.task)};
    write_predictions(run_dir / "predictions_test.jsonl", test_dump);
    result.test_report = evaluate_dump(test_dump);
    result.test_metric =
        labels.task == TaskKind::kSingle ? result.test_report.top1 : result.test_report.mAP;
    write_report_json(run_dir / "report.json", result.test_report, labels.task,
                      {{"pretrain", pretrain_tag},
                       {"head", head_variant_name(probe_cfg.variant)},
                       {"split", "test"}});
  }
  return result;
}

MetricsReport run_eval(const fs::path& predictions_path, const fs::path& report_path) {
  const PredictionDump dump = read_predictions(predictions_path);
  if (dump.records.empty())
    throw DataError("prediction dump has no records: " + predictions_path.string());
  const MetricsReport report = evaluate_dump(dump);
  write_report_json(report_path, report, dump.task, {});
  return report;
}

namespace {

std::string format_pct(double fraction) {
  if (fraction < 0.0) return "—";
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << (100.0 * fraction);
  return os.str();
}

struct ReportEntry {
  std::string head;
  std::string pretrain;
  std::map<std::string, double> metrics;  // metric name -> fraction
};

}  // namespace

std::string run_report(const fs::path& run_dir) {
  std::vector<ReportEntry> entries;
  std::vector<fs::path> files;
  for (const auto& p : fs::recursive_directory_iterator(run_dir))
    if (p.is_regular_file() && p.path().filename() == "report.json") files.push_back(p.path());
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    std::ifstream is(file);
    json j;
    try {
      is >> j;
    } catch (const json::exception&) {
      continue;
    }
    if (j.value("format", "") != "behaviorkit/report" || !j.contains("tags")) continue;
    ReportEntry e;
    e.head = j["tags"].value("head", "");
    e.pretrain = j["tags"].value("pretrain", "");
    const auto& m = j.at("metrics");
    if (m.contains("top1")) e.metrics["Top-1 Acc (%)"] = m["top1"].get<double>();
    if (m.contains("class_avg")) e.metrics["C-Avg Acc (%)"] = m["class_avg"].get<double>();
    if (m.contains("mAP")) e.metrics["mAP (%)"] = m["mAP"].get<double>();
    if (m.contains("group_mAP"))
      for (const auto& [group, v] : m["group_mAP"].items())
        e.metrics["mAP " + group + " (%)"] = v.get<double>();
    entries.push_back(std::move(e));
  }

  // (head, metric) rows by (no DAP, DAP) columns, deltas at the end.
  std::vector<std::string> heads;
  std::vector<std::string> metric_names;
  for (const auto& e : entries) {
    if (std::find(heads.begin(), heads.end(), e.head) == heads.end()) heads.push_back(e.head);
    for (const auto& [name, v] : e.metrics)
      if (std::find(metric_names.begin(), metric_names.end(), name) == metric_names.end())
        metric_names.push_back(name);
  }
  auto lookup = [&](const std::string& head, const std::string& pretrain,
                    const std::string& metric) -> double {
    double value = -1.0;
    for (const auto& e : entries) {
      if (e.head != head || e.pretrain != pretrain) continue;
      auto it = e.metrics.find(metric);
      if (it != e.metrics.end()) value = it->second;  // last report wins
    }
    return value;
  };

  std::ostringstream os;
  os << std::left << std::setw(18) << "Head" << std::setw(22) << "Metric" << std::right
     << std::setw(10) << "no DAP" << std::setw(10) << "DAP" << std::setw(10) << "delta"
     << "\n";
  os << std::string(70, '-') << "\n";
  for (const auto& head : heads) {
    for (const auto& metric : metric_names) {
      const double none = lookup(head, "none", metric);
      const double dap = lookup(head, "dap", metric);
      if (none < 0.0 && dap < 0.0) continue;
      std::string delta = "—";
      if (none >= 0.0 && dap >= 0.0) {
        std::ostringstream d;
        d << std::showpos << std::fixed << std::setprecision(2) << (100.0 * (dap - none));
        delta = d.str();
      }
      os << std::left << std::setw(18) << head << std::setw(22) << metric << std::right
         << std::setw(10) << format_pct(none) << std::setw(10) << format_pct(dap)
         << std::setw(10) << delta << "\n";
    }
  }
  if (entries.empty()) os << "(no tagged reports found under " << run_dir.string() << ")\n";
  return os.str();
}

}  // namespace bk

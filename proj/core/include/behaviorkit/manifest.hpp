#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "behaviorkit/metrics.hpp"
#include "behaviorkit/pipeline.hpp"

namespace bk {

// All manifests are JSON-lines files: a self-describing header object on the
// first line, one record per following line.

// Detector output for a whole dataset. The header records provenance of the
// producing run (prompt, threshold); this project only ever consumes these.
struct DetectionManifest {
  std::string detector_prompt;
  double threshold = 0.0;
  std::vector<DetectionRecord> records;
};

void write_detections(const std::filesystem::path& path, const DetectionManifest& m);
DetectionManifest read_detections(const std::filesystem::path& path);

// Fast per-source lookup with nearest-frame queries.
class DetectionLookup {
 public:
  explicit DetectionLookup(const DetectionManifest& m);
  // Record closest to frame_index for this source; nullptr when the source
  // has none.
  const DetectionRecord* nearest(const std::string& source_id, int frame_index) const;

 private:
  std::map<std::string, std::vector<const DetectionRecord*>> by_source_;
};

void write_snippet_index(const std::filesystem::path& path,
                         std::span<const SnippetIndexEntry> entries);
std::vector<SnippetIndexEntry> read_snippet_index(const std::filesystem::path& path);

enum class TaskKind { kSingle, kMulti };

// One labeled classification example. Snippet-wise samples carry per-frame
// boxes; frame-wise samples carry one box at time t.
struct LabeledSample {
  std::string sample_id;
  std::string source_id;
  TaskKind task = TaskKind::kSingle;
  int start_frame = 0;
  std::vector<BoundingBox> boxes;
  double t = 0.0;
  std::vector<int> label;  // one-hot (single) or multi-hot (multi)
  std::string split;       // train | val | test

  void validate(std::size_t num_classes) const;
};

struct LabelsManifest {
  TaskKind task = TaskKind::kSingle;
  std::vector<std::string> class_names;
  std::map<std::string, std::string> class_groups;  // multi-label protocol only
  std::vector<LabeledSample> samples;
};

void write_labels(const std::filesystem::path& path, const LabelsManifest& m);
LabelsManifest read_labels(const std::filesystem::path& path);

// Video directory index: metadata needed for chunking without decoding.
struct VideoInfo {
  std::string source_id;
  int frames = 0;
  double fps = 0.0;
  int width = 0;
  int height = 0;
  double duration() const { return frames / fps; }
};

void write_video_index(const std::filesystem::path& path, std::span<const VideoInfo> videos);
std::vector<VideoInfo> read_video_index(const std::filesystem::path& path);

// Prediction dump consumed by the eval command.
struct PredictionDump {
  TaskKind task = TaskKind::kSingle;
  std::vector<std::string> class_names;
  std::map<std::string, std::string> class_groups;
  std::vector<PredictionRecord> records;
};

void write_predictions(const std::filesystem::path& path, const PredictionDump& dump);
PredictionDump read_predictions(const std::filesystem::path& path);

}  // namespace bk

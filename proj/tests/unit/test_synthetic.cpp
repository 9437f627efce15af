#include <doctest.h>

#include <fstream>
#include <set>

#include "behaviorkit/manifest.hpp"
#include "behaviorkit/synthetic.hpp"
#include "behaviorkit/video.hpp"

using namespace bk;

namespace {

namespace fs = std::filesystem;

SyntheticConfig small_config() {
  SyntheticConfig cfg;
  cfg.n_videos = 12;
  cfg.train_videos = 6;
  cfg.val_videos = 3;
  cfg.test_videos = 3;
  cfg.duration = 2.0;
  cfg.fps = 8.0;
  cfg.width = 48;
  cfg.height = 48;
  cfg.label_snippet_frames = 8;
  return cfg;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("bk_synth_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

}  // namespace

TEST_CASE("generation is byte-identical under one seed") {
  const SyntheticConfig cfg = small_config();
  const fs::path a = scratch("det_a");
  const fs::path b = scratch("det_b");
  generate_synthetic(cfg, 77, a, false);
  generate_synthetic(cfg, 77, b, false);
  for (const char* name : {"videos.jsonl", "detections.jsonl", "labels_snippet.jsonl",
                           "labels_frame.jsonl", "dataset.json"})
    CHECK(slurp(a / name) == slurp(b / name));
  for (const auto& entry : fs::directory_iterator(a / "videos")) {
    const fs::path other = b / "videos" / entry.path().filename();
    REQUIRE(fs::exists(other));
    CHECK(slurp(entry.path()) == slurp(other));
  }
  // different seed differs somewhere
  const fs::path c = scratch("det_c");
  generate_synthetic(cfg, 78, c, false);
  CHECK(slurp(a / "detections.jsonl") != slurp(c / "detections.jsonl"));
  fs::remove_all(a);
  fs::remove_all(b);
  fs::remove_all(c);
}

TEST_CASE("refuses a non-empty output directory without force") {
  const SyntheticConfig cfg = small_config();
  const fs::path dir = scratch("force");
  fs::create_directories(dir);
  std::ofstream(dir / "existing.txt") << "x";
  CHECK_THROWS_AS(generate_synthetic(cfg, 1, dir, false), DataError);
  CHECK_NOTHROW(generate_synthetic(cfg, 1, dir, true));
  CHECK(!fs::exists(dir / "existing.txt"));
  fs::remove_all(dir);
}

TEST_CASE("label manifests cover every video with both classes and splits") {
  const SyntheticConfig cfg = small_config();
  const fs::path dir = scratch("labels");
  generate_synthetic(cfg, 5, dir, false);

  const LabelsManifest snippet = read_labels(dir / "labels_snippet.jsonl");
  CHECK(snippet.task == TaskKind::kSingle);
  CHECK(snippet.class_names.size() == 2);
  REQUIRE(snippet.samples.size() == 12);
  std::set<int> classes;
  std::map<std::string, int> split_count;
  for (const auto& s : snippet.samples) {
    classes.insert(static_cast<int>(std::find(s.label.begin(), s.label.end(), 1) -
                                    s.label.begin()));
    split_count[s.split] += 1;
    CHECK(s.boxes.size() == 8);
  }
  CHECK(classes.size() == 2);
  CHECK(split_count["train"] == 6);
  CHECK(split_count["val"] == 3);
  CHECK(split_count["test"] == 3);

  const LabelsManifest frame = read_labels(dir / "labels_frame.jsonl");
  CHECK(frame.task == TaskKind::kMulti);
  CHECK(frame.class_names.size() == 4);  // two axes + two patterns
  CHECK(frame.class_groups.at("moving_horizontal") == "Locomotion");
  REQUIRE(frame.samples.size() == 12);
  for (const auto& s : frame.samples) {
    int hot = 0;
    for (int v : s.label) hot += v;
    CHECK(hot == 2);  // one axis class + one pattern class
    CHECK(s.boxes.size() == 1);
  }
  fs::remove_all(dir);
}

TEST_CASE("oracle boxes always contain the bright moving shape") {
  SyntheticConfig cfg = small_config();
  cfg.noise_amplitude = 0.0;     // keep the luminance threshold clean
  cfg.texture_amplitude = 30.0;  // background stays below the shape brightness
  cfg.n_distractors = 0;         // the only bright pixels belong to the labeled shape
  cfg.random_polarity = false;
  const fs::path dir = scratch("oracle");
  generate_synthetic(cfg, 9, dir, false);

  const DetectionManifest detections = read_detections(dir / "detections.jsonl");
  const DetectionLookup lookup(detections);
  const auto videos = read_video_index(dir / "videos.jsonl");
  REQUIRE(!videos.empty());
  for (const auto& info : videos) {
    const VideoSnippet v = read_rawvid(dir / "videos" / (info.source_id + ".rawvid"));
    for (int t = 0; t < v.frames; ++t) {
      const DetectionRecord* rec = lookup.nearest(info.source_id, t);
      REQUIRE(rec != nullptr);
      REQUIRE(rec->frame_index == t);
      REQUIRE(rec->boxes.size() == 1);
      const BoundingBox box = rec->boxes[0].first;
      for (int y = 0; y < v.height; ++y)
        for (int x = 0; x < v.width; ++x) {
          const int lum = (v.at(t, y, x, 0) + v.at(t, y, x, 1) + v.at(t, y, x, 2)) / 3;
          if (lum > 150) {
            // bright pixel: must lie inside the oracle box
            CHECK(x + 0.5 >= box.x0 - 1e-9);
            CHECK(x + 0.5 <= box.x1 + 1e-9);
            CHECK(y + 0.5 >= box.y0 - 1e-9);
            CHECK(y + 0.5 <= box.y1 + 1e-9);
          }
        }
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("synthetic config validation") {
  SyntheticConfig cfg = small_config();
  cfg.patterns = {"drift", "drift"};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.patterns = {"drift", "sideways"};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.test_videos += 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.label_snippet_frames = 1000;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

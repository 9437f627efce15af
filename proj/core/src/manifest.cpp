#include "behaviorkit/manifest.hpp"

#include <algorithm>
#include <fstream>

#include "json_util.hpp"

namespace bk {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open for writing: " + path.string());
  return os;
}

// Reads the header line and validates the declared format kind.
json read_header(std::ifstream& is, const fs::path& path, const std::string& kind) {
  std::string line;
  if (!std::getline(is, line))
    throw DataError("empty manifest: " + path.string());
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw DataError("corrupt manifest header in " + path.string() + ": " + e.what());
  }
  if (header.value("format", "") != "behaviorkit/" + kind)
    throw DataError("expected behaviorkit/" + kind + " manifest: " + path.string());
  return header;
}

json parse_line(const std::string& line, const fs::path& path, std::size_t lineno) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw DataError("corrupt record at " + path.string() + ":" + std::to_string(lineno) + ": " +
                    e.what());
  }
}

json box_to_json(const BoundingBox& b) { return json::array({b.x0, b.y0, b.x1, b.y1}); }

BoundingBox box_from_json(const json& j, const fs::path& path, std::size_t lineno) {
  if (!j.is_array() || j.size() < 4)
    throw DataError("malformed box at " + path.string() + ":" + std::to_string(lineno));
  BoundingBox b{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
                j.at(3).get<double>()};
  if (!b.valid())
    throw DataError("invalid box (needs x0<x1, y0<y1, finite) at " + path.string() + ":" +
                    std::to_string(lineno));
  return b;
}

std::string task_name(TaskKind t) { return t == TaskKind::kSingle ? "single" : "multi"; }

TaskKind task_from_name(const std::string& s, const fs::path& path) {
  if (s == "single") return TaskKind::kSingle;
  if (s == "multi") return TaskKind::kMulti;
  throw DataError("unknown task kind '" + s + "' in " + path.string());
}

}  // namespace

void write_detections(const fs::path& path, const DetectionManifest& m) {
  auto os = open_out(path);
  os << json{{"format", "behaviorkit/detections"},
             {"version", 1},
             {"detector_prompt", m.detector_prompt},
             {"threshold", m.threshold}}
            .dump()
     << "\n";
  for (const auto& rec : m.records) {
    json boxes = json::array();
    // Invariant: descending confidence.
    auto sorted = rec.boxes;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    for (const auto& [box, conf] : sorted)
      boxes.push_back(json::array({box.x0, box.y0, box.x1, box.y1, conf}));
    os << json{{"source_id", rec.source_id}, {"frame_index", rec.frame_index}, {"boxes", boxes}}
              .dump()
       << "\n";
  }
}

DetectionManifest read_detections(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open detection manifest: " + path.string());
  DetectionManifest m;
  const json header = read_header(is, path, "detections");
  m.detector_prompt = header.value("detector_prompt", "");
  m.threshold = header.value("threshold", 0.0);
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json j = parse_line(line, path, lineno);
    DetectionRecord rec;
    rec.source_id = j.at("source_id").get<std::string>();
    rec.frame_index = j.at("frame_index").get<int>();
    double prev_conf = 1.0;
    for (const auto& bj : j.at("boxes")) {
      const BoundingBox box = box_from_json(bj, path, lineno);
      const double conf = bj.at(4).get<double>();
      if (conf > prev_conf + 1e-12)
        throw DataError("boxes not sorted by descending confidence at " + path.string() + ":" +
                        std::to_string(lineno));
      if (conf + 1e-12 < m.threshold)
        throw DataError("confidence below manifest threshold at " + path.string() + ":" +
                        std::to_string(lineno));
      prev_conf = conf;
      rec.boxes.emplace_back(box, conf);
    }
    m.records.push_back(std::move(rec));
  }
  return m;
}

DetectionLookup::DetectionLookup(const DetectionManifest& m) {
  for (const auto& rec : m.records) by_source_[rec.source_id].push_back(&rec);
  for (auto& [id, records] : by_source_)
    std::sort(records.begin(), records.end(),
              [](const DetectionRecord* a, const DetectionRecord* b) {
                return a->frame_index < b->frame_index;
              });
}

const DetectionRecord* DetectionLookup::nearest(const std::string& source_id,
                                                int frame_index) const {
  auto it = by_source_.find(source_id);
  if (it == by_source_.end() || it->second.empty()) return nullptr;
  const auto& records = it->second;
  auto lower = std::lower_bound(records.begin(), records.end(), frame_index,
                                [](const DetectionRecord* r, int f) { return r->frame_index < f; });
  if (lower == records.end()) return records.back();
  if (lower == records.begin()) return records.front();
  const DetectionRecord* after = *lower;
  const DetectionRecord* before = *(lower - 1);
  return (after->frame_index - frame_index) < (frame_index - before->frame_index) ? after
                                                                                  : before;
}

void write_snippet_index(const fs::path& path, std::span<const SnippetIndexEntry> entries) {
  auto os = open_out(path);
  os << json{{"format", "behaviorkit/snippet_index"}, {"version", 1}}.dump() << "\n";
  for (const auto& e : entries)
    os << json{{"source_id", e.source_id},
               {"snippet_start", e.snippet_start},
               {"snippet_len", e.snippet_len},
               {"has_detection", e.has_detection}}
              .dump()
       << "\n";
}

std::vector<SnippetIndexEntry> read_snippet_index(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open snippet index: " + path.string());
  read_header(is, path, "snippet_index");
  std::vector<SnippetIndexEntry> entries;
  std::map<std::string, double> last_start;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json j = parse_line(line, path, lineno);
    SnippetIndexEntry e;
    e.source_id = j.at("source_id").get<std::string>();
    e.snippet_start = j.at("snippet_start").get<double>();
    e.snippet_len = j.at("snippet_len").get<double>();
    e.has_detection = j.at("has_detection").get<bool>();
    if (!(e.snippet_len > 0))
      throw DataError("non-positive snippet_len at " + path.string() + ":" +
                      std::to_string(lineno));
    auto [it, inserted] = last_start.emplace(e.source_id, e.snippet_start);
    if (!inserted) {
      if (e.snippet_start < it->second)
        throw DataError("snippet starts decrease for source '" + e.source_id + "' at " +
                        path.string() + ":" + std::to_string(lineno));
      it->second = e.snippet_start;
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

void LabeledSample::validate(std::size_t num_classes) const {
  if (label.size() != num_classes)
    throw std::invalid_argument("LabeledSample " + sample_id + ": label width mismatch");
  int ones = 0;
  for (int v : label) {
    if (v != 0 && v != 1)
      throw std::invalid_argument("LabeledSample " + sample_id + ": labels must be 0/1");
    ones += v;
  }
  if (task == TaskKind::kSingle && ones != 1)
    throw std::invalid_argument("LabeledSample " + sample_id + ": single-label needs one class");
  if (boxes.empty())
    throw std::invalid_argument("LabeledSample " + sample_id + ": missing boxes");
}

void write_labels(const fs::path& path, const LabelsManifest& m) {
  auto os = open_out(path);
  json header{{"format", "behaviorkit/labels"},
              {"version", 1},
              {"task", task_name(m.task)},
              {"class_names", m.class_names}};
  if (!m.class_groups.empty()) header["class_groups"] = m.class_groups;
  os << header.dump() << "\n";
  for (const auto& s : m.samples) {
    json j{{"sample_id", s.sample_id}, {"source_id", s.source_id}, {"split", s.split},
           {"label", s.label}};
    if (m.task == TaskKind::kSingle) {
      j["start_frame"] = s.start_frame;
      json boxes = json::array();
      for (const auto& b : s.boxes) boxes.push_back(box_to_json(b));
      j["boxes"] = boxes;
    } else {
      j["t"] = s.t;
      j["box"] = box_to_json(s.boxes.at(0));
    }
    os << j.dump() << "\n";
  }
}

LabelsManifest read_labels(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open labels manifest: " + path.string());
  LabelsManifest m;
  const json header = read_header(is, path, "labels");
  m.task = task_from_name(header.at("task").get<std::string>(), path);
  m.class_names = header.at("class_names").get<std::vector<std::string>>();
  if (header.contains("class_groups"))
    m.class_groups = header["class_groups"].get<std::map<std::string, std::string>>();
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json j = parse_line(line, path, lineno);
    LabeledSample s;
    s.sample_id = j.at("sample_id").get<std::string>();
    s.source_id = j.at("source_id").get<std::string>();
    s.split = j.at("split").get<std::string>();
    s.label = j.at("label").get<std::vector<int>>();
    s.task = m.task;
    if (m.task == TaskKind::kSingle) {
      s.start_frame = j.at("start_frame").get<int>();
      for (const auto& bj : j.at("boxes")) s.boxes.push_back(box_from_json(bj, path, lineno));
    } else {
      s.t = j.at("t").get<double>();
      s.boxes.push_back(box_from_json(j.at("box"), path, lineno));
    }
    try {
      s.validate(m.class_names.size());
    } catch (const std::invalid_argument& e) {
      throw DataError(std::string(e.what()) + " at " + path.string() + ":" +
                      std::to_string(lineno));
    }
    m.samples.push_back(std::move(s));
  }
  return m;
}

void write_video_index(const fs::path& path, std::span<const VideoInfo> videos) {
  auto os = open_out(path);
  os << json{{"format", "behaviorkit/videos"}, {"version", 1}}.dump() << "\n";
  for (const auto& v : videos)
    os << json{{"source_id", v.source_id},
               {"frames", v.frames},
               {"fps", v.fps},
               {"width", v.width},
               {"height", v.height}}
              .dump()
       << "\n";
}

std::vector<VideoInfo> read_video_index(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open video index: " + path.string());
  read_header(is, path, "videos");
  std::vector<VideoInfo> videos;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json j = parse_line(line, path, lineno);
    VideoInfo v;
    v.source_id = j.at("source_id").get<std::string>();
    v.frames = j.at("frames").get<int>();
    v.fps = j.at("fps").get<double>();
    v.width = j.at("width").get<int>();
    v.height = j.at("height").get<int>();
    videos.push_back(std::move(v));
  }
  return videos;
}

void write_predictions(const fs::path& path, const PredictionDump& dump) {
  auto os = open_out(path);
  json header{{"format", "behaviorkit/predictions"},
              {"version", 1},
              {"task", task_name(dump.task)},
              {"class_names", dump.class_names}};
  if (!dump.class_groups.empty()) header["class_groups"] = dump.class_groups;
  os << header.dump() << "\n";
  for (const auto& r : dump.records)
    os << json{{"sample_id", r.sample_id}, {"scores", r.scores}, {"labels", r.ground_truth}}
              .dump()
       << "\n";
}

PredictionDump read_predictions(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open prediction dump: " + path.string());
  PredictionDump dump;
  const json header = read_header(is, path, "predictions");
  dump.task = task_from_name(header.at("task").get<std::string>(), path);
  dump.class_names = header.at("class_names").get<std::vector<std::string>>();
  if (header.contains("class_groups"))
    dump.class_groups = header["class_groups"].get<std::map<std::string, std::string>>();
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json j = parse_line(line, path, lineno);
    PredictionRecord r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.scores = j.at("scores").get<std::vector<double>>();
    r.ground_truth = j.at("labels").get<std::vector<int>>();
    if (r.scores.size() != dump.class_names.size() ||
        r.ground_truth.size() != dump.class_names.size())
      throw DataError("prediction width mismatch at " + path.string() + ":" +
                      std::to_string(lineno));
    dump.records.push_back(std::move(r));
  }
  return dump;
}

}  // namespace bk

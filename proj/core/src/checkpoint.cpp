#include "behaviorkit/checkpoint.hpp"

#include <fstream>

#include "json_util.hpp"

namespace bk {

namespace fs = std::filesystem;

namespace {

void write_blob(const fs::path& path, const nn::Mat& m) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write parameter blob: " + path.string());
  os.write(reinterpret_cast<const char*>(m.data()),
           static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!os) throw DataError("short write on parameter blob: " + path.string());
}

void read_blob(const fs::path& path, nn::Mat& m, int64_t rows, int64_t cols) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("missing parameter blob: " + path.string());
  m.resize(rows, cols);
  if (!is.read(reinterpret_cast<char*>(m.data()),
               static_cast<std::streamsize>(sizeof(double) * m.size())))
    throw DataError("truncated parameter blob: " + path.string());
  char extra;
  if (is.read(&extra, 1))
    throw DataError("parameter blob larger than declared shape: " + path.string());
}

struct NamedParams {
  std::vector<std::pair<std::string, const nn::Mat*>> entries;
};

NamedParams collect(const CheckpointData& d) {
  NamedParams np;
  auto add = [&](const std::string& n, const nn::Mat& m) { np.entries.emplace_back(n, &m); };
  visit_params(d.online, "online.", add);
  visit_params(d.target, "target.", add);
  visit_params(d.predictor, "predictor.", add);
  return np;
}

std::vector<std::pair<std::string, nn::Mat*>> collect_mutable(CheckpointData& d) {
  std::vector<std::pair<std::string, nn::Mat*>> out;
  auto add = [&](const std::string& n, nn::Mat& m) { out.emplace_back(n, &m); };
  visit_params(d.online, "online.", add);
  visit_params(d.target, "target.", add);
  visit_params(d.predictor, "predictor.", add);
  return out;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const CheckpointData& data) {
  const fs::path tmp = dir.parent_path() / (".tmp_" + dir.filename().string());
  fs::remove_all(tmp);
  fs::create_directories(tmp / "params");

  json meta;
  meta["format"] = "behaviorkit/checkpoint";
  meta["version"] = 1;
  meta["encoder_config"] = to_json(data.cfg);
  meta["schedule"] = to_json(data.schedule);
  meta["seed"] = data.seed;
  if (!data.experiment_config_json.empty())
    meta["experiment_config"] = json::parse(data.experiment_config_json);

  json manifest = json::array();
  const NamedParams np = collect(data);
  for (const auto& [name, mat] : np.entries) {
    write_blob(tmp / "params" / (name + ".bin"), *mat);
    manifest.push_back(json{{"name", name},
                            {"dtype", "f64"},
                            {"shape", {mat->rows(), mat->cols()}},
                            {"file", "params/" + name + ".bin"}});
  }
  meta["params"] = std::move(manifest);

  if (data.has_optimizer) {
    json opt;
    opt["step"] = data.optimizer_step;
    json slot_names = json::array();
    fs::create_directories(tmp / "optimizer");
    for (const auto& [name, slot] : data.optimizer_slots) {
      write_blob(tmp / "optimizer" / (name + ".m.bin"), slot.m);
      write_blob(tmp / "optimizer" / (name + ".v.bin"), slot.v);
      slot_names.push_back(
          json{{"name", name}, {"shape", {slot.m.rows(), slot.m.cols()}}});
    }
    opt["slots"] = std::move(slot_names);
    meta["optimizer"] = std::move(opt);
  }

  {
    std::ofstream os(tmp / "meta.json", std::ios::trunc);
    if (!os) throw DataError("cannot write checkpoint metadata: " + (tmp / "meta.json").string());
    os << meta.dump(2) << "\n";
  }

  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

CheckpointData load_checkpoint(const fs::path& dir) {
  const fs::path meta_path = dir / "meta.json";
  std::ifstream is(meta_path);
  if (!is)
    throw DataError("checkpoint metadata missing or unreadable: " + meta_path.string());
  json meta;
  try {
    is >> meta;
  } catch (const json::exception& e) {
    throw DataError("corrupt checkpoint metadata " + meta_path.string() + ": " + e.what());
  }
  if (meta.value("format", "") != "behaviorkit/checkpoint")
    throw DataError("not a behaviorkit checkpoint: " + meta_path.string());

  CheckpointData d;
  try {
    d.cfg = encoder_config_from_json(meta.at("encoder_config"));
    d.schedule = schedule_from_json(meta.at("schedule"));
    d.seed = meta.at("seed").get<uint64_t>();
    if (meta.contains("experiment_config"))
      d.experiment_config_json = meta["experiment_config"].dump();
  } catch (const json::exception& e) {
    throw DataError("corrupt checkpoint metadata " + meta_path.string() + ": " + e.what());
  }
  d.cfg.validate();
  d.online = make_encoder_zeros(d.cfg);
  d.target = make_encoder_zeros(d.cfg);
  d.predictor = make_predictor_zeros(d.cfg);

  auto entries = collect_mutable(d);
  std::map<std::string, nn::Mat*> by_name(entries.begin(), entries.end());
  std::size_t seen = 0;
  for (const auto& item : meta.at("params")) {
    const auto name = item.at("name").get<std::string>();
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw DataError("checkpoint " + dir.string() + " has unknown parameter: " + name);
    const auto rows = item.at("shape").at(0).get<int64_t>();
    const auto cols = item.at("shape").at(1).get<int64_t>();
    if (rows != it->second->rows() || cols != it->second->cols())
      throw DataError("checkpoint " + dir.string() + " shape mismatch for " + name);
    read_blob(dir / item.at("file").get<std::string>(), *it->second, rows, cols);
    ++seen;
  }
  if (seen != by_name.size())
    throw DataError("checkpoint " + dir.string() + " is missing parameters (" +
                    std::to_string(seen) + " of " + std::to_string(by_name.size()) + ")");

  if (meta.contains("optimizer")) {
    d.has_optimizer = true;
    d.optimizer_step = meta["optimizer"].at("step").get<int64_t>();
    for (const auto& item : meta["optimizer"].at("slots")) {
      const auto name = item.at("name").get<std::string>();
      const auto rows = item.at("shape").at(0).get<int64_t>();
      const auto cols = item.at("shape").at(1).get<int64_t>();
      AdamW::Slot slot;
      read_blob(dir / "optimizer" / (name + ".m.bin"), slot.m, rows, cols);
      read_blob(dir / "optimizer" / (name + ".v.bin"), slot.v, rows, cols);
      d.optimizer_slots.emplace(name, std::move(slot));
    }
  }
  return d;
}

std::optional<fs::path> latest_checkpoint(const fs::path& run_dir) {
  const fs::path root = run_dir / "checkpoints";
  if (!fs::exists(root)) return std::nullopt;
  std::optional<fs::path> best;
  int64_t best_step = -1;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    if (name.rfind("step_", 0) != 0) continue;
    const int64_t step = std::strtoll(name.c_str() + 5, nullptr, 10);
    if (step > best_step) {
      best_step = step;
      best = entry.path();
    }
  }
  return best;
}

}  // namespace bk

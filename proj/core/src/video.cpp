#include "behaviorkit/video.hpp"

#include <cstring>
#include <fstream>
#include <memory>
#include <mutex>
#include <unordered_map>

namespace bk {

void VideoSnippet::validate() const {
  if (frames < 1) throw std::invalid_argument("VideoSnippet: needs at least one frame");
  if (height < 16 || width < 16)
    throw std::invalid_argument("VideoSnippet: frame size must be at least 16x16");
  if (!(fps > 0.0)) throw std::invalid_argument("VideoSnippet: fps must be positive");
  if (data.size() != static_cast<std::size_t>(frames) * frame_bytes())
    throw std::invalid_argument("VideoSnippet: data size does not match dimensions");
}

VideoSnippet make_snippet(int frames, int height, int width, double fps, std::string source_id,
                          double start_time) {
  VideoSnippet v;
  v.frames = frames;
  v.height = height;
  v.width = width;
  v.fps = fps;
  v.source_id = std::move(source_id);
  v.start_time = start_time;
  v.data.assign(static_cast<std::size_t>(frames) * height * width * 3, 0);
  return v;
}

VideoTensor normalize(const VideoSnippet& v, const PixelNorm& norm) {
  VideoTensor out;
  out.frames = v.frames;
  out.height = v.height;
  out.width = v.width;
  out.data.resize(v.data.size());
  double scale[3], shift[3];
  for (int c = 0; c < 3; ++c) {
    scale[c] = 1.0 / (255.0 * norm.stddev[c]);
    shift[c] = norm.mean[c] / norm.stddev[c];
  }
  for (std::size_t i = 0; i < v.data.size(); i += 3) {
    for (int c = 0; c < 3; ++c)
      out.data[i + c] = static_cast<double>(v.data[i + c]) * scale[c] - shift[c];
  }
  return out;
}

namespace {
constexpr char kMagic[8] = {'B', 'K', 'R', 'A', 'W', 'V', 'I', 'D'};
constexpr uint32_t kVersion = 1;

template <class T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <class T>
T read_pod(std::istream& is, const std::filesystem::path& path, const char* what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw DataError("truncated rawvid (" + std::string(what) + "): " + path.string());
  return v;
}
}  // namespace

void write_rawvid(const std::filesystem::path& path, const VideoSnippet& v) {
  v.validate();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open for writing: " + path.string());
  os.write(kMagic, sizeof(kMagic));
  write_pod(os, kVersion);
  write_pod(os, static_cast<uint32_t>(v.frames));
  write_pod(os, static_cast<uint32_t>(v.height));
  write_pod(os, static_cast<uint32_t>(v.width));
  write_pod(os, v.fps);
  os.write(reinterpret_cast<const char*>(v.data.data()),
           static_cast<std::streamsize>(v.data.size()));
  if (!os) throw DataError("write failed: " + path.string());
}

VideoSnippet read_rawvid(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open video file: " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError("not a rawvid file: " + path.string());
  const auto version = read_pod<uint32_t>(is, path, "version");
  if (version != kVersion)
    throw DataError("unsupported rawvid version in " + path.string());
  VideoSnippet v;
  v.frames = static_cast<int>(read_pod<uint32_t>(is, path, "frames"));
  v.height = static_cast<int>(read_pod<uint32_t>(is, path, "height"));
  v.width = static_cast<int>(read_pod<uint32_t>(is, path, "width"));
  v.fps = read_pod<double>(is, path, "fps");
  v.source_id = path.stem().string();
  v.data.resize(static_cast<std::size_t>(v.frames) * v.height * v.width * 3);
  if (!is.read(reinterpret_cast<char*>(v.data.data()),
               static_cast<std::streamsize>(v.data.size())))
    throw DataError("truncated rawvid payload: " + path.string());
  v.validate();
  return v;
}

const VideoSnippet& VideoStore::get(const std::string& source_id) const {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = cache_.find(source_id);
    if (it != cache_.end()) return *it->second;
  }
  auto loaded = std::make_unique<VideoSnippet>(read_rawvid(dir_ / (source_id + ".rawvid")));
  std::lock_guard<std::mutex> lock(mutex_);
  auto [it, inserted] = cache_.emplace(source_id, std::move(loaded));
  return *it->second;
}

}  // namespace bk

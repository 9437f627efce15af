#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "behaviorkit/common.hpp"

namespace bk {

// Decoded clip. Frames are a dense T x H x W x 3 uint8 array, row-major with
// channel fastest.
struct VideoSnippet {
  std::vector<uint8_t> data;
  int frames = 0;
  int height = 0;
  int width = 0;
  double fps = 0.0;
  std::string source_id;
  double start_time = 0.0;

  uint8_t& at(int t, int y, int x, int c) {
    return data[((static_cast<std::size_t>(t) * height + y) * width + x) * 3 + c];
  }
  uint8_t at(int t, int y, int x, int c) const {
    return data[((static_cast<std::size_t>(t) * height + y) * width + x) * 3 + c];
  }
  double duration() const { return frames / fps; }
  std::size_t frame_bytes() const { return static_cast<std::size_t>(height) * width * 3; }

  void validate() const;
};

VideoSnippet make_snippet(int frames, int height, int width, double fps,
                          std::string source_id = "", double start_time = 0.0);

// Normalized model input, T x H x W x 3 doubles.
struct VideoTensor {
  std::vector<double> data;
  int frames = 0;
  int height = 0;
  int width = 0;

  double& at(int t, int y, int x, int c) {
    return data[((static_cast<std::size_t>(t) * height + y) * width + x) * 3 + c];
  }
  double at(int t, int y, int x, int c) const {
    return data[((static_cast<std::size_t>(t) * height + y) * width + x) * 3 + c];
  }
};

// uint8 -> [0,1] -> (v - mean_c) / std_c. The constants live in the
// experiment config so externally trained checkpoints can supply their own.
struct PixelNorm {
  double mean[3] = {0.45, 0.45, 0.45};
  double stddev[3] = {0.225, 0.225, 0.225};
};

VideoTensor normalize(const VideoSnippet& v, const PixelNorm& norm);

// ---------------------------------------------------------------------------
// Raw clip container for synthetic data: 8-byte magic, version, T/H/W,
// fps, then T*H*W*3 bytes.
// ---------------------------------------------------------------------------

void write_rawvid(const std::filesystem::path& path, const VideoSnippet& v);
VideoSnippet read_rawvid(const std::filesystem::path& path);

// Lazy, thread-safe cache over a directory of <source_id>.rawvid files.
class VideoStore {
 public:
  explicit VideoStore(std::filesystem::path dir) : dir_(std::move(dir)) {}
  // Returned reference stays valid for the store's lifetime.
  const VideoSnippet& get(const std::string& source_id) const;

 private:
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::string, std::unique_ptr<VideoSnippet>> cache_;
};

}  // namespace bk
